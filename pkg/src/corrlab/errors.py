"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so new failure modes should
subclass one of the three below rather than raising bare ValueErrors.
"""


class DomainError(ValueError):
    """An input is outside the mathematical domain of an operation."""


class CapacityError(RuntimeError):
    """A request exceeds a configured size cap (e.g. too many variables)."""


class InsufficientDataError(DomainError):
    """A statistic was requested from data that cannot support it."""


class ProtocolError(RuntimeError):
    """A wire message or session transcript violates the protocol contract."""
