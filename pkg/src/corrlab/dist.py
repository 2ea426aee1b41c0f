"""Exact finite joint distributions over ±1-valued variables.

Everything here is computed over :class:`fractions.Fraction`; there is no
floating point anywhere in a probability.  Irrational covariances such as
1/sqrt(2) enter the system only through :func:`rationalize`, which replaces
them by a nearby rational at a caller-chosen precision.

Variables are identified positionally (0-based indices).  A joint table is a
sparse map from outcome tuples like ``(+1, -1, +1)`` to probability mass;
absent outcomes carry mass zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import DomainError

Rational = Fraction
SignVector = tuple[int, ...]

#: Default bound on the error introduced when rationalizing an irrational.
DEFAULT_PRECISION = Fraction(1, 10**9)

ZERO = Fraction(0)
ONE = Fraction(1)


def _as_rational(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise DomainError(f"expected an exact rational, got {value!r}")


def rationalize(value: float, max_error: Fraction = DEFAULT_PRECISION) -> Fraction:
    """Best rational approximation of ``value`` with error below ``max_error``.

    Returns the input unchanged when it is already a Fraction or int.
    """
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if not math.isfinite(value):
        raise DomainError(f"cannot rationalize non-finite value {value!r}")
    exact = Fraction(value)
    approx = exact.limit_denominator(max(1, int(1 / max_error)))
    if abs(approx - exact) >= max_error:  # pragma: no cover - limit_denominator guarantee
        approx = exact
    return approx


def rationalization_error(value: float, max_error: Fraction = DEFAULT_PRECISION) -> Fraction:
    """Absolute error committed by :func:`rationalize` for ``value``."""
    if isinstance(value, (Fraction, int)):
        return ZERO
    return abs(rationalize(value, max_error) - Fraction(value))


def sign_vectors(arity: int) -> Iterable[SignVector]:
    """All outcome tuples of the given arity, in a fixed canonical order."""
    return itertools.product((1, -1), repeat=arity)


def _check_sign_vector(values: Sequence[int], arity: int) -> SignVector:
    vec = tuple(values)
    if len(vec) != arity:
        raise DomainError(f"outcome {vec} has length {len(vec)}, expected {arity}")
    if any(v not in (1, -1) for v in vec):
        raise DomainError(f"outcome {vec} has entries outside {{-1, +1}}")
    return vec


@dataclass(frozen=True)
class JointTable:
    """A probability distribution over {±1}^arity, stored sparsely and exactly.

    Zero-mass atoms are dropped on construction so that equality of tables is
    equality of distributions.
    """

    arity: int
    atoms: Mapping[SignVector, Fraction]

    def __post_init__(self):
        if self.arity < 1:
            raise DomainError("arity must be positive")
        cleaned: dict[SignVector, Fraction] = {}
        total = ZERO
        for key, mass in self.atoms.items():
            vec = _check_sign_vector(key, self.arity)
            mass = _as_rational(mass)
            if mass < 0:
                raise DomainError(f"negative mass {mass} on {vec}")
            if mass > 0:
                cleaned[vec] = cleaned.get(vec, ZERO) + mass
            total += mass
        if total != 1:
            raise DomainError(f"masses sum to {total}, expected exactly 1")
        object.__setattr__(self, "atoms", cleaned)

    def mass(self, outcome: Sequence[int]) -> Fraction:
        return self.atoms.get(tuple(outcome), ZERO)

    def __eq__(self, other):
        if not isinstance(other, JointTable):
            return NotImplemented
        return self.arity == other.arity and dict(self.atoms) == dict(other.atoms)

    def __hash__(self):
        return hash((self.arity, frozenset(self.atoms.items())))


@dataclass(frozen=True)
class PairMarginal:
    """The joint table of one pair of variables, keyed by (±1, ±1)."""

    var_i: int
    var_j: int
    table: Mapping[tuple[int, int], Fraction] = field(default_factory=dict)

    def __post_init__(self):
        if self.var_i == self.var_j:
            raise DomainError("pair marginal needs two distinct variables")
        cleaned = {}
        total = ZERO
        for key, mass in self.table.items():
            vec = _check_sign_vector(key, 2)
            mass = _as_rational(mass)
            if mass < 0:
                raise DomainError(f"negative mass {mass} on {vec}")
            cleaned[vec] = mass
            total += mass
        if total != 1:
            raise DomainError(f"pair masses sum to {total}, expected exactly 1")
        object.__setattr__(self, "table", cleaned)

    def as_joint(self) -> JointTable:
        return JointTable(2, dict(self.table))


def pair_table_from_covariance(
    sigma, var_i: int = 0, var_j: int = 1
) -> PairMarginal:
    """Pair table with uniform ±1 marginals and covariance ``sigma``.

    Diagonal cells get (1+sigma)/4, off-diagonal cells (1-sigma)/4.
    """
    sigma = _as_rational(sigma)
    if abs(sigma) > 1:
        raise DomainError(f"covariance {sigma} outside [-1, 1]")
    same = (1 + sigma) / 4
    diff = (1 - sigma) / 4
    return PairMarginal(
        var_i,
        var_j,
        {(1, 1): same, (1, -1): diff, (-1, 1): diff, (-1, -1): same},
    )


def covariance_of(joint: JointTable, i: int, j: int) -> Fraction:
    """Exact E[X_i X_j] under ``joint``."""
    for index in (i, j):
        if not 0 <= index < joint.arity:
            raise DomainError(f"variable index {index} out of range for arity {joint.arity}")
    if i == j:
        raise DomainError("covariance needs two distinct variables")
    return sum((mass * (vec[i] * vec[j]) for vec, mass in joint.atoms.items()), ZERO)


def marginalize(joint: JointTable, subset: Sequence[int]) -> JointTable:
    """Marginal distribution of ``joint`` on the ordered variable ``subset``."""
    indices = tuple(subset)
    if not indices:
        raise DomainError("cannot marginalize to an empty subset")
    if len(set(indices)) != len(indices):
        raise DomainError(f"subset {indices} contains repeated variables")
    for index in indices:
        if not 0 <= index < joint.arity:
            raise DomainError(f"variable index {index} out of range for arity {joint.arity}")
    atoms: dict[SignVector, Fraction] = {}
    for vec, mass in joint.atoms.items():
        key = tuple(vec[i] for i in indices)
        atoms[key] = atoms.get(key, ZERO) + mass
    return JointTable(len(indices), atoms)


def qm_covariance(angle_radians: float, max_error: Fraction = DEFAULT_PRECISION) -> Fraction:
    """Covariance predicted for two analyzers separated by the given angle.

    The model value is -cos(angle); the result is rationalized so the exact
    engine can consume it.
    """
    if not math.isfinite(angle_radians):
        raise DomainError("angle must be finite")
    sigma = rationalize(-math.cos(angle_radians), max_error)
    # Rounding of the cosine may overshoot the closed interval by < max_error.
    if sigma > 1:
        sigma = ONE
    elif sigma < -1:
        sigma = -ONE
    return sigma
