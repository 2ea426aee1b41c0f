"""Pairwise-correlation inequalities for three and four ±1 variables.

Two families are implemented for the three-variable case, selected by the
``form`` argument:

* ``"difference"`` — |s1 - s2| <= 1 - s3, the form used throughout the
  source material for this project's triangle systems;
* ``"sum"``        — |s1 + s2| <= 1 + s3, the mirror obtained by flipping
  the sign of one variable.

The three cyclic difference variants alone do not characterize
realizability: they miss the all-negative facet (covariances (-1, -1, -1)
satisfy every difference variant yet extend to no joint distribution).
Adding the sum variants completes the facet description of the realizable
set, which the test suite checks against the LP decision on a full grid.

All comparisons are exact rational arithmetic; no floats in any verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .dist import Rational
from .errors import DomainError

#: Cyclic role permutations for a triple (s_ab, s_ac, s_bc): each entry
#: gives (lhs index 1, lhs index 2, bound index).
_CYCLIC = ((0, 1, 2), (0, 2, 1), (1, 2, 0))
_PAIR_NAMES = ("ab", "ac", "bc")

BELL_FORMS = ("difference", "sum")


def _check_covariance(value) -> Fraction:
    sigma = Fraction(value) if isinstance(value, int) else value
    if not isinstance(sigma, Fraction):
        raise DomainError(f"covariance must be exact, got {value!r}")
    if abs(sigma) > 1:
        raise DomainError(f"covariance {sigma} outside [-1, 1]")
    return sigma


@dataclass(frozen=True)
class BellTriple:
    sigma_ab: Rational
    sigma_ac: Rational
    sigma_bc: Rational

    def __post_init__(self):
        for name in ("sigma_ab", "sigma_ac", "sigma_bc"):
            object.__setattr__(self, name, _check_covariance(getattr(self, name)))

    def as_tuple(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.sigma_ab, self.sigma_ac, self.sigma_bc)


@dataclass(frozen=True)
class ChshQuad:
    sigma_ab: Rational
    sigma_ac: Rational
    sigma_db: Rational
    sigma_dc: Rational

    def __post_init__(self):
        for name in ("sigma_ab", "sigma_ac", "sigma_db", "sigma_dc"):
            object.__setattr__(self, name, _check_covariance(getattr(self, name)))

    def as_tuple(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.sigma_ab, self.sigma_ac, self.sigma_db, self.sigma_dc)


@dataclass(frozen=True)
class InequalityVerdict:
    """One evaluated inequality: satisfied iff |lhs| <= bound, exactly."""

    variant: str
    lhs: Fraction
    bound: Fraction
    satisfied: bool


def bell_check(triple: BellTriple, variant: int = 0, form: str = "difference") -> InequalityVerdict:
    """Evaluate one cyclic variant of the three-variable inequality.

    ``variant`` selects which covariance provides the bound side: 0 bounds
    with s_bc (the primary form), 1 with s_ac, 2 with s_ab.
    """
    if variant not in (0, 1, 2):
        raise DomainError(f"variant must be 0, 1 or 2, got {variant}")
    if form not in BELL_FORMS:
        raise DomainError(f"unknown form {form!r}")
    sigmas = triple.as_tuple()
    i, j, k = _CYCLIC[variant]
    if form == "difference":
        lhs = sigmas[i] - sigmas[j]
        bound = 1 - sigmas[k]
    else:
        lhs = sigmas[i] + sigmas[j]
        bound = 1 + sigmas[k]
    name = f"{form}:{_PAIR_NAMES[i]}{'-' if form == 'difference' else '+'}{_PAIR_NAMES[j]}|{_PAIR_NAMES[k]}"
    return InequalityVerdict(name, lhs, bound, abs(lhs) <= bound)


def bell_check_all(
    triple: BellTriple, forms: Sequence[str] = BELL_FORMS
) -> list[InequalityVerdict]:
    """All cyclic variants of the requested forms; default is the complete family."""
    return [
        bell_check(triple, variant, form) for form in forms for variant in (0, 1, 2)
    ]


def chsh_value(quad: ChshQuad) -> Fraction:
    """The signed combination s_ab + s_ac + s_db - s_dc."""
    return quad.sigma_ab + quad.sigma_ac + quad.sigma_db - quad.sigma_dc


_CHSH_SIGNS = (
    ("minus-dc", (1, 1, 1, -1)),
    ("minus-db", (1, 1, -1, 1)),
    ("minus-ac", (1, -1, 1, 1)),
    ("minus-ab", (-1, 1, 1, 1)),
)


def chsh_check_all(quad: ChshQuad) -> list[InequalityVerdict]:
    """Every placement of the single minus sign; |lhs| covers both global signs."""
    sigmas = quad.as_tuple()
    verdicts = []
    for name, signs in _CHSH_SIGNS:
        lhs = sum((e * s for e, s in zip(signs, sigmas)), Fraction(0))
        verdicts.append(InequalityVerdict(name, lhs, Fraction(2), abs(lhs) <= 2))
    return verdicts


def all_satisfied(verdicts: Sequence[InequalityVerdict]) -> bool:
    return all(v.satisfied for v in verdicts)
