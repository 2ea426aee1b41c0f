"""Exact linear feasibility with an L1 violation objective.

Solves, over exact rationals,

    minimize   sum_r (u_r + v_r)
    subject to A x + u - v = b         (one row per marginal cell)
               sum(x) = 1              (exact row, no slack)
               x, u, v >= 0

The optimum is zero exactly when a probability distribution x reproducing
every cell value exists; otherwise it is the least total absolute cell
violation any distribution can achieve, and the optimal dual vector is a
Farkas-style separating functional.

Implementation notes.  The solver is a dense two-phase simplex with Bland's
anti-cycling rule, but the tableau is kept in *integers* using fraction-free
(Edmonds-style) pivoting: the stored tableau equals d times the true tableau,
where d is the determinant of the current basis, and every pivot update

    T'[i][j] = (T[i][j] * T[r][c] - T[i][c] * T[r][j]) // d

divides exactly.  The right-hand side is pre-scaled by the common denominator
of b so the whole tableau is integral from the start.  This avoids per-entry
gcd work of Fraction arithmetic and keeps thousand-point covariance sweeps
interactive.  Bland's rule makes the pivot sequence, and hence every result,
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

_MAX_PIVOTS = 100_000


@dataclass(frozen=True)
class L1Outcome:
    """Result of :func:`min_l1_deviation`.

    ``optimum`` is the minimal total violation, ``solution`` the achieving
    distribution over structural columns, and ``duals`` one multiplier per
    input row (same order, exact row included).
    """

    optimum: Fraction
    solution: list[Fraction]
    duals: list[Fraction]


def min_l1_deviation(
    rows: Sequence[Sequence[int]],
    rhs: Sequence[Fraction],
    exact_rows: frozenset[int] | set[int] = frozenset(),
) -> L1Outcome:
    """Minimize the L1 violation of ``rows @ x = rhs`` over x >= 0.

    Rows listed in ``exact_rows`` (the normalization row) get no deviation
    variables; they receive phase-1 artificials instead and must be satisfied
    exactly, which for these systems is always possible.
    """
    m = len(rows)
    if m == 0 or len(rhs) != m:
        raise ValueError("need a non-empty system with matching rhs")
    n = len(rows[0])
    if any(len(row) != n for row in rows):
        raise ValueError("ragged coefficient rows")
    if any(b < 0 for b in rhs):
        raise ValueError("rhs entries must be nonnegative")

    scale = lcm(*(Fraction(b).denominator for b in rhs))
    rhs_int = [int(Fraction(b) * scale) for b in rhs]

    # Column layout: structural | u_r, v_r per soft row | artificial per exact row.
    soft = [r for r in range(m) if r not in exact_rows]
    col_u = {}
    col_v = {}
    col_art = {}
    ncols = n
    for r in soft:
        col_u[r] = ncols
        col_v[r] = ncols + 1
        ncols += 2
    for r in sorted(exact_rows):
        col_art[r] = ncols
        ncols += 1

    tableau = []
    basis = []
    for r in range(m):
        row = [int(a) for a in rows[r]] + [0] * (ncols - n) + [rhs_int[r]]
        if r in col_u:
            row[col_u[r]] = 1
            row[col_v[r]] = -1
            basis.append(col_u[r])
        else:
            row[col_art[r]] = 1
            basis.append(col_art[r])
        tableau.append(row)

    # Reduced-cost rows (times d), updated by the same pivot formula.
    # Phase 1 cost: artificials; phase 2 cost: all u and v columns.
    cost1 = [0] * (ncols + 1)
    for c in col_art.values():
        cost1[c] = 1
    cost2 = [0] * (ncols + 1)
    for r in soft:
        cost2[col_u[r]] = 1
        cost2[col_v[r]] = 1
    obj1 = list(cost1)
    obj2 = list(cost2)
    for r in range(m):
        basic_cost1 = cost1[basis[r]]
        basic_cost2 = cost2[basis[r]]
        if basic_cost1:
            obj1 = [a - basic_cost1 * t for a, t in zip(obj1, tableau[r])]
        if basic_cost2:
            obj2 = [a - basic_cost2 * t for a, t in zip(obj2, tableau[r])]

    d = 1
    artificial_cols = set(col_art.values())

    def pivot(prow_idx: int, pcol: int) -> int:
        nonlocal d
        prow = tableau[prow_idx]
        p = prow[pcol]
        for rows_list in (tableau, [obj1, obj2]):
            for i, row in enumerate(rows_list):
                if rows_list is tableau and i == prow_idx:
                    continue
                f = row[pcol]
                row[:] = [(a * p - f * b) // d for a, b in zip(row, prow)]
        basis[prow_idx] = pcol
        return p

    def run_phase(obj: list[int], barred: set[int]) -> None:
        nonlocal d
        for _ in range(_MAX_PIVOTS):
            entering = -1
            for j in range(ncols):
                if obj[j] < 0 and j not in barred:
                    entering = j
                    break
            if entering < 0:
                return
            leaving = -1
            best_num = best_den = 0
            for i in range(m):
                t = tableau[i][entering]
                if t <= 0:
                    continue
                num, den = tableau[i][-1], t
                if leaving < 0 or num * best_den < best_num * den or (
                    num * best_den == best_num * den and basis[i] < basis[leaving]
                ):
                    leaving, best_num, best_den = i, num, den
            if leaving < 0:
                raise RuntimeError("objective unbounded; malformed system")
            d = pivot(leaving, entering)
        raise RuntimeError("pivot limit exceeded")  # pragma: no cover

    run_phase(obj1, barred=set())
    if obj1[-1] != 0:
        # Phase-1 optimum is -obj1[-1] / (d * scale); nonzero means even the
        # exact rows cannot be met, which the normalization row never triggers.
        raise RuntimeError("exact rows are infeasible")
    run_phase(obj2, barred=artificial_cols)

    optimum = Fraction(-obj2[-1], d * scale)
    solution = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            solution[basis[i]] = Fraction(tableau[i][-1], d * scale)

    duals = []
    for r in range(m):
        if r in col_u:
            duals.append(1 - Fraction(obj2[col_u[r]], d))
        else:
            duals.append(-Fraction(obj2[col_art[r]], d))
    return L1Outcome(optimum=optimum, solution=solution, duals=duals)
