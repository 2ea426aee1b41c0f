"""Monte Carlo sampling of the four-row outcome table with delayed choice.

The experiment table has four setting rows (ab, ac, db, dc); each trial
first picks a row uniformly (the delayed choice) and then draws a pair of
±1 outcomes from that row's distribution.  The headline statistic gamma is
the mean outcome product of the first three rows minus that of the fourth.

A deterministic hidden-parameter source model is also provided: the source
draws a parameter value, the two sides draw their settings independently,
and the responses are fixed ±1 functions of (setting, parameter).  Grouping
such trials by parameter value into complete setting quadruples forces each
quadruple's gamma to ±2, which is the statistical route to the bound
|gamma| <= 2 for this model class.

All sampling is deterministic given (seed, shards): trials are generated in
fixed-size shards with per-shard derived seeds, so a sharded parallel run
reproduces the serial one bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

from .dist import pair_table_from_covariance, qm_covariance
from .errors import DomainError, InsufficientDataError
from .rng import SplitMix64, derive_seed

ROW_LABELS = ("ab", "ac", "db", "dc")

_OUTCOMES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic 4x4 table: one outcome distribution per setting row."""

    rows: Mapping[str, Mapping[tuple[int, int], Fraction]]

    def __post_init__(self):
        cleaned = {}
        for label in ROW_LABELS:
            if label not in self.rows:
                raise DomainError(f"missing row {label!r}")
            row = {}
            total = Fraction(0)
            for outcome in _OUTCOMES:
                mass = Fraction(self.rows[label].get(outcome, 0))
                if mass < 0:
                    raise DomainError(f"negative probability in row {label}")
                row[outcome] = mass
                total += mass
            if total != 1:
                raise DomainError(f"row {label} sums to {total}, expected 1")
            cleaned[label] = row
        object.__setattr__(self, "rows", cleaned)

    def row_covariance(self, label: str) -> Fraction:
        return sum(
            (mass * (a * b) for (a, b), mass in self.rows[label].items()), Fraction(0)
        )


class RunRecord(NamedTuple):
    row: str
    outcome: tuple[int, int]
    trial: int

    @property
    def product(self) -> int:
        return self.outcome[0] * self.outcome[1]


@dataclass(frozen=True)
class GammaEstimate:
    """Per-row mean products combined as ab + ac + db - dc, with its standard error."""

    row_means: Mapping[str, float]
    row_counts: Mapping[str, int]
    gamma: float
    standard_error: float


def qm_matrix(angles_radians: Sequence[float]) -> StochasticMatrix:
    """Sampling table whose rows carry covariance -cos(angle) per setting pair."""
    if len(angles_radians) != 4:
        raise DomainError("need exactly four angles for (ab, ac, db, dc)")
    rows = {}
    for label, angle in zip(ROW_LABELS, angles_radians):
        sigma = qm_covariance(angle)
        rows[label] = pair_table_from_covariance(sigma).table
    return StochasticMatrix(rows)


def gamma_max_matrix() -> StochasticMatrix:
    """The table driving gamma to its extreme value 4.

    Rows ab, ac, db perfectly correlate the pair; row dc perfectly
    anti-correlates it.
    """
    half = Fraction(1, 2)
    agree = {(1, 1): half, (-1, -1): half}
    disagree = {(1, -1): half, (-1, 1): half}
    return StochasticMatrix({"ab": agree, "ac": agree, "db": agree, "dc": disagree})


def matrix_from_covariances(sigmas: Sequence[Fraction]) -> StochasticMatrix:
    if len(sigmas) != 4:
        raise DomainError("need exactly four covariances for (ab, ac, db, dc)")
    return StochasticMatrix(
        {
            label: pair_table_from_covariance(sigma).table
            for label, sigma in zip(ROW_LABELS, sigmas)
        }
    )


def _thresholds(row: Mapping[tuple[int, int], Fraction]) -> list[tuple[int, tuple[int, int]]]:
    # Cumulative probabilities on the u64 lattice; exact up to 2^-64 rounding,
    # which affects the sample path, not determinism.
    out = []
    cum = Fraction(0)
    for outcome in _OUTCOMES:
        cum += row[outcome]
        out.append((min(int(cum * (1 << 64)), 1 << 64), outcome))
    out[-1] = (1 << 64, out[-1][1])
    return out


DEFAULT_SHARD_SIZE = 1 << 16


def _shard_bounds(trials: int, shards: int) -> list[tuple[int, int]]:
    base, extra = divmod(trials, shards)
    bounds = []
    start = 0
    for s in range(shards):
        size = base + (1 if s < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def sample_delayed_choice(
    matrix: StochasticMatrix, trials: int, seed: int, shards: int = 1
) -> list[RunRecord]:
    """Simulate ``trials`` delayed-choice runs; deterministic in (seed, shards)."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if shards < 1 or shards > trials:
        raise DomainError("shards must be in [1, trials]")
    records: list[RunRecord] = []
    for shard_index, (start, stop) in enumerate(_shard_bounds(trials, shards)):
        records.extend(_sample_shard(matrix, start, stop, seed, shard_index))
    return records


def _sample_shard(
    matrix: StochasticMatrix, start: int, stop: int, seed: int, shard_index: int
) -> list[RunRecord]:
    """One shard's records; the unit of parallelism for sharded sampling."""
    row_rng = SplitMix64(derive_seed(seed, f"aspect:rows:{shard_index}"))
    out_rng = SplitMix64(derive_seed(seed, f"aspect:outcomes:{shard_index}"))
    thresholds = [_thresholds(matrix.rows[label]) for label in ROW_LABELS]
    records = []
    for trial in range(start, stop):
        row_index = row_rng.below(4)
        u = out_rng.next_u64()
        for threshold, outcome in thresholds[row_index]:
            if u < threshold:
                break
        records.append(RunRecord(ROW_LABELS[row_index], outcome, trial))
    return records


def _gamma_from_row_stats(
    counts: Mapping[str, int], sums: Mapping[str, int]
) -> GammaEstimate:
    means = {}
    variance_sum = 0.0
    for label in ROW_LABELS:
        n = counts.get(label, 0)
        if n == 0:
            raise InsufficientDataError(f"no trials observed for row {label!r}")
        mean = sums[label] / n
        means[label] = mean
        # Products are ±1, so the sample variance is n/(n-1) * (1 - mean^2).
        sample_var = (1 - mean * mean) * n / (n - 1) if n > 1 else 0.0
        variance_sum += sample_var / n
    gamma = means["ab"] + means["ac"] + means["db"] - means["dc"]
    return GammaEstimate(
        row_means=means,
        row_counts={label: counts[label] for label in ROW_LABELS},
        gamma=gamma,
        standard_error=math.sqrt(variance_sum),
    )


def estimate_gamma(records: Iterable[RunRecord]) -> GammaEstimate:
    """Gamma and its standard error from a record list; every row must appear."""
    counts: dict[str, int] = {}
    sums: dict[str, int] = {}
    for record in records:
        counts[record.row] = counts.get(record.row, 0) + 1
        sums[record.row] = sums.get(record.row, 0) + record.product
    return _gamma_from_row_stats(counts, sums)


@dataclass(frozen=True)
class SourceModel:
    """Finite hidden parameter with deterministic ±1 responses.

    ``support`` lists (label, probability); ``responses`` maps
    (setting, label) -> ±1 for settings 'a', 'd' on one side and 'b', 'c'
    on the other.
    """

    support: tuple[tuple[str, Fraction], ...]
    responses: Mapping[tuple[str, str], int]

    def __post_init__(self):
        if not self.support:
            raise DomainError("support must be non-empty")
        total = Fraction(0)
        for label, prob in self.support:
            prob = Fraction(prob)
            if prob <= 0:
                raise DomainError(f"parameter {label!r} needs positive probability")
            total += prob
        if total != 1:
            raise DomainError(f"support probabilities sum to {total}, expected 1")
        for label, _prob in self.support:
            for setting in "adbc":
                value = self.responses.get((setting, label))
                if value not in (1, -1):
                    raise DomainError(
                        f"response for setting {setting!r}, parameter {label!r} must be ±1"
                    )

    def row_product(self, row: str, label: str) -> int:
        return self.responses[(row[0], label)] * self.responses[(row[1], label)]


def random_source_model(seed: int, max_support: int = 8) -> SourceModel:
    """A reproducible random model: random support size, masses and responses."""
    rng = SplitMix64(derive_seed(seed, "source:model"))
    size = 1 + rng.below(max_support)
    weights = [1 + rng.below(100) for _ in range(size)]
    total = sum(weights)
    support = tuple(
        (f"l{index}", Fraction(w, total)) for index, w in enumerate(weights)
    )
    responses = {
        (setting, label): rng.sign()
        for label, _ in support
        for setting in "adbc"
    }
    return SourceModel(support, responses)


def simulate_source_model(model: SourceModel, trials: int, seed: int) -> GammaEstimate:
    """Sample the model with independent uniform setting choices per side."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    lam_rng = SplitMix64(derive_seed(seed, "source:lambda"))
    set_rng = SplitMix64(derive_seed(seed, "source:settings"))
    labels, thresholds = _support_thresholds(model)
    products = [[model.row_product(row, label) for row in ROW_LABELS] for label in labels]
    counts = [0, 0, 0, 0]
    sums = [0, 0, 0, 0]
    for _ in range(trials):
        lam = _pick(thresholds, lam_rng.next_u64())
        row = set_rng.below(4)
        counts[row] += 1
        sums[row] += products[lam][row]
    return _gamma_from_row_stats(
        dict(zip(ROW_LABELS, counts)), dict(zip(ROW_LABELS, sums))
    )


def _support_thresholds(model: SourceModel):
    labels = [label for label, _ in model.support]
    out = []
    cum = Fraction(0)
    for _, prob in model.support:
        cum += prob
        out.append(min(int(cum * (1 << 64)), 1 << 64))
    out[-1] = 1 << 64
    return labels, out


def _pick(thresholds: list[int], u: int) -> int:
    for index, threshold in enumerate(thresholds):
        if u < threshold:
            return index
    return len(thresholds) - 1  # pragma: no cover


@dataclass(frozen=True)
class ReorderReport:
    """Outcome of regrouping source-model trials by hidden parameter.

    Trials are grouped greedily in arrival order: the i-th complete
    quadruple for a parameter takes that parameter's i-th trial of each
    setting row; leftover trials that never complete a quadruple are
    discarded.  (The grouping rule is implementation-defined; any complete
    quadruple has gamma ±2 regardless.)
    """

    trials: int
    quadruples: int
    discarded: int
    gammas_seen: tuple[int, ...]
    per_parameter: Mapping[str, int] = field(default_factory=dict)

    @property
    def all_plus_minus_two(self) -> bool:
        return all(g in (-2, 2) for g in self.gammas_seen)


def reorder_demonstration(model: SourceModel, trials: int, seed: int) -> ReorderReport:
    """Group simulated trials by parameter into quadruples and check gamma = ±2."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    lam_rng = SplitMix64(derive_seed(seed, "source:lambda"))
    set_rng = SplitMix64(derive_seed(seed, "source:settings"))
    labels, thresholds = _support_thresholds(model)
    # per parameter, per row: list of observed products in arrival order
    bucket: list[list[list[int]]] = [[[] for _ in ROW_LABELS] for _ in labels]
    for _ in range(trials):
        lam = _pick(thresholds, lam_rng.next_u64())
        row = set_rng.below(4)
        bucket[lam][row].append(model.row_product(ROW_LABELS[row], labels[lam]))
    gammas: set[int] = set()
    quadruples = 0
    discarded = 0
    per_parameter = {}
    for lam, rows in enumerate(bucket):
        complete = min(len(products) for products in rows)
        per_parameter[labels[lam]] = complete
        quadruples += complete
        discarded += sum(len(products) - complete for products in rows)
        for i in range(complete):
            gammas.add(rows[0][i] + rows[1][i] + rows[2][i] - rows[3][i])
    return ReorderReport(
        trials=trials,
        quadruples=quadruples,
        discarded=discarded,
        gammas_seen=tuple(sorted(gammas)),
        per_parameter=per_parameter,
    )
