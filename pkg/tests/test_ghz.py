import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from corrlab.errors import DomainError
from corrlab.ghz import (
    EXPECTED_PRODUCT,
    NODES,
    REGIME_ORDER,
    Regime,
    Response,
    Schedule,
    Window,
    counterfactual_probe,
    default_assignment,
    default_schedule,
    draw_time,
    marginal_balance,
    node_output,
    rademacher,
    run_all_regimes,
    run_window,
)
from corrlab.rng import SplitMix64

times = st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(100))


class TestRademacher:
    def test_reference_values(self):
        assert rademacher(1, Fraction(1, 4)) == 1
        assert rademacher(1, Fraction(3, 4)) == -1
        assert rademacher(2, Fraction(3, 10)) == -1
        assert rademacher(3, Fraction(1, 16)) == 1

    def test_matches_float_sine_off_grid(self):
        for num in range(1, 193, 3):
            t = Fraction(num, 193)  # prime denominator avoids exact zeros
            for k in (1, 2, 3):
                expected = 1 if math.sin((1 << k) * math.pi * float(t)) > 0 else -1
                assert rademacher(k, t) == expected

    def test_zero_crossing_convention(self):
        assert rademacher(1, Fraction(1, 2)) == 1
        assert rademacher(2, Fraction(3, 4)) == 1

    @given(st.integers(1, 6), times)
    def test_unit_periodicity(self, k, t):
        assert rademacher(k, t) == rademacher(k, t + 1)

    @given(times)
    def test_halving_relation(self, t):
        # r_{k+1}(t) = r_k(2t) by definition of the dyadic squeeze.
        assert rademacher(2, t) == rademacher(1, 2 * t)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            rademacher(0, Fraction(1, 2))
        with pytest.raises(DomainError):
            rademacher(1, Fraction(0))


class TestAssignmentIdentities:
    @given(times)
    def test_products_are_exact_in_every_regime(self, t):
        assignment = default_assignment()
        for regime in REGIME_ORDER:
            product = 1
            for node in NODES:
                product *= assignment.response(node, regime)(t)
            assert product == EXPECTED_PRODUCT[regime]

    @given(times)
    def test_index_substitution_preserves_identities(self, t):
        assignment = default_assignment(indices=(4, 1, 6))
        for regime in REGIME_ORDER:
            product = 1
            for node in NODES:
                product *= assignment.response(node, regime)(t)
            assert product == EXPECTED_PRODUCT[regime]

    def test_distinct_indices_required(self):
        with pytest.raises(DomainError):
            default_assignment(indices=(1, 1, 2))

    def test_response_labels(self):
        assignment = default_assignment()
        assert assignment.response(1, Regime.YYX).label() == "-r1"
        assert assignment.response(3, Regime.XXX).label() == "r1.r2"


class TestSchedule:
    def test_default_layout(self):
        schedule = default_schedule()
        assert [w.regime for w in schedule.windows] == list(REGIME_ORDER)
        assert schedule.window_for(Regime.YYX).start == 1
        assert schedule.regime_at(Fraction(3, 2)) == Regime.YYX
        assert schedule.regime_at(Fraction(17, 8)) is None  # switching gap

    def test_overlap_rejected(self):
        with pytest.raises(DomainError):
            Schedule(
                (
                    Window(Regime.YYX, Fraction(1), Fraction(2)),
                    Window(Regime.YXY, Fraction(3, 2), Fraction(5, 2)),
                )
            )

    def test_node_output_outside_window(self):
        with pytest.raises(DomainError):
            node_output(
                default_assignment(), default_schedule(), 1, Regime.YYX, Fraction(5)
            )


class TestRunWindow:
    def test_deterministic(self):
        schedule = default_schedule()
        a = run_window(schedule, Regime.YYX, 500, seed=7)
        assert a == run_window(schedule, Regime.YYX, 500, seed=7)
        assert a != run_window(schedule, Regime.YYX, 500, seed=8)

    def test_times_inside_window(self):
        schedule = default_schedule()
        window = schedule.window_for(Regime.XYY)
        for trial in run_window(schedule, Regime.XYY, 300, seed=1):
            assert window.contains(trial.t)

    def test_products_exact_per_regime(self):
        results = run_all_regimes(default_schedule(), 2000, seed=13)
        for regime, trials in results.items():
            assert all(trial.product == EXPECTED_PRODUCT[regime] for trial in trials)

    def test_marginals_balanced(self):
        results = run_all_regimes(default_schedule(), 20000, seed=99)
        # binomial five-sigma band around 1/2
        slack = 5 * math.sqrt(0.25 / 20000)
        for trials in results.values():
            for node in NODES:
                assert abs(marginal_balance(trials, node) - 0.5) < slack

    def test_draw_time_strictly_interior(self):
        window = Window(Regime.YYX, Fraction(1), Fraction(2))
        rng = SplitMix64(0)
        for _ in range(100):
            t = draw_time(window, rng)
            assert window.start < t < window.end


class TestCounterfactual:
    def test_fixed_relations_at_random_times(self):
        assignment = default_assignment()
        rng = SplitMix64(31)
        for _ in range(200):
            t = Fraction(1 + rng.below((1 << 20) - 1), 1 << 20)
            report = counterfactual_probe(assignment, t)
            assert report.y3_product == -1
            assert report.y1_product == 1

    def test_invalid_time(self):
        with pytest.raises(DomainError):
            counterfactual_probe(default_assignment(), Fraction(-1))


def test_locality_outputs_depend_only_on_node_regime_time():
    # Recomputing any single output in isolation reproduces the trial value.
    assignment = default_assignment()
    schedule = default_schedule()
    for regime in REGIME_ORDER:
        for trial in run_window(schedule, regime, 50, seed=5):
            for node in NODES:
                recomputed = node_output(assignment, schedule, node, regime, trial.t)
                assert recomputed == trial.outputs[node - 1]


def test_response_validation():
    with pytest.raises(DomainError):
        Response(0, (1,))
    with pytest.raises(DomainError):
        Response(1, (0,))
