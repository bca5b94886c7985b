"""Metric definitions against hand values and the independent O(n^2) oracles."""

import numpy as np
import pytest

from upliftbench.metrics import (
    MetricError,
    auuc,
    curve_to_csv,
    evaluate_uplift,
    lift_at_k,
    optimal_ordering,
    qini_coefficient,
    qini_values,
    rank_and_accumulate,
    weighted_average_uplift,
)

from oracles import (
    oracle_auuc,
    oracle_lift_at_k,
    oracle_qini,
    oracle_qini_best_area_exhaustive,
    oracle_wau,
    optimal_order,
    qini_area_for_order,
    random_metric_instance,
)


class TestRankAndAccumulate:
    def test_hand_accumulation(self):
        curve = rank_and_accumulate([3, 2, 1], [1, 0, 1], [1, 0, 1])
        assert np.array_equal(curve.n_treated, [1, 1, 2])
        assert np.array_equal(curve.n_control, [0, 1, 1])
        assert np.array_equal(curve.y_treated, [1, 1, 2])
        assert np.array_equal(curve.y_control, [0, 0, 0])

    def test_constant_scores_keep_original_order(self):
        t = np.array([1, 0, 1, 0, 1.0])
        curve = rank_and_accumulate(np.zeros(5), t, np.ones(5))
        assert np.array_equal(curve.order, np.arange(5))

    def test_negating_distinct_scores_reverses_ranking(self):
        rng = np.random.default_rng(0)
        tau = rng.permutation(20).astype(float)
        t = (rng.random(20) < 0.5).astype(float)
        t[0], t[1] = 1, 0
        y = (rng.random(20) < 0.5).astype(float)
        forward_order = rank_and_accumulate(tau, t, y).order
        backward_order = rank_and_accumulate(-tau, t, y).order
        assert np.array_equal(forward_order[::-1], backward_order)

    def test_single_group_rejected(self):
        with pytest.raises(MetricError, match="both"):
            rank_and_accumulate([1.0, 2.0], [1, 1], [0, 1])


class TestQini:
    def test_all_zero_outcomes_gives_zero(self):
        curve = rank_and_accumulate([3, 2, 1, 0], [1, 0, 1, 0], [0, 0, 0, 0])
        assert qini_coefficient(curve) == 0.0

    def test_perfect_ordering_scores_exactly_one(self):
        rng = np.random.default_rng(1)
        t = (rng.random(40) < 0.5).astype(float)
        t[:2] = [1, 0]
        y = (rng.random(40) < 0.4).astype(float)
        y[np.flatnonzero(t == 1)[0]] = 1.0  # ensure a treated positive exists
        perfect = np.empty(40)
        perfect[optimal_ordering(t, y)] = -np.arange(40, dtype=float)
        curve = rank_and_accumulate(perfect, t, y)
        assert qini_coefficient(curve) == 1.0

    def test_stated_ordering_matches_exhaustive_search(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = int(rng.integers(4, 9))
            t = (rng.random(n) < 0.5).astype(float)
            t[0], t[1] = 1, 0
            y = (rng.random(n) < 0.5).astype(float)
            stated = qini_area_for_order(optimal_order(t, y), t, y)
            best = oracle_qini_best_area_exhaustive(t, y)
            assert stated == pytest.approx(best, abs=1e-12)

    def test_coefficient_never_exceeds_one(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            tau, t, y = random_metric_instance(rng, max_n=60)
            curve = rank_and_accumulate(tau, t, y)
            assert qini_coefficient(curve) <= 1.0 + 1e-12

    def test_zero_control_prefix_reduces_to_treated_sum(self):
        # top row is treated: q(1) = Yt - 0*ratio = its outcome, not 0
        curve = rank_and_accumulate([2, 1, 0], [1, 0, 0], [1, 1, 0])
        assert qini_values(curve)[0] == 1.0


class TestAuuc:
    def test_all_zero_outcomes(self):
        curve = rank_and_accumulate([3, 2, 1, 0], [1, 0, 1, 0], [0, 0, 0, 0])
        assert auuc(curve) == 0.0

    def test_permutation_null_is_centred_on_zero(self):
        # constant model on exchangeable data: mean AUUC over shuffles ~ 0
        rng = np.random.default_rng(4)
        n = 40
        t = np.array([1.0, 0.0] * (n // 2))
        y = (rng.random(n) < 0.5).astype(float)
        values = []
        for _ in range(1000):
            perm = rng.permutation(n)
            curve = rank_and_accumulate(np.zeros(n), t[perm], y[perm])
            values.append(auuc(curve))
        values = np.asarray(values)
        assert abs(values.mean()) < 3 * values.std() / np.sqrt(len(values))


class TestWau:
    def test_single_bin_equals_average_uplift(self):
        rng = np.random.default_rng(5)
        tau, t, y = random_metric_instance(rng)
        curve = rank_and_accumulate(tau, t, y)
        overall = y[t == 1].mean() - y[t == 0].mean()
        assert weighted_average_uplift(curve, bins=1) == pytest.approx(overall)

    def test_weights_collapse_to_single_treated_bin(self):
        # 20 rows, 10 bins of 2; treated rows only in the first bin
        tau = -np.arange(20, dtype=float)
        t = np.zeros(20)
        t[:2] = [1, 0]
        y = np.zeros(20)
        y[0] = 1.0
        curve = rank_and_accumulate(tau, t, y)
        assert weighted_average_uplift(curve, bins=10) == pytest.approx(1.0)

    def test_all_treated_bins_skipped_returns_zero(self):
        # every bin is single-group: bins of size 1
        tau = -np.arange(4, dtype=float)
        curve = rank_and_accumulate(tau, [1, 0, 1, 0], [1, 0, 1, 0])
        assert weighted_average_uplift(curve, bins=4) == 0.0


class TestLiftAtK:
    def test_hand_top3(self):
        # top-3 by score: (t=1,y=1), (t=0,y=0), (t=1,y=1) -> 1.0 - 0.0
        tau = [9, 8, 7, 0, 0, 0, 0, 0, 0, -1]
        t = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0]
        y = [1, 0, 1, 0, 0, 0, 0, 0, 0, 0]
        curve = rank_and_accumulate(tau, t, y)
        assert lift_at_k(curve, 30) == pytest.approx(1.0)

    def test_zero_outcomes_in_top(self):
        tau = [9, 8, 7, 0, 0, 0, 0, 0, 0, -1]
        t = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0]
        y = [0, 0, 0, 1, 1, 1, 0, 0, 0, 0]
        curve = rank_and_accumulate(tau, t, y)
        assert lift_at_k(curve, 30) == 0.0

    def test_full_population_equals_average_uplift(self):
        rng = np.random.default_rng(6)
        tau, t, y = random_metric_instance(rng)
        curve = rank_and_accumulate(tau, t, y)
        overall = y[t == 1].mean() - y[t == 0].mean()
        assert lift_at_k(curve, 100) == pytest.approx(overall)

    def test_missing_group_in_top_rejected(self):
        tau = [9, 8, 7, 0, 0, 0, 0, 0, 0, -1]
        t = [1, 1, 1, 0, 1, 0, 1, 0, 1, 0]
        curve = rank_and_accumulate(tau, t, np.ones(10))
        with pytest.raises(MetricError):
            lift_at_k(curve, 30)


class TestOracleEquivalence:
    def test_random_instances_match_oracles(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            tau, t, y = random_metric_instance(rng)
            curve = rank_and_accumulate(tau, t, y)
            assert qini_coefficient(curve) == pytest.approx(oracle_qini(tau, t, y), abs=1e-9)
            assert auuc(curve) == pytest.approx(oracle_auuc(tau, t, y), abs=1e-9)
            assert weighted_average_uplift(curve) == pytest.approx(
                oracle_wau(tau, t, y), abs=1e-12)
            assert lift_at_k(curve) == pytest.approx(
                oracle_lift_at_k(tau, t, y), abs=1e-12)


class TestInvariances:
    def test_monotone_transform_leaves_metrics_unchanged(self):
        # transforms must stay strictly monotone in float64 (tanh saturates)
        rng = np.random.default_rng(8)
        for transform in (lambda s: 3.0 * s + 7.0, np.arctan, lambda s: s**3):
            tau, t, y = random_metric_instance(rng)
            base = evaluate_uplift(tau, t, y)
            mapped = evaluate_uplift(transform(tau), t, y)
            assert base.as_dict() == pytest.approx(mapped.as_dict())

    def test_negation_flips_unnormalized_qini_area(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            tau, t, y = random_metric_instance(rng)
            n = len(t)

            def area_minus_random(scores):
                curve = rank_and_accumulate(scores, t, y)
                q = qini_values(curve)
                extended = np.concatenate(([0.0], q))
                return float(np.trapezoid(extended, dx=1.0 / n)) - 0.5 * q[-1]

            forward = area_minus_random(tau)
            assert area_minus_random(-tau) == pytest.approx(-forward, abs=1e-9)

    def test_row_permutation_with_distinct_scores_is_invariant(self):
        rng = np.random.default_rng(10)
        tau, t, y = random_metric_instance(rng)
        perm = rng.permutation(len(t))
        base = evaluate_uplift(tau, t, y)
        shuffled = evaluate_uplift(tau[perm], t[perm], y[perm])
        assert base.as_dict() == pytest.approx(shuffled.as_dict())


def test_curve_csv_export(tmp_path):
    tau, t, y = random_metric_instance(np.random.default_rng(11), max_n=30)
    curve = rank_and_accumulate(tau, t, y)
    path = tmp_path / "curve.csv"
    curve_to_csv(curve, path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (curve.n, 7)
    assert np.array_equal(rows[:, 0], np.arange(1, curve.n + 1))
    assert np.array_equal(rows[:, 1], curve.n_treated)
