"""Synthetic generator and its rank-quality oracle."""

import numpy as np
import pytest

from upliftbench.datapipe import compute_stats
from upliftbench.metrics import qini_coefficient, rank_and_accumulate
from upliftbench.synthetic import SyntheticSpec, generate, oracle_rank_quality


class TestGenerate:
    def test_zero_uplift_weights_give_zero_tau(self):
        ds = generate(SyntheticSpec(n=500, k=4, uplift_scale=0.0,
                                    target_uplift=None, seed=0))
        assert np.allclose(ds.tau_true, 0.0)

    def test_determinism_per_seed(self):
        spec = SyntheticSpec(n=300, k=5, seed=7)
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.t, b.t)
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.tau_true, b.tau_true)
        c = generate(SyntheticSpec(n=300, k=5, seed=8))
        assert not np.array_equal(a.X, c.X)

    def test_rct_high_treatment_rate_matches_target_ratio(self):
        # p=0.85 aims at the 5.67:1 treated:control regime
        n = 200_000
        ds = generate(SyntheticSpec(n=n, k=3, mode="rct", p=0.85, seed=1))
        ratio = ds.t.sum() / (n - ds.t.sum())
        se = 3 * np.sqrt(0.85 * 0.15 / n)  # binomial tolerance on the rate
        assert abs(ds.t.mean() - 0.85) < se
        assert ratio == pytest.approx(5.67, rel=0.05)

    def test_empirical_uplift_concentrates_on_tau_mean(self):
        n = 1_000_000
        ds = generate(SyntheticSpec(n=n, k=4, mode="rct", p=0.5,
                                    target_uplift=0.03, seed=2))
        stats = compute_stats(ds)
        tolerance = 2 * 3 * np.sqrt(0.25 / n)
        assert abs(stats.average_uplift - ds.tau_true.mean()) < tolerance
        assert ds.tau_true.mean() == pytest.approx(0.03, abs=1e-6)

    def test_rct_mode_treatment_independent_of_features(self):
        n = 50_000
        ds = generate(SyntheticSpec(n=n, k=6, mode="rct", p=0.5, seed=3))
        for j in range(ds.k):
            corr = np.corrcoef(ds.t, ds.X[:, j])[0, 1]
            assert abs(corr) < 3 / np.sqrt(n)

    def test_confounded_mode_creates_feature_dependence(self):
        n = 50_000
        ds = generate(SyntheticSpec(n=n, k=6, mode="confounded",
                                    confounding_scale=2.0, seed=4))
        corrs = [abs(np.corrcoef(ds.t, ds.X[:, j])[0, 1]) for j in range(ds.k)]
        assert max(corrs) > 3 / np.sqrt(n)

    def test_invalid_treatment_probability_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n=100, k=2, mode="rct", p=1.5)
        with pytest.raises(ValueError):
            SyntheticSpec(n=100, k=2, mode="rct", p=0.0)

    def test_tau_true_closed_form_consistency(self):
        # potentials must stay in [0,1] and tau within (-1, 1)
        ds = generate(SyntheticSpec(n=2000, k=5, seed=5))
        assert np.all(ds.tau_true > -1.0) and np.all(ds.tau_true < 1.0)

    def test_noiseless_mode_thresholds(self):
        ds = generate(SyntheticSpec(n=400, k=3, noise=False, seed=6))
        assert set(np.unique(ds.y)) <= {0.0, 1.0}


class TestOracleRankQuality:
    def test_identical_arrays(self):
        tau = np.random.default_rng(0).standard_normal(100)
        assert oracle_rank_quality(tau, tau) == pytest.approx(1.0)

    def test_negated_arrays(self):
        tau = np.random.default_rng(1).standard_normal(100)
        assert oracle_rank_quality(-tau, tau) == pytest.approx(-1.0)

    def test_independent_scores_near_zero(self):
        rng = np.random.default_rng(2)
        n = 10_000
        rho = oracle_rank_quality(rng.standard_normal(n), rng.standard_normal(n))
        assert abs(rho) < 3 / np.sqrt(n)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            oracle_rank_quality([1.0], [1.0, 2.0])


def test_true_tau_ranking_beats_permuted_rankings_on_average():
    ds = generate(SyntheticSpec(n=4000, k=5, target_uplift=0.05, seed=9))
    oracle = qini_coefficient(rank_and_accumulate(ds.tau_true, ds.t, ds.y))
    rng = np.random.default_rng(10)
    permuted = [
        qini_coefficient(rank_and_accumulate(rng.permutation(ds.tau_true), ds.t, ds.y))
        for _ in range(100)
    ]
    assert oracle > np.mean(permuted)
