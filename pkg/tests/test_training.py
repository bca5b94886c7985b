"""Training-loop contracts: early stopping, divergence handling, learning."""

import numpy as np
import pytest

from upliftbench.datapipe import SplitPlan, UpliftDataset, split
from upliftbench.models import (
    ALL_KINDS,
    ModelHyperparams,
    ModelKind,
    TrainingDiverged,
    build,
    train,
)
from upliftbench.synthetic import SyntheticSpec, generate


def outcome_equals_treatment_data(n=600, k=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    t = (rng.random(n) < 0.5).astype(float)
    t[:2] = [1, 0]
    return UpliftDataset(X=X, t=t, y=t.copy(), name="y-equals-t")


class TestEarlyStopping:
    def test_monotone_worsening_stream_stops_at_epoch_six(self):
        ds = outcome_equals_treatment_data(80)
        model = build(ModelKind.EUEN, ds.k, ModelHyperparams(rank=8, batch_size=32))
        stream = iter(np.linspace(1.0, 0.0, 30))

        def worsening_metric(_model, _valid):
            return float(next(stream))

        train(model, ds, ds, metric_for_stopping=worsening_metric,
              max_epochs=20, patience=5)
        assert model.telemetry.epochs == 6  # 1 best + 5 strikes
        assert model.telemetry.best_epoch == 1

    def test_best_snapshot_restored(self):
        ds = outcome_equals_treatment_data(80)
        model = build(ModelKind.EUEN, ds.k, ModelHyperparams(rank=8, batch_size=32))
        snapshots = []

        def capture_metric(m, _valid):
            snapshots.append(m.snapshot())
            return float(len(snapshots) == 1)  # epoch 1 is the best

        train(model, ds, ds, metric_for_stopping=capture_metric,
              max_epochs=8, patience=3)
        for name, values in snapshots[0].items():
            assert np.array_equal(model.params[name].values, values) if \
                name in model.params else True

    def test_reported_metric_is_max_over_trajectory(self):
        ds = generate(SyntheticSpec(n=1500, k=4, target_uplift=0.1, seed=1))
        tr, va, _ = split(ds, SplitPlan(seed=0))
        model = build(ModelKind.TLEARNER, ds.k,
                      ModelHyperparams(rank=16, lr=5e-3, batch_size=128), seed=0)
        train(model, ds.subset(tr), ds.subset(va), max_epochs=8, patience=3, seed=0)
        from upliftbench.models import validation_qini

        restored = validation_qini(model, ds.subset(va))
        assert restored == pytest.approx(max(model.qini_trajectory), abs=1e-12)

    def test_zero_epochs_returns_built_model(self):
        ds = outcome_equals_treatment_data(60)
        model = build(ModelKind.TARNET, ds.k, ModelHyperparams(rank=8))
        before = model.snapshot()
        train(model, ds, ds, max_epochs=0)
        after = model.snapshot()
        for name in before:
            assert np.array_equal(before[name], after[name])
        assert model.telemetry.epochs == 0

    def test_single_group_validation_rejected(self):
        ds = outcome_equals_treatment_data(60)
        bad_valid = UpliftDataset(X=ds.X, t=np.ones(ds.n), y=ds.y)
        model = build(ModelKind.EUEN, ds.k, ModelHyperparams(rank=8))
        with pytest.raises(ValueError, match="both treatment groups"):
            train(model, ds, bad_valid)


class TestDivergence:
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_absurd_learning_rate_reports_diverged(self):
        ds = outcome_equals_treatment_data(200)
        hp = ModelHyperparams(rank=8, lr=1e150, batch_size=64)
        model = build(ModelKind.DRAGONNET, ds.k, hp, seed=0)
        with pytest.raises(TrainingDiverged):
            train(model, ds, ds, hp, max_epochs=5)


class TestLearning:
    def test_loss_decreases_in_five_epochs_every_kind(self):
        ds = generate(SyntheticSpec(n=800, k=4, target_uplift=0.2,
                                    base_rate=0.3, seed=2))
        for kind in ALL_KINDS:
            hp = ModelHyperparams(rank=16, lr=5e-3, batch_size=128, alpha=0.3)
            model = build(kind, ds.k, hp, seed=0)
            initial, _ = model.loss(ds.X, ds.t, ds.y,
                                    rng=np.random.default_rng(0))
            train(model, ds, ds, hp, metric_for_stopping=None,
                  max_epochs=5, seed=0)
            final, _ = model.loss(ds.X, ds.t, ds.y, training=False,
                                  rng=np.random.default_rng(0))
            assert float(final.values) < float(initial.values), kind

    def test_outcome_equals_treatment_quick_subset(self):
        # full 13-kind version runs in the acceptance suite
        ds = outcome_equals_treatment_data(2000, seed=3)
        for kind in (ModelKind.TLEARNER, ModelKind.SLEARNER, ModelKind.EUEN):
            hp = ModelHyperparams(rank=16, lr=1e-2, batch_size=256, alpha=0.2)
            model = build(kind, ds.k, hp, seed=0)
            train(model, ds, ds, hp, metric_for_stopping=None,
                  max_epochs=15, seed=0)
            tau = model.predict_uplift(ds.X)
            assert 0.9 <= tau.mean() <= 1.1, kind

    def test_pure_noise_gives_near_zero_mean_uplift(self):
        rng = np.random.default_rng(4)
        n = 20_000
        ds = UpliftDataset(
            X=rng.standard_normal((n, 3)),
            t=(rng.random(n) < 0.5).astype(float),
            y=(rng.random(n) < 0.5).astype(float),
        )
        hp = ModelHyperparams(rank=16, lr=1e-3, batch_size=512, alpha=0.2)
        model = build(ModelKind.TLEARNER, ds.k, hp, seed=0)
        train(model, ds, ds, hp, metric_for_stopping=None, max_epochs=5, seed=0)
        assert abs(model.predict_uplift(ds.X).mean()) < 0.05

    def test_training_determinism(self):
        ds = generate(SyntheticSpec(n=1000, k=3, seed=5))
        tr, va, _ = split(ds, SplitPlan(seed=0))

        def run():
            hp = ModelHyperparams(rank=8, lr=1e-3, batch_size=128)
            model = build(ModelKind.CEVAE, ds.k, hp, seed=7)
            train(model, ds.subset(tr), ds.subset(va), hp, max_epochs=3, seed=7)
            return model.predict_uplift(ds.X[:50])

        assert np.array_equal(run(), run())

    def test_single_row_trailing_batch_skipped_with_feature_norm(self):
        # 65 rows, batch 32 -> final block of 1 must not crash train-mode BN
        ds = outcome_equals_treatment_data(65, seed=6)
        hp = ModelHyperparams(rank=8, batch_size=32)
        model = build(ModelKind.EUEN, ds.k, hp, feature_norm=True, seed=0)
        train(model, ds, ds, hp, max_epochs=2, seed=0)
        assert model.telemetry.epochs == 2
