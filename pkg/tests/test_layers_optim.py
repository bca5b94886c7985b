"""Batch normalization and AdamW contracts."""

import numpy as np
import pytest

from upliftbench.numerics import (
    AdamW,
    BatchNormLayer,
    NonFiniteGradient,
    Tensor,
    adamw_step,
    batchnorm_forward,
    parameter,
    tsum,
)


def make_bn(num_features=1, eps=1e-5):
    return BatchNormLayer(np.random.default_rng(0), "bn", num_features, eps=eps)


class TestBatchNorm:
    def test_fixed_point_on_standardized_batch(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((200, 3))
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        layer = make_bn(3)
        out = batchnorm_forward(layer, Tensor(x), "train")
        assert np.allclose(out.values, x, atol=1e-4)

    def test_two_point_batch_hand_values(self):
        # batch {1, 3}: mean 2, population variance 1 -> outputs {-1, +1}
        layer = make_bn(1, eps=1e-12)
        out = batchnorm_forward(layer, Tensor([[1.0], [3.0]]), "train")
        assert np.allclose(out.values.ravel(), [-1.0, 1.0], atol=1e-6)

    def test_affine_stage_hand_values(self):
        # gamma=2, beta=5 on an already standardized two-point batch
        layer = make_bn(1, eps=1e-12)
        layer.gamma.values[:] = 2.0
        layer.beta.values[:] = 5.0
        out = batchnorm_forward(layer, Tensor([[-1.0], [1.0]]), "train")
        assert np.allclose(out.values.ravel(), [3.0, 7.0], atol=1e-6)

    def test_train_mode_standardizes_each_feature(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((128, 4)) * 7.0 + 3.0
        layer = make_bn(4)
        out = batchnorm_forward(layer, Tensor(x), "train").values
        assert np.all(np.abs(out.mean(axis=0)) < 1e-8)
        assert np.all(np.abs(out.var(axis=0) - 1.0) < 10 * layer.eps)

    def test_single_row_train_mode_rejected(self):
        layer = make_bn(2)
        with pytest.raises(ValueError):
            batchnorm_forward(layer, Tensor([[1.0, 2.0]]), "train")

    def test_infer_mode_uses_running_statistics(self):
        rng = np.random.default_rng(2)
        layer = make_bn(2)
        for _ in range(200):
            batchnorm_forward(layer, Tensor(rng.standard_normal((64, 2)) * 3.0 + 1.0),
                              "train")
        assert np.allclose(layer.running_mean, 1.0, atol=0.5)
        assert np.allclose(layer.running_var, 9.0, atol=2.0)
        x = np.array([[1.0, 1.0]])
        out = batchnorm_forward(layer, Tensor(x), "infer").values
        expected = (x - layer.running_mean) / np.sqrt(layer.running_var + layer.eps)
        assert np.allclose(out, expected)

    def test_infer_mode_does_not_update_running_stats(self):
        layer = make_bn(2)
        before = layer.running_mean.copy()
        batchnorm_forward(layer, Tensor([[5.0, 5.0]]), "infer")
        assert np.array_equal(layer.running_mean, before)

    def test_gradients_flow_to_gamma_beta_and_input(self):
        rng = np.random.default_rng(3)
        layer = make_bn(3)
        x = parameter(rng.standard_normal((16, 3)), "x")
        out = layer(x, training=True)
        tsum(out * Tensor(rng.standard_normal((16, 3)))).backward()
        assert x.grad is not None and np.any(x.grad != 0)
        assert layer.gamma.grad is not None and layer.beta.grad is not None

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            batchnorm_forward(make_bn(), Tensor([[1.0], [2.0]]), "test")


class TestAdamW:
    def test_zero_grad_no_decay_leaves_params(self):
        p = parameter(np.array([1.0, -2.0]), "p")
        opt = AdamW({"p": p}, lr=0.1, weight_decay=0.0)
        opt.step({"p": np.zeros(2)})
        assert np.allclose(p.values, [1.0, -2.0])
        assert opt.step_count == 1

    def test_zero_grad_with_decay_shrinks_by_factor(self):
        p = parameter(np.array([1.0, -2.0]), "p")
        lr, wd = 0.1, 0.01
        opt = AdamW({"p": p}, lr=lr, weight_decay=wd)
        opt.step({"p": np.zeros(2)})
        assert np.allclose(p.values, np.array([1.0, -2.0]) * (1 - lr * wd))

    def test_constant_gradient_update_approaches_lr(self):
        # bias-corrected moments converge to g and g^2: |step| -> lr
        p = parameter(np.array([0.0]), "p")
        lr = 1e-3
        opt = AdamW({"p": p}, lr=lr, weight_decay=0.0)
        g = np.array([0.37])
        previous = p.values.copy()
        for _ in range(500):
            opt.step({"p": g})
            step = previous - p.values
            previous = p.values.copy()
        assert abs(abs(step[0]) - lr) < 1e-6

    def test_nonfinite_gradient_raises(self):
        p = parameter(np.array([1.0]), "p")
        opt = AdamW({"p": p}, lr=0.1)
        with pytest.raises(NonFiniteGradient):
            opt.step({"p": np.array([np.nan])})

    def test_step_counter_strictly_increments(self):
        p = parameter(np.array([1.0]), "p")
        opt = AdamW({"p": p}, lr=0.1)
        for expected in range(1, 5):
            opt.step({"p": np.array([0.1])})
            assert opt.step_count == expected

    def test_functional_surface_matches_class(self):
        p1 = parameter(np.array([1.0, 2.0]), "p")
        p2 = parameter(np.array([1.0, 2.0]), "p")
        g = {"p": np.array([0.3, -0.1])}
        opt1 = AdamW({"p": p1}, lr=0.05, weight_decay=1e-3)
        opt2 = AdamW({"p": p2}, lr=0.05, weight_decay=1e-3)
        opt1.step(g)
        adamw_step(opt2, {"p": p2}, g)
        assert np.array_equal(p1.values, p2.values)

    def test_determinism(self):
        def run():
            p = parameter(np.array([0.5, -0.5]), "p")
            opt = AdamW({"p": p}, lr=0.01, weight_decay=1e-4)
            rng = np.random.default_rng(0)
            for _ in range(50):
                opt.step({"p": rng.standard_normal(2)})
            return p.values.copy()

        assert np.array_equal(run(), run())
