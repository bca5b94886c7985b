"""Layer primitives for the model zoo: seeded linear/MLP stacks and batch
normalization with running statistics for inference mode.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Tensor,
    div,
    elu,
    parameter,
    sigmoid,
    sqrt,
    tanh,
    tmean,
)

ACTIVATIONS = {
    None: lambda t: t,
    "elu": elu,
    "sigmoid": sigmoid,
    "tanh": tanh,
}


def fan_in_uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) draw; the default weight initializer."""
    limit = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape)


class Linear:
    """Affine map x @ W + b with fan-in-scaled uniform initialization."""

    def __init__(self, rng, name: str, in_dim: int, out_dim: int):
        self.name = name
        self.weight = parameter(fan_in_uniform(rng, in_dim, (in_dim, out_dim)), f"{name}.w")
        self.bias = parameter(fan_in_uniform(rng, in_dim, (1, out_dim)), f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def parameters(self) -> dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class MLP:
    """Stack of Linear layers with a hidden activation between them (ELU by
    default) and an optional output activation."""

    def __init__(self, rng, name, in_dim, hidden, out_dim, out_activation=None,
                 hidden_activation="elu"):
        for activation in (out_activation, hidden_activation):
            if activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {activation!r}")
        dims = [in_dim] + list(hidden) + [out_dim]
        self.layers = [
            Linear(rng, f"{name}.l{i}", dims[i], dims[i + 1]) for i in range(len(dims) - 1)
        ]
        self.out_activation = out_activation
        self.hidden_activation = hidden_activation

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for layer in self.layers[:-1]:
            h = ACTIVATIONS[self.hidden_activation](layer(h))
        return ACTIVATIONS[self.out_activation](self.layers[-1](h))

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for layer in self.layers:
            out.update(layer.parameters())
        return out


class BatchNormLayer:
    """Per-feature batch standardization with learnable scale/shift.

    Training mode standardizes with the batch's own mean and population
    variance and updates exponential-moving-average running statistics;
    inference mode standardizes with the running statistics. Training mode
    requires at least two rows.
    """

    def __init__(self, rng, name: str, num_features: int, eps: float = 1e-5, momentum: float = 0.9):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.name = name
        self.eps = eps
        self.momentum = momentum
        self.gamma = parameter(np.ones((1, num_features)), f"{name}.gamma")
        self.beta = parameter(np.zeros((1, num_features)), f"{name}.beta")
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if training:
            if x.shape[0] < 2:
                raise ValueError("train-mode batch normalization needs at least 2 rows")
            mu = tmean(x, axis=0, keepdims=True)
            centered = x - mu
            var = tmean(centered * centered, axis=0, keepdims=True)
            xhat = div(centered, sqrt(var + self.eps))
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mu.values.ravel()
            self.running_var = m * self.running_var + (1 - m) * var.values.ravel()
        else:
            xhat = (x - self.running_mean.reshape(1, -1)) * (
                1.0 / np.sqrt(self.running_var + self.eps)
            ).reshape(1, -1)
        return xhat * self.gamma + self.beta

    def parameters(self) -> dict[str, Tensor]:
        return {self.gamma.name: self.gamma, self.beta.name: self.beta}

    def buffers(self) -> dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }


def batchnorm_forward(layer: BatchNormLayer, batch: Tensor, mode: str) -> Tensor:
    """Apply a BatchNormLayer in ``train`` or ``infer`` mode."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    return layer(batch, training=(mode == "train"))


def group_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of the rows of x selected by a boolean mask, as a (1, d) tensor.

    Implemented as a constant-matrix product so gradients flow into x.
    """
    count = int(mask.sum())
    if count == 0:
        raise ValueError("group_mean of an empty group")
    weights = (mask.astype(np.float64) / count).reshape(1, -1)
    return Tensor(weights) @ x


__all__ = [
    "ACTIVATIONS",
    "BatchNormLayer",
    "Linear",
    "MLP",
    "batchnorm_forward",
    "fan_in_uniform",
    "group_mean",
]
