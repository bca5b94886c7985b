"""AdamW: Adam moments with decoupled weight decay."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class NonFiniteGradient(RuntimeError):
    """A gradient contained NaN/Inf; the surrounding trial should be marked diverged."""


class AdamW:
    """Decoupled-weight-decay Adam over a named parameter dict.

    Moments live here, keyed by parameter name; the step counter increases by
    exactly one per ``step`` call. The update is

        m = b1*m + (1-b1)*g          v = b2*v + (1-b2)*g^2
        p -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * p

    with the usual bias-corrected m_hat, v_hat.
    """

    def __init__(self, params: dict[str, Tensor], lr: float, weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.values) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.values) for name, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, grads: dict[str, np.ndarray] | None = None) -> None:
        """Apply one update from explicit grads or from each parameter's .grad.

        Parameters with no gradient this step (None) are treated as zero-grad:
        the moments decay and weight decay still applies.
        """
        if grads is None:
            grads = {name: p.grad for name, p in self.params.items()}
        self.step_count += 1
        b1, b2 = self.betas
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p.values)
            elif not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient for {name}")
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.values = p.values - self.lr * update - self.lr * self.weight_decay * p.values


def adamw_step(state: AdamW, params: dict[str, Tensor],
               grads: dict[str, np.ndarray]) -> dict[str, Tensor]:
    """Functional surface over AdamW.step for a single update; returns params."""
    for name, p in params.items():
        if state.params.get(name) is not p:
            raise ValueError(f"parameter {name!r} is not managed by this optimizer state")
    state.step(grads)
    return params
