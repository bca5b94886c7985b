"""Feature-interaction model: per-feature scalar embeddings, a
self-interaction attention module for the control response, a
treatment-aware attention module for the uplift head, and an auxiliary
constraint that keeps a treatment classifier at chance."""

from __future__ import annotations

import numpy as np

from ..numerics import (
    Tensor,
    clip,
    log,
    matmul,
    parameter,
    reshape,
    sigmoid,
    softmax,
    swap_last_axes,
    tmean,
    tsum,
)
from ..numerics.autodiff import PROB_EPS
from ..numerics.layers import fan_in_uniform
from .base import ModelKind, UpliftModel, factual_mse


class EFIN(UpliftModel):
    kind = ModelKind.EFIN

    def _build(self, rng):
        r = self.hp.rank
        d = max(4, r // 4)
        self.d = d
        self.embed = parameter(fan_in_uniform(rng, 1, (self.k, d)), "embed")
        self.wq = parameter(fan_in_uniform(rng, d, (d, d)), "wq")
        self.wk = parameter(fan_in_uniform(rng, d, (d, d)), "wk")
        self.wv = parameter(fan_in_uniform(rng, d, (d, d)), "wv")
        self.wk_treat = parameter(fan_in_uniform(rng, d, (d, d)), "wk_treat")
        self.wv_treat = parameter(fan_in_uniform(rng, d, (d, d)), "wv_treat")
        self.treat_query = parameter(fan_in_uniform(rng, d, (d, 1)), "treat_query")
        for p in (self.embed, self.wq, self.wk, self.wv, self.wk_treat,
                  self.wv_treat, self.treat_query):
            self.params[p.name] = p
        hidden = [r] * self.hp.repr_depth
        self.c_mlp = self._mlp(rng, "c_mlp", d, hidden, 1)
        self.u_mlp = self._mlp(rng, "u_mlp", d, hidden, 1)
        self.t_clf = self._mlp(rng, "t_clf", d, [r], 1, out_activation="sigmoid")
        self._register(self.c_mlp, self.u_mlp, self.t_clf)

    def _embeddings(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        x3 = reshape(x, (n, self.k, 1))
        v3 = reshape(self.embed, (1, self.k, self.d))
        return x3 * v3

    def _self_interaction(self, e: Tensor) -> Tensor:
        scale = 1.0 / np.sqrt(self.d)
        q = matmul(e, self.wq)
        k = matmul(e, self.wk)
        v = matmul(e, self.wv)
        scores = matmul(q, swap_last_axes(k)) * scale
        att = softmax(scores, axis=-1)
        return tmean(matmul(att, v), axis=1)

    def _treatment_interaction(self, e: Tensor) -> Tensor:
        scale = 1.0 / np.sqrt(self.d)
        keys = matmul(e, self.wk_treat)
        scores = matmul(keys, self.treat_query) * scale
        att = softmax(scores, axis=1)
        values = matmul(e, self.wv_treat)
        return tsum(att * values, axis=1)

    def _logits(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        e = self._embeddings(x)
        pooled = self._self_interaction(e)
        context = self._treatment_interaction(e)
        return self.c_mlp(pooled), self.u_mlp(context), context

    def _loss(self, x, t, y, training, rng):
        c_logit, u_logit, context = self._logits(self._normed(x, training))
        y0 = sigmoid(c_logit)
        y1 = sigmoid(c_logit + u_logit)
        factual = factual_mse(y0, y1, t, y)
        # intervention constraint: the treatment classifier must stay at chance
        t_hat = clip(self.t_clf(context), PROB_EPS, 1.0 - PROB_EPS)
        confusion = tmean(-(0.5 * log(t_hat) + 0.5 * log(1.0 - t_hat)))
        total = factual + self.hp.alpha * confusion
        return total, {
            "factual": float(factual.values),
            "confusion": float(confusion.values),
        }

    def _potential(self, x):
        c_logit, u_logit, _ = self._logits(x)
        return sigmoid(c_logit), sigmoid(c_logit + u_logit)
