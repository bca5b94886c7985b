"""The MLP-based model zoo: meta-learner style, shared-representation and
dual-subnetwork architectures.

Depth conventions (fixed; width comes from the tuned ``rank``):
single-network models use 3 hidden layers; shared representations use 2 and
outcome heads 2. Hidden activations are ELU, binary-outcome heads sigmoid.
"""

from __future__ import annotations

import numpy as np

from ..numerics import (
    Linear,
    Tensor,
    concat,
    parameter,
    sigmoid,
    slice_axis,
    swap_last_axes,
    tmean,
)
from ..numerics.layers import ACTIVATIONS
from .base import (
    ModelKind,
    UpliftModel,
    bce,
    clip_prob,
    factual_mse,
    linear_mmd2,
    mse,
)


class SLearner(UpliftModel):
    """Single response network over (x, t); uplift = f(x, 1) - f(x, 0)."""

    kind = ModelKind.SLEARNER

    def _build(self, rng):
        r = self.hp.rank
        self.net = self._mlp(rng, "net", self.k + 1, [r] * self.hp.single_depth, 1,
                             out_activation="sigmoid")
        self._register(self.net)

    def _with_t(self, x: Tensor, t_column: Tensor | float) -> Tensor:
        if isinstance(t_column, float):
            t_column = Tensor(np.full((x.shape[0], 1), t_column))
        return self.net(concat([x, t_column]))

    def _loss(self, x, t, y, training, rng):
        pred = self._with_t(self._normed(x, training), t)
        total = mse(pred, y)
        return total, {"factual": float(total.values)}

    def _potential(self, x):
        return self._with_t(x, 0.0), self._with_t(x, 1.0)


class TLearner(UpliftModel):
    """Two disjoint response networks, one per treatment group."""

    kind = ModelKind.TLEARNER

    def _build(self, rng):
        r = self.hp.rank
        arm = [r] * self.hp.single_depth
        self.net0 = self._mlp(rng, "net0", self.k, arm, 1, out_activation="sigmoid")
        self.net1 = self._mlp(rng, "net1", self.k, arm, 1, out_activation="sigmoid")
        self._register(self.net0, self.net1)

    def _loss(self, x, t, y, training, rng):
        xn = self._normed(x, training)
        total = factual_mse(self.net0(xn), self.net1(xn), t, y)
        return total, {"factual": float(total.values)}

    def _potential(self, x):
        return self.net0(x), self.net1(x)


class BNN(UpliftModel):
    """Shared representation feeding one predictor over (phi, t), with a
    representation-balance penalty between the groups' embeddings."""

    kind = ModelKind.BNN

    def _build(self, rng):
        r = self.hp.rank
        hp = self.hp
        self.phi = self._mlp(rng, "phi", self.k, [r] * hp.repr_depth, r,
                             out_activation=hp.activation)
        head_hidden = [r] * max(1, hp.single_depth - hp.repr_depth)
        self.head = self._mlp(rng, "head", r + 1, head_hidden, 1,
                              out_activation="sigmoid")
        self._register(self.phi, self.head)

    def _loss(self, x, t, y, training, rng):
        phi = self.phi(self._normed(x, training))
        pred = self.head(concat([phi, t]))
        factual = mse(pred, y)
        balance = linear_mmd2(phi, t.values, self.kind.value)
        total = factual + self.hp.alpha * balance
        return total, {"factual": float(factual.values), "balance": float(balance.values)}

    def _potential(self, x):
        phi = self.phi(x)
        zeros = Tensor(np.zeros((x.shape[0], 1)))
        ones = Tensor(np.ones((x.shape[0], 1)))
        return self.head(concat([phi, zeros])), self.head(concat([phi, ones]))


class TARNet(UpliftModel):
    """Shared representation with two outcome heads; t selects the branch."""

    kind = ModelKind.TARNET

    def _build(self, rng):
        r = self.hp.rank
        hp = self.hp
        self.phi = self._mlp(rng, "phi", self.k, [r] * hp.repr_depth, r,
                             out_activation=hp.activation)
        self.head0 = self._mlp(rng, "head0", r, [r] * hp.head_depth, 1,
                               out_activation="sigmoid")
        self.head1 = self._mlp(rng, "head1", r, [r] * hp.head_depth, 1,
                               out_activation="sigmoid")
        self._register(self.phi, self.head0, self.head1)

    def _heads(self, x):
        phi = self.phi(x)
        return phi, self.head0(phi), self.head1(phi)

    def _loss(self, x, t, y, training, rng):
        _, y0, y1 = self._heads(self._normed(x, training))
        total = factual_mse(y0, y1, t, y)
        return total, {"factual": float(total.values)}

    def _potential(self, x):
        _, y0, y1 = self._heads(x)
        return y0, y1


class CFRNet(TARNet):
    """TARNet plus an integral-probability-metric penalty (squared
    linear-kernel MMD) between the groups' representations."""

    kind = ModelKind.CFRNET

    def _loss(self, x, t, y, training, rng):
        phi, y0, y1 = self._heads(self._normed(x, training))
        factual = factual_mse(y0, y1, t, y)
        ipm = linear_mmd2(phi, t.values, self.kind.value)
        total = factual + self.hp.alpha * ipm
        return total, {"factual": float(factual.values), "ipm": float(ipm.values)}


class DragonNet(UpliftModel):
    """Shared representation, two outcome heads, a propensity head with
    cross-entropy on t, and a targeted-regularization term with a learnable
    scalar fluctuation parameter."""

    kind = ModelKind.DRAGONNET

    def _build(self, rng):
        r = self.hp.rank
        hp = self.hp
        self.phi = self._mlp(rng, "phi", self.k, [r] * hp.repr_depth, r,
                             out_activation=hp.activation)
        self.head0 = self._mlp(rng, "head0", r, [r] * hp.head_depth, 1,
                               out_activation="sigmoid")
        self.head1 = self._mlp(rng, "head1", r, [r] * hp.head_depth, 1,
                               out_activation="sigmoid")
        self.prop = self._mlp(rng, "prop", r, [], 1, out_activation="sigmoid")
        self._register(self.phi, self.head0, self.head1, self.prop)
        self.eps_tilde = parameter(np.zeros((1, 1)), "eps_tilde")
        self.params["eps_tilde"] = self.eps_tilde

    def _loss(self, x, t, y, training, rng):
        phi = self.phi(self._normed(x, training))
        y0, y1 = self.head0(phi), self.head1(phi)
        g = clip_prob(self.prop(phi))
        factual = factual_mse(y0, y1, t, y)
        prop_ce = bce(g, t)
        y_factual = y0 * (1.0 - t.values) + y1 * t.values
        h = t / g - (1.0 - t) / (1.0 - g)
        resid = y - y_factual - self.eps_tilde * h
        targeted = tmean(resid * resid)
        total = factual + self.hp.alpha * prop_ce + self.hp.alpha * targeted
        return total, {
            "factual": float(factual.values),
            "propensity": float(prop_ce.values),
            "targeted": float(targeted.values),
        }

    def _potential(self, x):
        phi = self.phi(x)
        return self.head0(phi), self.head1(phi)


class SNet(UpliftModel):
    """Five representation blocks (confounding-shared, outcome-shared,
    per-arm specific, propensity-specific) wired into two outcome heads and
    one propensity head, with an orthogonality penalty between the blocks'
    first-layer weights."""

    kind = ModelKind.SNET

    BLOCKS = ("conf", "out", "arm0", "arm1", "prop")

    def _build(self, rng):
        r = self.hp.rank
        rb = max(8, r // 2)
        hp = self.hp
        self.blocks = {
            name: self._mlp(rng, f"block_{name}", self.k, [rb] * hp.repr_depth, rb,
                            out_activation=hp.activation)
            for name in self.BLOCKS
        }
        self.head0 = self._mlp(rng, "head0", 3 * rb, [r] * hp.head_depth, 1,
                               out_activation="sigmoid")
        self.head1 = self._mlp(rng, "head1", 3 * rb, [r] * hp.head_depth, 1,
                               out_activation="sigmoid")
        self.prop_head = self._mlp(rng, "prop_head", 2 * rb, [r], 1,
                                   out_activation="sigmoid")
        self._register(*self.blocks.values(), self.head0, self.head1, self.prop_head)

    def _first_layer_weights(self):
        return [self.blocks[name].layers[0].weight for name in self.BLOCKS]

    def _orthogonality(self) -> Tensor:
        weights = self._first_layer_weights()
        total = Tensor(0.0)
        for i in range(len(weights)):
            for j in range(i + 1, len(weights)):
                overlap = swap_last_axes(weights[i]) @ weights[j]
                total = total + tmean(overlap * overlap)
        return total

    def _reps(self, x):
        return {name: block(x) for name, block in self.blocks.items()}

    def _loss(self, x, t, y, training, rng):
        reps = self._reps(self._normed(x, training))
        y0 = self.head0(concat([reps["conf"], reps["out"], reps["arm0"]]))
        y1 = self.head1(concat([reps["conf"], reps["out"], reps["arm1"]]))
        g = clip_prob(self.prop_head(concat([reps["conf"], reps["prop"]])))
        factual = factual_mse(y0, y1, t, y)
        prop_ce = bce(g, t)
        ortho = self._orthogonality()
        total = factual + self.hp.alpha * prop_ce + self.hp.alpha * ortho
        return total, {
            "factual": float(factual.values),
            "propensity": float(prop_ce.values),
            "orthogonality": float(ortho.values),
        }

    def _potential(self, x):
        reps = self._reps(x)
        y0 = self.head0(concat([reps["conf"], reps["out"], reps["arm0"]]))
        y1 = self.head1(concat([reps["conf"], reps["out"], reps["arm1"]]))
        return y0, y1


class FlexTENet(UpliftModel):
    """Layered shared + per-outcome private subspaces; parallel weight
    matrices are pushed orthogonal on their common input columns."""

    kind = ModelKind.FLEXTENET

    def _build(self, rng):
        r = self.hp.rank
        rs = max(4, r // 2)
        rp = max(4, r // 2)
        self.rs, self.rp = rs, rp
        self.s1 = Linear(rng, "s1", self.k, rs)
        self.p0_1 = Linear(rng, "p0_1", self.k, rp)
        self.p1_1 = Linear(rng, "p1_1", self.k, rp)
        self.s2 = Linear(rng, "s2", rs, rs)
        self.p0_2 = Linear(rng, "p0_2", rs + rp, rp)
        self.p1_2 = Linear(rng, "p1_2", rs + rp, rp)
        self.head0 = Linear(rng, "head0", rs + rp, 1)
        self.head1 = Linear(rng, "head1", rs + rp, 1)
        self._register(self.s1, self.p0_1, self.p1_1, self.s2, self.p0_2,
                       self.p1_2, self.head0, self.head1)

    @staticmethod
    def _pair_penalty(a: Tensor, b: Tensor) -> Tensor:
        overlap = swap_last_axes(a) @ b
        return tmean(overlap * overlap)

    def _orthogonality(self) -> Tensor:
        rs = self.rs
        pen = self._pair_penalty(self.s1.weight, self.p0_1.weight)
        pen = pen + self._pair_penalty(self.s1.weight, self.p1_1.weight)
        pen = pen + self._pair_penalty(self.p0_1.weight, self.p1_1.weight)
        # layer 2 and heads share only the s-subspace input rows
        p0_shared = slice_axis(self.p0_2.weight, 0, rs, axis=0)
        p1_shared = slice_axis(self.p1_2.weight, 0, rs, axis=0)
        pen = pen + self._pair_penalty(self.s2.weight, p0_shared)
        pen = pen + self._pair_penalty(self.s2.weight, p1_shared)
        pen = pen + self._pair_penalty(p0_shared, p1_shared)
        h0_shared = slice_axis(self.head0.weight, 0, rs, axis=0)
        h1_shared = slice_axis(self.head1.weight, 0, rs, axis=0)
        pen = pen + self._pair_penalty(h0_shared, h1_shared)
        return pen

    def _forward(self, x):
        act = ACTIVATIONS[self.hp.activation]
        s1 = act(self.s1(x))
        p0 = act(self.p0_1(x))
        p1 = act(self.p1_1(x))
        s2 = act(self.s2(s1))
        p0 = act(self.p0_2(concat([s1, p0])))
        p1 = act(self.p1_2(concat([s1, p1])))
        y0 = sigmoid(self.head0(concat([s2, p0])))
        y1 = sigmoid(self.head1(concat([s2, p1])))
        return y0, y1

    def _loss(self, x, t, y, training, rng):
        y0, y1 = self._forward(self._normed(x, training))
        factual = factual_mse(y0, y1, t, y)
        ortho = self._orthogonality()
        total = factual + self.hp.alpha * ortho
        return total, {"factual": float(factual.values), "orthogonality": float(ortho.values)}

    def _potential(self, x):
        return self._forward(x)


class EUEN(UpliftModel):
    """Control-response subnetwork c(x) and uplift subnetwork u(x);
    y0 = sigmoid(c), y1 = sigmoid(c + u)."""

    kind = ModelKind.EUEN

    def _build(self, rng):
        r = self.hp.rank
        hidden = [r] * self.hp.repr_depth
        self.c_net = self._mlp(rng, "c_net", self.k, hidden, 1)
        self.u_net = self._mlp(rng, "u_net", self.k, hidden, 1)
        self._register(self.c_net, self.u_net)

    def _forward(self, x):
        c = self.c_net(x)
        u = self.u_net(x)
        return sigmoid(c), sigmoid(c + u)

    def _loss(self, x, t, y, training, rng):
        y0, y1 = self._forward(self._normed(x, training))
        total = factual_mse(y0, y1, t, y)
        return total, {"factual": float(total.values)}

    def _potential(self, x):
        return self._forward(x)


class DESCN(UpliftModel):
    """Shared representation with propensity, per-arm response and
    pseudo-treatment-effect heads trained jointly: entire-space response
    products with the propensity, a cross-network consistency term, and
    propensity cross entropy."""

    kind = ModelKind.DESCN

    def _build(self, rng):
        r = self.hp.rank
        hp = self.hp
        self.phi = self._mlp(rng, "phi", self.k, [r] * hp.repr_depth, r,
                             out_activation=hp.activation)
        self.mu0 = self._mlp(rng, "mu0", r, [r], 1, out_activation="sigmoid")
        self.mu1 = self._mlp(rng, "mu1", r, [r], 1, out_activation="sigmoid")
        self.prop = self._mlp(rng, "prop", r, [r], 1, out_activation="sigmoid")
        self.tau_net = self._mlp(rng, "tau_net", r, [r], 1, out_activation="tanh")
        self._register(self.phi, self.mu0, self.mu1, self.prop, self.tau_net)

    def _loss(self, x, t, y, training, rng):
        phi = self.phi(self._normed(x, training))
        mu0, mu1 = self.mu0(phi), self.mu1(phi)
        pi = clip_prob(self.prop(phi))
        tau_p = self.tau_net(phi)

        factual = factual_mse(mu0, mu1, t, y)
        prop_ce = bce(pi, t)
        es_treated = mse(pi * mu1, t * y)
        es_control = mse((1.0 - pi) * mu0, (1.0 - t) * y)
        cross_res = (mu0 + tau_p - y) * t.values + (mu1 - tau_p - y) * (1.0 - t.values)
        cross = tmean(cross_res * cross_res)
        total = factual + self.hp.alpha * (prop_ce + es_treated + es_control + cross)
        return total, {
            "factual": float(factual.values),
            "propensity": float(prop_ce.values),
            "entire_space": float(es_treated.values + es_control.values),
            "cross": float(cross.values),
        }

    def _potential(self, x):
        phi = self.phi(x)
        return self.mu0(phi), self.mu1(phi)
