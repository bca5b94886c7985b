"""Generative members of the zoo: a latent-variable autoencoder and an
adversarial counterfactual generator.

Both are stochastic during training only: noise comes from a per-model seeded
generator (or one passed explicitly, which the gradient checks use), and
inference reads deterministic components - the latent mean for the
autoencoder, the effect block for the adversarial model.
"""

from __future__ import annotations

import numpy as np

from ..numerics import AdamW, Tensor, clip, concat, exp, slice_axis, tsum
from .base import ModelHyperparams, ModelKind, UpliftModel, bce, mse


class CEVAE(UpliftModel):
    """Latent-confounder autoencoder.

    Encoder q(z|x,t,y) is Gaussian; decoders are Gaussian for x and Bernoulli
    for t and y(.|z,t). The factual term is the MSE of the y-decoder on the
    factual treatment; the alpha-weighted auxiliaries are the remaining
    ELBO pieces (x reconstruction, t cross entropy, KL to the unit prior)
    plus a fit term for the x-only encoder used at inference time.
    """

    kind = ModelKind.CEVAE

    def _build(self, rng):
        r = self.hp.rank
        self.z_dim = max(4, r // 4)
        hidden = [r] * self.hp.repr_depth
        self.encoder = self._mlp(rng, "encoder", self.k + 2, hidden, 2 * self.z_dim)
        self.x_encoder = self._mlp(rng, "x_encoder", self.k, hidden, self.z_dim)
        self.dec_x = self._mlp(rng, "dec_x", self.z_dim, hidden, self.k)
        self.dec_t = self._mlp(rng, "dec_t", self.z_dim, [r], 1, out_activation="sigmoid")
        self.dec_y = self._mlp(rng, "dec_y", self.z_dim + 1, hidden, 1,
                               out_activation="sigmoid")
        self._register(self.encoder, self.x_encoder, self.dec_x, self.dec_t, self.dec_y)

    def _loss(self, x, t, y, training, rng):
        xn = self._normed(x, training)
        enc = self.encoder(concat([xn, t, y]))
        mu = slice_axis(enc, 0, self.z_dim)
        logvar = clip(slice_axis(enc, self.z_dim, 2 * self.z_dim), -10.0, 10.0)
        if training:
            noise = rng.standard_normal((x.shape[0], self.z_dim))
            z = mu + exp(0.5 * logvar) * Tensor(noise)
        else:
            z = mu

        y_hat = self.dec_y(concat([z, t]))
        factual = mse(y_hat, y)
        recon_x = mse(self.dec_x(z), xn.detach())
        ce_t = bce(self.dec_t(z), t)
        kl = tsum(0.5 * (exp(logvar) + mu * mu - 1.0 - logvar)) * (1.0 / x.shape[0])
        # pulls the x-only encoder toward the posterior mean and vice versa
        prior_fit = mse(self.x_encoder(xn), mu)
        aux = recon_x + ce_t + kl + prior_fit
        total = factual + self.hp.alpha * aux
        return total, {
            "factual": float(factual.values),
            "recon_x": float(recon_x.values),
            "treatment_ce": float(ce_t.values),
            "kl": float(kl.values),
            "prior_fit": float(prior_fit.values),
        }

    def _potential(self, x):
        z = self.x_encoder(x)
        zeros = Tensor(np.zeros((x.shape[0], 1)))
        ones = Tensor(np.ones((x.shape[0], 1)))
        return self.dec_y(concat([z, zeros])), self.dec_y(concat([z, ones]))


class GANITE(UpliftModel):
    """Adversarial counterfactual completion plus an effect block.

    The generator proposes both potential outcomes from (x, t, y, noise); the
    discriminator guesses which component of the completed outcome vector was
    observed; the effect block regresses on the completed vector and is the
    only piece used at inference. Training alternates discriminator,
    generator and effect-block AdamW steps 1:1:1 per batch; ``loss`` exposes
    one composite graph of the same terms for gradient checks and reporting.
    """

    kind = ModelKind.GANITE

    def _build(self, rng):
        r = self.hp.rank
        self.noise_dim = max(4, r // 4)
        hp = self.hp
        trunk = [r] * hp.repr_depth
        self.gen_trunk = self._mlp(rng, "gen_trunk", self.k + 2 + self.noise_dim,
                                   trunk, r, out_activation=hp.activation)
        self.gen_head0 = self._mlp(rng, "gen_head0", r, [r], 1, out_activation="sigmoid")
        self.gen_head1 = self._mlp(rng, "gen_head1", r, [r], 1, out_activation="sigmoid")
        self.disc = self._mlp(rng, "disc", self.k + 2, trunk, 1,
                              out_activation="sigmoid")
        self.ite_trunk = self._mlp(rng, "ite_trunk", self.k, trunk, r,
                                   out_activation=hp.activation)
        self.ite_head0 = self._mlp(rng, "ite_head0", r, [r], 1, out_activation="sigmoid")
        self.ite_head1 = self._mlp(rng, "ite_head1", r, [r], 1, out_activation="sigmoid")
        self._register(self.gen_trunk, self.gen_head0, self.gen_head1, self.disc,
                       self.ite_trunk, self.ite_head0, self.ite_head1)
        self._param_groups = {
            "gen": self._collect(self.gen_trunk, self.gen_head0, self.gen_head1),
            "disc": self._collect(self.disc),
            "ite": self._collect(self.ite_trunk, self.ite_head0, self.ite_head1),
        }

    @staticmethod
    def _collect(*modules):
        out = {}
        for m in modules:
            out.update(m.parameters())
        return out

    def _generate(self, xn, t, y, noise):
        h = self.gen_trunk(concat([xn, t, y, Tensor(noise)]))
        return self.gen_head0(h), self.gen_head1(h)

    def _complete(self, g0, g1, t, y):
        tv = t.values
        y0_tilde = y * (1.0 - tv) + g0 * tv
        y1_tilde = y * tv + g1 * (1.0 - tv)
        return y0_tilde, y1_tilde

    def _ite(self, x):
        h = self.ite_trunk(x)
        return self.ite_head0(h), self.ite_head1(h)

    def _loss(self, x, t, y, training, rng):
        xn = self._normed(x, training)
        noise = rng.standard_normal((x.shape[0], self.noise_dim))
        g0, g1 = self._generate(xn, t, y, noise)
        y0_tilde, y1_tilde = self._complete(g0, g1, t, y)
        gen_sup = mse(g1 * t.values + g0 * (1.0 - t.values), y)
        adv = bce(self.disc(concat([xn, y0_tilde, y1_tilde])), t)
        i0, i1 = self._ite(xn)
        cf_match = mse(i0, y0_tilde) + mse(i1, y1_tilde)
        factual = mse(i0 * (1.0 - t.values) + i1 * t.values, y)
        total = factual + self.hp.alpha * (gen_sup + adv + cf_match)
        return total, {
            "factual": float(factual.values),
            "generator_supervised": float(gen_sup.values),
            "adversarial": float(adv.values),
            "counterfactual_match": float(cf_match.values),
        }

    def make_optimizers(self, hp: ModelHyperparams):
        opts = {
            name: AdamW(group, lr=hp.lr, weight_decay=hp.weight_decay)
            for name, group in self._param_groups.items()
        }
        if self.input_norm is not None:
            opts["norm"] = AdamW(self.input_norm.parameters(), lr=hp.lr,
                                 weight_decay=hp.weight_decay)
        return opts

    def train_step(self, X, t, y, optimizers):
        x, t_in, y_in = self._inputs(X, t, y)
        alpha = self.hp.alpha
        xn_live = self._normed(x, True)
        xn_const = Tensor(xn_live.values)
        noise = self.rng.standard_normal((x.shape[0], self.noise_dim))

        def zero_all():
            for p in self.params.values():
                p.grad = None

        # discriminator step: generator outputs held fixed
        g0, g1 = self._generate(xn_const, t_in, y_in, noise)
        y0_fixed, y1_fixed = self._complete(g0.detach(), g1.detach(), t_in, y_in)
        d_loss = bce(self.disc(concat([xn_const, y0_fixed, y1_fixed])), t_in)
        zero_all()
        d_loss.backward()
        optimizers["disc"].step()

        # generator step: supervised factual fit plus fooling the discriminator
        g0, g1 = self._generate(xn_live, t_in, y_in, noise)
        y0_tilde, y1_tilde = self._complete(g0, g1, t_in, y_in)
        gen_sup = mse(g1 * t_in.values + g0 * (1.0 - t_in.values), y_in)
        adv = bce(self.disc(concat([xn_live, y0_tilde, y1_tilde])), t_in)
        g_loss = gen_sup - alpha * adv
        zero_all()
        g_loss.backward()
        optimizers["gen"].step()
        if "norm" in optimizers:
            optimizers["norm"].step()

        # effect-block step on the (pre-update) completed outcome vector
        i0, i1 = self._ite(xn_const)
        ite_loss = mse(i0, y0_fixed) + mse(i1, y1_fixed)
        zero_all()
        ite_loss.backward()
        optimizers["ite"].step()

        total = float(ite_loss.values + g_loss.values + d_loss.values)
        if not np.isfinite(total):
            raise FloatingPointError("GANITE: non-finite training loss")
        return total

    def _potential(self, x):
        return self._ite(x)
