"""Common interface of the model zoo: every predictor is built from
(kind, feature count, hyperparameters, feature-norm flag, seed), exposes a
composite training loss, and predicts both potential outcomes so uplift is
always their difference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..numerics import (
    PROB_EPS,
    BatchNormLayer,
    Tensor,
    clip,
    group_mean,
    input_tensor,
    log,
    tmean,
    tsum,
)

logger = logging.getLogger(__name__)


class ModelKind(str, Enum):
    SLEARNER = "SLearner"
    TLEARNER = "TLearner"
    BNN = "BNN"
    TARNET = "TARNet"
    CFRNET = "CFRNet"
    CEVAE = "CEVAE"
    GANITE = "GANITE"
    DRAGONNET = "DragonNet"
    FLEXTENET = "FlexTENet"
    SNET = "SNet"
    EUEN = "EUEN"
    DESCN = "DESCN"
    EFIN = "EFIN"


# How the treatment indicator is used: switch-family models read t only to
# select a branch; feature-family models feed it (or a derived signal) into
# the network itself.
SWITCH_FAMILY = frozenset(
    {ModelKind.TLEARNER, ModelKind.TARNET, ModelKind.CFRNET, ModelKind.FLEXTENET,
     ModelKind.EUEN}
)
FEATURE_FAMILY = frozenset(
    {ModelKind.BNN, ModelKind.SLEARNER, ModelKind.DRAGONNET, ModelKind.SNET,
     ModelKind.GANITE, ModelKind.CEVAE, ModelKind.DESCN, ModelKind.EFIN}
)


def family_of(kind: ModelKind) -> str:
    return "switch" if kind in SWITCH_FAMILY else "feature"


@dataclass
class ModelHyperparams:
    """One point of the search space, plus fixed architecture defaults.

    The first five fields are the tuned axes. The rest are protocol
    constants exposed as overrides: hidden activation ("elu", "tanh" or
    "sigmoid") and the depth conventions (hidden layers per shared
    representation, per outcome head, and per single-network model).
    """

    rank: int = 64
    lr: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 512
    alpha: float = 0.5
    activation: str = "elu"
    repr_depth: int = 2
    head_depth: int = 2
    single_depth: int = 3

    def as_dict(self) -> dict:
        return {
            "rank": self.rank,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "alpha": self.alpha,
            "activation": self.activation,
            "repr_depth": self.repr_depth,
            "head_depth": self.head_depth,
            "single_depth": self.single_depth,
        }


@dataclass
class TrainTelemetry:
    seconds: float = 0.0
    epochs: int = 0
    best_epoch: int = 0
    parameter_count: int = 0

    def as_dict(self) -> dict:
        return {
            "seconds": self.seconds,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "parameter_count": self.parameter_count,
        }


def clip_prob(p: Tensor) -> Tensor:
    return clip(p, PROB_EPS, 1.0 - PROB_EPS)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    d = pred - target
    return tmean(d * d)


def factual_mse(y0_hat: Tensor, y1_hat: Tensor, t: Tensor, y: Tensor) -> Tensor:
    """Mean squared error of the factual-branch prediction over the batch."""
    pred = y0_hat * (1.0 - t.values) + y1_hat * t.values
    return mse(pred, y)


def bce(p: Tensor, target: Tensor) -> Tensor:
    """Binary cross entropy on already-[0,1] probabilities (clipped before log)."""
    p = clip_prob(p)
    return tmean(-(target * log(p) + (1.0 - target) * log(1.0 - p)))


def linear_mmd2(phi: Tensor, t_values: np.ndarray, owner: str = "") -> Tensor:
    """Squared linear-kernel MMD between the two groups' representations.

    Returns a constant 0 (with a logged warning) when either group is empty,
    so batches from one group alone remain usable.
    """
    mask1 = t_values.ravel() == 1
    if mask1.all() or not mask1.any():
        logger.warning("%s: single-group batch, representation-balance term is 0", owner)
        return Tensor(0.0)
    diff = group_mean(phi, mask1) - group_mean(phi, ~mask1)
    return tsum(diff * diff)


class UpliftModel:
    """Base two-head predictor.

    Subclasses implement _build (registering parameters), _loss (returning
    the scalar total and a term breakdown) and _potential (returning the two
    outcome-head tensors in inference mode). Parameters live in ``params``;
    non-learnable state (batch-norm running statistics) in buffers.
    """

    kind: ModelKind

    def __init__(self, k: int, hp: ModelHyperparams, feature_norm: bool = False,
                 seed: int = 0):
        if k < 1:
            raise ValueError("need at least one feature")
        self.k = k
        self.hp = hp
        self.seed = seed
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB0D]))
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1717]))
        self.params: dict[str, Tensor] = {}
        self.input_norm = (
            BatchNormLayer(init_rng, "input_norm", k) if feature_norm else None
        )
        if self.input_norm is not None:
            self.params.update(self.input_norm.parameters())
        self._build(init_rng)
        self.telemetry = TrainTelemetry(parameter_count=self.parameter_count())
        self.qini_trajectory: list[float] = []

    # subclass hooks -------------------------------------------------------
    def _build(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _loss(self, x: Tensor, t: Tensor, y: Tensor, training: bool,
              rng: np.random.Generator) -> tuple[Tensor, dict[str, float]]:
        raise NotImplementedError

    def _potential(self, x: Tensor) -> tuple[Tensor, Tensor]:
        raise NotImplementedError

    # shared surface -------------------------------------------------------
    def _register(self, *modules) -> None:
        for module in modules:
            self.params.update(module.parameters())

    def _mlp(self, rng, name, in_dim, hidden, out_dim, out_activation=None):
        """MLP with this model's configured hidden activation."""
        from ..numerics import MLP

        return MLP(rng, name, in_dim, hidden, out_dim,
                   out_activation=out_activation,
                   hidden_activation=self.hp.activation)

    def _inputs(self, X, t=None, y=None):
        x = input_tensor(np.atleast_2d(X), "X")
        if x.shape[1] != self.k:
            raise ValueError(f"expected {self.k} features, got {x.shape[1]}")
        out = [x]
        if t is not None:
            out.append(input_tensor(np.asarray(t, dtype=np.float64).reshape(-1, 1), "t"))
        if y is not None:
            out.append(input_tensor(np.asarray(y, dtype=np.float64).reshape(-1, 1), "y"))
        return out if len(out) > 1 else out[0]

    def _normed(self, x: Tensor, training: bool) -> Tensor:
        if self.input_norm is None:
            return x
        return self.input_norm(x, training=training)

    def loss(self, X, t, y, training: bool = True,
             rng: np.random.Generator | None = None) -> tuple[Tensor, dict[str, float]]:
        """Composite scalar loss (factual + alpha-weighted auxiliaries)."""
        x, t_in, y_in = self._inputs(X, t, y)
        if x.shape[0] == 0:
            raise ValueError("empty batch")
        total, breakdown = self._loss(x, t_in, y_in, training, rng or self.rng)
        if not np.isfinite(total.values).all():
            raise FloatingPointError(f"{self.kind.value}: non-finite loss")
        return total, breakdown

    def predict_potential(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic inference-mode (y0_hat, y1_hat), each in [0, 1]."""
        x = self._inputs(X)
        y0, y1 = self._potential(self._normed(x, training=False))
        return y0.values.ravel().copy(), y1.values.ravel().copy()

    def predict_uplift(self, X) -> np.ndarray:
        y0, y1 = self.predict_potential(X)
        return y1 - y0

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def buffers(self) -> dict[str, np.ndarray]:
        return {} if self.input_norm is None else dict(self.input_norm.buffers())

    def snapshot(self) -> dict[str, np.ndarray]:
        state = {name: p.values.copy() for name, p in self.params.items()}
        for name, buf in self.buffers().items():
            state[name] = buf.copy()
        return state

    def restore(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.values = state[name].copy()
        if self.input_norm is not None:
            self.input_norm.running_mean = state["input_norm.running_mean"].copy()
            self.input_norm.running_var = state["input_norm.running_var"].copy()

    def make_optimizers(self, hp: ModelHyperparams) -> dict:
        from ..numerics import AdamW

        return {"all": AdamW(self.params, lr=hp.lr, weight_decay=hp.weight_decay)}

    def train_step(self, X, t, y, optimizers: dict) -> float:
        """One update; default is loss -> backward -> single AdamW step."""
        opt = optimizers["all"]
        opt.zero_grad()
        total, _ = self.loss(X, t, y, training=True)
        total.backward()
        opt.step()
        return float(total.values)
