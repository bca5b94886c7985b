"""The 13-model zoo behind one interface: build from hyperparameters, train
under the shared loop, predict both potential outcomes."""

from __future__ import annotations

from .attention import EFIN
from .base import (
    FEATURE_FAMILY,
    SWITCH_FAMILY,
    ModelHyperparams,
    ModelKind,
    TrainTelemetry,
    UpliftModel,
    family_of,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .generative import CEVAE, GANITE
from .training import TrainingDiverged, train, validation_qini
from .zoo import (
    BNN,
    DESCN,
    EUEN,
    CFRNet,
    DragonNet,
    FlexTENet,
    SLearner,
    SNet,
    TARNet,
    TLearner,
)

MODEL_REGISTRY: dict[ModelKind, type[UpliftModel]] = {
    cls.kind: cls
    for cls in (
        SLearner, TLearner, BNN, TARNet, CFRNet, CEVAE, GANITE,
        DragonNet, FlexTENet, SNet, EUEN, DESCN, EFIN,
    )
}

ALL_KINDS: tuple[ModelKind, ...] = tuple(MODEL_REGISTRY)


def build(kind, k: int, hp: ModelHyperparams | None = None,
          feature_norm: bool = False, seed: int = 0) -> UpliftModel:
    """Instantiate an untrained model of the given kind."""
    try:
        kind = ModelKind(kind)
    except ValueError:
        raise ValueError(f"unknown model kind {kind!r}; known: "
                         f"{', '.join(m.value for m in ALL_KINDS)}") from None
    return MODEL_REGISTRY[kind](k, hp or ModelHyperparams(), feature_norm, seed)


__all__ = [
    "ALL_KINDS",
    "FEATURE_FAMILY",
    "MODEL_REGISTRY",
    "SWITCH_FAMILY",
    "ModelHyperparams",
    "ModelKind",
    "TrainTelemetry",
    "TrainingDiverged",
    "UpliftModel",
    "build",
    "family_of",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    "validation_qini",
]
