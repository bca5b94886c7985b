"""Checkpoint format: one flat little-endian float64 binary of named tensors
plus a JSON manifest (kind, hyperparameters, seed, telemetry, tensor table)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .base import ModelHyperparams, ModelKind, TrainTelemetry, UpliftModel


def save_checkpoint(model: UpliftModel, prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    table = []
    chunks = []
    offset = 0
    for group, tensors in (("param", model.params.items()),
                           ("buffer", model.buffers().items())):
        for name, tensor in tensors:
            values = tensor.values if group == "param" else tensor
            raw = np.ascontiguousarray(values, dtype="<f8").tobytes()
            table.append({"name": name, "offset": offset,
                          "shape": list(np.shape(values)), "group": group})
            chunks.append(raw)
            offset += len(raw)
    bin_path = prefix.with_suffix(".bin")
    bin_path.write_bytes(b"".join(chunks))
    manifest = {
        "kind": model.kind.value,
        "feature_count": model.k,
        "feature_norm": model.input_norm is not None,
        "seed": model.seed,
        "hyperparams": model.hp.as_dict(),
        "telemetry": model.telemetry.as_dict(),
        "dtype": "<f8",
        "tensors": table,
    }
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return bin_path, json_path


def load_checkpoint(prefix) -> UpliftModel:
    from . import build  # registry lives in the package root

    prefix = Path(prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text())
    raw = prefix.with_suffix(".bin").read_bytes()
    model = build(
        ModelKind(manifest["kind"]),
        manifest["feature_count"],
        ModelHyperparams(**manifest["hyperparams"]),
        feature_norm=manifest["feature_norm"],
        seed=manifest["seed"],
    )
    state = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(raw, dtype="<f8", count=count,
                               offset=entry["offset"]).reshape(shape).copy()
        state[entry["name"]] = values
    model.restore(state)
    model.telemetry = TrainTelemetry(**manifest["telemetry"])
    return model
