"""Epoch loop shared by every model kind: seeded batches, AdamW updates,
per-epoch validation scoring with a best-snapshot early stop."""

from __future__ import annotations

import time

import numpy as np

from ..datapipe import UpliftDataset, make_batches
from ..metrics import MetricError, qini_coefficient, rank_and_accumulate
from ..numerics import NonFiniteGradient
from .base import ModelHyperparams, UpliftModel


class TrainingDiverged(RuntimeError):
    """Loss or gradient went non-finite; the trial should be reported, not crashed."""


def validation_qini(model: UpliftModel, valid: UpliftDataset) -> float:
    curve = rank_and_accumulate(model.predict_uplift(valid.X), valid.t, valid.y)
    return qini_coefficient(curve)


def train(model: UpliftModel, train_set: UpliftDataset, valid_set: UpliftDataset,
          hp: ModelHyperparams | None = None, metric_for_stopping="qini",
          max_epochs: int = 20, patience: int = 5, seed: int = 0) -> UpliftModel:
    """Train in place and return the model with telemetry attached.

    metric_for_stopping: "qini" scores validation QINI after each epoch,
    keeps the best-scoring parameter snapshot and stops after ``patience``
    epochs without improvement; any callable (model, valid_set) -> float is
    used the same way; None disables early stopping entirely (all epochs run,
    final parameters kept). Raises TrainingDiverged on non-finite loss or
    gradients.
    """
    if hp is None:
        hp = model.hp
    if metric_for_stopping == "qini":
        metric_fn = validation_qini
    else:
        metric_fn = metric_for_stopping
    if metric_fn is not None and (valid_set.t.sum() == 0 or valid_set.t.sum() == valid_set.n):
        raise ValueError("validation set must contain both treatment groups")

    optimizers = model.make_optimizers(hp)
    indices = np.arange(train_set.n)
    best_metric = -np.inf
    best_state = None
    best_epoch = 0
    strikes = 0
    trajectory: list[float] = []
    epochs_run = 0
    start = time.monotonic()

    try:
        for epoch in range(1, max_epochs + 1):
            for batch in make_batches(train_set, indices, hp.batch_size,
                                      shuffle_seed=seed * 100003 + epoch):
                if len(batch) < 2 and model.input_norm is not None:
                    continue  # train-mode batch norm needs >= 2 rows
                model.train_step(train_set.X[batch], train_set.t[batch],
                                 train_set.y[batch], optimizers)
            epochs_run = epoch
            if metric_fn is None:
                continue
            metric = float(metric_fn(model, valid_set))
            trajectory.append(metric)
            if metric > best_metric:
                best_metric = metric
                best_epoch = epoch
                best_state = model.snapshot()
                strikes = 0
            else:
                strikes += 1
            if strikes >= patience:
                break
    except (FloatingPointError, NonFiniteGradient, MetricError) as exc:
        raise TrainingDiverged(f"{model.kind.value}: {exc}") from exc

    if best_state is not None:
        model.restore(best_state)

    model.telemetry.seconds = time.monotonic() - start
    model.telemetry.epochs = epochs_run
    model.telemetry.best_epoch = best_epoch if best_state is not None else epochs_run
    model.telemetry.parameter_count = model.parameter_count()
    model.qini_trajectory = trajectory
    return model
