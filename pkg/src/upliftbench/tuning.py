"""Hyperparameter search with validation-QINI selection.

The search space is the fixed protocol grid; trials sample from it (seeded
random, or exhaustive lexicographic grid), train under the shared loop with
patience-5 early stopping, and the best trial is the non-diverged one with
the highest validation QINI (ties go to the earlier trial index).
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datapipe import UpliftDataset
from .metrics import EvalReport, evaluate_uplift
from .models import ModelHyperparams, ModelKind, TrainingDiverged, build, train


class SearchFailed(RuntimeError):
    """Every trial diverged; carries the per-trial records for the report."""

    def __init__(self, message, trials):
        super().__init__(message)
        self.trials = trials


@dataclass(frozen=True)
class SearchSpace:
    """The tuned axes and their value grids."""

    rank: tuple[int, ...] = (32, 64, 128)
    batch_size: tuple[int, ...] = (256, 512, 1024, 2048)
    lr: tuple[float, ...] = (1e-4, 5e-4, 1e-3, 5e-3, 1e-2)
    weight_decay: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2)
    alpha: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

    @property
    def axes(self) -> tuple[tuple, ...]:
        return (self.rank, self.batch_size, self.lr, self.weight_decay, self.alpha)


def grid_size(space: SearchSpace) -> int:
    return math.prod(len(axis) for axis in space.axes)


def sample_config(space: SearchSpace, seed_or_index: int, strategy: str = "random",
                  base: ModelHyperparams | None = None) -> ModelHyperparams:
    """One configuration from the space.

    strategy="random": independent uniform draw per axis, seeded by
    ``seed_or_index``. strategy="grid": ``seed_or_index`` is the
    lexicographic enumeration index (rank slowest, alpha fastest).
    Non-tuned architecture fields (activation, depths) come from ``base``.
    """
    if strategy == "random":
        rng = np.random.default_rng(seed_or_index)
        values = [axis[rng.integers(len(axis))] for axis in space.axes]
    elif strategy == "grid":
        index = seed_or_index
        if not 0 <= index < grid_size(space):
            raise ValueError(f"grid index {index} out of range [0, {grid_size(space)})")
        values = []
        for axis in reversed(space.axes):
            index, pos = divmod(index, len(axis))
            values.append(axis[pos])
        values.reverse()
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    rank, bs, lr, wd, alpha = values
    base = base or ModelHyperparams()
    return dataclasses.replace(base, rank=int(rank), lr=float(lr),
                               weight_decay=float(wd), batch_size=int(bs),
                               alpha=float(alpha))


@dataclass
class Trial:
    """One sampled configuration and its outcome."""

    index: int
    hp: ModelHyperparams
    seed: int
    status: str = "pending"  # completed | early-stopped | diverged
    trajectory: list[float] = field(default_factory=list)
    valid_report: EvalReport | None = None
    test_report: EvalReport | None = None
    telemetry: dict = field(default_factory=dict)
    error: str = ""
    checkpoint: str = ""

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "config": self.hp.as_dict(),
            "seed": self.seed,
            "status": self.status,
            "trajectory": self.trajectory,
            "valid_report": None if self.valid_report is None else self.valid_report.as_dict(),
            "test_report": None if self.test_report is None else self.test_report.as_dict(),
            "telemetry": self.telemetry,
            "error": self.error,
            "checkpoint": self.checkpoint,
        }


@dataclass
class SearchResult:
    best_index: int
    trials: list[Trial]

    @property
    def best(self) -> Trial:
        return self.trials[self.best_index]


def _trial_seeds(base_seed: int, index: int) -> tuple[int, int]:
    """(config sample seed, model/train seed) for one trial; pure arithmetic."""
    return base_seed * 1_000_003 + index, base_seed * 100_003 + index


def run_trial(kind: ModelKind, train_set: UpliftDataset, valid_set: UpliftDataset,
              test_set: UpliftDataset | None, space: SearchSpace, index: int,
              base_seed: int, strategy: str = "random", feature_norm: bool = False,
              max_epochs: int = 20, patience: int = 5,
              checkpoint_dir: str | Path | None = None,
              hp_defaults: ModelHyperparams | None = None) -> Trial:
    """Sample, train and evaluate one configuration."""
    sample_seed, model_seed = _trial_seeds(base_seed, index)
    if strategy == "grid":
        hp = sample_config(space, index, "grid", base=hp_defaults)
    else:
        hp = sample_config(space, sample_seed, "random", base=hp_defaults)
    trial = Trial(index=index, hp=hp, seed=model_seed)
    model = build(kind, train_set.k, hp, feature_norm=feature_norm, seed=model_seed)
    try:
        train(model, train_set, valid_set, hp, metric_for_stopping="qini",
              max_epochs=max_epochs, patience=patience, seed=model_seed)
    except TrainingDiverged as exc:
        trial.status = "diverged"
        trial.error = str(exc)
        return trial
    trial.trajectory = list(model.qini_trajectory)
    trial.telemetry = model.telemetry.as_dict()
    trial.status = "early-stopped" if model.telemetry.epochs < max_epochs else "completed"
    kind_value = ModelKind(kind).value
    trial.valid_report = evaluate_uplift(
        model.predict_uplift(valid_set.X), valid_set.t, valid_set.y,
        split="valid", model=kind_value, seed=model_seed)
    if test_set is not None:
        trial.test_report = evaluate_uplift(
            model.predict_uplift(test_set.X), test_set.t, test_set.y,
            split="test", model=kind_value, seed=model_seed)
    if checkpoint_dir is not None:
        from .models import save_checkpoint

        prefix = Path(checkpoint_dir) / f"{kind_value}_trial{index:03d}"
        save_checkpoint(model, prefix)
        trial.checkpoint = str(prefix)
    return trial


def run_search(kind: ModelKind, train_set: UpliftDataset, valid_set: UpliftDataset,
               test_set: UpliftDataset | None, space: SearchSpace, budget: int,
               base_seed: int, strategy: str = "random", feature_norm: bool = False,
               max_epochs: int = 20, patience: int = 5, workers: int = 1,
               log_dir: str | Path | None = None,
               checkpoint_dir: str | Path | None = None,
               hp_defaults: ModelHyperparams | None = None) -> SearchResult:
    """Run ``budget`` independent trials and select the best by validation QINI.

    Trials are embarrassingly parallel; selection sorts by trial index first,
    so the result does not depend on completion order. Raises SearchFailed if
    every trial diverged.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    args = [
        (kind, train_set, valid_set, test_set, space, i, base_seed, strategy,
         feature_norm, max_epochs, patience, checkpoint_dir, hp_defaults)
        for i in range(budget)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial_args, args))
    else:
        trials = [_run_trial_args(a) for a in args]
    trials.sort(key=lambda tr: tr.index)

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        kind_value = ModelKind(kind).value
        for trial in trials:
            path = log_dir / f"{kind_value}_trial{trial.index:03d}.json"
            path.write_text(json.dumps(trial.as_dict(), indent=2, sort_keys=True))

    best_index = -1
    best_qini = -np.inf
    for trial in trials:
        if trial.status == "diverged" or trial.valid_report is None:
            continue
        if trial.valid_report.qini > best_qini:
            best_qini = trial.valid_report.qini
            best_index = trial.index
    if best_index < 0:
        raise SearchFailed(f"all {budget} trials diverged for {ModelKind(kind).value}",
                           trials)
    return SearchResult(best_index=best_index, trials=trials)


def _run_trial_args(args) -> Trial:
    return run_trial(*args)
