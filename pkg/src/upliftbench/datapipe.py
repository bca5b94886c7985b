"""Dataset schema, CSV ingestion, deduplication, seeded splitting, batching
and summary statistics.

Datasets are plain arrays: an n x k float64 covariate matrix, binary
treatment and outcome vectors, and (for synthetic data) a true-uplift vector.
All randomness is routed through numpy Generators seeded explicitly, so every
split and batch order is reproducible across runs and machines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class SchemaError(ValueError):
    """The file or arrays do not match the declared dataset schema."""


@dataclass
class UpliftDataset:
    """Covariates, binary treatment/outcome vectors, optional true uplift."""

    X: np.ndarray
    t: np.ndarray
    y: np.ndarray
    tau_true: np.ndarray | None = None
    name: str = ""
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise SchemaError("X must be a 2-D matrix")
        self.t = _validate_binary(self.t, "treatment", self.X.shape[0])
        self.y = _validate_binary(self.y, "outcome", self.X.shape[0])
        if not np.all(np.isfinite(self.X)):
            bad = int(np.flatnonzero(~np.isfinite(self.X).all(axis=1))[0])
            raise SchemaError(f"non-finite feature value at row {bad}")
        if self.tau_true is not None:
            self.tau_true = np.asarray(self.tau_true, dtype=np.float64).ravel()
            if len(self.tau_true) != self.X.shape[0]:
                raise SchemaError("tau_true length does not match row count")
        if not self.feature_names:
            self.feature_names = [f"f{i}" for i in range(self.X.shape[1])]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "UpliftDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return UpliftDataset(
            X=self.X[indices],
            t=self.t[indices],
            y=self.y[indices],
            tau_true=None if self.tau_true is None else self.tau_true[indices],
            name=self.name,
            feature_names=list(self.feature_names),
        )


def _validate_binary(values, role: str, n: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if len(arr) != n:
        raise SchemaError(f"{role} length {len(arr)} does not match row count {n}")
    bad = np.flatnonzero((arr != 0.0) & (arr != 1.0))
    if len(bad):
        raise SchemaError(f"non-binary {role} value {arr[bad[0]]!r} at row {int(bad[0])}")
    return arr


@dataclass(frozen=True)
class ColumnSchema:
    """Column roles for a CSV file.

    ``features`` None means: every column that is neither treatment nor
    outcome, in file order. For files carrying two outcome labels, `outcome`
    picks which one is the target.
    """

    treatment: str
    outcome: str
    features: tuple[str, ...] | None = None


@dataclass(frozen=True)
class SplitPlan:
    """Seeded split recipe.

    three-way-random partitions one dataset by ``ratios`` (train, valid,
    test). fixed-test splits (train, valid) only; the test set comes from a
    separate file (an externally collected randomized holdout).
    """

    seed: int = 0
    ratios: tuple[float, ...] = (0.8, 0.1, 0.1)
    strategy: str = "three-way-random"

    def __post_init__(self):
        if self.strategy not in ("three-way-random", "fixed-test"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")
        want = 3 if self.strategy == "three-way-random" else 2
        if len(self.ratios) != want:
            raise ValueError(f"{self.strategy} needs {want} ratios, got {len(self.ratios)}")
        if any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("ratios must be non-negative and sum to 1")


@dataclass
class DatasetStats:
    """Summary statistics of one dataset (the fields of the protocol's table)."""

    size: int
    treatment_to_control: float
    positive_ratio: float
    average_uplift: float
    relative_average_uplift: float
    feature_count: int

    def as_dict(self) -> dict:
        return {
            "size": self.size,
            "treatment_to_control": self.treatment_to_control,
            "positive_ratio": self.positive_ratio,
            "average_uplift": self.average_uplift,
            "relative_average_uplift": self.relative_average_uplift,
            "feature_count": self.feature_count,
        }


def load_csv(path, schema: ColumnSchema, name: str = "") -> UpliftDataset:
    """Parse a headered CSV into an UpliftDataset under the given column roles."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    frame = pd.read_csv(path)
    for col in (schema.treatment, schema.outcome):
        if col not in frame.columns:
            raise SchemaError(f"missing column {col!r} in {path.name}")
    if schema.features is None:
        feature_cols = [c for c in frame.columns
                        if c not in (schema.treatment, schema.outcome)]
    else:
        missing = [c for c in schema.features if c not in frame.columns]
        if missing:
            raise SchemaError(f"missing column {missing[0]!r} in {path.name}")
        feature_cols = list(schema.features)
    tau = None
    if "tau_true" in feature_cols:
        feature_cols.remove("tau_true")
        tau = frame["tau_true"].to_numpy(dtype=np.float64)
    return UpliftDataset(
        X=frame[feature_cols].to_numpy(dtype=np.float64),
        t=frame[schema.treatment].to_numpy(dtype=np.float64),
        y=frame[schema.outcome].to_numpy(dtype=np.float64),
        tau_true=tau,
        name=name or path.stem,
        feature_names=feature_cols,
    )


def save_csv(ds: UpliftDataset, path, treatment: str = "treatment",
             outcome: str = "outcome") -> None:
    """Write the dataset in the same schema load_csv ingests.

    tau_true, when present, is written as a sidecar column (load_csv strips
    it back out of the feature set by name).
    """
    columns = {name: ds.X[:, i] for i, name in enumerate(ds.feature_names)}
    columns[treatment] = ds.t.astype(np.int64)
    columns[outcome] = ds.y.astype(np.int64)
    if ds.tau_true is not None:
        columns["tau_true"] = ds.tau_true
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")


def deduplicate(ds: UpliftDataset, scope: str = "row") -> tuple[UpliftDataset, int]:
    """Collapse exact-duplicate rows to their first occurrence.

    scope="row" (default) matches on features AND treatment AND outcome;
    scope="features" matches on features only. Matching is bit-exact on the
    parsed float64 values. Original relative order is preserved. Returns the
    deduplicated dataset and the number of rows removed.
    """
    if scope not in ("row", "features"):
        raise ValueError(f"dedup scope must be 'row' or 'features', got {scope!r}")
    if scope == "row":
        key = np.column_stack((ds.X, ds.t, ds.y))
    else:
        key = ds.X
    key = np.ascontiguousarray(key)
    void_view = key.view([("", key.dtype)] * key.shape[1]).ravel()
    _, first_index = np.unique(void_view, return_index=True)
    keep = np.sort(first_index)
    return ds.subset(keep), ds.n - len(keep)


def split(ds, plan: SplitPlan) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded permutation split into (train, valid, test) index arrays.

    Valid/test sizes are floors of their ratios; the remainder goes to train.
    For the fixed-test strategy the returned test set is empty (it lives in a
    separate file). Index arrays are sorted; identical (seed, n) always gives
    identical output.
    """
    n = ds if isinstance(ds, int) else ds.n
    rng = np.random.default_rng(plan.seed)
    perm = rng.permutation(n)
    if plan.strategy == "three-way-random":
        n_valid = int(np.floor(plan.ratios[1] * n))
        n_test = int(np.floor(plan.ratios[2] * n))
    else:
        n_valid = int(np.floor(plan.ratios[1] * n))
        n_test = 0
    n_train = n - n_valid - n_test
    if n_train <= 0 or n_valid <= 0 or (plan.strategy == "three-way-random" and n_test <= 0):
        raise ValueError(f"split of n={n} under ratios {plan.ratios} leaves an empty part")
    train = np.sort(perm[:n_train])
    valid = np.sort(perm[n_train:n_train + n_valid])
    test = np.sort(perm[n_train + n_valid:])
    return train, valid, test


def compute_stats(ds: UpliftDataset) -> DatasetStats:
    """Size, group ratio, positive ratio and (relative) average uplift."""
    n_treated = int(ds.t.sum())
    n_control = ds.n - n_treated
    if n_treated == 0 or n_control == 0:
        raise ValueError("both treatment groups must be non-empty")
    p_treated = ds.y[ds.t == 1].mean()
    p_control = ds.y[ds.t == 0].mean()
    uplift = p_treated - p_control
    relative = uplift / p_control if p_control > 0 else float("inf")
    return DatasetStats(
        size=ds.n,
        treatment_to_control=n_treated / n_control,
        positive_ratio=float(ds.y.mean()),
        average_uplift=float(uplift),
        relative_average_uplift=float(relative),
        feature_count=ds.k,
    )


def format_stats(stats: DatasetStats, name: str = "") -> str:
    """Aligned text rendering; ratios shown to 2 decimals, rates as percents."""
    rows = [
        ("Size", f"{stats.size:,}"),
        ("Ratio of Treatment to Control", f"{stats.treatment_to_control:.2f}:1"),
        ("Positive Sample Ratio", f"{stats.positive_ratio * 100:.2f}%"),
        ("Average Uplift", f"{stats.average_uplift * 100:.2f}%"),
        ("Relative Average Uplift", f"{stats.relative_average_uplift * 100:.1f}%"),
        ("Features Number", str(stats.feature_count)),
    ]
    width = max(len(label) for label, _ in rows)
    header = [f"Dataset: {name}"] if name else []
    return "\n".join(header + [f"{label:<{width}}  {value}" for label, value in rows])


def stats_to_json(stats: DatasetStats, name: str = "") -> str:
    payload = {"dataset": name, **stats.as_dict()}
    return json.dumps(payload, indent=2, sort_keys=True)


def make_batches(n_or_ds, indices, batch_size: int, shuffle_seed: int) -> list[np.ndarray]:
    """Seeded shuffle of the index set, then contiguous blocks of batch_size.

    The final short block is kept. The first argument is accepted for
    interface symmetry; only the indices drive the result.
    """
    del n_or_ds
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    indices = np.asarray(indices, dtype=np.int64)
    rng = np.random.default_rng(shuffle_seed)
    perm = indices[rng.permutation(len(indices))]
    return [perm[i:i + batch_size] for i in range(0, len(perm), batch_size)]
