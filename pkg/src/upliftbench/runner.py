"""Benchmark orchestration: run configs, the 2x2 preprocessing matrix,
multi-seed sweeps, and report emission.

A run walks every (preprocessing combo, seed, model) cell: apply the dedup
flag, split with the seeded plan, search hyperparameters with
validation-QINI selection, evaluate the winner on valid and test, and record
one row. Cell failures are isolated; everything except wall-clock time is
deterministic given the config.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .datapipe import ColumnSchema, SplitPlan, UpliftDataset, deduplicate, load_csv, split
from .models import ModelHyperparams, ModelKind
from .synthetic import SyntheticSpec, generate
from .tuning import SearchFailed, SearchSpace, run_search

METRIC_KEYS = ("qini", "auuc", "wau", "lift_at_30")
COMPARISONS = (
    ("dedup_effect@fn=off", ("dedup", True), ("feature_norm", False)),
    ("dedup_effect@fn=on", ("dedup", True), ("feature_norm", True)),
    ("fn_effect@dedup=off", ("feature_norm", True), ("dedup", False)),
    ("fn_effect@dedup=on", ("feature_norm", True), ("dedup", True)),
)


class ConfigError(ValueError):
    """The run config is malformed or inconsistent."""


@dataclass
class RunConfig:
    dataset: dict
    models: list[str]
    dedup: bool = False
    feature_norm: bool = False
    matrix: bool = False
    split_ratios: tuple[float, ...] = (0.8, 0.1, 0.1)
    split_strategy: str = "three-way-random"
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    budget: int = 30
    strategy: str = "random"
    max_epochs: int = 20
    patience: int = 5
    output_dir: str = "runs/bench"
    workers: int = 1
    record_timing: bool = True
    dedup_scope: str = "row"
    # non-tuned architecture overrides (activation, repr/head/single depth)
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.models:
            raise ConfigError("at least one model kind is required")
        for name in self.models:
            ModelKind(name)  # raises ValueError on unknown kinds
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.matrix and (self.dedup or self.feature_norm):
            raise ConfigError("matrix mode and explicit preprocessing flags are exclusive")

    def combos(self) -> list[tuple[bool, bool]]:
        if self.matrix:
            return [(False, False), (False, True), (True, False), (True, True)]
        return [(self.dedup, self.feature_norm)]

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["split_ratios"] = list(self.split_ratios)
        return out


def load_config(path_or_dict) -> RunConfig:
    """Parse a config file (or pre-parsed dict) with env-var overrides.

    UPLIFTBENCH_OUTPUT_DIR and UPLIFTBENCH_WORKERS override the respective
    fields when set.
    """
    if isinstance(path_or_dict, (str, Path)):
        raw = json.loads(Path(path_or_dict).read_text())
    else:
        raw = dict(path_or_dict)

    preprocessing = raw.get("preprocessing", {"dedup": "off", "feature_norm": "off"})
    if preprocessing == "matrix":
        matrix, dedup, fn = True, False, False
    elif isinstance(preprocessing, dict):
        matrix = False
        dedup = _flag(preprocessing.get("dedup", "off"), "dedup")
        fn = _flag(preprocessing.get("feature_norm", "off"), "feature_norm")
    else:
        raise ConfigError("preprocessing must be 'matrix' or {dedup, feature_norm}")

    split_cfg = raw.get("split", {})
    search_cfg = raw.get("search", {})
    config = RunConfig(
        dataset=raw["dataset"],
        models=list(raw["models"]),
        dedup=dedup,
        feature_norm=fn,
        matrix=matrix,
        split_ratios=tuple(split_cfg.get("ratios", (0.8, 0.1, 0.1))),
        split_strategy=split_cfg.get("strategy", "three-way-random"),
        seeds=list(raw.get("seeds", range(10))),
        budget=int(search_cfg.get("budget", 30)),
        strategy=search_cfg.get("strategy", "random"),
        max_epochs=int(search_cfg.get("max_epochs", 20)),
        patience=int(search_cfg.get("patience", 5)),
        output_dir=raw.get("output_dir", "runs/bench"),
        workers=int(raw.get("workers", 1)),
        record_timing=bool(raw.get("record_timing", True)),
        dedup_scope=raw.get("dedup_scope", "row"),
        model_overrides=dict(raw.get("model", {})),
    )
    if "UPLIFTBENCH_OUTPUT_DIR" in os.environ:
        config.output_dir = os.environ["UPLIFTBENCH_OUTPUT_DIR"]
    if "UPLIFTBENCH_WORKERS" in os.environ:
        config.workers = int(os.environ["UPLIFTBENCH_WORKERS"])
    return config


def _flag(value, name: str) -> bool:
    if value in ("on", True, 1):
        return True
    if value in ("off", False, 0):
        return False
    raise ConfigError(f"{name} must be 'on' or 'off', got {value!r}")


def load_dataset(spec: dict) -> tuple[UpliftDataset, UpliftDataset | None]:
    """Materialize (train-side dataset, optional external test dataset)."""
    kind = spec.get("kind")
    if kind == "synthetic":
        fields = {k: v for k, v in spec.items() if k != "kind"}
        return generate(SyntheticSpec(**fields)), None
    if kind == "csv":
        schema = ColumnSchema(
            treatment=spec.get("treatment_column", "treatment"),
            outcome=spec.get("outcome_column", "outcome"),
            features=tuple(spec["feature_columns"]) if spec.get("feature_columns") else None,
        )
        train = load_csv(spec["train_path"], schema, name=spec.get("name", ""))
        test = None
        if spec.get("test_path"):
            test = load_csv(spec["test_path"], schema, name=spec.get("name", "") + "-test")
        return train, test
    raise ConfigError(f"dataset kind must be 'synthetic' or 'csv', got {kind!r}")


@dataclass
class CellResult:
    """One (dataset, preprocessing combo, model, seed) outcome row."""

    dataset: str
    dedup: bool
    feature_norm: bool
    model: str
    seed: int
    status: str = "ok"  # ok | failed
    valid: dict | None = None
    test: dict | None = None
    seconds: float = 0.0
    epochs: int = 0
    params: int = 0
    best_trial: int = -1
    trials: int = 0
    error: str = ""

    def key(self):
        return (self.dataset, self.dedup, self.feature_norm, self.model, self.seed)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BenchmarkReport:
    config: dict
    rows: list[CellResult]
    aggregates: list[dict]
    meta: dict

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "rows": [r.as_dict() for r in self.rows],
            "aggregates": self.aggregates,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "BenchmarkReport":
        raw = json.loads(text)
        rows = [CellResult(**row) for row in raw["rows"]]
        return BenchmarkReport(raw["config"], rows, raw["aggregates"], raw["meta"])


def _cell_base_seed(seed: int, combo_index: int, model_index: int) -> int:
    return (seed * 4 + combo_index) * 64 + model_index


def _run_cell(args) -> CellResult:
    (config_dict, train_set, valid_set, test_set, combo_index, dedup_flag, fn_flag,
     model_name, model_index, seed, trial_dir, checkpoint_dir) = args
    config = RunConfig(**{**config_dict,
                          "split_ratios": tuple(config_dict["split_ratios"])})
    row = CellResult(dataset=train_set.name, dedup=dedup_flag, feature_norm=fn_flag,
                     model=model_name, seed=seed)
    hp_defaults = ModelHyperparams(**config.model_overrides) if config.model_overrides else None
    try:
        result = run_search(
            ModelKind(model_name), train_set, valid_set, test_set,
            SearchSpace(), budget=config.budget,
            base_seed=_cell_base_seed(seed, combo_index, model_index),
            strategy=config.strategy, feature_norm=fn_flag,
            max_epochs=config.max_epochs, patience=config.patience,
            log_dir=trial_dir, checkpoint_dir=checkpoint_dir,
            hp_defaults=hp_defaults,
        )
    except SearchFailed as exc:
        row.status = "failed"
        row.error = str(exc)
        row.trials = len(exc.trials)
        return row
    best = result.best
    row.valid = best.valid_report.as_dict()
    row.test = None if best.test_report is None else best.test_report.as_dict()
    row.seconds = best.telemetry["seconds"] if config.record_timing else 0.0
    row.epochs = best.telemetry["epochs"]
    row.params = best.telemetry["parameter_count"]
    row.best_trial = result.best_index
    row.trials = len(result.trials)
    return row


def run_benchmark(config: RunConfig, run_dir: str | Path | None = None) -> BenchmarkReport:
    """Execute every cell of the config and assemble the report.

    When run_dir is given, per-trial JSON logs and checkpoints are written
    under it as the run progresses.
    """
    base, external_test = load_dataset(config.dataset)
    run_dir = Path(run_dir) if run_dir is not None else None

    cells = []
    removed_by_combo = {}
    for combo_index, (dedup_flag, fn_flag) in enumerate(config.combos()):
        if dedup_flag:
            prepared, removed = deduplicate(base, scope=config.dedup_scope)
        else:
            prepared, removed = base, 0
        removed_by_combo[_combo_label(dedup_flag, fn_flag)] = removed
        for seed in config.seeds:
            plan = SplitPlan(seed=seed, ratios=config.split_ratios,
                             strategy=config.split_strategy)
            train_idx, valid_idx, test_idx = split(prepared, plan)
            train_set = prepared.subset(train_idx)
            valid_set = prepared.subset(valid_idx)
            test_set = external_test if external_test is not None else prepared.subset(test_idx)
            for model_index, model_name in enumerate(config.models):
                trial_dir = checkpoint_dir = None
                if run_dir is not None:
                    cell_name = (f"{_combo_label(dedup_flag, fn_flag)}_seed{seed}"
                                 f"_{model_name}")
                    trial_dir = run_dir / "trials" / cell_name
                    checkpoint_dir = run_dir / "checkpoints" / cell_name
                cells.append((config.as_dict(), train_set, valid_set, test_set,
                              combo_index, dedup_flag, fn_flag, model_name,
                              model_index, seed, trial_dir, checkpoint_dir))

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: r.key())

    report = BenchmarkReport(
        config=config.as_dict(),
        rows=rows,
        aggregates=_aggregate(rows),
        meta={
            "harness_version": __version__,
            "dedup_before_split": True,
            "rows_removed_by_dedup": removed_by_combo,
            "timing_note": "wall seconds use a monotonic clock; not comparable "
                           "across machines (0.0 when record_timing is off)",
        },
    )
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(run_dir / "config.json",
                      json.dumps(config.as_dict(), indent=2, sort_keys=True))
    return report


def _combo_label(dedup: bool, fn: bool) -> str:
    return f"dedup={'on' if dedup else 'off'},fn={'on' if fn else 'off'}"


def _aggregate(rows: list[CellResult]) -> list[dict]:
    """Seed means and standard deviations per (dataset, combo, model)."""
    groups: dict = {}
    for row in rows:
        if row.status != "ok":
            continue
        groups.setdefault((row.dataset, row.dedup, row.feature_norm, row.model),
                          []).append(row)
    aggregates = []
    for (dataset, dedup, fn, model), members in sorted(groups.items()):
        entry = {
            "dataset": dataset,
            "dedup": dedup,
            "feature_norm": fn,
            "model": model,
            "seeds": len(members),
        }
        for split_name in ("valid", "test"):
            for key in METRIC_KEYS:
                values = [getattr(m, split_name)[key] for m in members
                          if getattr(m, split_name) is not None]
                prefix = f"{split_name}_{key}"
                entry[f"{prefix}_mean"] = float(np.mean(values)) if values else None
                entry[f"{prefix}_std"] = float(np.std(values)) if values else None
        for key in ("seconds", "epochs", "params"):
            entry[f"{key}_mean"] = float(np.mean([getattr(m, key) for m in members]))
        aggregates.append(entry)
    return aggregates


# --- emission ---------------------------------------------------------------

CSV_COLUMNS = [
    "dataset", "dedup", "feature_norm", "model", "seed", "status",
    *[f"valid_{k}" for k in METRIC_KEYS],
    *[f"test_{k}" for k in METRIC_KEYS],
    "seconds", "epochs", "params", "best_trial", "trials", "error",
]


def report_to_csv(report: BenchmarkReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        record = []
        for col in CSV_COLUMNS:
            if col.startswith("valid_") or col.startswith("test_"):
                split_name, key = col.split("_", 1)
                metrics = getattr(row, split_name)
                value = "" if metrics is None else repr(metrics[key])
            else:
                value = getattr(row, col)
                if isinstance(value, bool):
                    value = "true" if value else "false"
                elif isinstance(value, float):
                    value = repr(value)
                else:
                    # keep the csv single-line and comma-safe
                    value = str(value).replace(",", ";").replace("\n", " ")
            record.append(value)
        lines.append(",".join(record))
    return "\n".join(lines) + "\n"


def report_from_csv(text: str, config: dict | None = None,
                    meta: dict | None = None) -> BenchmarkReport:
    lines = [line for line in text.splitlines() if line.strip()]
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = dict(zip(header, line.split(",")))
        valid = {k: float(values[f"valid_{k}"]) for k in METRIC_KEYS
                 if values[f"valid_{k}"] != ""}
        test = {k: float(values[f"test_{k}"]) for k in METRIC_KEYS
                if values[f"test_{k}"] != ""}
        rows.append(CellResult(
            dataset=values["dataset"],
            dedup=values["dedup"] == "true",
            feature_norm=values["feature_norm"] == "true",
            model=values["model"],
            seed=int(values["seed"]),
            status=values["status"],
            valid=valid or None,
            test=test or None,
            seconds=float(values["seconds"]),
            epochs=int(values["epochs"]),
            params=int(values["params"]),
            best_trial=int(values["best_trial"]),
            trials=int(values["trials"]),
            error=values["error"],
        ))
    return BenchmarkReport(config or {}, rows, _aggregate(rows), meta or {})


def _mark_top3(values: list[float | None]) -> list[str]:
    """Render a column: best bold, 2nd and 3rd underlined."""
    present = [(v, i) for i, v in enumerate(values) if v is not None]
    ranked = sorted(present, key=lambda pair: -pair[0])
    marks = {}
    if ranked:
        marks[ranked[0][1]] = "**{}**"
    for v, i in ranked[1:3]:
        marks[i] = "<u>{}</u>"
    out = []
    for i, v in enumerate(values):
        if v is None:
            out.append("-")
        else:
            out.append(marks.get(i, "{}").format(f"{v:.4f}"))
    return out


def report_to_markdown(report: BenchmarkReport) -> str:
    """Seed-aggregated tables, one per (dataset, preprocessing combo), with
    the top-3 values per metric column highlighted."""
    chunks = ["# Benchmark report", ""]
    groups: dict = {}
    for agg in report.aggregates:
        groups.setdefault((agg["dataset"], agg["dedup"], agg["feature_norm"]),
                          []).append(agg)
    if not groups:
        chunks.append("_no completed cells_")
    for (dataset, dedup, fn), members in sorted(groups.items()):
        members = sorted(members, key=lambda a: a["model"])
        chunks.append(f"## {dataset} ({_combo_label(dedup, fn)})")
        chunks.append("")
        header = (["Model"]
                  + [f"valid {k}" for k in METRIC_KEYS]
                  + [f"test {k}" for k in METRIC_KEYS]
                  + ["Time(s)", "Epochs", "Params"])
        chunks.append("| " + " | ".join(header) + " |")
        chunks.append("|" + "---|" * len(header))
        columns = {}
        for split_name in ("valid", "test"):
            for key in METRIC_KEYS:
                columns[f"{split_name} {key}"] = _mark_top3(
                    [m[f"{split_name}_{key}_mean"] for m in members])
        for i, member in enumerate(members):
            cells = [member["model"]]
            for split_name in ("valid", "test"):
                for key in METRIC_KEYS:
                    cells.append(columns[f"{split_name} {key}"][i])
            cells.append(f"{member['seconds_mean']:.1f}")
            cells.append(f"{member['epochs_mean']:.1f}")
            cells.append(f"{member['params_mean']:.0f}")
            chunks.append("| " + " | ".join(cells) + " |")
        chunks.append("")
    return "\n".join(chunks)


def compare_preprocessing(report: BenchmarkReport) -> list[dict]:
    """Signed metric differences between preprocessing combos.

    Per (dataset, model, split, metric) and comparison: the difference of
    seed-mean values between the combo with the toggled flag on and off, the
    other flag held fixed. Missing cells yield delta None, never 0.
    """
    index = {}
    for agg in report.aggregates:
        index[(agg["dataset"], agg["dedup"], agg["feature_norm"], agg["model"])] = agg
    datasets = sorted({a["dataset"] for a in report.aggregates})
    models = sorted({a["model"] for a in report.aggregates})
    deltas = []
    for dataset in datasets:
        for model in models:
            for name, (toggled, _), (fixed, fixed_value) in COMPARISONS:
                combo_on = {"dedup": None, "feature_norm": None, toggled: True,
                            fixed: fixed_value}
                combo_off = {**combo_on, toggled: False}
                on = index.get((dataset, combo_on["dedup"], combo_on["feature_norm"], model))
                off = index.get((dataset, combo_off["dedup"], combo_off["feature_norm"], model))
                for split_name in ("valid", "test"):
                    for key in METRIC_KEYS:
                        field_name = f"{split_name}_{key}_mean"
                        if (on is None or off is None or on[field_name] is None
                                or off[field_name] is None):
                            delta = None
                        else:
                            delta = on[field_name] - off[field_name]
                        deltas.append({
                            "dataset": dataset,
                            "model": model,
                            "comparison": name,
                            "split": split_name,
                            "metric": key,
                            "delta": delta,
                        })
    return deltas


def deltas_to_csv(deltas: list[dict]) -> str:
    lines = ["dataset,model,comparison,split,metric,delta"]
    for d in deltas:
        value = "" if d["delta"] is None else repr(d["delta"])
        lines.append(f"{d['dataset']},{d['model']},{d['comparison']},"
                     f"{d['split']},{d['metric']},{value}")
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, content: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    with tempfile.NamedTemporaryFile(mode, dir=path.parent, delete=False,
                                     suffix=".tmp") as handle:
        handle.write(content)
        temp_name = handle.name
    os.replace(temp_name, path)


def emit_report(report: BenchmarkReport, out_dir, formats=("json", "csv", "markdown"),
                figures: bool = True) -> dict[str, Path]:
    """Write the report in the requested formats (plus figures) under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if "json" in formats:
        path = out_dir / "report.json"
        _atomic_write(path, report.to_json())
        written["json"] = path
    if "csv" in formats:
        path = out_dir / "report.csv"
        _atomic_write(path, report_to_csv(report))
        written["csv"] = path
    if "markdown" in formats:
        path = out_dir / "report.md"
        _atomic_write(path, report_to_markdown(report))
        written["markdown"] = path
    if figures:
        from .figures import render_benchmark_figures

        written["figures"] = render_benchmark_figures(report, out_dir / "figures")
    return written


def emit_comparison(report: BenchmarkReport, out_dir, figures: bool = True) -> dict:
    """Write the preprocessing-delta table (csv + json) and its figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    deltas = compare_preprocessing(report)
    written = {}
    path = out_dir / "compare.csv"
    _atomic_write(path, deltas_to_csv(deltas))
    written["csv"] = path
    path = out_dir / "compare.json"
    _atomic_write(path, json.dumps(deltas, indent=2, sort_keys=True))
    written["json"] = path
    if figures:
        from .figures import render_comparison_figures

        written["figures"] = render_comparison_figures(deltas, out_dir / "figures")
    return written


def validate_report_row(row: dict, schema_path: str | Path | None = None) -> None:
    """Check one report row against the published row schema.

    Covers the subset of JSON Schema the published file uses: type,
    required, properties, enum and nullability via type lists.
    """
    if schema_path is None:
        schema_path = Path(__file__).resolve().parent.parent.parent / "docs" / "report_schema.json"
    schema = json.loads(Path(schema_path).read_text())
    _validate(row, schema, "row")


_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


def _validate(value, schema: dict, where: str) -> None:
    expected = schema.get("type")
    if expected is not None:
        allowed = expected if isinstance(expected, list) else [expected]
        if not any(_type_ok(value, t) for t in allowed):
            raise ValueError(f"{where}: expected {allowed}, got {type(value).__name__}")
    if "enum" in schema and value not in schema["enum"]:
        raise ValueError(f"{where}: {value!r} not in {schema['enum']}")
    if isinstance(value, dict):
        for name in schema.get("required", []):
            if name not in value:
                raise ValueError(f"{where}: missing required field {name!r}")
        for name, sub in schema.get("properties", {}).items():
            if name in value:
                _validate(value[name], sub, f"{where}.{name}")
    if isinstance(value, list) and "items" in schema:
        for i, item in enumerate(value):
            _validate(item, schema["items"], f"{where}[{i}]")


def _type_ok(value, type_name: str) -> bool:
    if type_name == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_name == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    py_type = _TYPES[type_name]
    if py_type is dict or py_type is list:
        return isinstance(value, py_type)
    return isinstance(value, py_type) if py_type is not type(None) else value is None
