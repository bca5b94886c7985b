"""Matplotlib figure rendering for benchmark reports.

Two figure families, written as PNG next to the delimited outputs:
per-combo bar charts of the seed-mean metrics across models, and
preprocessing-comparison charts of the signed metric deltas per model.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METRIC_KEYS = ("qini", "auuc", "wau", "lift_at_30")
METRIC_LABELS = {"qini": "QINI", "auuc": "AUUC", "wau": "WAU", "lift_at_30": "LIFT@30"}


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text).strip("_")


def render_benchmark_figures(report, out_dir) -> list[Path]:
    """One 2x2 metric figure per (dataset, combo, split); returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict = {}
    for agg in report.aggregates:
        groups.setdefault((agg["dataset"], agg["dedup"], agg["feature_norm"]),
                          []).append(agg)
    paths = []
    for (dataset, dedup, fn), members in sorted(groups.items()):
        members = sorted(members, key=lambda a: a["model"])
        models = [m["model"] for m in members]
        for split_name in ("valid", "test"):
            if all(m[f"{split_name}_qini_mean"] is None for m in members):
                continue
            fig, axes = plt.subplots(2, 2, figsize=(11, 7))
            combo = f"dedup={'on' if dedup else 'off'}, fn={'on' if fn else 'off'}"
            fig.suptitle(f"{dataset} - {split_name} metrics ({combo})")
            for ax, key in zip(axes.ravel(), METRIC_KEYS):
                values = [m[f"{split_name}_{key}_mean"] for m in members]
                errors = [m[f"{split_name}_{key}_std"] or 0.0 for m in members]
                values = [v if v is not None else 0.0 for v in values]
                ax.bar(range(len(models)), values, yerr=errors, capsize=3,
                       color="#4878cf")
                ax.set_xticks(range(len(models)))
                ax.set_xticklabels(models, rotation=60, ha="right", fontsize=8)
                ax.set_title(METRIC_LABELS[key])
                ax.axhline(0.0, color="black", linewidth=0.6)
                ax.grid(axis="y", alpha=0.3)
            fig.tight_layout()
            path = out_dir / (f"metrics_{_slug(dataset)}_dedup{int(dedup)}"
                              f"_fn{int(fn)}_{split_name}.png")
            fig.savefig(path, dpi=120)
            plt.close(fig)
            paths.append(path)
    return paths


def render_comparison_figures(deltas: list[dict], out_dir) -> list[Path]:
    """One figure per (dataset, comparison): per-model delta bars, one panel
    per metric, valid and test side by side."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets = sorted({d["dataset"] for d in deltas})
    comparisons = sorted({d["comparison"] for d in deltas})
    paths = []
    for dataset in datasets:
        for comparison in comparisons:
            subset = [d for d in deltas
                      if d["dataset"] == dataset and d["comparison"] == comparison]
            models = sorted({d["model"] for d in subset})
            values = {
                (d["split"], d["metric"], d["model"]): d["delta"] for d in subset
            }
            if not any(v is not None for v in values.values()):
                continue
            fig, axes = plt.subplots(2, 4, figsize=(14, 6), sharex=True)
            fig.suptitle(f"{dataset} - {comparison}")
            x = np.arange(len(models))
            for row, split_name in enumerate(("valid", "test")):
                for col, key in enumerate(METRIC_KEYS):
                    ax = axes[row, col]
                    bar_values = [values.get((split_name, key, m)) for m in models]
                    plotted = [0.0 if v is None else v for v in bar_values]
                    colors = ["#bbbbbb" if v is None else ("#2e7d32" if v >= 0 else "#c62828")
                              for v in bar_values]
                    ax.bar(x, plotted, color=colors)
                    ax.axhline(0.0, color="black", linewidth=0.6)
                    ax.set_title(f"{split_name} {METRIC_LABELS[key]}", fontsize=9)
                    ax.set_xticks(x)
                    ax.set_xticklabels(models, rotation=60, ha="right", fontsize=7)
                    ax.grid(axis="y", alpha=0.3)
            fig.tight_layout()
            path = out_dir / f"compare_{_slug(dataset)}_{_slug(comparison)}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            paths.append(path)
    return paths


def render_uplift_curve(curve, path, title: str = "uplift curves") -> Path:
    """Plot the qini and cumulative-uplift curves of one evaluation."""
    from .metrics import qini_values, uplift_curve_values

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = curve.n
    x = np.arange(0, n + 1) / n
    q = np.concatenate(([0.0], qini_values(curve)))
    g = np.concatenate(([0.0], uplift_curve_values(curve)))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(x, q, label="model")
    ax1.plot([0, 1], [0, q[-1]], "--", color="gray", label="random")
    ax1.set_title("qini curve")
    ax1.set_xlabel("fraction targeted")
    ax1.legend()
    ax2.plot(x, g, label="model")
    ax2.plot([0, 1], [0, g[-1]], "--", color="gray", label="random")
    ax2.set_title("cumulative uplift curve")
    ax2.set_xlabel("fraction targeted")
    ax2.legend()
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
