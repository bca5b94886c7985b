"""Command-line entry points: run a benchmark, inspect dataset statistics,
generate synthetic data, and re-render reports and preprocessing comparisons."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .datapipe import ColumnSchema, compute_stats, format_stats, load_csv, save_csv, stats_to_json
from .runner import (
    BenchmarkReport,
    emit_comparison,
    emit_report,
    load_config,
    run_benchmark,
)
from .synthetic import SyntheticSpec, generate


@click.group()
def main():
    """Uplift-model benchmarking harness."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="JSON run config.")
def run(config_path):
    """Run the benchmark described by a config file."""
    config = load_config(config_path)
    out_dir = Path(config.output_dir)
    report = run_benchmark(config, run_dir=out_dir)
    written = emit_report(report, out_dir)
    ok = sum(1 for r in report.rows if r.status == "ok")
    click.echo(f"{ok}/{len(report.rows)} cells completed")
    for kind, path in written.items():
        if kind == "figures":
            for p in path:
                click.echo(f"  figure: {p}")
        else:
            click.echo(f"  {kind}: {path}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--treatment-column", default="treatment", show_default=True)
@click.option("--outcome-column", default="outcome", show_default=True)
@click.option("--as-json", is_flag=True, help="Emit JSON instead of the text table.")
def stats(data_path, treatment_column, outcome_column, as_json):
    """Print summary statistics of a dataset CSV."""
    schema = ColumnSchema(treatment=treatment_column, outcome=outcome_column)
    ds = load_csv(data_path, schema)
    result = compute_stats(ds)
    if as_json:
        click.echo(stats_to_json(result, name=ds.name))
    else:
        click.echo(format_stats(result, name=ds.name))


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON file of SyntheticSpec fields.")
@click.option("--out", "out_path", required=True, type=click.Path())
def synth(spec_path, out_path):
    """Generate a synthetic dataset CSV (with a tau_true sidecar column)."""
    fields = json.loads(Path(spec_path).read_text())
    ds = generate(SyntheticSpec(**fields))
    save_csv(ds, out_path)
    click.echo(f"wrote {ds.n} rows x {ds.k} features to {out_path}")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True),
              help="Run directory containing report.json.")
@click.option("--format", "fmt", default="md",
              type=click.Choice(["md", "csv", "json"]), show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def report(run_dir, fmt, figures):
    """Re-render the report of a finished run."""
    run_dir = Path(run_dir)
    loaded = BenchmarkReport.from_json((run_dir / "report.json").read_text())
    formats = {"md": ("markdown",), "csv": ("csv",), "json": ("json",)}[fmt]
    written = emit_report(loaded, run_dir, formats=formats, figures=figures)
    for kind, path in written.items():
        if kind == "figures":
            for p in path:
                click.echo(f"  figure: {p}")
        else:
            click.echo(f"  {kind}: {path}")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--figures/--no-figures", default=True, show_default=True)
def compare(run_dir, figures):
    """Emit the preprocessing-effect delta table for a finished run."""
    run_dir = Path(run_dir)
    loaded = BenchmarkReport.from_json((run_dir / "report.json").read_text())
    written = emit_comparison(loaded, run_dir, figures=figures)
    for kind, path in written.items():
        if kind == "figures":
            for p in path:
                click.echo(f"  figure: {p}")
        else:
            click.echo(f"  {kind}: {path}")


if __name__ == "__main__":
    main()
