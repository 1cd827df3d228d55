"""Report emission: delimiter-separated tables, plot-ready series files,
machine-readable results, a run manifest, and rendered figures.

Outputs are byte-deterministic for a fixed configuration: rows are
written in generation order, floats use a fixed format, JSON is emitted
with sorted keys.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError
from .experiments import ReportRow, RunResult

ROW_COLUMNS = [
    "experiment", "arch", "variant", "model", "sweep_value", "workload",
    "gamma", "delta", "theta", "theta_spatial", "theta_temporal", "mu", "eta",
    "effective_bytes", "received_bytes", "forwarded_bytes", "duration", "error",
]

# figure analogue -> predicate over rows
SERIES = {
    "fig5-dense": lambda r: r.experiment == "dissect" and r.model == "dense",
    "fig5-moe": lambda r: r.experiment == "dissect" and r.model == "moe",
    "fig6a": lambda r: r.experiment == "tiered-ratio" and r.model == "dense",
    "fig6b": lambda r: r.experiment == "tiered-ratio" and r.model == "moe",
    "fig7a": lambda r: r.experiment == "server-size" and r.model == "moe",
    "fig7b": lambda r: r.experiment == "server-size" and r.model == "moe",
    "fig7c": lambda r: r.experiment == "server-size" and r.model == "moe",
    "fig8": lambda r: r.experiment == "inc",
    "fig9a": lambda r: r.experiment == "cluster-scale" and r.model == "dense",
    "fig9b": lambda r: r.experiment == "cluster-scale" and r.model == "moe",
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def rows_to_tsv(rows: list[ReportRow]) -> str:
    lines = ["\t".join(ROW_COLUMNS)]
    for r in rows:
        d = dataclasses.asdict(r)
        lines.append("\t".join(_fmt(d[c]) for c in ROW_COLUMNS))
    return "\n".join(lines) + "\n"


def manifest_rows_to_tsv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0].keys())
    lines = ["\t".join(cols)]
    for r in rows:
        lines.append("\t".join(_fmt(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def emit_reports(
    result: RunResult,
    out_dir: str | Path,
    config: ExperimentConfig,
    figures: bool | None = None,
) -> list[Path]:
    """Write all report artifacts under ``out_dir``; returns the files."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "series").mkdir(exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc

    written: list[Path] = []

    def write(path: Path, text: str) -> None:
        path.write_text(text)
        written.append(path)

    per_workload = [r for r in result.rows if r.workload not in ("ALL",) and not _is_group(r)]
    aggregates = [r for r in result.rows if r.workload == "ALL" or _is_group(r)]
    write(out / "workloads.tsv", rows_to_tsv(per_workload))
    write(out / "aggregates.tsv", rows_to_tsv(aggregates))
    if result.manifest_rows:
        write(out / "workloads-manifest.tsv", manifest_rows_to_tsv(result.manifest_rows))

    for name, pred in SERIES.items():
        series_rows = [r for r in result.rows if pred(r)]
        if series_rows:
            write(out / "series" / f"{name}.tsv", rows_to_tsv(series_rows))

    results_doc = {
        "version": __version__,
        "config": config.to_dict(),
        "failures": result.failures,
        "rows": [dataclasses.asdict(r) for r in result.rows],
    }
    write(out / "results.json", json.dumps(results_doc, sort_keys=True, indent=1) + "\n")

    if figures if figures is not None else config.figures:
        from . import plotting

        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        written.extend(plotting.render_all(result.rows, fig_dir))

    hashes = {
        str(p.relative_to(out)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in written
        if p.suffix in (".tsv", ".json")
    }
    manifest = {
        "tool": "switcheff",
        "version": __version__,
        "config": config.to_dict(),
        "files": hashes,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    written.append(manifest_path)
    return written


def _is_group(row: ReportRow) -> bool:
    w = row.workload
    return (w.startswith("tp") or w.startswith("ep")) and w[2:].isdigit()
