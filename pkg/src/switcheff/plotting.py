"""Figure rendering for the report path.

Each series produced by the experiment runner gets a matplotlib figure
saved next to the delimited output.  Figures carry no timestamps so
re-runs stay byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRIC_COLORS = {
    "gamma": "tab:blue",
    "delta": "tab:orange",
    "theta": "tab:green",
    "mu": "tab:purple",
    "eta": "tab:red",
}
ARCH_STYLE = {"torus3d": "o-", "rail": "s--"}

_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def _group_sort_key(w: str):
    return (w[:2], int(w[2:])) if w[2:].isdigit() else (w, 0)


def render_dissection(rows, path: Path) -> Path:
    """Per-workload scatter of the fine-grained and holistic metrics."""
    per_wl = [r for r in rows if not r.error and "-" in r.workload]
    archs = sorted({r.arch for r in per_wl})
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    labels = sorted({r.workload for r in per_wl})
    index = {w: i for i, w in enumerate(labels)}
    for arch in archs:
        sub = [r for r in per_wl if r.arch == arch]
        xs = [index[r.workload] for r in sub]
        marker = "o" if arch == "torus3d" else "s"
        for metric in ("gamma", "delta", "theta"):
            top.scatter(
                xs, [getattr(r, metric) for r in sub], s=14, marker=marker,
                color=METRIC_COLORS[metric], alpha=0.7,
                label=f"{arch} {metric}",
            )
        for metric in ("mu", "eta"):
            bottom.scatter(
                xs, [getattr(r, metric) for r in sub], s=14, marker=marker,
                color=METRIC_COLORS[metric], alpha=0.7,
                label=f"{arch} {metric}",
            )
    top.set_ylabel("fine-grained efficiency")
    bottom.set_ylabel("holistic efficiency")
    bottom.set_xticks(range(len(labels)))
    bottom.set_xticklabels(labels, rotation=90, fontsize=5)
    top.legend(fontsize=6, ncol=2)
    bottom.legend(fontsize=6, ncol=2)
    top.grid(alpha=0.3)
    bottom.grid(alpha=0.3)
    return _save(fig, path)


def render_sweep_lines(rows, metric: str, path: Path, xlabel: str, logx=False) -> Path:
    """Aggregate metric vs sweep value, one line per (arch, variant, group)."""
    agg = [r for r in rows if not r.error and not ("-" in r.workload)]
    keys = sorted(
        {(r.arch, r.variant, r.workload) for r in agg},
        key=lambda k: (k[0], k[1], _group_sort_key(k[2])),
    )
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for arch, variant, group in keys:
        sub = sorted(
            (r for r in agg if (r.arch, r.variant, r.workload) == (arch, variant, group)),
            key=lambda r: float(r.sweep_value),
        )
        if not sub:
            continue
        xs = [float(r.sweep_value) for r in sub]
        ys = [getattr(r, metric) for r in sub]
        style = ARCH_STYLE.get(arch, "^-")
        name = "/".join(p for p in (arch, variant, group) if p)
        lw = 2.0 if group == "ALL" else 0.9
        ax.plot(xs, ys, style, label=name, linewidth=lw, markersize=3)
    if logx:
        ax.set_xscale("log", base=2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=5, ncol=2)
    return _save(fig, path)


def render_inc(rows, path: Path) -> Path:
    agg = [r for r in rows if not r.error and "-" not in r.workload]
    groups = sorted({r.workload for r in agg}, key=_group_sort_key)
    fig, (left, right) = plt.subplots(1, 2, figsize=(8, 3.5))
    width = 0.35
    for i, state in enumerate(("off", "on")):
        sub = {r.workload: r for r in agg if r.sweep_value == state}
        xs = [j + (i - 0.5) * width for j in range(len(groups))]
        left.bar(
            xs, [sub[g].gamma if g in sub else 0 for g in groups], width,
            label=f"INC {state}",
        )
        right.bar(
            xs, [sub[g].eta if g in sub else 0 for g in groups], width,
            label=f"INC {state}",
        )
    for ax, name in ((left, "gamma"), (right, "eta")):
        ax.set_xticks(range(len(groups)))
        ax.set_xticklabels(groups, fontsize=7)
        ax.set_ylabel(name)
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)


def render_all(rows, fig_dir: Path) -> list[Path]:
    written = []
    by_exp: dict[tuple[str, str], list] = {}
    for r in rows:
        by_exp.setdefault((r.experiment, r.model), []).append(r)

    for (exp, model), sub in sorted(by_exp.items()):
        if exp == "dissect":
            written.append(render_dissection(sub, fig_dir / f"fig5-{model}.png"))
        elif exp == "tiered-ratio":
            name = "fig6a" if model == "dense" else "fig6b"
            written.append(
                render_sweep_lines(sub, "theta", fig_dir / f"{name}.png", "tiered ratio")
            )
        elif exp == "server-size":
            if model == "moe":
                for name, metric in (("fig7a", "delta"), ("fig7b", "theta"), ("fig7c", "mu")):
                    written.append(
                        render_sweep_lines(
                            sub, metric, fig_dir / f"{name}.png", "GPUs per server",
                            logx=True,
                        )
                    )
        elif exp == "inc":
            written.append(render_inc(sub, fig_dir / "fig8.png"))
        elif exp == "cluster-scale":
            name = "fig9a" if model == "dense" else "fig9b"
            written.append(
                render_sweep_lines(sub, "eta", fig_dir / f"{name}.png", "cluster size", logx=True)
            )
    return written
