"""Experiment orchestration: baseline dissection and the four parameter
sweeps (tiered bandwidth ratio, server size, in-network computing,
cluster scale), producing report rows for tables, series files and
figures.

Everything is deterministic: suites are enumerated in a fixed order and
results are keyed by sorted identifiers, independent of worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .config import ExperimentConfig
from .engine import evaluate_workload
from .errors import SwitchEffError
from .metrics import MetricsRecord, aggregate_metrics
from .topology import BASE_RATE
from .topology.rail import RailParams, build_rail
from .topology.torus import TorusParams, build_torus, cubic_dims
from .traffic import PhaseTag, apply_inc_transform, build_iteration_schedule
from .workloads import (
    ParallelismConfig,
    WorkloadSpec,
    enumerate_configs,
    place_groups,
    scale_workload,
    suite_manifest_rows,
)


@dataclass
class ReportRow:
    """One table/series row: a per-workload result or an aggregate."""

    experiment: str
    arch: str
    variant: str
    model: str
    sweep_value: float | int | str | None
    workload: str  # workload id, group key ("tp8"/"ep64") or "ALL"
    gamma: float = float("nan")
    delta: float = float("nan")
    theta: float = float("nan")
    theta_spatial: float = float("nan")
    theta_temporal: float = float("nan")
    mu: float = float("nan")
    eta: float = float("nan")
    effective_bytes: int = 0
    received_bytes: int = 0
    forwarded_bytes: int = 0
    duration: float = 0.0
    error: str = ""

    @classmethod
    def from_record(cls, rec: MetricsRecord, **kw) -> "ReportRow":
        return cls(
            gamma=rec.gamma,
            delta=rec.delta,
            theta=rec.theta,
            theta_spatial=rec.theta_spatial,
            theta_temporal=rec.theta_temporal,
            mu=rec.mu,
            eta=rec.eta,
            effective_bytes=rec.effective_bytes,
            received_bytes=rec.received_bytes,
            forwarded_bytes=rec.forwarded_bytes,
            duration=rec.duration,
            **kw,
        )


@dataclass
class RunResult:
    rows: list[ReportRow] = field(default_factory=list)
    manifest_rows: list[dict] = field(default_factory=list)
    failures: int = 0

    def extend(self, other: "RunResult") -> None:
        self.rows.extend(other.rows)
        self.manifest_rows.extend(other.manifest_rows)
        self.failures += other.failures


def make_topology(
    arch: str,
    scale: int,
    cfg: ExperimentConfig,
    tiered_ratio: float | None = None,
    gpus_per_server: int | None = None,
    plane_count: int | None = None,
):
    if arch == "torus":
        # the symmetric chip is the torus baseline; a ratio only appears
        # in the tiered-bandwidth sweep
        ratio = 1.0 if tiered_ratio is None else tiered_ratio
        params = TorusParams.with_ratio(cubic_dims(scale), BASE_RATE, dim=0, ratio=ratio)
        return build_torus(scale, params)
    ratio = cfg.tiered_ratio if tiered_ratio is None else tiered_ratio
    if arch == "rail":
        params = RailParams(
            gpus_per_server=cfg.gpus_per_server if gpus_per_server is None else gpus_per_server,
            switch_radix=cfg.switch_radix,
            tiered_ratio=ratio,
            plane_count=cfg.plane_count if plane_count is None else plane_count,
            base_nic_rate=BASE_RATE,
        )
        return build_rail(scale, params)
    raise SwitchEffError(f"unknown architecture {arch!r}")


def build_suite(scale: int, model: str, cfg: ExperimentConfig) -> list[WorkloadSpec]:
    configs = enumerate_configs(scale, model)
    return [
        scale_workload(c, dense_anchors=cfg.dense_anchors, moe_anchors=cfg.moe_anchors)
        for c in configs
    ]


def group_key(config: ParallelismConfig) -> str:
    return f"tp{config.t}" if config.model_kind == "dense" else f"ep{config.e}"


def _evaluate_one(args) -> tuple[str, MetricsRecord | None, str]:
    topo, spec, inc, a2a_mode = args
    try:
        layout = place_groups(spec.config, topo)
        schedule = build_iteration_schedule(spec, layout)
        if inc:
            schedule = [
                apply_inc_transform(ph, topo) if ph.tag is PhaseTag.TP else ph
                for ph in schedule
            ]
        _, record = evaluate_workload(topo, schedule, a2a_mode=a2a_mode)
        return spec.workload_id, record, ""
    except SwitchEffError as exc:
        return spec.workload_id, None, str(exc)


def evaluate_suite(
    topo,
    specs: list[WorkloadSpec],
    cfg: ExperimentConfig,
    inc: bool = False,
) -> tuple[list[tuple[WorkloadSpec, MetricsRecord | None, str]], int]:
    """Evaluate a workload suite on one topology.

    Returns (results in suite order, failure count).  Workload failures
    are isolated: they surface as flagged entries, the run continues.
    """
    tasks = [(topo, s, inc, cfg.torus_a2a) for s in specs]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_evaluate_one, tasks))
    else:
        outcomes = [_evaluate_one(t) for t in tasks]
    results = []
    failures = 0
    for spec, (wid, record, err) in zip(specs, outcomes):
        assert wid == spec.workload_id
        if record is None:
            failures += 1
        results.append((spec, record, err))
    return results, failures


def _rows_for_suite(
    experiment: str,
    arch_label: str,
    variant: str,
    model: str,
    sweep_value,
    results,
    topo,
    cfg: ExperimentConfig,
    aggregate_filter=None,
    per_workload_rows: bool = True,
) -> list[ReportRow]:
    """Per-workload rows plus group aggregates and the ALL row."""
    rows: list[ReportRow] = []
    common = dict(
        experiment=experiment, arch=arch_label, variant=variant, model=model,
        sweep_value=sweep_value,
    )
    ok = [(s, r) for (s, r, e) in results if r is not None]
    if per_workload_rows:
        for spec, record, err in results:
            if record is None:
                rows.append(ReportRow(workload=spec.workload_id, error=err, **common))
            else:
                rows.append(
                    ReportRow.from_record(record, workload=spec.workload_id, **common)
                )
    rate = topo.port_inventory_total()
    equal = cfg.weighting == "equal"
    groups: dict[str, list[tuple[str, MetricsRecord]]] = {}
    for spec, rec in ok:
        groups.setdefault(group_key(spec.config), []).append((spec.workload_id, rec))
    for key in sorted(groups, key=lambda k: (k[:2], int(k[2:]))):
        agg = aggregate_metrics(groups[key], rate, equal_weights=equal)
        rows.append(
            ReportRow(
                workload=key,
                gamma=agg.gamma_bar, delta=agg.delta_bar, theta=agg.theta_bar,
                mu=agg.mu_bar, eta=agg.eta_bar,
                effective_bytes=agg.effective_bytes,
                received_bytes=agg.received_bytes,
                forwarded_bytes=agg.forwarded_bytes,
                duration=agg.duration,
                **common,
            )
        )
    pool = [
        (s.workload_id, r) for s, r in ok
        if aggregate_filter is None or aggregate_filter(s)
    ]
    if pool:
        agg = aggregate_metrics(pool, rate, equal_weights=equal)
        rows.append(
            ReportRow(
                workload="ALL",
                gamma=agg.gamma_bar, delta=agg.delta_bar, theta=agg.theta_bar,
                mu=agg.mu_bar, eta=agg.eta_bar,
                effective_bytes=agg.effective_bytes,
                received_bytes=agg.received_bytes,
                forwarded_bytes=agg.forwarded_bytes,
                duration=agg.duration,
                **common,
            )
        )
    return rows


def run_dissection(cfg: ExperimentConfig) -> RunResult:
    """Baseline efficiency dissection: full suite per architecture."""
    out = RunResult()
    for model in cfg.models:
        try:
            specs = build_suite(cfg.scale, model, cfg)
        except SwitchEffError as exc:
            raise
        out.manifest_rows.extend(suite_manifest_rows(specs))
        for arch in cfg.archs:
            topo = make_topology(arch, cfg.scale, cfg)
            results, failures = evaluate_suite(topo, specs, cfg, inc=cfg.inc)
            out.failures += failures
            out.rows.extend(
                _rows_for_suite(
                    "dissect", topo.arch_kind, "", model, None, results, topo, cfg
                )
            )
    return out


def run_sweep(cfg: ExperimentConfig) -> RunResult:
    if cfg.sweep == "tiered-ratio":
        return _sweep_tiered_ratio(cfg)
    if cfg.sweep == "server-size":
        return _sweep_server_size(cfg)
    if cfg.sweep == "inc":
        return _sweep_inc(cfg)
    if cfg.sweep == "cluster-scale":
        return _sweep_cluster_scale(cfg)
    raise SwitchEffError(f"no sweep axis configured (got {cfg.sweep!r})")


def _sweep_tiered_ratio(cfg: ExperimentConfig) -> RunResult:
    out = RunResult()
    for model in cfg.models:
        specs = build_suite(cfg.scale, model, cfg)
        for arch in cfg.archs:
            for ratio in cfg.ratio_values:
                try:
                    topo = make_topology(arch, cfg.scale, cfg, tiered_ratio=ratio)
                except SwitchEffError as exc:
                    out.rows.append(
                        ReportRow(
                            "tiered-ratio", arch, "", model, ratio, "ALL",
                            error=str(exc),
                        )
                    )
                    out.failures += 1
                    continue
                results, failures = evaluate_suite(topo, specs, cfg)
                out.failures += failures
                out.rows.extend(
                    _rows_for_suite(
                        "tiered-ratio", topo.arch_kind, "", model, ratio,
                        results, topo, cfg, per_workload_rows=False,
                    )
                )
    return out


def _sweep_server_size(cfg: ExperimentConfig) -> RunResult:
    out = RunResult()
    for model in cfg.models:
        specs = build_suite(cfg.scale, model, cfg)
        for size in cfg.server_sizes:
            try:
                topo = make_topology("rail", cfg.scale, cfg, gpus_per_server=size)
            except SwitchEffError as exc:
                out.rows.append(
                    ReportRow(
                        "server-size", "rail", "", model, size, "ALL", error=str(exc)
                    )
                )
                out.failures += 1
                continue
            results, failures = evaluate_suite(topo, specs, cfg)
            out.failures += failures
            out.rows.extend(
                _rows_for_suite(
                    "server-size", topo.arch_kind, "", model, size,
                    results, topo, cfg, per_workload_rows=False,
                )
            )
    return out


def _sweep_inc(cfg: ExperimentConfig) -> RunResult:
    """In-network computing on the intra-server switches (dense TP).

    Workloads without TP communication are omitted from the aggregate,
    as the TP=1 case gains nothing from the transform.
    """
    out = RunResult()
    specs = build_suite(cfg.scale, "dense", cfg)
    topo = make_topology("rail", cfg.scale, cfg)
    has_tp = lambda s: s.config.t > 1
    for label, inc in (("off", False), ("on", True)):
        results, failures = evaluate_suite(topo, specs, cfg, inc=inc)
        out.failures += failures
        out.rows.extend(
            _rows_for_suite(
                "inc", topo.arch_kind, "", "dense", label, results, topo, cfg,
                aggregate_filter=has_tp, per_workload_rows=False,
            )
        )
    return out


def _sweep_cluster_scale(cfg: ExperimentConfig) -> RunResult:
    out = RunResult()
    for model in cfg.models:
        for scale in cfg.scale_values:
            specs = build_suite(scale, model, cfg)
            variants: list[tuple[str, str, dict]] = []
            if "torus" in cfg.archs:
                variants.append(("torus", "", {}))
            if "rail" in cfg.archs:
                for planes in cfg.plane_values:
                    variants.append(("rail", f"{planes}p", {"plane_count": planes}))
            for arch, variant, kw in variants:
                try:
                    topo = make_topology(arch, scale, cfg, **kw)
                except SwitchEffError as exc:
                    out.rows.append(
                        ReportRow(
                            "cluster-scale", arch, variant, model, scale, "ALL",
                            error=str(exc),
                        )
                    )
                    out.failures += 1
                    continue
                results, failures = evaluate_suite(topo, specs, cfg)
                out.failures += failures
                out.rows.extend(
                    _rows_for_suite(
                        "cluster-scale", topo.arch_kind, variant, model, scale,
                        results, topo, cfg, per_workload_rows=False,
                    )
                )
    return out
