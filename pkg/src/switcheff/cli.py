"""Command-line entry point.

Subcommands:
  dissect      baseline efficiency dissection of the configured suite
  sweep        parameter sweep (tiered-ratio, server-size, inc, cluster-scale)
  validate     run the closed-form bottleneck oracle suite, print pass/fail
  show-config  print the effective configuration after defaults/merging

Exit codes: 0 success, 1 configuration error, 2 partial failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import SWEEP_AXES, ExperimentConfig, load_config_file, merge_config
from .errors import ConfigError, SwitchEffError
from .experiments import run_dissection, run_sweep
from .reporting import emit_reports


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="switcheff",
        description="Switching-efficiency analysis of AI datacenter networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--arch", choices=["torus", "rail", "both"])
        p.add_argument("--scale", type=int, help="cluster size (power of two)")
        p.add_argument("--model", choices=["dense", "moe", "both"])
        p.add_argument("--out", help="output directory")
        p.add_argument("--weighting", choices=["duration", "equal"])
        p.add_argument("--jobs", type=int, help="parallel workers")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_dissect = sub.add_parser("dissect", help="baseline efficiency dissection")
    add_common(p_dissect)
    p_dissect.add_argument("--inc", action="store_true", help="enable in-network computing")

    p_sweep = sub.add_parser("sweep", help="network-parameter sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--sweep", choices=list(SWEEP_AXES))

    p_val = sub.add_parser("validate", help="run the bottleneck oracle suite")
    p_val.add_argument("--config", help="JSON config file")

    p_show = sub.add_parser("show-config", help="print the effective configuration")
    add_common(p_show)
    p_show.add_argument("--sweep", choices=list(SWEEP_AXES))

    return parser.parse_args(argv)


def _build_config(args) -> ExperimentConfig:
    file_data = load_config_file(args.config) if getattr(args, "config", None) else None
    overrides = {
        "arch": getattr(args, "arch", None),
        "scale": getattr(args, "scale", None),
        "model": getattr(args, "model", None),
        "out_dir": getattr(args, "out", None),
        "weighting": getattr(args, "weighting", None),
        "jobs": getattr(args, "jobs", None),
        "sweep": getattr(args, "sweep", None),
    }
    if getattr(args, "inc", False):
        overrides["inc"] = True
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    return merge_config(file_data, overrides)


def run_validate() -> int:
    """Closed-form oracle checks for the fine-grained metrics."""
    import numpy as np

    from .engine import evaluate_workload, RouteTable
    from .metrics import PrimitiveKind
    from .topology import BASE_RATE
    from .topology.rail import RailParams, build_rail
    from .topology.torus import TorusParams, build_torus, cubic_dims
    from .traffic import (
        FlowSet, Phase, PhaseTag, PrimitiveInstance,
        expand_a2a, expand_ring_collective,
    )

    failures = 0

    def check(name: str, got: float, want: float, tol: float = 1e-12) -> None:
        nonlocal failures
        ok = abs(got - want) <= tol * max(1.0, abs(want))
        print(f"{'PASS' if ok else 'FAIL'}  {name}: got {got:.9g}, want {want:.9g}")
        failures += 0 if ok else 1

    torus = build_torus(64, TorusParams(cubic_dims(64), BASE_RATE))

    def torus_phase(kind, tag, n, d, k_r=1):
        group = np.arange(n).reshape(1, n)
        if kind in (PrimitiveKind.ALL_TO_ALL_DISPATCH, PrimitiveKind.ALL_TO_ALL_COMBINE):
            direction = "dispatch" if kind is PrimitiveKind.ALL_TO_ALL_DISPATCH else "combine"
            flows = expand_a2a(group, d, k_r, direction, dim=0)
        else:
            flows = expand_ring_collective(kind, group, d, dim=0)
        prim = PrimitiveInstance(kind, group, d, tag, routed_experts=k_r)
        return Phase(tag, (prim,), flows)

    # data-efficiency closed forms on simulated rings
    for n in (4, 8):
        d = 16 * n
        _, rec = evaluate_workload(torus, [torus_phase(PrimitiveKind.REDUCE_SCATTER, PhaseTag.DP, n, d)])
        check(f"ring reduce-scatter gamma (n={n})", rec.gamma, 1 / (n - 1))
        _, rec = evaluate_workload(torus, [torus_phase(PrimitiveKind.ALL_REDUCE, PhaseTag.DP, n, d)])
        check(f"ring all-reduce gamma (n={n})", rec.gamma, n / (2 * (n - 1)))
    for k_r in (2, 4):
        _, rec = evaluate_workload(
            torus, [torus_phase(PrimitiveKind.ALL_TO_ALL_COMBINE, PhaseTag.EP_COMBINE, 8, 64, k_r)]
        )
        check(f"a2a combine gamma (k_r={k_r})", rec.gamma, 1 / k_r)

    # routing-efficiency examples
    rail = build_rail(1024, RailParams())
    rt = RouteTable(rail)
    check("intra-server forwardings", rt.forward_count(0, 1), 1.0)
    cross_group = rail.servers_per_leaf * rail.gpus_per_server
    check("leaf-spine-leaf forwardings", rt.forward_count(0, cross_group), 3.0)
    big = build_rail(4096, RailParams())
    cross_pod = big.pod_servers * big.gpus_per_server
    check("leaf-spine-core-spine-leaf forwardings", RouteTable(big).forward_count(0, cross_pod), 5.0)

    # port-utilization examples on the torus
    _, rec = evaluate_workload(torus, [torus_phase(PrimitiveKind.ALL_REDUCE, PhaseTag.TP, 16, 1 << 16)])
    check("torus TP ring theta_spatial", rec.theta_spatial, 2 / 6)
    check("torus TP ring theta_temporal", rec.theta_temporal, 1.0, tol=0.01)
    _, rec = evaluate_workload(
        torus,
        [torus_phase(PrimitiveKind.ALL_TO_ALL_DISPATCH, PhaseTag.EP_DISPATCH, 16, 1 << 16, 8)],
    )
    check("torus EP phase theta_spatial", rec.theta_spatial, 1 / 6)
    check("torus EP phase n_fwd", 1 / rec.delta, 8.0)

    print(f"{'OK' if not failures else 'FAILED'}: {failures} failing oracle checks")
    return 0 if not failures else 2


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    if args.command == "validate":
        return run_validate()
    try:
        cfg = _build_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "show-config":
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    try:
        if args.command == "dissect":
            result = run_dissection(cfg)
        elif args.command == "sweep":
            if cfg.sweep is None:
                print("error: sweep axis required (--sweep)", file=sys.stderr)
                return 1
            result = run_sweep(cfg)
        else:
            return 1
        out_dir = cfg.out_dir or "results"
        files = emit_reports(result, out_dir, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SwitchEffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(files)} files to {out_dir}")
    if result.failures:
        print(f"warning: {result.failures} workload evaluations failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
