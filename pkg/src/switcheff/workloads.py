"""Workload-suite generation: enumerate valid parallelism configurations,
scale model hyperparameters proportionally, and place groups on a
topology.

Scaling anchors pin the proportionality constants that the reference
model families (a GPT-3-like dense transformer, a DeepSeek-V3-like MoE)
leave free; they live in :class:`DenseAnchors` / :class:`MoeAnchors` so
every derived byte size is traceable to one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MappingError, PlacementError
from .topology.rail import RailTopology
from .topology.torus import TorusTopology, remap_torus_dimensions


def _pow2_range(lo: int, hi: int) -> list[int]:
    out = []
    v = lo
    while v <= hi:
        out.append(v)
        v *= 2
    return out


@dataclass(frozen=True)
class Constraints:
    """Practical limits applied to enumerated configurations."""

    min_pp: int = 2
    pp_cluster_divisor: int = 16  # p <= N / 16
    min_ep: int = 2
    ep_cluster_divisor: int = 32  # e <= N / 32
    max_tp: int = 8  # one high-bandwidth domain (server)


@dataclass(frozen=True)
class ParallelismConfig:
    """One parallelism configuration on a cluster of ``cluster_size`` GPUs.

    Dense uses (d, p, t); MoE uses (d_e, p, e) for the expert layers with
    the attention data-parallel degree d = d_e * e.
    """

    model_kind: str  # "dense" | "moe"
    cluster_size: int
    d: int
    p: int
    t: int = 1
    e: int = 1
    d_e: int = 1

    def __post_init__(self):
        n = self.cluster_size
        if self.model_kind == "dense":
            if self.d * self.p * self.t != n:
                raise ConfigError(f"d*p*t != N for {self}")
        elif self.model_kind == "moe":
            if self.d_e * self.p * self.e != n:
                raise ConfigError(f"d_e*p*e != N for {self}")
            if self.d != self.d_e * self.e or self.d * self.p != n:
                raise ConfigError(f"attention DP degree inconsistent for {self}")
            if self.e % 2:
                raise ConfigError("EP degree must be even (e/2 routed experts)")
        else:
            raise ConfigError(f"unknown model kind {self.model_kind!r}")

    @property
    def d_attn(self) -> int:
        return self.d

    @property
    def workload_id(self) -> str:
        if self.model_kind == "dense":
            return f"dense-t{self.t}-p{self.p}-d{self.d}"
        return f"moe-e{self.e}-p{self.p}-de{self.d_e}"


def enumerate_configs(
    n: int, model_kind: str, constraints: Constraints | None = None
) -> list[ParallelismConfig]:
    """All valid power-of-two configurations, ordered by (t|e, p, d)."""
    if n < 64 or n & (n - 1):
        raise ConfigError(f"cluster size must be a power of two >= 64, got {n}")
    c = constraints or Constraints()
    p_values = _pow2_range(c.min_pp, n // c.pp_cluster_divisor)
    configs: list[ParallelismConfig] = []
    if model_kind == "dense":
        for t in _pow2_range(1, c.max_tp):
            for p in p_values:
                d = n // (p * t)
                if d >= 1 and d * p * t == n:
                    configs.append(
                        ParallelismConfig("dense", n, d=d, p=p, t=t)
                    )
    elif model_kind == "moe":
        for e in _pow2_range(c.min_ep, n // c.ep_cluster_divisor):
            for p in p_values:
                d_e = n // (p * e)
                if d_e >= 1 and d_e * p * e == n:
                    configs.append(
                        ParallelismConfig(
                            "moe", n, d=d_e * e, p=p, e=e, d_e=d_e
                        )
                    )
    else:
        raise ConfigError(f"unknown model kind {model_kind!r}")
    return configs


@dataclass(frozen=True)
class DenseAnchors:
    """GPT-3-like proportionality constants.

    layers = layers_per_stage * p, hidden = hidden_per_tp * t; the
    (p=8, t=8) point reproduces 96 layers / 12288 hidden.  The batch
    anchor together with the collective count per layer fixes the
    TP : DP volume ratio, the main free constant of the suite.
    """

    layers_per_stage: int = 12
    hidden_per_tp: int = 1536
    sequence: int = 2048
    samples_per_dp_rank: int = 160
    microbatches: int = 8
    dtype_bytes: int = 2
    params_per_layer_hidden2: int = 12  # ~12 h^2 parameters per layer
    collectives_per_layer: int = 2  # (AG + RS) pairs per layer, fwd+bwd


@dataclass(frozen=True)
class MoeAnchors:
    """DeepSeek-V3-like constants: fixed attention hidden size, one
    routed expert per EP rank per layer, experts = e, k_r = e/2."""

    hidden: int = 7168
    layers_per_stage: int = 8
    experts_per_ep: int = 1
    expert_ffn_dim: int = 2048
    sequence: int = 2048
    samples_per_attn_rank: int = 4
    microbatches: int = 8
    dtype_bytes: int = 2
    attn_params_hidden2: int = 4  # ~4 h^2 attention parameters per layer
    include_edp: bool = True


@dataclass(frozen=True)
class WorkloadSpec:
    """A placed-ready workload: configuration plus derived byte sizes."""

    config: ParallelismConfig
    layers: int
    hidden: int
    experts: int
    routed_experts: int
    batch_samples: int
    sequence_len: int
    dtype_bytes: int
    microbatches: int
    tp_activation_bytes: int
    pp_activation_bytes: int
    dp_gradient_bytes: int
    a2a_token_bytes: int
    attn_gradient_bytes: int = 0
    edp_gradient_bytes: int = 0
    include_edp: bool = True
    tp_collectives_per_layer: int = 2

    @property
    def workload_id(self) -> str:
        return self.config.workload_id


def scale_workload(
    config: ParallelismConfig,
    dense_anchors: DenseAnchors | None = None,
    moe_anchors: MoeAnchors | None = None,
) -> WorkloadSpec:
    """Scale hyperparameters proportionally to the parallelism degrees."""
    if config.model_kind == "dense":
        a = dense_anchors or DenseAnchors()
        layers = a.layers_per_stage * config.p
        hidden = a.hidden_per_tp * config.t
        tokens_per_rank = a.samples_per_dp_rank * a.sequence
        act = tokens_per_rank * hidden * a.dtype_bytes
        params_per_gpu = (
            a.params_per_layer_hidden2 * hidden * hidden * a.layers_per_stage
        ) // config.t
        pp_act = (tokens_per_rank // a.microbatches) * hidden * a.dtype_bytes // config.t
        return WorkloadSpec(
            config=config,
            layers=layers,
            hidden=hidden,
            experts=0,
            routed_experts=0,
            batch_samples=a.samples_per_dp_rank * config.d,
            sequence_len=a.sequence,
            dtype_bytes=a.dtype_bytes,
            microbatches=a.microbatches,
            tp_activation_bytes=act if config.t > 1 else 0,
            pp_activation_bytes=pp_act,
            dp_gradient_bytes=params_per_gpu * a.dtype_bytes,
            a2a_token_bytes=0,
            tp_collectives_per_layer=a.collectives_per_layer,
        )
    if config.model_kind == "moe":
        a = moe_anchors or MoeAnchors()
        layers = a.layers_per_stage * config.p
        h = a.hidden
        tokens_per_rank = a.samples_per_attn_rank * a.sequence
        attn_params = a.attn_params_hidden2 * h * h * a.layers_per_stage
        expert_params = (
            3 * h * a.expert_ffn_dim * a.experts_per_ep * a.layers_per_stage
        )
        return WorkloadSpec(
            config=config,
            layers=layers,
            hidden=h,
            experts=a.experts_per_ep * config.e,
            routed_experts=config.e // 2,
            batch_samples=a.samples_per_attn_rank * config.d_attn,
            sequence_len=a.sequence,
            dtype_bytes=a.dtype_bytes,
            microbatches=a.microbatches,
            tp_activation_bytes=0,
            pp_activation_bytes=(tokens_per_rank // a.microbatches) * h * a.dtype_bytes,
            dp_gradient_bytes=0,
            a2a_token_bytes=tokens_per_rank * h * a.dtype_bytes,
            attn_gradient_bytes=attn_params * a.dtype_bytes,
            edp_gradient_bytes=expert_params * a.dtype_bytes,
            include_edp=a.include_edp,
        )
    raise ConfigError(f"no scaling coefficients for {config.model_kind!r}")


@dataclass
class GroupLayout:
    """GPU-id group arrays for every parallel dimension of a workload.

    Each entry is a 2D array: one row per group, placement order within
    the row.  ``torus_dims`` assigns each phase a physical torus
    dimension (groups larger than a ring are embedded row-major across
    rings, which the ideal OCS abstraction makes unit-cost per step).
    """

    config: ParallelismConfig
    tp_groups: np.ndarray | None = None
    dp_groups: np.ndarray | None = None
    pp_chains: np.ndarray | None = None
    ep_groups: np.ndarray | None = None
    edp_groups: np.ndarray | None = None
    attn_dp_groups: np.ndarray | None = None
    torus_dims: dict[str, int] = field(default_factory=dict)
    embedded_dims: list[str] = field(default_factory=list)


def place_groups(config: ParallelismConfig, topology) -> GroupLayout:
    """Deterministic contiguous placement of all parallel groups.

    Rail: TP packs inside servers, DP/EDP rings run along rails, PP
    chains cross servers, EP groups occupy contiguous GPU ranges.
    Torus: each dimension is remapped to a dedicated physical dimension.
    """
    n = config.cluster_size
    if topology.n != n:
        raise PlacementError(
            f"workload cluster size {n} != topology size {topology.n}"
        )
    layout = GroupLayout(config=config)
    if config.model_kind == "dense":
        grid = np.arange(n).reshape(config.p, config.d, config.t)
        if config.t > 1:
            layout.tp_groups = grid.reshape(-1, config.t)
        if config.d > 1:
            layout.dp_groups = np.ascontiguousarray(
                grid.transpose(0, 2, 1).reshape(-1, config.d)
            )
        if config.p > 1:
            layout.pp_chains = np.ascontiguousarray(
                grid.transpose(1, 2, 0).reshape(-1, config.p)
            )
        dims = {"pp": 1, "dp": 2}
        if config.t > 1:
            dims["tp"] = 0
        else:
            dims["pp"] = 0  # dominant dimension takes the (boostable) axis
        sizes = {"tp": config.t, "pp": config.p, "dp": config.d}
    else:
        grid = np.arange(n).reshape(config.p, config.d_e, config.e)
        layout.ep_groups = grid.reshape(-1, config.e)
        if config.d_e > 1:
            layout.edp_groups = np.ascontiguousarray(
                grid.transpose(0, 2, 1).reshape(-1, config.d_e)
            )
        layout.attn_dp_groups = grid.reshape(config.p, config.d_attn)
        if config.p > 1:
            layout.pp_chains = np.ascontiguousarray(
                grid.reshape(config.p, config.d_attn).T
            )
        dims = {"ep": 0, "pp": 1, "edp": 2, "attn_dp": 2}
        sizes = {
            "ep": config.e,
            "pp": config.p,
            "edp": config.d_e,
            "attn_dp": config.d_attn,
        }

    if isinstance(topology, TorusTopology):
        for name, dim in dims.items():
            try:
                remap_torus_dimensions(topology, {dim: sizes[name]})
            except MappingError:
                # group exceeds the ring length: embedded row-major
                # across rings of its dimension (unit-cost steps)
                layout.embedded_dims.append(name)
        layout.torus_dims = dims
    elif isinstance(topology, RailTopology):
        if config.model_kind == "dense" and config.t > topology.gpus_per_server:
            raise PlacementError(
                f"TP degree {config.t} exceeds the high-bandwidth domain "
                f"({topology.gpus_per_server} GPUs per server)"
            )
    else:
        raise PlacementError(f"unsupported topology {topology!r}")
    return layout


def suite_manifest_rows(specs: list[WorkloadSpec]) -> list[dict]:
    """Workload-suite manifest: configs, hyperparameters, derived sizes."""
    rows = []
    for s in specs:
        c = s.config
        rows.append(
            {
                "workload": s.workload_id,
                "model": c.model_kind,
                "N": c.cluster_size,
                "d": c.d,
                "p": c.p,
                "t": c.t,
                "e": c.e,
                "d_e": c.d_e,
                "layers": s.layers,
                "hidden": s.hidden,
                "experts": s.experts,
                "routed_experts": s.routed_experts,
                "batch_samples": s.batch_samples,
                "sequence": s.sequence_len,
                "tp_activation_bytes": s.tp_activation_bytes,
                "pp_activation_bytes": s.pp_activation_bytes,
                "dp_gradient_bytes": s.dp_gradient_bytes,
                "a2a_token_bytes": s.a2a_token_bytes,
                "attn_gradient_bytes": s.attn_gradient_bytes,
                "edp_gradient_bytes": s.edp_gradient_bytes,
            }
        )
    return rows
