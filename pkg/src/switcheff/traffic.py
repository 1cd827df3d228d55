"""Expansion of placed workloads into phase schedules of communication
primitives and aggregate flow components.

Ring collectives run as two counter-rotating rings (half the volume in
each direction), pipeline transfers are point-to-point between adjacent
stages, and expert all-to-all is uniform within each group.  Phases are
strictly serialized; forward and backward volumes are folded into a
single phase per kind via the ``repeat`` multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ScheduleError
from .metrics import PrimitiveKind, effective_volume
from .workloads import GroupLayout, WorkloadSpec


class PhaseTag(Enum):
    TP = "tp"
    PP = "pp"
    DP = "dp"
    EP_DISPATCH = "ep-dispatch"
    EP_COMBINE = "ep-combine"
    EDP = "edp"


@dataclass(frozen=True)
class PrimitiveInstance:
    """One communication primitive over a set of groups.

    ``groups`` has one row per participant group (for point-to-point:
    two rows, senders and receivers, pair-matched by column).  ``repeat``
    folds identical repetitions (layers, passes, microbatches) into one
    instance; effective and wire volumes scale linearly with it.
    """

    kind: PrimitiveKind
    groups: np.ndarray
    tensor_size: int
    phase_tag: PhaseTag
    routed_experts: int = 1
    repeat: int = 1
    inc: bool = False

    @property
    def participants(self) -> int:
        if self.kind is PrimitiveKind.POINT_TO_POINT:
            return self.groups.shape[1]  # number of pairs
        return self.groups.shape[1]

    @property
    def group_count(self) -> int:
        if self.kind is PrimitiveKind.POINT_TO_POINT:
            return 1
        return self.groups.shape[0]

    def effective_bytes(self) -> int:
        per_group = effective_volume(
            self.kind, self.participants, self.tensor_size, max(1, self.routed_experts)
        )
        return per_group * self.group_count * self.repeat


# -- flow components ---------------------------------------------------------


@dataclass(frozen=True)
class RingFlows:
    """Neighbor-to-neighbor ring traffic: every member sends
    ``forward_volume`` to its successor and ``backward_volume`` to its
    predecessor (placement order, wraparound)."""

    members: np.ndarray  # (groups, n)
    forward_volume: int
    backward_volume: int
    dim: int | None = None


@dataclass(frozen=True)
class PairFlows:
    """Directed point-to-point flows, pair-matched arrays.

    ``step`` marks ring adjacency on the mapped torus dimension: +1 when
    every destination is its source's ring successor, -1 for the
    predecessor, None for arbitrary pairs (route-table walk).
    """

    src: np.ndarray
    dst: np.ndarray
    volume: int
    dim: int | None = None
    step: int | None = 1


@dataclass(frozen=True)
class UniformA2A:
    """Uniform all-to-all: every ordered pair inside a group carries
    ``pair_volume`` bytes."""

    members: np.ndarray  # (groups, n)
    pair_volume: int
    dim: int | None = None


@dataclass(frozen=True)
class IncStar:
    """In-network-computing reduction: each member sends the tensor to
    its switch (reduced in-switch, ingress not metered) and receives the
    reduced result; only the switch egress toward each member counts."""

    members: np.ndarray  # (groups, n)
    down_volume: int


FlowComponent = RingFlows | PairFlows | UniformA2A | IncStar


@dataclass(frozen=True)
class FlowSet:
    components: tuple[FlowComponent, ...]

    def dump_rows(self):
        """(src, dst, volume) triples, pairwise-expanded.  Debug only."""
        for comp in self.components:
            if isinstance(comp, PairFlows):
                for s, d in zip(comp.src, comp.dst):
                    yield int(s), int(d), comp.volume
            elif isinstance(comp, RingFlows):
                for row in np.atleast_2d(comp.members):
                    nxt = np.roll(row, -1)
                    for s, d in zip(row, nxt):
                        if comp.forward_volume:
                            yield int(s), int(d), comp.forward_volume
                        if comp.backward_volume:
                            yield int(d), int(s), comp.backward_volume
            elif isinstance(comp, UniformA2A):
                for row in np.atleast_2d(comp.members):
                    for s in row:
                        for d in row:
                            if s != d:
                                yield int(s), int(d), comp.pair_volume
            elif isinstance(comp, IncStar):
                for row in np.atleast_2d(comp.members):
                    for d in row:
                        yield -1, int(d), comp.down_volume  # -1: in-switch source


@dataclass(frozen=True)
class Phase:
    tag: PhaseTag
    primitives: tuple[PrimitiveInstance, ...]
    flows: FlowSet

    def effective_bytes(self) -> int:
        return sum(p.effective_bytes() for p in self.primitives)


def _as_groups(group: np.ndarray) -> np.ndarray:
    g = np.asarray(group)
    return g.reshape(1, -1) if g.ndim == 1 else g


def _exact_div(num: int, den: int, what: str) -> int:
    if num % den:
        raise ScheduleError(f"{what}: {num} not divisible by {den}")
    return num // den


def expand_ring_collective(
    kind: PrimitiveKind,
    group: np.ndarray,
    tensor_size: int,
    repeat: int = 1,
    dim: int | None = None,
) -> FlowSet:
    """Ring-algorithm flows for All-Gather / Reduce-Scatter / All-Reduce.

    Per GPU the wire volume is (n-1)/n * D for AG and RS and twice that
    for AR, split evenly between the two ring directions.
    """
    groups = _as_groups(group)
    n = groups.shape[1]
    if n < 2:
        return FlowSet(())
    passes = {
        PrimitiveKind.ALL_GATHER: 1,
        PrimitiveKind.REDUCE_SCATTER: 1,
        PrimitiveKind.ALL_REDUCE: 2,
    }[kind]
    wire_per_gpu = repeat * passes * (n - 1) * _exact_div(tensor_size, n, "ring chunk")
    per_direction = _exact_div(wire_per_gpu, 2, "ring direction split")
    return FlowSet((RingFlows(groups, per_direction, per_direction, dim),))


def expand_p2p(
    src: np.ndarray | int,
    dst: np.ndarray | int,
    tensor_size: int,
    repeat: int = 1,
    dim: int | None = None,
    step: int | None = 1,
) -> FlowSet:
    """Point-to-point flows of ``tensor_size`` bytes per pair."""
    src_a = np.atleast_1d(np.asarray(src))
    dst_a = np.atleast_1d(np.asarray(dst))
    if src_a.shape != dst_a.shape:
        raise ScheduleError("src/dst arrays must pair up")
    if np.any(src_a == dst_a):
        raise ScheduleError("point-to-point requires distinct endpoints")
    return FlowSet((PairFlows(src_a, dst_a, tensor_size * repeat, dim, step),))


def expand_a2a(
    group: np.ndarray,
    tensor_size: int,
    routed_experts: int,
    direction: str,
    repeat: int = 1,
    dim: int | None = None,
) -> FlowSet:
    """Uniform all-to-all flows for expert dispatch or combine.

    Each source spreads k_r * D * (n-1)/n bytes evenly over its n-1
    peers; combine keeps the same wire volume (every routed copy
    returns for reduction), only its effective volume differs.
    """
    if direction not in ("dispatch", "combine"):
        raise ScheduleError(f"unknown all-to-all direction {direction!r}")
    if routed_experts < 1:
        raise ScheduleError("all-to-all requires routed_experts >= 1")
    groups = _as_groups(group)
    n = groups.shape[1]
    if n < 2:
        return FlowSet(())
    pair_volume = _exact_div(repeat * routed_experts * tensor_size, n, "a2a pair volume")
    return FlowSet((UniformA2A(groups, pair_volume, dim),))


def apply_inc_transform(phase: Phase, topology) -> Phase:
    """Substitute in-switch reduction for ring collectives in a TP phase.

    Only groups fully contained in one intra-server switch domain are
    transformed; any group spanning switches keeps its ring flows.
    """
    if phase.tag is not PhaseTag.TP:
        raise ScheduleError("INC transform applies to the TP phase only")
    server_of = getattr(topology, "server_of", None)
    if server_of is None:
        return phase  # no INC-capable switches in this architecture
    new_prims: list[PrimitiveInstance] = []
    new_comps: list[FlowComponent] = []
    # TP phases pair an AG and an RS instance over identical groups.
    ring_prims = [p for p in phase.primitives if not p.inc]
    if not ring_prims:
        return phase
    groups = ring_prims[0].groups
    servers = server_of(groups)
    eligible = bool(np.all(servers == servers[:, :1]))
    if not eligible:
        return phase
    d = ring_prims[0].tensor_size
    repeat = ring_prims[0].repeat
    if any(
        p.tensor_size != d or p.repeat != repeat or p.groups is not groups
        for p in ring_prims
    ):
        # heterogeneous phase; transform group-by-group not needed for
        # the schedules this package builds
        return phase
    new_prims.append(
        PrimitiveInstance(
            kind=PrimitiveKind.ALL_REDUCE,
            groups=groups,
            tensor_size=d,
            phase_tag=PhaseTag.TP,
            repeat=repeat,
            inc=True,
        )
    )
    new_comps.append(IncStar(groups, down_volume=d * repeat))
    return replace(
        phase, primitives=tuple(new_prims), flows=FlowSet(tuple(new_comps))
    )


def build_iteration_schedule(
    workload: WorkloadSpec, layout: GroupLayout
) -> list[Phase]:
    """Sequential phase schedule for one training iteration.

    Dense: TP, PP, DP.  MoE: attention DP, PP, EP dispatch, EP combine,
    EDP.  Per-layer collectives and forward/backward passes are folded
    into per-phase aggregate volumes.
    """
    cfg = workload.config
    if layout.config != cfg:
        raise ScheduleError("layout belongs to a different configuration")
    layers_local = workload.layers // cfg.p
    phases: list[Phase] = []
    dims = layout.torus_dims

    def ring_phase(tag, groups, tensor, repeat, dim):
        prims = (
            PrimitiveInstance(PrimitiveKind.ALL_GATHER, groups, tensor, tag, repeat=repeat),
            PrimitiveInstance(PrimitiveKind.REDUCE_SCATTER, groups, tensor, tag, repeat=repeat),
        )
        comps = (
            expand_ring_collective(PrimitiveKind.ALL_GATHER, groups, tensor, repeat, dim).components
            + expand_ring_collective(PrimitiveKind.REDUCE_SCATTER, groups, tensor, repeat, dim).components
        )
        return Phase(tag, prims, FlowSet(comps))

    def pp_phase(chains, tensor, dim):
        # m microbatches per boundary: activations forward, gradients back
        m = workload.microbatches
        src = np.ascontiguousarray(chains[:, :-1]).ravel()
        dst = np.ascontiguousarray(chains[:, 1:]).ravel()
        pairs = np.stack([src, dst])
        prim = PrimitiveInstance(
            PrimitiveKind.POINT_TO_POINT, pairs, tensor, PhaseTag.PP, repeat=2 * m
        )
        comps = (
            expand_p2p(src, dst, tensor, m, dim, step=1).components
            + expand_p2p(dst, src, tensor, m, dim, step=-1).components
        )
        return Phase(PhaseTag.PP, (prim,), FlowSet(comps))

    if cfg.model_kind == "dense":
        if layout.tp_groups is not None and workload.tp_activation_bytes:
            # (AG+RS) pairs per layer folded over layers, x2 for backward
            rep = 2 * layers_local * workload.tp_collectives_per_layer
            phases.append(
                ring_phase(
                    PhaseTag.TP,
                    layout.tp_groups,
                    workload.tp_activation_bytes,
                    rep,
                    dims.get("tp"),
                )
            )
        if layout.pp_chains is not None:
            phases.append(
                pp_phase(layout.pp_chains, workload.pp_activation_bytes, dims.get("pp"))
            )
        if layout.dp_groups is not None and workload.dp_gradient_bytes:
            phases.append(
                ring_phase(
                    PhaseTag.DP,
                    layout.dp_groups,
                    workload.dp_gradient_bytes,
                    1,
                    dims.get("dp"),
                )
            )
    else:
        if layout.attn_dp_groups is not None and cfg.d_attn > 1:
            phases.append(
                ring_phase(
                    PhaseTag.DP,
                    layout.attn_dp_groups,
                    workload.attn_gradient_bytes,
                    1,
                    dims.get("attn_dp"),
                )
            )
        if layout.pp_chains is not None:
            phases.append(
                pp_phase(layout.pp_chains, workload.pp_activation_bytes, dims.get("pp"))
            )
        rep = 2 * layers_local  # forward + backward per local layer
        k_r = workload.routed_experts
        for tag, direction in (
            (PhaseTag.EP_DISPATCH, "dispatch"),
            (PhaseTag.EP_COMBINE, "combine"),
        ):
            kind = (
                PrimitiveKind.ALL_TO_ALL_DISPATCH
                if direction == "dispatch"
                else PrimitiveKind.ALL_TO_ALL_COMBINE
            )
            prim = PrimitiveInstance(
                kind,
                layout.ep_groups,
                workload.a2a_token_bytes,
                tag,
                routed_experts=k_r,
                repeat=rep,
            )
            flows = expand_a2a(
                layout.ep_groups,
                workload.a2a_token_bytes,
                k_r,
                direction,
                rep,
                dims.get("ep"),
            )
            phases.append(Phase(tag, (prim,), flows))
        if workload.include_edp and layout.edp_groups is not None:
            phases.append(
                ring_phase(
                    PhaseTag.EDP,
                    layout.edp_groups,
                    workload.edp_gradient_bytes,
                    1,
                    dims.get("edp"),
                )
            )
    return phases
