"""Flow routing, per-port byte accounting and fluid phase timing.

Routing is deterministic shortest-path with idealized even ECMP splits.
On the torus, ring traffic stays on its mapped dimension; all-to-all is
routed one-way around the ring (each hop is one GPU-resident switch
egress).  On the rail fabric, paths follow server switch / leaf /
spine / core tiers; when no spine exists, cross-rail traffic relays
through the server fabric to the destination rail.

Phase durations come from the single bottleneck port:
T = max_p bytes_p / R_p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RoutingError
from .metrics import MetricsRecord, PortLedger, compose_metrics
from .topology.rail import RailTopology
from .topology.torus import DIM_NAMES, TorusTopology
from .traffic import (
    FlowComponent,
    FlowSet,
    IncStar,
    PairFlows,
    Phase,
    RingFlows,
    UniformA2A,
)

# Groups at or below this many members are expanded pairwise; larger
# uniform groups use the closed-form traversal counts.
PAIRWISE_A2A_LIMIT = 64


class _Acc:
    """Per-phase byte accumulator over a topology's port groups."""

    def __init__(self, topo):
        self.topo = topo
        self.groups = topo.empty_port_groups()
        self.recv = np.zeros(topo.n, dtype=np.int64)

    def add(self, label: str, idx, volume) -> None:
        np.add.at(self.groups[label].unit_bytes, idx, volume)

    def add_recv(self, idx, volume) -> None:
        np.add.at(self.recv, idx, volume)

    def duration(self) -> float:
        times = [g.max_unit_time() for g in self.groups.values()]
        return max(times, default=0.0)


def phase_duration(topology, acc: _Acc) -> float:
    """Fluid bottleneck duration of one phase."""
    return acc.duration()


# -- torus routing ------------------------------------------------------------


def _torus_ring(topo, acc, comp: RingFlows) -> None:
    if comp.dim is None:
        raise RoutingError("torus ring flows need an assigned dimension")
    dn = DIM_NAMES[comp.dim]
    flat = comp.members.ravel()
    if comp.forward_volume:
        acc.add(f"gpu.{dn}+", flat, comp.forward_volume)
        acc.add_recv(flat, comp.forward_volume)
    if comp.backward_volume:
        acc.add(f"gpu.{dn}-", flat, comp.backward_volume)
        acc.add_recv(flat, comp.backward_volume)


def _torus_pairs(topo, acc, comp: PairFlows) -> None:
    if comp.dim is None:
        raise RoutingError("torus pair flows need an assigned dimension")
    dn = DIM_NAMES[comp.dim]
    step = comp.step
    if step == 1:
        acc.add(f"gpu.{dn}+", comp.src, comp.volume)
    elif step == -1:
        acc.add(f"gpu.{dn}-", comp.src, comp.volume)
    else:
        raise RoutingError("generic torus pair routing requires a route table")
    acc.add_recv(comp.dst, comp.volume)


def _torus_a2a(topo, acc, comp: UniformA2A, mode: str) -> None:
    if comp.dim is None:
        raise RoutingError("torus all-to-all needs an assigned dimension")
    dn = DIM_NAMES[comp.dim]
    n = comp.members.shape[1]
    v = comp.pair_volume
    flat = comp.members.ravel()
    if mode == "unidirectional":
        # one-way around the ring: every edge is crossed by
        # sum_{d=1..n-1} d = n(n-1)/2 pair-volumes
        edge = v * (n * (n - 1) // 2)
        acc.add(f"gpu.{dn}+", flat, edge)
    elif mode == "bidirectional":
        # minimal direction with an even split at the half-way tie
        num = v * n * n if n % 2 == 0 else v * (n * n - 1)
        if num % 8:
            raise RoutingError("bidirectional a2a volume not evenly splittable")
        edge = num // 8
        acc.add(f"gpu.{dn}+", flat, edge)
        acc.add(f"gpu.{dn}-", flat, edge)
    else:
        raise RoutingError(f"unknown torus a2a mode {mode!r}")
    acc.add_recv(flat, v * (n - 1))


def _torus_a2a_pairwise(topo, acc, comp: UniformA2A, mode: str) -> None:
    """Per-pair expansion of uniform all-to-all (oracle path)."""
    if comp.dim is None:
        raise RoutingError("torus all-to-all needs an assigned dimension")
    dn = DIM_NAMES[comp.dim]
    v = comp.pair_volume
    plus = acc.groups[f"gpu.{dn}+"].unit_bytes
    minus = acc.groups[f"gpu.{dn}-"].unit_bytes
    for row in np.atleast_2d(comp.members):
        n = len(row)
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                fwd = (b - a) % n
                if mode == "unidirectional":
                    for k in range(fwd):
                        plus[row[(a + k) % n]] += v
                else:
                    bwd = n - fwd
                    if fwd < bwd:
                        for k in range(fwd):
                            plus[row[(a + k) % n]] += v
                    elif bwd < fwd:
                        for k in range(bwd):
                            minus[row[(a - k) % n]] += v
                    else:
                        if v % 2:
                            raise RoutingError("tie split needs even volume")
                        for k in range(fwd):
                            plus[row[(a + k) % n]] += v // 2
                        for k in range(bwd):
                            minus[row[(a - k) % n]] += v // 2
                acc.recv[row[b]] += v


# -- rail routing -------------------------------------------------------------


def _rail_classify(topo: RailTopology, acc, src, dst, volume) -> None:
    """Accumulate one batch of directed flows along shortest rail paths."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    g = topo.gpus_per_server
    srv_s, srv_d = src // g, dst // g
    acc.add_recv(dst, volume)

    same_server = srv_s == srv_d
    if same_server.any():
        acc.add("server.down", dst[same_server], volume)
    rest = ~same_server
    if not rest.any():
        return
    rail_s, rail_d = src % g, dst % g
    leaf_s = topo.group_of_server(srv_s) * g + rail_s
    leaf_d = topo.group_of_server(srv_d) * g + rail_d

    if not topo.has_spine:
        same_rail = rest & (rail_s == rail_d)
        if same_rail.any():
            acc.add("leaf.down", dst[same_rail], volume)
        cross = rest & ~ (rail_s == rail_d)
        if cross.any():
            # no spine: relay through the server fabric onto the
            # destination rail, then one leaf forwarding
            relay = srv_s[cross] * g + rail_d[cross]
            acc.add("server.down", relay, volume)
            acc.add("leaf.down", dst[cross], volume)
        return

    same_leaf = rest & (leaf_s == leaf_d)
    if same_leaf.any():
        acc.add("leaf.down", dst[same_leaf], volume)
    far = rest & ~(leaf_s == leaf_d)
    if far.any():
        acc.add("leaf.up", leaf_s[far], volume)
        acc.add("spine.down", leaf_d[far], volume)
        acc.add("leaf.down", dst[far], volume)
        if topo.has_core:
            pod_s = srv_s // topo.pod_servers
            pod_d = srv_d // topo.pod_servers
            cross_pod = far & (pod_s != pod_d)
            if cross_pod.any():
                acc.add("spine.up", pod_s[cross_pod], volume)
                acc.add("core.down", pod_d[cross_pod], volume)


def _rail_ring(topo, acc, comp: RingFlows) -> None:
    members = np.atleast_2d(comp.members)
    succ = np.roll(members, -1, axis=1)
    if comp.forward_volume:
        _rail_classify(topo, acc, members.ravel(), succ.ravel(), comp.forward_volume)
    if comp.backward_volume:
        _rail_classify(topo, acc, succ.ravel(), members.ravel(), comp.backward_volume)


def _rail_a2a_pairwise(topo, acc, comp: UniformA2A) -> None:
    for row in np.atleast_2d(comp.members):
        n = len(row)
        idx = np.arange(n)
        src = np.repeat(row, n - 1)
        dst = row[(idx[None, :] + idx[1:, None]) % n].T.ravel()
        _rail_classify(topo, acc, src, dst, comp.pair_volume)


def _rail_a2a_analytic(topo: RailTopology, acc, comp: UniformA2A) -> bool:
    """Closed-form per-port bytes for uniform all-to-all on contiguous,
    aligned groups.  Returns False when the placement is not symmetric
    enough, in which case the caller falls back to pairwise expansion."""
    members = np.atleast_2d(comp.members)
    n = members.shape[1]
    v = comp.pair_volume
    g = topo.gpus_per_server
    starts = members[:, 0]
    contiguous = bool(
        np.all(np.diff(members, axis=1) == 1) and np.all(starts % n == 0)
    )
    if not contiguous:
        return False
    flat = members.ravel()
    if n <= g:
        # whole group inside one server
        acc.add("server.down", flat, v * (n - 1))
        acc.add_recv(flat, v * (n - 1))
        return True
    if n % g:
        return False
    m = n // g  # servers per group
    if topo.has_core and m > topo.pod_servers:
        return False
    acc.add_recv(flat, v * (n - 1))
    acc.add("server.down", flat, v * (g - 1))
    acc.add("leaf.down", flat, v * (n - g))
    if topo.has_spine:
        span = min(m, topo.servers_per_leaf)  # group servers per leaf group
        upward = v * (n - g - (span - 1))
        if upward:
            leaves = topo.leaf_of(flat)
            acc.add("leaf.up", leaves, upward)
            acc.add("spine.down", leaves, upward)
    else:
        # cross-rail traffic relays through every server switch
        acc.add("server.down", flat, v * (g - 1) * (m - 1))
    return True


def _rail_inc(topo, acc, comp: IncStar) -> None:
    flat = np.atleast_2d(comp.members).ravel()
    acc.add("server.down", flat, comp.down_volume)
    acc.add_recv(flat, comp.down_volume)


# -- dispatch -----------------------------------------------------------------


def route_component(
    topo, acc: _Acc, comp: FlowComponent, a2a_mode: str = "unidirectional",
    force_pairwise: bool = False,
) -> None:
    if isinstance(topo, TorusTopology):
        if isinstance(comp, RingFlows):
            _torus_ring(topo, acc, comp)
        elif isinstance(comp, PairFlows):
            _torus_pairs(topo, acc, comp)
        elif isinstance(comp, UniformA2A):
            if force_pairwise or comp.members.shape[1] <= PAIRWISE_A2A_LIMIT:
                _torus_a2a_pairwise(topo, acc, comp, a2a_mode)
            else:
                _torus_a2a(topo, acc, comp, a2a_mode)
        elif isinstance(comp, IncStar):
            raise RoutingError("in-network computing is not available on the torus")
        else:
            raise RoutingError(f"unroutable component {comp!r}")
    elif isinstance(topo, RailTopology):
        if isinstance(comp, RingFlows):
            _rail_ring(topo, acc, comp)
        elif isinstance(comp, PairFlows):
            _rail_classify(topo, acc, comp.src, comp.dst, comp.volume)
        elif isinstance(comp, UniformA2A):
            if force_pairwise or not _rail_a2a_analytic(topo, acc, comp):
                _rail_a2a_pairwise(topo, acc, comp)
        elif isinstance(comp, IncStar):
            _rail_inc(topo, acc, comp)
        else:
            raise RoutingError(f"unroutable component {comp!r}")
    else:
        raise RoutingError(f"unknown topology kind {topo!r}")


def aggregate_a2a_analytically(
    topology, members: np.ndarray, pair_volume: int, dim: int | None = None,
    a2a_mode: str = "unidirectional",
) -> _Acc:
    """Per-port bytes of a uniform all-to-all, computed in closed form
    (falls back to pairwise expansion on asymmetric placements)."""
    acc = _Acc(topology)
    comp = UniformA2A(np.atleast_2d(members), pair_volume, dim)
    if isinstance(topology, TorusTopology):
        _torus_a2a(topology, acc, comp, a2a_mode)
    else:
        if not _rail_a2a_analytic(topology, acc, comp):
            _rail_a2a_pairwise(topology, acc, comp)
    return acc


def a2a_pairwise(
    topology, members: np.ndarray, pair_volume: int, dim: int | None = None,
    a2a_mode: str = "unidirectional",
) -> _Acc:
    """Pairwise-expansion oracle for uniform all-to-all."""
    acc = _Acc(topology)
    comp = UniformA2A(np.atleast_2d(members), pair_volume, dim)
    if isinstance(topology, TorusTopology):
        _torus_a2a_pairwise(topology, acc, comp, a2a_mode)
    else:
        _rail_a2a_pairwise(topology, acc, comp)
    return acc


# -- route table (path queries for tests, oracles and debugging) -------------


@dataclass(frozen=True)
class RoutePath:
    weight: float
    ports: tuple[str, ...]

    @property
    def forwardings(self) -> int:
        return len(self.ports)


class RouteTable:
    """Lazy (src, dst) -> path lookup mirroring the accounting rules."""

    def __init__(self, topology):
        self.topology = topology

    def paths(self, src: int, dst: int, dim: int | None = None) -> list[RoutePath]:
        topo = self.topology
        if src == dst:
            raise RoutingError("src == dst")
        if isinstance(topo, RailTopology):
            return [RoutePath(1.0, self._rail_ports(topo, src, dst))]
        return self._torus_paths(topo, src, dst, dim)

    def forward_count(self, src: int, dst: int, dim: int | None = None) -> float:
        return sum(p.weight * p.forwardings for p in self.paths(src, dst, dim))

    @staticmethod
    def _rail_ports(topo: RailTopology, src: int, dst: int) -> tuple[str, ...]:
        g = topo.gpus_per_server
        if src // g == dst // g:
            return (f"server.down[{dst}]",)
        leaf_s, leaf_d = topo.leaf_of(src), topo.leaf_of(dst)
        if not topo.has_spine:
            if src % g == dst % g:
                return (f"leaf.down[{dst}]",)
            relay = (src // g) * g + dst % g
            return (f"server.down[{relay}]", f"leaf.down[{dst}]")
        if leaf_s == leaf_d:
            return (f"leaf.down[{dst}]",)
        ports = [f"leaf.up[{leaf_s}]"]
        if topo.has_core:
            pod_s = src // g // topo.pod_servers
            pod_d = dst // g // topo.pod_servers
            if pod_s != pod_d:
                ports += [f"spine.up[{pod_s}]", f"core.down[{pod_d}]"]
        ports += [f"spine.down[{leaf_d}]", f"leaf.down[{dst}]"]
        return tuple(ports)

    @staticmethod
    def _torus_paths(
        topo: TorusTopology, src: int, dst: int, dim: int | None
    ) -> list[RoutePath]:
        """Dimension-ordered minimal routing with an even two-way split
        at exact half-ring distances."""
        dims = range(3) if dim is None else (dim,)
        paths = [(1.0, src, [])]
        for d in dims:
            nxt = []
            for w, at, ports in paths:
                ring_a, pos_a = topo.ring_of(at, d)
                ring_b, pos_b = topo.ring_of(dst, d)
                if topo.ring_sizes[d] is not None and ring_a != ring_b:
                    raise RoutingError(
                        f"endpoints not on one ring of dimension {DIM_NAMES[d]}"
                    )
                size = topo.ring_sizes[d] or topo.params.dims[d]
                fwd = (pos_b - pos_a) % size
                bwd = size - fwd if fwd else 0
                legs = []
                if fwd == 0:
                    nxt.append((w, at, ports))
                    continue
                if fwd < bwd:
                    legs.append((w, 1, fwd))
                elif bwd < fwd:
                    legs.append((w, -1, bwd))
                else:
                    legs.append((w / 2, 1, fwd))
                    legs.append((w / 2, -1, bwd))
                for wl, step, hops in legs:
                    cur, pl = at, list(ports)
                    sign = "+" if step == 1 else "-"
                    for _ in range(hops):
                        pl.append(f"gpu.{DIM_NAMES[d]}{sign}[{cur}]")
                        cur = topo.neighbor(cur, d, step)
                    nxt.append((wl, cur, pl))
            paths = nxt
        return [RoutePath(w, tuple(p)) for w, _, p in paths]


def route_flows(topology, flow_set: FlowSet, a2a_mode: str = "unidirectional"):
    """Route one flow set: returns (RouteTable, port groups, received)."""
    acc = _Acc(topology)
    for comp in flow_set.components:
        route_component(topology, acc, comp, a2a_mode)
    return RouteTable(topology), acc.groups, acc.recv


# -- full workload evaluation -------------------------------------------------


def evaluate_workload(
    topology,
    schedule: list[Phase],
    a2a_mode: str = "unidirectional",
) -> tuple[PortLedger, MetricsRecord]:
    """Route and time every phase, then compose the efficiency metrics.

    Deterministic: identical inputs produce bit-identical ledgers.
    """
    merged = topology.empty_port_groups()
    recv = np.zeros(topology.n, dtype=np.int64)
    phase_durations: list[tuple[str, float]] = []
    effective = 0
    for phase in schedule:
        acc = _Acc(topology)
        for comp in phase.flows.components:
            route_component(topology, acc, comp, a2a_mode)
        t = acc.duration()
        phase_durations.append((phase.tag.value, t))
        for label, grp in acc.groups.items():
            merged[label].unit_bytes += grp.unit_bytes
        recv += acc.recv
        effective += phase.effective_bytes()
    ledger = PortLedger(
        groups=list(merged.values()),
        received=recv,
        duration=sum(t for _, t in phase_durations),
        phase_durations=phase_durations,
    )
    record = compose_metrics(effective, ledger.received_bytes(), ledger)
    return ledger, record
