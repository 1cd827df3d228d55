"""Pure metric computations: effective data volumes, the efficiency
decomposition (gamma, delta, theta) and suite-level aggregation.

All functions are side-effect free and operate on plain numbers or
immutable ledgers, so they are safe to call concurrently.  Byte counts
are exact integers; ratios are double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InconsistentLedgerError


class PrimitiveKind(Enum):
    POINT_TO_POINT = "p2p"
    ALL_GATHER = "all-gather"
    REDUCE_SCATTER = "reduce-scatter"
    ALL_REDUCE = "all-reduce"
    ALL_TO_ALL_DISPATCH = "a2a-dispatch"
    ALL_TO_ALL_COMBINE = "a2a-combine"


class Tier(Enum):
    """Where a switch egress port lives in the network hierarchy."""

    SPINE = "spine"
    LEAF = "leaf"
    INTRA_SERVER = "intra-server"
    GPU_RESIDENT = "gpu-resident"
    # Third Clos tier; appears once the spine layer alone cannot reach
    # the required server count.
    CORE = "core"


def effective_volume(
    kind: PrimitiveKind,
    participants: int,
    tensor_size: int,
    routed_experts: int = 1,
) -> int:
    """Effective data volume of one communication primitive, in bytes.

    ``tensor_size`` is the full gradient/activation tensor held by each
    participant.  For point-to-point, ``participants`` counts disjoint
    sender/receiver pairs and the result is the total delivered across
    all pairs.  Single-member groups of the collective kinds move no
    data and yield 0.
    """
    if participants < 1:
        raise ValueError(f"participants must be >= 1, got {participants}")
    if tensor_size <= 0:
        raise ValueError(f"tensor_size must be positive, got {tensor_size}")
    d = int(tensor_size)
    n = int(participants)
    if kind is PrimitiveKind.POINT_TO_POINT:
        return n * d
    if n == 1:
        return 0
    if kind is PrimitiveKind.ALL_GATHER:
        return d * (n - 1)
    if kind is PrimitiveKind.REDUCE_SCATTER:
        return d
    if kind is PrimitiveKind.ALL_REDUCE:
        return n * d
    if kind is PrimitiveKind.ALL_TO_ALL_DISPATCH:
        if routed_experts < 1:
            raise ValueError(f"routed_experts must be >= 1, got {routed_experts}")
        return d * (n - 1) * int(routed_experts)
    if kind is PrimitiveKind.ALL_TO_ALL_COMBINE:
        return d * (n - 1)
    raise ValueError(f"unknown primitive kind: {kind!r}")


@dataclass(frozen=True)
class EffectiveDataResult:
    """One primitive together with its effective volume."""

    primitive_kind: PrimitiveKind
    participants: int
    tensor_size: int
    routed_experts: int
    effective_volume: int

    @classmethod
    def of(
        cls,
        kind: PrimitiveKind,
        participants: int,
        tensor_size: int,
        routed_experts: int = 1,
    ) -> "EffectiveDataResult":
        return cls(
            kind,
            participants,
            tensor_size,
            routed_experts,
            effective_volume(kind, participants, tensor_size, routed_experts),
        )


@dataclass
class PortGroup:
    """A set of physically identical egress ports, accounted in bulk.

    ``unit_bytes[u]`` holds the total bytes forwarded by logical unit
    ``u``; a unit covers ``port_count / len(unit_bytes)`` physical ports
    across which traffic is spread evenly (fluid ECMP / plane mirroring).
    """

    label: str
    tier: Tier
    port_count: int
    port_rate: float  # bytes/s per physical port
    unit_bytes: np.ndarray  # int64, one entry per logical unit

    @property
    def units(self) -> int:
        return len(self.unit_bytes)

    @property
    def ports_per_unit(self) -> float:
        return self.port_count / self.units

    @property
    def unit_capacity(self) -> float:
        """Aggregate egress rate of one logical unit (bytes/s)."""
        return self.ports_per_unit * self.port_rate

    @property
    def total_rate(self) -> float:
        return self.port_count * self.port_rate

    @property
    def total_bytes(self) -> int:
        return int(self.unit_bytes.sum())

    @property
    def active_rate(self) -> float:
        active = int(np.count_nonzero(self.unit_bytes))
        return active * self.unit_capacity

    def max_unit_time(self) -> float:
        """Time for the busiest unit to drain at its capacity."""
        if self.units == 0:
            return 0.0
        return float(self.unit_bytes.max()) / self.unit_capacity


@dataclass
class PortLedger:
    """Byte accounting for one workload iteration on one topology.

    Holds per-port forwarded bytes (grouped), per-GPU received bytes and
    the iteration duration.  This is the input to the efficiency
    decomposition.
    """

    groups: list[PortGroup]
    received: np.ndarray  # int64 per GPU
    duration: float
    phase_durations: list[tuple[str, float]] = field(default_factory=list)

    def forwarded_bytes(self) -> int:
        return sum(g.total_bytes for g in self.groups)

    def received_bytes(self) -> int:
        return int(self.received.sum())

    def total_port_rate(self) -> float:
        return sum(g.total_rate for g in self.groups)

    def active_port_rate(self) -> float:
        return sum(g.active_rate for g in self.groups)

    def port_count(self) -> int:
        return sum(g.port_count for g in self.groups)

    def check_feasible(self) -> None:
        """Per-port bytes must not exceed capacity x duration."""
        if self.duration == 0:
            if self.forwarded_bytes() > 0:
                raise InconsistentLedgerError("traffic with zero duration")
            return
        for g in self.groups:
            limit = g.unit_capacity * self.duration * (1 + 1e-9)
            worst = float(g.unit_bytes.max()) if g.units else 0.0
            if worst > limit:
                raise InconsistentLedgerError(
                    f"port group {g.label}: {worst} bytes exceeds "
                    f"capacity*duration {limit}"
                )

    def export_columnar(self) -> str:
        """Documented text dump: one row per port group, then totals."""
        lines = ["group\ttier\tports\trate\tbytes\tactive_units\tunits"]
        for g in self.groups:
            lines.append(
                f"{g.label}\t{g.tier.value}\t{g.port_count}\t{g.port_rate:.6g}"
                f"\t{g.total_bytes}\t{int(np.count_nonzero(g.unit_bytes))}\t{g.units}"
            )
        lines.append(f"# received_total\t{self.received_bytes()}")
        lines.append(f"# forwarded_total\t{self.forwarded_bytes()}")
        lines.append(f"# duration\t{self.duration:.9g}")
        for tag, t in self.phase_durations:
            lines.append(f"# phase\t{tag}\t{t:.9g}")
        return "\n".join(lines) + "\n"


def data_efficiency(effective_bytes: int, received_bytes: int) -> float:
    """gamma: effective bytes per received byte (1 / (1 + r_byte))."""
    if received_bytes < 0 or effective_bytes < 0:
        raise ValueError("byte counts must be nonnegative")
    if received_bytes == 0:
        if effective_bytes > 0:
            raise InconsistentLedgerError(
                "effective bytes without any received bytes"
            )
        return 1.0  # vacuous: no traffic at all
    return effective_bytes / received_bytes


def redundant_byte_ratio(gamma: float) -> float:
    """r_byte derived on demand from gamma (single source of truth)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 1.0 / gamma - 1.0


def routing_efficiency(received_bytes: int, forwarded_bytes: int) -> float:
    """delta: received bytes per switch-forwarded byte (1 / n_fwd)."""
    if received_bytes == 0 and forwarded_bytes == 0:
        return 1.0
    if received_bytes <= 0:
        raise ValueError("received_bytes must be positive")
    if forwarded_bytes < received_bytes:
        raise InconsistentLedgerError(
            f"forwarded bytes ({forwarded_bytes}) below received bytes "
            f"({received_bytes}): flow conservation violated"
        )
    return received_bytes / forwarded_bytes


def port_utilization(ledger: PortLedger) -> tuple[float, float, float]:
    """(theta, theta_spatial, theta_temporal) for a ledger.

    theta_spatial is the activated fraction of deployed port capacity;
    theta_temporal is the intensity on the activated capacity.
    """
    total_rate = ledger.total_port_rate()
    if total_rate <= 0:
        raise ValueError("ledger has no port capacity")
    forwarded = ledger.forwarded_bytes()
    if forwarded == 0:
        return 0.0, 0.0, 0.0
    if ledger.duration <= 0:
        raise InconsistentLedgerError("traffic recorded with zero duration")
    ledger.check_feasible()
    active_rate = ledger.active_port_rate()
    spatial = active_rate / total_rate
    temporal = forwarded / (ledger.duration * active_rate)
    return spatial * temporal, spatial, temporal


@dataclass(frozen=True)
class MetricsRecord:
    """Full efficiency decomposition for one workload."""

    gamma: float
    delta: float
    theta: float
    theta_spatial: float
    theta_temporal: float
    mu: float
    eta: float
    effective_bytes: int
    received_bytes: int
    forwarded_bytes: int
    duration: float

    def capacity(self) -> float:
        """Total deployed port rate implied by this record."""
        if self.theta == 0 or self.duration == 0:
            return 0.0
        return self.forwarded_bytes / (self.duration * self.theta)


def compose_metrics(
    effective_bytes: int, received_bytes: int, ledger: PortLedger
) -> MetricsRecord:
    """Build a MetricsRecord; eta is the product gamma*delta*theta and
    equals the direct effective/(T * sum R_p) ratio by construction."""
    if received_bytes != ledger.received_bytes():
        raise InconsistentLedgerError(
            f"received_bytes argument ({received_bytes}) disagrees with "
            f"ledger ({ledger.received_bytes()})"
        )
    gamma = data_efficiency(effective_bytes, received_bytes)
    forwarded = ledger.forwarded_bytes()
    delta = routing_efficiency(received_bytes, forwarded)
    theta, spatial, temporal = port_utilization(ledger)
    mu = delta * theta
    eta = gamma * mu
    return MetricsRecord(
        gamma=gamma,
        delta=delta,
        theta=theta,
        theta_spatial=spatial,
        theta_temporal=temporal,
        mu=mu,
        eta=eta,
        effective_bytes=effective_bytes,
        received_bytes=received_bytes,
        forwarded_bytes=forwarded,
        duration=ledger.duration,
    )


@dataclass
class AggregatedMetrics:
    """Suite-level metrics over sequential workloads.

    ``eta_bar`` is stored in both its pooled (ratio-of-sums over the
    whole window) and weighted-sum forms, which must agree; the barred
    component metrics use the pooled interpretation (byte-weighted, not
    time-weighted).
    """

    weights: list[tuple[str, float, float]]  # (workload id, lambda_k, T_k)
    records: list[MetricsRecord]
    eta_bar: float
    eta_bar_weighted: float
    gamma_bar: float
    delta_bar: float
    theta_bar: float
    mu_bar: float
    effective_bytes: int
    received_bytes: int
    forwarded_bytes: int
    duration: float
    total_port_rate: float


def aggregate_metrics(
    items: list[tuple[str, MetricsRecord]],
    total_port_rate: float | None = None,
    equal_weights: bool = False,
) -> AggregatedMetrics:
    """Aggregate per-workload records into suite-level barred metrics.

    Default weighting uses each record's duration (lambda_k = T_k / T).
    With ``equal_weights`` the barred metrics become unweighted means of
    the per-workload values instead of pooled ratios.
    """
    if not items:
        raise ValueError("aggregate_metrics requires at least one record")
    records = [r for _, r in items]
    if total_port_rate is None:
        total_port_rate = max(r.capacity() for r in records)
    t_total = sum(r.duration for r in records)
    if t_total <= 0:
        raise ValueError("total duration must be positive")

    eff = sum(r.effective_bytes for r in records)
    recv = sum(r.received_bytes for r in records)
    fwd = sum(r.forwarded_bytes for r in records)

    weights = [(wid, r.duration / t_total, r.duration) for (wid, r) in items]
    eta_weighted = sum(lam * r.eta for (_, lam, _), r in zip(weights, records))
    eta_pooled = eff / (t_total * total_port_rate)

    if equal_weights:
        k = len(records)
        gamma_bar = sum(r.gamma for r in records) / k
        delta_bar = sum(r.delta for r in records) / k
        theta_bar = sum(r.theta for r in records) / k
        mu_bar = sum(r.mu for r in records) / k
        eta_bar = sum(r.eta for r in records) / k
        eta_weighted = eta_bar
    else:
        gamma_bar = data_efficiency(eff, recv)
        delta_bar = routing_efficiency(recv, fwd)
        theta_bar = fwd / (t_total * total_port_rate)
        mu_bar = delta_bar * theta_bar
        eta_bar = eta_pooled

    return AggregatedMetrics(
        weights=weights,
        records=records,
        eta_bar=eta_bar,
        eta_bar_weighted=eta_weighted,
        gamma_bar=gamma_bar,
        delta_bar=delta_bar,
        theta_bar=theta_bar,
        mu_bar=mu_bar,
        effective_bytes=eff,
        received_bytes=recv,
        forwarded_bytes=fwd,
        duration=t_total,
        total_port_rate=total_port_rate,
    )
