"""Switching-efficiency analysis for AI datacenter networks.

An analytical, deterministic engine that quantifies how effectively a
network architecture (3D-Torus or Rail-Optimized Clos) converts its
provisioned switching capacity into computationally effective data
throughput for LLM training workloads.  The core metric (switching
efficiency, eta) decomposes into data efficiency (gamma), routing
efficiency (delta) and port utilization (theta).
"""

__version__ = "0.1.0"

from .metrics import (
    PrimitiveKind,
    MetricsRecord,
    AggregatedMetrics,
    PortLedger,
    effective_volume,
    data_efficiency,
    routing_efficiency,
    port_utilization,
    compose_metrics,
    aggregate_metrics,
)
from .topology import TorusParams, RailParams, build_torus, build_rail, port_inventory_total

__all__ = [
    "PrimitiveKind",
    "MetricsRecord",
    "AggregatedMetrics",
    "PortLedger",
    "effective_volume",
    "data_efficiency",
    "routing_efficiency",
    "port_utilization",
    "compose_metrics",
    "aggregate_metrics",
    "TorusParams",
    "RailParams",
    "build_torus",
    "build_rail",
    "port_inventory_total",
]
