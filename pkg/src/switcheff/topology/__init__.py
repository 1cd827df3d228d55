"""Parameterized 3D-Torus and Rail-Optimized topology construction."""

from .torus import TorusParams, TorusTopology, build_torus, remap_torus_dimensions, cubic_dims
from .rail import RailParams, RailTopology, build_rail

__all__ = [
    "TorusParams",
    "TorusTopology",
    "build_torus",
    "remap_torus_dimensions",
    "cubic_dims",
    "RailParams",
    "RailTopology",
    "build_rail",
    "port_inventory_total",
]

# Baseline link rate: 400 Gb/s expressed in bytes/s.  All reported
# metrics are ratios, so this constant only fixes units.
BASE_RATE = 400e9 / 8


def port_inventory_total(topology) -> float:
    """Sum of all switch egress-port rates (bytes/s), the capacity term
    in the switching-efficiency denominator."""
    return topology.port_inventory_total()
