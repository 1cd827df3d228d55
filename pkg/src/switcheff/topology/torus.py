"""3D-Torus topology with GPU-resident 6-port switching chips.

Each GPU carries a low-radix switch with two egress ports per dimension
(+/- wraparound neighbor).  The fabric is assumed reconfigurable through
optical circuit switches, so a workload's parallel dimensions map onto
dedicated physical dimensions as contiguous rings; the remap is an ideal
relabeling, no rewiring latency is modeled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from ..errors import ConstructionError, MappingError
from ..metrics import PortGroup, Tier

DIM_NAMES = ("x", "y", "z")


def cubic_dims(n: int) -> tuple[int, int, int]:
    """Most-cubic power-of-two factorization of n, largest first.

    4096 -> (16, 16, 16); 2048 -> (16, 16, 8); 512 -> (8, 8, 8).
    """
    if n < 8 or n & (n - 1):
        raise ConstructionError(f"cluster size {n} is not a power of two >= 8")
    k = n.bit_length() - 1
    a = (k + 2) // 3
    b = (k - a + 1) // 2
    c = k - a - b
    dims = (2**a, 2**b, 2**c)
    if min(dims) < 2:
        raise ConstructionError(f"cluster size {n} has no 3D factorization with dims >= 2")
    return dims


@dataclass(frozen=True)
class TorusParams:
    """Construction parameters for a 3D torus.

    ``boosted_dim`` realizes a tiered bandwidth ratio by adding egress
    ports along one dimension; (dim, extra) scales that dimension's
    per-direction link capacity to (1 + extra/2) x base.
    """

    dims: tuple[int, int, int]
    base_port_rate: float
    boosted_dim: tuple[int, int] | None = None

    @property
    def boost_ratio(self) -> float:
        if self.boosted_dim is None:
            return 1.0
        _, extra = self.boosted_dim
        return 1.0 + extra / 2.0

    @classmethod
    def with_ratio(
        cls, dims: tuple[int, int, int], base_port_rate: float, dim: int, ratio: float
    ) -> "TorusParams":
        """Parameters giving dimension ``dim`` a ratio:1 capacity edge."""
        extra = int(round(2 * (ratio - 1)))
        boosted = None if extra == 0 else (dim, extra)
        return cls(dims=dims, base_port_rate=base_port_rate, boosted_dim=boosted)


@dataclass(frozen=True)
class TorusTopology:
    """An OCS-reconfigurable 3D torus of ``n`` GPU-resident switches."""

    n: int
    params: TorusParams
    # Logical ring sizes per dimension after remapping; dimension d is
    # partitioned into rings of ring_sizes[d] consecutive GPUs.  None
    # means the physical wraparound rings of the construction dims.
    ring_sizes: tuple[int | None, int | None, int | None] = (None, None, None)

    arch_kind = "torus3d"
    ports_per_gpu = 6

    def dim_rate(self, dim: int) -> float:
        rate = self.params.base_port_rate
        if self.params.boosted_dim is not None and self.params.boosted_dim[0] == dim:
            rate *= self.params.boost_ratio
        return rate

    def port_inventory_total(self) -> float:
        return self.n * 2 * sum(self.dim_rate(d) for d in range(3))

    def port_count(self) -> int:
        return self.n * self.ports_per_gpu

    def empty_port_groups(self) -> dict[str, PortGroup]:
        groups = {}
        for d in range(3):
            for sign in ("+", "-"):
                label = f"gpu.{DIM_NAMES[d]}{sign}"
                groups[label] = PortGroup(
                    label=label,
                    tier=Tier.GPU_RESIDENT,
                    port_count=self.n,
                    port_rate=self.dim_rate(d),
                    unit_bytes=np.zeros(self.n, dtype=np.int64),
                )
        return groups

    # -- physical coordinates (construction dims, used for export/toys) --

    def coords(self, gpu: int) -> tuple[int, int, int]:
        x_len, y_len, z_len = self.params.dims
        return (gpu % x_len, (gpu // x_len) % y_len, gpu // (x_len * y_len))

    def gpu_at(self, x: int, y: int, z: int) -> int:
        x_len, y_len, _ = self.params.dims
        return x + x_len * (y + y_len * z)

    def ring_of(self, gpu: int, dim: int) -> tuple[int, int]:
        """(ring id, position) of a GPU along a dimension's rings."""
        size = self.ring_sizes[dim]
        if size is None:
            c = self.coords(gpu)
            # physical ring along dim: id = flattened other coords
            pos = c[dim]
            others = [c[d] for d in range(3) if d != dim]
            lens = [self.params.dims[d] for d in range(3) if d != dim]
            return others[0] + lens[0] * others[1], pos
        return gpu // size, gpu % size

    def neighbor(self, gpu: int, dim: int, step: int) -> int:
        size = self.ring_sizes[dim]
        if size is None:
            c = list(self.coords(gpu))
            c[dim] = (c[dim] + step) % self.params.dims[dim]
            return self.gpu_at(*c)
        ring, pos = gpu // size, gpu % size
        return ring * size + (pos + step) % size

    def iter_links(self) -> Iterator[tuple[str, str, str, float]]:
        """(src node, egress port label, dst node, rate) for every link."""
        for g in range(self.n):
            for d in range(3):
                rate = self.dim_rate(d)
                yield (f"gpu/{g}", f"gpu.{DIM_NAMES[d]}+[{g}]", f"gpu/{self.neighbor(g, d, 1)}", rate)
                yield (f"gpu/{g}", f"gpu.{DIM_NAMES[d]}-[{g}]", f"gpu/{self.neighbor(g, d, -1)}", rate)

    def describe(self, include_links: bool = False) -> str:
        lines = [
            f"# arch: torus3d  gpus={self.n}  dims={self.params.dims}",
            f"# base_rate={self.params.base_port_rate:.6g}  boost={self.params.boosted_dim}",
            f"# ring_sizes={self.ring_sizes}",
            f"# ports={self.port_count()}  total_rate={self.port_inventory_total():.6g}",
        ]
        if include_links:
            for src, port, dst, rate in self.iter_links():
                lines.append(f"link {src} {port} -> {dst} rate={rate:.6g}")
        return "\n".join(lines) + "\n"


def build_torus(cluster_size: int, params: TorusParams) -> TorusTopology:
    x, y, z = params.dims
    if x * y * z != cluster_size:
        raise ConstructionError(
            f"dims {params.dims} do not multiply to cluster size {cluster_size}"
        )
    if min(params.dims) < 2:
        raise ConstructionError("every torus dimension needs length >= 2 for wraparound")
    if params.boosted_dim is not None:
        dim, extra = params.boosted_dim
        if dim not in (0, 1, 2) or extra < 0 or extra % 2:
            raise ConstructionError(f"invalid boosted_dim {params.boosted_dim}")
    return TorusTopology(n=cluster_size, params=params)


def remap_torus_dimensions(
    topology: TorusTopology, assignment: dict[int, int]
) -> TorusTopology:
    """Relabel the torus so each parallel group is a contiguous ring.

    ``assignment`` maps physical dimension -> group size; the OCS
    abstraction re-forms that dimension's rings into closed rings of
    exactly the group size.  Group sizes above the dimension length are
    a mapping error (such groups are instead embedded across rings by
    the placement layer).
    """
    sizes: list[int | None] = list(topology.ring_sizes)
    for dim, group_size in assignment.items():
        if dim not in (0, 1, 2):
            raise MappingError(f"no physical dimension {dim}")
        length = topology.params.dims[dim]
        if group_size > length:
            raise MappingError(
                f"group of size {group_size} exceeds dimension {DIM_NAMES[dim]} "
                f"length {length}"
            )
        if group_size < 1:
            raise MappingError("group size must be >= 1")
        sizes[dim] = group_size
    return replace(topology, ring_sizes=(sizes[0], sizes[1], sizes[2]))
