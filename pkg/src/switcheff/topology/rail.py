"""Rail-Optimized topology: intra-server switching plus a multi-plane,
multi-tier Clos over per-rail leaf switches.

GPU i of every server attaches through its NIC (one slice per plane) to
the rail-i leaf switches; servers contain a single-level switching
fabric with a tiered (intra:inter) bandwidth ratio.  Tiers are added
only when the layer below cannot reach the required server count:

  leaf only        servers <= radix                  (one leaf per rail)
  leaf + spine     leaves  <= radix * plane_count    (N <= radix^2/2 * planes)
  + core           pods    <= radix * plane_count

Plane mirrors are collapsed in the accounting: a logical port stands for
``plane_count`` physical ports at 1/plane_count of the base rate, which
carries identical traffic under even plane striping.  GPU NIC/uplink
endpoint ports are excluded from the switching inventory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import ConstructionError
from ..metrics import PortGroup, Tier


@dataclass(frozen=True)
class RailParams:
    gpus_per_server: int = 8
    switch_radix: int = 64
    tiered_ratio: float = 9.0
    plane_count: int = 1
    base_nic_rate: float = 400e9 / 8
    oversubscription: float = 1.0


@dataclass(frozen=True)
class RailTopology:
    n: int
    params: RailParams

    arch_kind = "rail"

    # -- derived structure -------------------------------------------------

    @property
    def gpus_per_server(self) -> int:
        return self.params.gpus_per_server

    @property
    def servers(self) -> int:
        return self.n // self.gpus_per_server

    @property
    def radix(self) -> int:
        return self.params.switch_radix

    @property
    def planes(self) -> int:
        return self.params.plane_count

    @property
    def has_spine(self) -> bool:
        return self.servers > self.radix

    @property
    def servers_per_leaf(self) -> int:
        return min(self.servers, self.radix // 2 if self.has_spine else self.radix)

    @property
    def leaf_count(self) -> int:
        """Logical leaves (per-plane leaves; planes are mirrors)."""
        return (self.servers // self.servers_per_leaf) * self.gpus_per_server

    @property
    def has_core(self) -> bool:
        return self.has_spine and self.leaf_count > self.radix * self.planes

    @property
    def pod_gpus(self) -> int:
        """GPUs reachable by one leaf+spine block (a pod)."""
        return (self.radix**2 // 2) * self.planes

    @property
    def pod_servers(self) -> int:
        return self.pod_gpus // self.gpus_per_server

    @property
    def pods(self) -> int:
        return max(1, self.n // self.pod_gpus) if self.has_core else 1

    @property
    def server_port_rate(self) -> float:
        """Egress rate of one intra-server switch port toward a GPU.

        A single-level fabric is kept as servers grow; beyond the switch
        radix the per-GPU share of the chip's capacity shrinks.
        """
        cap = min(1.0, self.radix / self.gpus_per_server)
        return self.params.tiered_ratio * self.params.base_nic_rate * cap

    @property
    def nic_rate(self) -> float:
        """Per-plane NIC slice rate."""
        return self.params.base_nic_rate / self.planes

    def server_of(self, gpu):
        return gpu // self.gpus_per_server

    def rail_of(self, gpu):
        return gpu % self.gpus_per_server

    def group_of_server(self, server):
        return server // self.servers_per_leaf

    def leaf_of(self, gpu):
        return self.group_of_server(self.server_of(gpu)) * self.gpus_per_server + self.rail_of(gpu)

    def pod_of_server(self, server):
        return server // self.pod_servers if self.has_core else server * 0

    # -- inventory ----------------------------------------------------------

    def tier_rates(self) -> dict[Tier, float]:
        r = self.params.base_nic_rate
        rates = {
            Tier.INTRA_SERVER: self.n * self.server_port_rate,
            Tier.LEAF: self.n * r * (2 if self.has_spine else 1),
        }
        if self.has_spine:
            rates[Tier.SPINE] = self.n * r * (2 if self.has_core else 1)
        if self.has_core:
            rates[Tier.CORE] = self.n * r
        return rates

    def port_inventory_total(self) -> float:
        return sum(self.tier_rates().values())

    def port_count(self) -> int:
        per_plane_tiers = 1 + (2 if self.has_spine else 0) + (2 if self.has_core else 0)
        return self.n + self.n * self.planes * per_plane_tiers

    def empty_port_groups(self) -> dict[str, PortGroup]:
        n, pi = self.n, self.planes
        r = self.params.base_nic_rate
        groups = {
            "server.down": PortGroup(
                "server.down", Tier.INTRA_SERVER, n, self.server_port_rate,
                np.zeros(n, dtype=np.int64),
            ),
            "leaf.down": PortGroup(
                "leaf.down", Tier.LEAF, n * pi, r / pi, np.zeros(n, dtype=np.int64)
            ),
        }
        if self.has_spine:
            leaves = self.leaf_count
            groups["leaf.up"] = PortGroup(
                "leaf.up", Tier.LEAF, n * pi, r / pi, np.zeros(leaves, dtype=np.int64)
            )
            groups["spine.down"] = PortGroup(
                "spine.down", Tier.SPINE, n * pi, r / pi, np.zeros(leaves, dtype=np.int64)
            )
        if self.has_core:
            pods = self.pods
            groups["spine.up"] = PortGroup(
                "spine.up", Tier.SPINE, n * pi, r / pi, np.zeros(pods, dtype=np.int64)
            )
            groups["core.down"] = PortGroup(
                "core.down", Tier.CORE, n * pi, r / pi, np.zeros(pods, dtype=np.int64)
            )
        return groups

    # -- export / oracle graph -----------------------------------------------

    def iter_links(self) -> Iterator[tuple[str, str, str, float]]:
        """Directed links as (src node, egress port label, dst node, rate).

        GPU endpoint egresses (uplink to the server switch, NIC slices)
        are tagged ``endpoint.*``: they exist as links but are not switch
        ports and never count as forwarding actions.
        """
        sv_rate = self.server_port_rate
        for g in range(self.n):
            s = self.server_of(g)
            yield (f"gpu/{g}", f"endpoint.up[{g}]", f"server/{s}", sv_rate)
            yield (f"server/{s}", f"server.down[{g}]", f"gpu/{g}", sv_rate)
        for p in range(self.planes):
            for g in range(self.n):
                leaf = self.leaf_of(g)
                yield (f"gpu/{g}", f"endpoint.nic[{p}.{g}]", f"leaf/{p}.{leaf}", self.nic_rate)
                yield (f"leaf/{p}.{leaf}", f"leaf.down[{p}.{g}]", f"gpu/{g}", self.nic_rate)
            if self.has_spine:
                for leaf in range(self.leaf_count):
                    pod = self.pod_of_server((leaf // self.gpus_per_server) * self.servers_per_leaf)
                    yield (f"leaf/{p}.{leaf}", f"leaf.up[{p}.{leaf}]", f"spine/{p}.{pod}", self.nic_rate)
                    yield (f"spine/{p}.{pod}", f"spine.down[{p}.{leaf}]", f"leaf/{p}.{leaf}", self.nic_rate)
            if self.has_core:
                for pod in range(self.pods):
                    yield (f"spine/{p}.{pod}", f"spine.up[{p}.{pod}]", f"core/{p}", self.nic_rate)
                    yield (f"core/{p}", f"core.down[{p}.{pod}]", f"spine/{p}.{pod}", self.nic_rate)

    def describe(self, include_links: bool = False) -> str:
        tiers = "+".join(
            t.value for t in (Tier.LEAF, Tier.SPINE, Tier.CORE)
            if t in self.tier_rates()
        )
        lines = [
            f"# arch: rail  gpus={self.n}  servers={self.servers}"
            f"  gpus_per_server={self.gpus_per_server}  planes={self.planes}",
            f"# clos_tiers={tiers}  leaves={self.leaf_count if self.has_spine else self.leaf_count}"
            f"  pods={self.pods}",
            f"# tiered_ratio={self.params.tiered_ratio:.3g}"
            f"  nic_rate={self.params.base_nic_rate:.6g}"
            f"  server_port_rate={self.server_port_rate:.6g}",
            f"# ports={self.port_count()}  total_rate={self.port_inventory_total():.6g}",
        ]
        if include_links:
            for src, port, dst, rate in self.iter_links():
                lines.append(f"link {src} {port} -> {dst} rate={rate:.6g}")
        return "\n".join(lines) + "\n"


def build_rail(cluster_size: int, params: RailParams) -> RailTopology:
    g = params.gpus_per_server
    if g < 2:
        raise ConstructionError("gpus_per_server must be >= 2")
    if cluster_size % g:
        raise ConstructionError(
            f"cluster size {cluster_size} not divisible by gpus_per_server {g}"
        )
    if params.switch_radix % 2:
        raise ConstructionError("switch_radix must be even")
    if params.plane_count not in (1, 2, 4, 8):
        raise ConstructionError("plane_count must be one of 1, 2, 4, 8")
    if params.oversubscription != 1.0:
        raise ConstructionError(
            "only non-blocking Clos (oversubscription 1.0) is supported"
        )
    topo = RailTopology(n=cluster_size, params=params)
    if topo.has_spine and topo.servers % topo.servers_per_leaf:
        raise ConstructionError(
            f"server count {topo.servers} not divisible by leaf group size "
            f"{topo.servers_per_leaf}"
        )
    if topo.has_core:
        if topo.n % topo.pod_gpus:
            raise ConstructionError(
                f"cluster size {topo.n} not divisible by pod size {topo.pod_gpus}"
            )
        if topo.pods > params.switch_radix * params.plane_count:
            raise ConstructionError(
                f"scale {cluster_size} exceeds core-tier reach: {topo.pods} pods "
                f"> radix*planes = {params.switch_radix * params.plane_count}"
            )
    return topo
