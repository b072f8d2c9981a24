"""Chips, vaults, DRAM timing and the memory-network topologies.

All latencies are integer picoseconds internally so that accumulated run
totals are exact and reproducible; the public ``*_ns`` helpers convert.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError

PS_PER_NS = 1000

ROW_HIT = "row_hit_col"
ROW_MISS = "row_miss"
ROW_CONFLICT = "row_conflict"
DRAM_KINDS = (ROW_HIT, ROW_MISS, ROW_CONFLICT)


def ps(ns: float) -> int:
    return int(round(ns * PS_PER_NS))


@dataclass(frozen=True)
class TimingConfig:
    tck_ns: float = 1.6
    tras_ns: float = 22.4
    trcd_ns: float = 11.2
    tcas_ns: float = 11.2
    twr_ns: float = 14.4
    trp_ns: float = 11.2
    link_hop_ns: float = 30.0
    noc_hop_cycles: int = 3
    core_ghz: float = 2.0
    sram_dipta_cycles: int = 8
    burst_tck: int = 4  # 64B block over the vault interface
    l1_hit_cycles: int = 2
    stlb_hit_cycles: int = 2
    mmu_cache_cycles: int = 1

    def __post_init__(self):
        for name in ("tck_ns", "trcd_ns", "tcas_ns", "trp_ns", "link_hop_ns", "core_ghz"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def cycle_ps(self) -> int:
        return ps(1.0 / self.core_ghz)

    def cycles_ps(self, n: int) -> int:
        return n * self.cycle_ps

    @property
    def transfer_ps(self) -> int:
        return self.burst_tck * ps(self.tck_ns)

    @property
    def noc_hop_ps(self) -> int:
        return self.cycles_ps(self.noc_hop_cycles)

    @property
    def link_hop_ps(self) -> int:
        return ps(self.link_hop_ns)

    @property
    def sram_dipta_ps(self) -> int:
        return self.cycles_ps(self.sram_dipta_cycles)

    def dram_ps(self, kind: str) -> int:
        col = ps(self.tcas_ns) + self.transfer_ps
        if kind == ROW_HIT:
            return col
        if kind == ROW_MISS:
            return ps(self.trcd_ns) + col
        if kind == ROW_CONFLICT:
            return ps(self.trp_ns) + ps(self.trcd_ns) + col
        raise ConfigError(f"unknown DRAM access kind {kind!r}")


def dram_access_latency(timing: TimingConfig, kind: str) -> float:
    """Unloaded latency (ns) of one 64B access given the bank's row state."""
    return timing.dram_ps(kind) / PS_PER_NS


class Topology(str, Enum):
    STAR = "star"
    DAISY_CHAIN = "daisy_chain"
    MESH = "mesh"


# chip grid used for mesh networks
MESH_SHAPES = {4: (2, 2), 8: (2, 4), 12: (3, 4), 16: (4, 4)}


@dataclass(frozen=True)
class TopologyConfig:
    kind: Topology = Topology.DAISY_CHAIN
    chips: int = 4
    vaults_per_chip: int = 16
    noc_dim: int = 4  # vaults form a noc_dim x noc_dim mesh
    cpu_corner: int = 0  # chip the CPU attaches to in a mesh

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Topology(self.kind))
        except ValueError:
            raise ConfigError(f"unknown topology {self.kind!r}") from None
        if self.chips < 1:
            raise ConfigError("need at least one chip")
        if self.kind == Topology.MESH and self.chips not in MESH_SHAPES:
            raise ConfigError(f"mesh supports {sorted(MESH_SHAPES)} chips, not {self.chips}")
        if self.noc_dim * self.noc_dim != self.vaults_per_chip:
            raise ConfigError("vaults_per_chip must equal noc_dim**2")

    @property
    def label(self) -> str:
        return f"{self.kind.value}{self.chips}"


def _check_chip(topo: TopologyConfig, c: int) -> None:
    if not 0 <= c < topo.chips:
        raise ConfigError(f"chip {c} outside 0..{topo.chips - 1}")


def hops(topo: TopologyConfig, a: int, b: int) -> int:
    """Inter-chip link hops between chips ``a`` and ``b``."""
    _check_chip(topo, a)
    _check_chip(topo, b)
    if a == b:
        return 0
    if topo.kind == Topology.STAR:
        return 2  # through the CPU hub
    if topo.kind == Topology.DAISY_CHAIN:
        return abs(a - b)
    _, cols = MESH_SHAPES[topo.chips]
    return abs(a // cols - b // cols) + abs(a % cols - b % cols)


def cpu_hops(topo: TopologyConfig, c: int) -> int:
    """Link hops between the CPU and chip ``c``."""
    _check_chip(topo, c)
    if topo.kind == Topology.STAR:
        return 1
    if topo.kind == Topology.DAISY_CHAIN:
        return c + 1  # CPU sits at position 0, chips follow
    return hops(topo, topo.cpu_corner, c) + 1


def noc_hops(topo: TopologyConfig, va: int, vb: int) -> int:
    d = topo.noc_dim
    return abs(va // d - vb // d) + abs(va % d - vb % d)


class MemorySystem:
    """Latency oracle plus per-vault open-row state (open-page policy).

    Each vault is modelled as a single bank with one open row; there is no
    queueing, so every latency is the unloaded value.
    """

    def __init__(self, topo: TopologyConfig, timing: TimingConfig):
        self.topo = topo
        self.timing = timing
        n = topo.chips
        self.hop_table = [[hops(topo, a, b) for b in range(n)] for a in range(n)]
        v = topo.vaults_per_chip
        self.noc_table = [[noc_hops(topo, a, b) for b in range(v)] for a in range(v)]
        self._dram = {k: timing.dram_ps(k) for k in DRAM_KINDS}
        link, noc = timing.link_hop_ps, timing.noc_hop_ps
        # round-trip network time, [req_chip][chip][req_vault][vault]
        self._net = [[[[2 * (self.hop_table[a][b] * link + self.noc_table[va][vb] * noc)
                        for vb in range(v)] for va in range(v)] for b in range(n)]
                     for a in range(n)]
        self.open_rows: dict[int, int] = {}
        self.row_events = {k: 0 for k in DRAM_KINDS}

    def reset(self) -> None:
        self.open_rows.clear()
        self.row_events = {k: 0 for k in DRAM_KINDS}

    def network_ps(self, req_chip: int, req_vault: int, chip: int, vault: int) -> int:
        """Round-trip network time between requester and home vault."""
        return self._net[req_chip][chip][req_vault][vault]

    def reference_ps(self, req_chip: int, req_vault: int, chip: int, vault: int, kind: str) -> int:
        return self._net[req_chip][chip][req_vault][vault] + self._dram[kind]

    def activate(self, chip: int, vault: int, row: int) -> str:
        """Open ``row`` in the home vault; returns the access kind it implied."""
        key = chip * self.topo.vaults_per_chip + vault
        cur = self.open_rows.get(key)
        if cur is None:
            kind = ROW_MISS
        elif cur == row:
            kind = ROW_HIT
        else:
            kind = ROW_CONFLICT
        self.open_rows[key] = row
        self.row_events[kind] += 1
        return kind

    def dram_ps(self, kind: str) -> int:
        return self._dram[kind]


def reference_latency(mem: MemorySystem, requester: tuple[int, int], home: tuple[int, int],
                      dram_kind: str) -> float:
    """Round trip over links and NoC plus one DRAM access at home (ns)."""
    return mem.reference_ps(requester[0], requester[1], home[0], home[1], dram_kind) / PS_PER_NS
