"""Conventional MMU baseline: per-size L1 TLBs, shared STLB, paging-structure
caches and a 4-level radix walk whose PTE reads travel the memory network."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .errors import ConfigError
from .hashing import mix
from .lru import FULL, SetAssocLRU
from .trace import GB, KB, MB, TraceStream

LEVEL_BITS = 9
PAGE_SHIFT = 12
LEAF_LEVEL = {4 * KB: 1, 2 * MB: 2, 1 * GB: 3}
PAGE_SHIFTS = {4 * KB: 12, 2 * MB: 21, 1 * GB: 30}


@dataclass(frozen=True)
class TlbConfig:
    l1_4k: tuple[int, int] = (64, 4)
    l1_2m: tuple[int, int] = (32, 4)
    l1_1g: tuple[int, int] = (4, FULL)
    stlb: tuple[int, int] = (1024, 8)


@dataclass(frozen=True)
class MmuCacheConfig:
    l4: tuple[int, int] = (2, FULL)
    l3: tuple[int, int] = (4, FULL)
    l2: tuple[int, int] = (32, 4)


@dataclass(frozen=True)
class PageTablePlacement:
    """Hashes each page-table node to a home chip, vault and DRAM row."""

    chips: int
    vaults: int
    seed: int = 0

    def home(self, asid: int, level: int, prefix: int) -> tuple[int, int, int]:
        h = mix(asid, level, prefix, seed=self.seed ^ 0x5054)
        # negative rows keep page-table rows apart from data rows
        return h % self.chips, (h >> 20) % self.vaults, -1 - ((h >> 32) & 0xFFFFF)


def level_index(vaddr: int, level: int) -> int:
    return (vaddr >> (PAGE_SHIFT + LEVEL_BITS * (level - 1))) & ((1 << LEVEL_BITS) - 1)


def node_prefix(vaddr: int, level: int) -> int:
    """VA bits above those a level-``level`` node resolves; names the node."""
    return vaddr >> (PAGE_SHIFT + LEVEL_BITS * level)


def pte_block_key(asid: int, level: int, prefix: int, index: int) -> int:
    """Cache tag for the 64B block of a page-table node holding entry ``index``."""
    return (1 << 62) | (level << 58) | ((asid & 0xFFF) << 46) | (prefix << 6) | (index >> 3)


class Translation(NamedTuple):
    ps: int
    l1_hit: bool
    stlb_hit: bool
    walk_refs: int
    remote_hops: int


# fetches one PTE: (asid, level, node prefix, index) -> (latency ps, link hops)
PteFetch = Callable[[int, int, int, int], tuple[int, int]]


@dataclass
class MMU:
    page_size: int
    pte_fetch: PteFetch
    tlb: TlbConfig = field(default_factory=TlbConfig)
    caches: MmuCacheConfig = field(default_factory=MmuCacheConfig)
    stlb_hit_ps: int = 1000
    mmu_cache_ps: int = 500

    def __post_init__(self):
        if self.page_size not in LEAF_LEVEL:
            raise ConfigError(f"unsupported page size {self.page_size}")
        self.leaf = LEAF_LEVEL[self.page_size]
        self.shift = PAGE_SHIFTS[self.page_size]
        l1 = {4 * KB: self.tlb.l1_4k, 2 * MB: self.tlb.l1_2m, 1 * GB: self.tlb.l1_1g}[self.page_size]
        self.l1 = SetAssocLRU(*l1)
        # 1GB translations have no STLB
        self.stlb = SetAssocLRU(*self.tlb.stlb) if self.page_size != 1 * GB else None
        shapes = {4: self.caches.l4, 3: self.caches.l3, 2: self.caches.l2}
        # only levels above the leaf hold pointers to further nodes
        self.pwc = {lvl: SetAssocLRU(*shapes[lvl]) for lvl in (2, 3, 4) if lvl > self.leaf}
        self.stats = {"tlb_hit_l1": 0, "tlb_hit_stlb": 0, "tlb_miss": 0,
                      "walk_refs": 0, "walk_remote_hops": 0, "pwc_hits": 0}

    def _pwc_key(self, asid: int, vaddr: int, level: int) -> int:
        # a level-L entry is named by all VA bits down to its own index
        return (asid << 40) | (vaddr >> (PAGE_SHIFT + LEVEL_BITS * (level - 1)))

    def translate(self, vaddr: int, asid: int = 1) -> Translation:
        st = self.stats
        key = (asid << 40) | (vaddr >> self.shift)
        if self.l1.probe(key):
            st["tlb_hit_l1"] += 1
            return Translation(0, True, False, 0, 0)
        cost = 0
        if self.stlb is not None:
            cost += self.stlb_hit_ps
            if self.stlb.probe(key):
                self.l1.fill(key)
                st["tlb_hit_stlb"] += 1
                return Translation(cost, False, True, 0, 0)
        st["tlb_miss"] += 1
        start = 4
        for lvl in (2, 3, 4):  # deepest cached level first
            if lvl not in self.pwc:
                continue
            cost += self.mmu_cache_ps
            if self.pwc[lvl].probe(self._pwc_key(asid, vaddr, lvl)):
                start = lvl - 1
                st["pwc_hits"] += 1
                break
        refs = hops = 0
        for lvl in range(start, self.leaf - 1, -1):
            t, h = self.pte_fetch(asid, lvl, node_prefix(vaddr, lvl), level_index(vaddr, lvl))
            cost += t
            hops += h
            refs += 1
            if lvl > self.leaf:
                self.pwc[lvl].fill(self._pwc_key(asid, vaddr, lvl))
        if self.stlb is not None:
            self.stlb.fill(key)
        self.l1.fill(key)
        st["walk_refs"] += refs
        st["walk_remote_hops"] += hops
        return Translation(cost, False, False, refs, hops)


def tlb_reach_experiment(trace: TraceStream, tlb_entries: int, page_size: int,
                         ways: int = FULL) -> float:
    """Misses per kilo-instruction of a single LRU TLB replaying ``trace``."""
    if page_size not in PAGE_SHIFTS:
        raise ConfigError(f"unsupported page size {page_size}")
    shift = PAGE_SHIFTS[page_size]
    tlb = SetAssocLRU(tlb_entries, ways)
    misses = 0
    instructions = 0
    for ch in trace.chunks():
        instructions += int(ch.igaps.sum()) + len(ch)
        for vpn in (ch.vaddrs >> shift).tolist():
            if not tlb.access(vpn):
                misses += 1
    return misses * 1000.0 / instructions if instructions else 0.0
