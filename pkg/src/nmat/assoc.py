"""Set-associative virtual memory: page-conflict counting and its AMAT overhead."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .trace import GB, KB, TraceStream

FULL = "full"
DEFAULT_PENALTY_NS = 10e6  # page fault to disk
DEFAULT_MEM_LATENCY_NS = 30.0


@dataclass(frozen=True)
class AssocMemoryConfig:
    capacity_bytes: int = 8 * GB
    page_size: int = 4 * KB
    associativity: int | str = 1
    replacement: str = "LRU"

    def __post_init__(self):
        if self.replacement != "LRU":
            raise ConfigError("only LRU replacement is modelled")
        f = self.frames
        if f < 1 or f & (f - 1):
            raise ConfigError(f"frame count {f} is not a power of two")
        a = self.ways
        if a < 1 or f % a:
            raise ConfigError(f"associativity {self.associativity} does not divide {f} frames")

    @property
    def frames(self) -> int:
        return self.capacity_bytes // self.page_size

    @property
    def ways(self) -> int:
        return self.frames if self.associativity == FULL else int(self.associativity)

    @property
    def sets(self) -> int:
        return self.frames // self.ways

    @property
    def label(self) -> str:
        a = self.associativity
        if a == FULL:
            return "full"
        return "DM" if a == 1 else f"{a}-way"


@dataclass
class ConflictReport:
    accesses: int
    distinct_pages: int
    cold_misses: int
    conflicts: int
    conflict_rate_per_million: float
    overhead_fraction: float
    warnings: list[str] = field(default_factory=list)


def overhead(rate_per_million: float, penalty: float = DEFAULT_PENALTY_NS,
             mem_latency: float = DEFAULT_MEM_LATENCY_NS) -> float:
    """Conflict cost per access relative to one memory access.

    ``penalty`` and ``mem_latency`` only need matching units.
    """
    if rate_per_million < 0 or penalty <= 0 or mem_latency <= 0:
        raise ConfigError("overhead inputs must be positive")
    return rate_per_million * 1e-6 * penalty / mem_latency


def replay(trace: TraceStream, cfg: AssocMemoryConfig, penalty: float = DEFAULT_PENALTY_NS,
           mem_latency: float = DEFAULT_MEM_LATENCY_NS) -> ConflictReport:
    """Probe a set-associative frame array with every reference's VPN.

    A miss on a page that was seen before is a conflict; the first touch of
    a page is a cold miss.
    """
    nsets = cfg.sets
    ways = cfg.ways
    sets: dict[int, OrderedDict] = {}
    seen: set[int] = set()
    accesses = cold = conflicts = 0
    for ch in trace.chunks():
        vpns = (ch.vaddrs // cfg.page_size).tolist()
        accesses += len(vpns)
        for vpn in vpns:
            idx = vpn % nsets
            s = sets.get(idx)
            if s is None:
                s = sets[idx] = OrderedDict()
            if vpn in s:
                s.move_to_end(vpn)
                continue
            if vpn in seen:
                conflicts += 1
            else:
                seen.add(vpn)
                cold += 1
            if len(s) >= ways:
                s.popitem(last=False)
            s[vpn] = None
    warnings = []
    if len(seen) * cfg.page_size > cfg.capacity_bytes:
        warnings.append(
            f"working set {len(seen) * cfg.page_size} B exceeds capacity "
            f"{cfg.capacity_bytes} B; capacity misses are counted as conflicts")
    rate = conflicts / accesses * 1e6 if accesses else 0.0
    return ConflictReport(
        accesses=accesses,
        distinct_pages=len(seen),
        cold_misses=cold,
        conflicts=conflicts,
        conflict_rate_per_million=rate,
        overhead_fraction=overhead(rate, penalty, mem_latency),
        warnings=warnings,
    )


def sweep_associativity(trace: TraceStream, capacity_bytes: int, page_size: int = 4 * KB,
                        ways=(1, 2, 4, 8, 16), **kw) -> list[tuple[AssocMemoryConfig, ConflictReport]]:
    out = []
    for a in ways:
        cfg = AssocMemoryConfig(capacity_bytes, page_size, a)
        out.append((cfg, replay(trace, cfg, **kw)))
    return out


def distinct_pages(trace: TraceStream, page_size: int) -> int:
    pages = set()
    for ch in trace.chunks():
        pages.update(np.unique(ch.vaddrs // page_size).tolist())
    return len(pages)
