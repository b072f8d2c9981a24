"""Trace-driven CPI model for one near-memory core under a translation regime.

Every record charges ``igap`` core cycles (single-issue, CPI 1) and one
memory reference.  The reference probes a 32KB 2-way L1-D (physically
tagged for the MMU baseline, virtually tagged otherwise); misses go to the
page's home vault over the memory network.  Regimes differ only in how the
translation is obtained and whether it sits on the critical path:

* ``baseline_*``: TLBs, MMU caches and a radix walk, serialized before the fetch.
* ``dipta_sram`` / ``dipta_dram``: the home vault's inverted table is read
  while the predicted way is fetched; cost is the slower of the two, plus
  one column access when the way prediction is wrong.
* ``perfect_tlb``: fetch only.

Data placement is shared by all regimes: a page's home comes from
:func:`assign_home_np`, its set from the VPN bits above the vault bits and
its way from the order in which frames were allocated.  Rows follow the
interleaved page layout, so all ways of a set share each DRAM row.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Iterator, NamedTuple

import numpy as np

from .dipta import (BLOCK, CONFLICT_MISS, FLAGS_RW, HIT, VaultDipta, dram_locate)
from .errors import ComparisonError, ConfigError
from .memsys import ROW_HIT, MemorySystem, TimingConfig, TopologyConfig
from .mmu import MMU, MmuCacheConfig, PageTablePlacement, TlbConfig, pte_block_key
from .lru import SetAssocLRU
from .predictor import WayPredictor
from .trace import GB, KB, MB, TraceStream
from .workloads import PlacementConfig, assign_home_np

PAGE = 4 * KB
VPN_SHIFT = 12
LINE_SHIFT = 6


class Regime(str, Enum):
    BASELINE_4K = "baseline_4k"
    BASELINE_2M = "baseline_2m"
    BASELINE_1G = "baseline_1g"
    DIPTA_SRAM = "dipta_sram"
    DIPTA_DRAM = "dipta_dram"
    PERFECT_TLB = "perfect_tlb"

    @property
    def is_baseline(self) -> bool:
        return self.value.startswith("baseline")

    @property
    def is_dipta(self) -> bool:
        return self.value.startswith("dipta")


BASELINE_PAGE = {Regime.BASELINE_4K: 4 * KB, Regime.BASELINE_2M: 2 * MB, Regime.BASELINE_1G: 1 * GB}


@dataclass(frozen=True)
class RunConfig:
    regime: Regime = Regime.DIPTA_SRAM
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    associativity: int = 4
    index_bits: int = 10
    locality_fraction: float = 1.0
    chip_bytes: int = 8 * GB
    mpu_chip: int = 0
    mpu_vault: int = 0
    predictor: str = "last_way"  # or "perfect": every DIPTA hit is predicted
    fault_policy: str = "warm"  # "warm": dataset resident up front; "demand": fault on first touch
    fault_ns: float = 10e6
    l1_bytes: int = 32 * KB
    l1_ways: int = 2
    tlb: TlbConfig = field(default_factory=TlbConfig)
    mmu_caches: MmuCacheConfig = field(default_factory=MmuCacheConfig)
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "regime", Regime(self.regime))
        except ValueError:
            raise ConfigError(f"unknown regime {self.regime!r}") from None
        a = self.associativity
        if a < 1 or a & (a - 1):
            raise ConfigError("associativity must be a power of two")
        if self.predictor not in ("last_way", "perfect"):
            raise ConfigError(f"unknown predictor {self.predictor!r}")
        if self.fault_policy not in ("warm", "demand"):
            raise ConfigError(f"unknown fault policy {self.fault_policy!r}")
        if not 0 <= self.mpu_chip < self.topology.chips:
            raise ConfigError("mpu_chip outside the network")
        if not 0 <= self.mpu_vault < self.topology.vaults_per_chip:
            raise ConfigError("mpu_vault outside the chip")
        if self.fault_ns < 0:
            raise ConfigError("fault_ns must be non-negative")
        PlacementConfig(self.topology.chips, self.topology.vaults_per_chip, PAGE,
                        self.locality_fraction, self.mpu_chip, self.seed)
        if self.frames_per_vault % a or self.frames_per_vault < a:
            raise ConfigError("chip capacity does not split into whole sets per vault")

    @property
    def frames_per_vault(self) -> int:
        return self.chip_bytes // PAGE // self.topology.vaults_per_chip

    @property
    def sets_per_vault(self) -> int:
        return self.frames_per_vault // self.associativity

    @property
    def placement(self) -> PlacementConfig:
        t = self.topology
        return PlacementConfig(t.chips, t.vaults_per_chip, PAGE, self.locality_fraction,
                               self.mpu_chip, self.seed)

    def fingerprint(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        d["topology"]["kind"] = self.topology.kind.value
        return d


class AccessOutcome(NamedTuple):
    """One reference.  ``cost_ns`` is what the core stalls for the memory part."""

    translation_ns: float
    fetch_ns: float
    overlapped_ns: float
    cost_ns: float
    l1_hit: bool
    tlb_miss: bool = False
    walk_refs: int = 0
    mispredict: bool = False
    conflict: bool = False
    fault: bool = False


@dataclass
class RunReport:
    regime: str
    trace_id: str
    topology: str
    instructions: int
    references: int
    total_ps: int
    core_ps: int
    fetch_ps: int
    translation_ps: int
    cycle_ps: int
    events: dict[str, int]
    predictions: int = 0
    correct_predictions: int = 0
    vault_accuracy: dict[str, float] = field(default_factory=dict)
    wall_seconds: float = 0.0

    @property
    def cycles(self) -> float:
        return self.total_ps / self.cycle_ps

    @property
    def cpi(self) -> float:
        return self.total_ps / self.cycle_ps / self.instructions if self.instructions else 0.0

    @property
    def predictor_accuracy(self) -> float | None:
        return self.correct_predictions / self.predictions if self.predictions else None

    def breakdown(self) -> dict[str, float]:
        return breakdown(self)

    def row(self) -> dict[str, object]:
        """Deterministic scalar fields (no wall clock) for CSV output."""
        b = self.breakdown()
        acc = self.predictor_accuracy
        return {
            "regime": self.regime,
            "topology": self.topology,
            "instructions": self.instructions,
            "references": self.references,
            "cycles": f"{self.cycles:.1f}",
            "cpi": f"{self.cpi:.6f}",
            "core_pct": f"{b['core_pct']:.4f}",
            "fetch_pct": f"{b['fetch_pct']:.4f}",
            "translation_pct": f"{b['translation_pct']:.4f}",
            "predictor_accuracy": "" if acc is None else f"{acc:.6f}",
        }


def trace_identity(trace: TraceStream) -> str:
    blob = json.dumps({"source": trace.source, "meta": dict(sorted(trace.meta.items()))},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def breakdown(report: RunReport) -> dict[str, float]:
    """Core / data-fetch / translation shares of total cycles, in percent.

    DIPTA regimes only report the translation time left exposed (way
    mispredicts, metadata columns, faults); the overlapped part is hidden
    behind the fetch and is not counted.
    """
    total = report.total_ps
    if not total:
        return {"core_pct": 0.0, "fetch_pct": 0.0, "translation_pct": 0.0}
    return {
        "core_pct": 100.0 * report.core_ps / total,
        "fetch_pct": 100.0 * report.fetch_ps / total,
        "translation_pct": 100.0 * report.translation_ps / total,
    }


def speedup(candidate: RunReport, baseline: RunReport) -> float:
    """``cpi(baseline) / cpi(candidate)`` for two runs of the same trace and network."""
    if candidate.trace_id != baseline.trace_id:
        raise ComparisonError("reports come from different traces")
    if candidate.topology != baseline.topology:
        raise ComparisonError("reports come from different topologies")
    if candidate.instructions != baseline.instructions:
        raise ComparisonError("reports executed different instruction counts")
    return baseline.cpi / candidate.cpi


# -- simulator ---------------------------------------------------------------------


_EVENT_NAMES = (
    "l1_hits", "l1_misses", "tlb_hit_l1", "tlb_hit_stlb", "tlb_miss", "walk_refs",
    "walk_remote_hops", "pwc_hits", "pte_l1_hits", "predictions", "mispredicts",
    "conflicts", "faults", "row_hit_col", "row_miss", "row_conflict",
)


class Simulator:
    """Owns every mutable structure of one run; feed it chunks in trace order."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        t = cfg.timing
        self.mem = MemorySystem(cfg.topology, t)
        self.cycle = t.cycle_ps
        self.l1_ps = t.cycles_ps(t.l1_hit_cycles)
        self.fault_ps = int(round(cfg.fault_ns * 1000))
        self.transfer_ps = t.transfer_ps
        self.A = cfg.associativity
        self.sets = cfg.sets_per_vault
        self.vaults = cfg.topology.vaults_per_chip
        self.stripe_shift = VPN_SHIFT - (self.A.bit_length() - 1)
        self.l1 = SetAssocLRU(cfg.l1_bytes // BLOCK, cfg.l1_ways)
        self.placement = cfg.placement
        self.regime = cfg.regime
        self.events = dict.fromkeys(_EVENT_NAMES, 0)
        self.core_ps = self.fetch_ps = self.translation_ps = 0
        self.instructions = self.references = 0
        self.tables: dict[int, VaultDipta] = {}
        self.predictors: dict[int, WayPredictor] = {}
        self.pred_stats: dict[int, list[int]] = {}
        # frame allocation shared by every regime: (chip, vault, set, vpn) -> way
        self._ways: dict[int, int] = {}
        self._fill: dict[int, int] = {}
        self._evicted: set[int] = set()
        self.mmu: MMU | None = None
        if self.regime.is_baseline:
            self.pt = PageTablePlacement(cfg.topology.chips, self.vaults, cfg.seed)
            self.mmu = MMU(BASELINE_PAGE[self.regime], self._pte_fetch, cfg.tlb, cfg.mmu_caches,
                           stlb_hit_ps=t.cycles_ps(t.stlb_hit_cycles),
                           mmu_cache_ps=t.cycles_ps(t.mmu_cache_cycles))

    # placement ---------------------------------------------------------------

    def _vkey(self, chip: int, vault: int) -> int:
        return chip * self.vaults + vault

    def table(self, chip: int, vault: int) -> VaultDipta:
        k = self._vkey(chip, vault)
        tab = self.tables.get(k)
        if tab is None:
            tab = self.tables[k] = VaultDipta(self.cfg.frames_per_vault, self.A,
                                              self.cfg.timing.sram_dipta_cycles)
        return tab

    def predictor(self, chip: int, vault: int) -> WayPredictor:
        k = self._vkey(chip, vault)
        p = self.predictors.get(k)
        if p is None:
            p = self.predictors[k] = WayPredictor(self.cfg.index_bits, self.A)
            self.pred_stats[k] = [0, 0]
        return p

    def allocate(self, vpn: int, asid: int, chip: int, vault: int, s: int) -> tuple[int, int | None]:
        """Give ``vpn`` a frame in its set.  Returns (way, evicted vpn)."""
        key = (asid << 40) | vpn
        if self.regime.is_dipta:
            ins = self.table(chip, vault).install(vpn, asid, FLAGS_RW, s)
            victim = None
            if ins.victim is not None:
                victim = ins.victim.vpn
                self._ways.pop((ins.victim.asid << 40) | victim, None)
                self._flush_page(ins.victim.asid, victim)
            self._ways[key] = ins.way
            return ins.way, victim
        # conventional VM is fully associative: a full set spills into extra frames
        skey = (self._vkey(chip, vault) << 32) | s
        way = self._fill.get(skey, 0)
        self._fill[skey] = way + 1
        self._ways[key] = way
        return way, None

    def _flush_page(self, asid: int, vpn: int) -> None:
        # the L1 is virtually tagged here, so an evicted page's lines must go too
        base = ((asid << 48) | (vpn << VPN_SHIFT)) >> LINE_SHIFT
        for i in range(PAGE >> LINE_SHIFT):
            self.l1.invalidate(base + i)

    def preload(self, vpns: np.ndarray, asid: int = 1) -> None:
        """Make ``vpns`` resident in ascending order, as an OS populating the heap would."""
        vpns = np.unique(np.asarray(vpns, dtype=np.int64))
        if len(vpns) > self.cfg.topology.chips * self.vaults * self.cfg.frames_per_vault:
            raise ConfigError("dataset exceeds the memory capacity of the network")
        chips, vaults = assign_home_np(vpns, self.placement)
        sets = (vpns // self.vaults) % self.sets
        for vpn, c, v, s in zip(vpns.tolist(), chips.tolist(), vaults.tolist(), sets.tolist()):
            if (asid << 40) | vpn not in self._ways:
                self.allocate(vpn, asid, c, v, s)

    # page walk ---------------------------------------------------------------

    def _pte_fetch(self, asid: int, level: int, prefix: int, index: int) -> tuple[int, int]:
        key = pte_block_key(asid, level, prefix, index)
        if self.l1.probe(key):
            self.events["pte_l1_hits"] += 1
            return self.l1_ps, 0
        self.l1.fill(key)
        chip, vault, row = self.pt.home(asid, level, prefix)
        kind = self.mem.activate(chip, vault, row)
        c = self.cfg
        ps = self.l1_ps + self.mem.reference_ps(c.mpu_chip, c.mpu_vault, chip, vault, kind)
        return ps, self.mem.hop_table[c.mpu_chip][chip]

    # main loop ---------------------------------------------------------------

    def run_chunk(self, ch, outcomes: list | None = None) -> None:
        cfg = self.cfg
        vaddrs = ch.vaddrs
        vpns = vaddrs >> VPN_SHIFT
        chips, vaults = assign_home_np(vpns, self.placement)
        sets = (vpns // self.vaults) % self.sets
        offs = vaddrs & (PAGE - 1)
        stripes = offs >> self.stripe_shift
        cols = (offs & ((1 << self.stripe_shift) - 1)) >> LINE_SHIFT
        igaps = ch.igaps
        n = len(vaddrs)
        self.instructions += int(igaps.sum()) + n
        self.references += n
        self.core_ps += int(igaps.sum()) * self.cycle
        step = self._baseline_access if self.regime.is_baseline else self._near_access
        for va, asid, vpn, chip, vault, s, stripe, col in zip(
                vaddrs.tolist(), ch.asids.tolist(), vpns.tolist(), chips.tolist(),
                vaults.tolist(), sets.tolist(), stripes.tolist(), cols.tolist()):
            out = step(va, asid, vpn, chip, vault, s, stripe, col)
            if outcomes is not None:
                outcomes.append(out)

    def _locate(self, vpn, asid, chip, vault, s):
        """Way of a resident page, allocating (and faulting) on first touch."""
        way = self._ways.get((asid << 40) | vpn)
        if way is not None:
            return way, False
        way, _ = self.allocate(vpn, asid, chip, vault, s)
        self.events["faults"] += 1
        return way, True

    def _fetch(self, chip, vault, row) -> int:
        kind = self.mem.activate(chip, vault, row)
        c = self.cfg
        return self.mem.reference_ps(c.mpu_chip, c.mpu_vault, chip, vault, kind)

    def _row(self, s, way, stripe, col) -> int:
        # interleaved layout: stripe r of every way of set s lives in row s*A + r
        return s * self.A + stripe

    def _baseline_access(self, va, asid, vpn, chip, vault, s, stripe, col):
        ev = self.events
        tr = self.mmu.translate(va, asid)
        trans = tr.ps
        way, faulted = self._locate(vpn, asid, chip, vault, s)
        if faulted:
            trans += self.fault_ps
        pfn = ((self._vkey(chip, vault) * self.sets + s) << 8) | way
        line = (pfn << 6) | ((va >> LINE_SHIFT) & 63)
        if self.l1.probe(line):
            ev["l1_hits"] += 1
            fetch = self.l1_ps
            hit = True
        else:
            ev["l1_misses"] += 1
            self.l1.fill(line)
            fetch = self.l1_ps + self._fetch(chip, vault, self._row(s, way, stripe, col))
            hit = False
        self.fetch_ps += fetch
        self.translation_ps += trans
        return AccessOutcome(trans / 1000, fetch / 1000, 0.0, (trans + fetch) / 1000, hit,
                             not (tr.l1_hit or tr.stlb_hit), tr.walk_refs, False, False, faulted)

    def _near_access(self, va, asid, vpn, chip, vault, s, stripe, col):
        ev = self.events
        line = ((asid << 48) | va) >> LINE_SHIFT
        if self.l1.probe(line):
            ev["l1_hits"] += 1
            self.fetch_ps += self.l1_ps
            return AccessOutcome(0.0, self.l1_ps / 1000, 0.0, self.l1_ps / 1000, True)
        ev["l1_misses"] += 1
        self.l1.fill(line)
        if self.regime == Regime.PERFECT_TLB:
            way, faulted = self._locate(vpn, asid, chip, vault, s)
            fetch = self.l1_ps + self._fetch(chip, vault, self._row(s, way, stripe, col))
            self.fetch_ps += fetch
            return AccessOutcome(0.0, fetch / 1000, 0.0, fetch / 1000, False, fault=faulted)
        return self._dipta_access(va, asid, vpn, chip, vault, s, stripe, col)

    def _dipta_access(self, va, asid, vpn, chip, vault, s, stripe, col):
        ev = self.events
        cfg = self.cfg
        dram = self.regime == Regime.DIPTA_DRAM
        vk = chip * self.vaults + vault
        tab = self.tables.get(vk) or self.table(chip, vault)
        pred = self.predictors.get(vk) or self.predictor(chip, vault)
        stats = self.pred_stats[vk]
        net = self.mem.network_ps(cfg.mpu_chip, cfg.mpu_vault, chip, vault)
        pidx = pred.index(s)
        predicted = pred.entries[pidx]
        if cfg.predictor == "perfect":
            w = tab.find(vpn, asid, s)
            predicted = predicted if w is None else w
        res = tab.sram_lookup(vpn, asid, s, predicted)
        fault_ps = 0
        conflict = faulted = False
        if res.status == CONFLICT_MISS:
            # not resident in its set: the handler installs it, then the access retries
            faulted = True
            conflict = (asid << 40) | vpn in self._evicted
            ev["conflicts"] += conflict
            ev["faults"] += 1
            way, victim = self.allocate(vpn, asid, chip, vault, s)
            if victim is not None:
                self._evicted.add((asid << 40) | victim)
            fault_ps = self.fault_ps
            predicted = way  # the retry reads the freshly installed way
            actual = way
        else:
            actual = res.way
            ev["predictions"] += 1
            stats[0] += 1
            if res.status == HIT:
                stats[1] += 1
            else:
                ev["mispredicts"] += 1
            pred.entries[pidx] = actual
        row = self._row(s, predicted, stripe, col)
        if dram:
            row = self._embedded_row(s, predicted, stripe, col)
        kind = self.mem.activate(chip, vault, row)
        base = self.l1_ps + net + self.mem.dram_ps(kind)
        if dram:
            # metadata column first, data column pipelined behind it in the same activation
            trans = base
            fetch = base + self.transfer_ps
        else:
            trans = self.l1_ps + net + tab.lookup_cycles * self.cycle
            fetch = base
        mispredict = actual != predicted
        if mispredict:
            row2 = self._embedded_row(s, actual, stripe, col) if dram else row
            kind2 = self.mem.activate(chip, vault, row2)
            fetch += self.mem.dram_ps(kind2)
        trans += fault_ps
        cost = max(trans, fetch) if not faulted else fault_ps + max(trans - fault_ps, fetch)
        overlapped = trans + fetch - cost
        self.fetch_ps += base
        self.translation_ps += cost - base
        return AccessOutcome(trans / 1000, fetch / 1000, overlapped / 1000, cost / 1000, False,
                             mispredict=mispredict, conflict=conflict, fault=faulted)

    def _embedded_row(self, s, way, stripe, col) -> int:
        k = PAGE // BLOCK
        logical = (s * self.A + stripe) * k + way * (k // self.A) + col
        return dram_locate(logical, k).row

    def report(self, trace_id: str, wall: float = 0.0) -> RunReport:
        ev = dict(self.events)
        ev.update(self.mem.row_events)
        if self.mmu is not None:
            for k in ("tlb_hit_l1", "tlb_hit_stlb", "tlb_miss", "walk_refs",
                      "walk_remote_hops", "pwc_hits"):
                ev[k] = self.mmu.stats[k]
        vault_acc = {}
        for k in sorted(self.pred_stats):
            n, ok = self.pred_stats[k]
            if n:
                vault_acc[f"{k // self.vaults}.{k % self.vaults}"] = ok / n
        total = self.core_ps + self.fetch_ps + self.translation_ps
        return RunReport(
            regime=self.regime.value,
            trace_id=trace_id,
            topology=self.cfg.topology.label,
            instructions=self.instructions,
            references=self.references,
            total_ps=total,
            core_ps=self.core_ps,
            fetch_ps=self.fetch_ps,
            translation_ps=self.translation_ps,
            cycle_ps=self.cycle,
            events=ev,
            predictions=ev["predictions"],
            correct_predictions=ev["predictions"] - ev["mispredicts"],
            vault_accuracy=vault_acc,
            wall_seconds=wall,
        )


def _dataset_pages(trace: TraceStream) -> np.ndarray:
    """Every 4KB page the trace's declared segments cover, plus any page it touches."""
    parts = []
    seg = trace.meta.get("segments")
    if seg:
        for span in seg.split(";"):
            lo, hi = (int(x, 16) for x in span.split("-"))
            parts.append(np.arange(lo >> VPN_SHIFT, (hi + PAGE - 1) >> VPN_SHIFT, dtype=np.int64))
    for ch in trace.chunks():
        parts.append(np.unique(ch.vaddrs >> VPN_SHIFT))
    return np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def _asid_of(trace: TraceStream) -> int:
    for ch in trace.chunks():
        if len(ch):
            return int(ch.asids[0])
    return 1


def simulate(trace: TraceStream, cfg: RunConfig, outcomes: list | None = None) -> RunReport:
    t0 = time.perf_counter()
    sim = Simulator(cfg)
    if cfg.fault_policy == "warm":
        sim.preload(_dataset_pages(trace), _asid_of(trace))
    for ch in trace.chunks():
        sim.run_chunk(ch, outcomes)
    return sim.report(trace_identity(trace), time.perf_counter() - t0)


def run(trace: TraceStream, cfg: RunConfig) -> RunReport:
    """Simulate ``trace`` under ``cfg``; deterministic apart from ``wall_seconds``."""
    return simulate(trace, cfg)


def access_outcomes(trace: TraceStream, cfg: RunConfig) -> tuple[RunReport, list[AccessOutcome]]:
    outs: list[AccessOutcome] = []
    rep = simulate(trace, cfg, outs)
    return rep, outs


def measure_accuracy(trace: TraceStream, cfg: RunConfig | None = None) -> float:
    """Fraction of DIPTA hits whose way was predicted correctly.

    With a warm, conflict-free table every page keeps the way it was given
    at preload, so only the L1 filter has to be replayed in order; the
    predictor outcome for each L1 miss is just "same way as the previous
    miss at this predictor index".  Anything else falls back to a full run.
    """
    cfg = cfg or RunConfig()
    if not cfg.regime.is_dipta:
        cfg = replace(cfg, regime=Regime.DIPTA_SRAM)
    fast = _fast_accuracy(trace, cfg) if cfg.predictor == "last_way" else None
    if fast is None:
        acc = run(trace, cfg).predictor_accuracy
        return 1.0 if acc is None else acc
    ok, n = fast
    return ok / n if n else 1.0


def _xor_fold_np(bits: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros_like(bits)
    if width <= 0:
        return out
    mask = (1 << width) - 1
    bits = bits.copy()
    while bits.any():
        out ^= bits & mask
        bits >>= width
    return out


def _fast_accuracy(trace: TraceStream, cfg: RunConfig) -> tuple[int, int] | None:
    if cfg.fault_policy != "warm":
        return None
    asid = _asid_of(trace)
    pages = _dataset_pages(trace)
    V, S, A = cfg.topology.vaults_per_chip, cfg.sets_per_vault, cfg.associativity
    chips, vaults = assign_home_np(pages, cfg.placement)
    group = (chips * V + vaults) * S + (pages // V) % S
    order = np.lexsort((pages, group))
    g = group[order]
    first = np.searchsorted(g, g, side="left")
    rank = np.arange(len(g)) - first
    if len(rank) and rank.max() >= A:
        return None  # some set overflows: installs evict and the fast model no longer holds
    way_of = np.empty(len(pages), dtype=np.int64)
    way_of[order] = rank
    w = cfg.index_bits
    state = np.zeros(cfg.topology.chips * V << w, dtype=np.int64)
    nsets_l1 = cfg.l1_bytes // BLOCK // cfg.l1_ways
    l1 = SetAssocLRU(cfg.l1_bytes // BLOCK, cfg.l1_ways)
    mru = [-1] * nsets_l1
    lru = [-1] * nsets_l1
    two_way = cfg.l1_ways == 2
    ok = n = 0
    for ch in trace.chunks():
        if len(ch) and (ch.asids != asid).any():
            return None
        lines = (((ch.asids.astype(np.int64) << 48) | ch.vaddrs) >> LINE_SHIFT).tolist()
        miss = np.zeros(len(lines), dtype=bool)
        if two_way:
            for i, key in enumerate(lines):
                st = key % nsets_l1
                if mru[st] == key:
                    continue
                if lru[st] == key:
                    lru[st] = mru[st]
                    mru[st] = key
                    continue
                lru[st] = mru[st]
                mru[st] = key
                miss[i] = True
        else:
            for i, key in enumerate(lines):
                if not l1.probe(key):
                    l1.fill(key)
                    miss[i] = True
        vpns = ch.vaddrs[miss] >> VPN_SHIFT
        if not len(vpns):
            continue
        idx = np.searchsorted(pages, vpns)
        ways = way_of[idx]
        hc, hv = chips[idx], vaults[idx]
        key = ((hc * V + hv) << w) | _xor_fold_np((vpns // V) % S, w)
        srt = np.argsort(key, kind="stable")
        ks, ws = key[srt], ways[srt]
        prev = np.empty_like(ws)
        prev[1:] = ws[:-1]
        head = np.ones(len(ks), dtype=bool)
        head[1:] = ks[1:] != ks[:-1]
        prev[head] = state[ks[head]]
        ok += int((prev == ws).sum())
        n += len(ws)
        tail = np.ones(len(ks), dtype=bool)
        tail[:-1] = ks[1:] != ks[:-1]
        state[ks[tail]] = ws[tail]
    return ok, n
