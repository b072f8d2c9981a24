"""Synthetic lookup traces for pointer-chasing data-structure kernels.

Each kernel lays its nodes out in a heap segment (one 64B block per node)
and emits, per lookup, the block addresses a search touches: bucket then
chain for the hash table, the tower descent for the skip list and the
root-to-leaf path for the two search trees.  Structures are implicit (a
node's address is a keyed permutation of its identity) so multi-GB datasets
cost no memory to describe.

Allocation order follows insertion order: hash-table and skip-list nodes
are scattered by a random permutation, while search-tree nodes near the
root are allocated first (breadth-first, shuffled within each depth).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .errors import ConfigError
from .hashing import mix, mix_np, unit, unit_np
from .trace import BLOCK_BYTES, GB, KB, Chunk, TraceStream, make_chunk

HEAP_BASE = 0x7F00_0000_0000  # 1GB aligned, below the kernel half
USER_TOP = 1 << 47
BATCH = 1 << 15  # lookups generated per chunk


class KernelKind(str, Enum):
    HASH_TABLE = "hash_table"
    SKIP_LIST = "skip_list"
    BST_INTERNAL = "bst_internal"
    BST_EXTERNAL = "bst_external"
    HASH_PROBE = "hash_probe"  # one random block per probe, for TLB-reach runs
    SERVER_LIKE = "server_like"  # Zipf-popular pages read in short sequential bursts


# non-memory instructions charged before each node visit, and once more per lookup;
# several hundred per visit stands in for the node work and L1-resident accesses
# that the one-reference-per-node traversal leaves out
DEFAULT_STEP_IGAP = {
    KernelKind.HASH_TABLE: 350,
    KernelKind.SKIP_LIST: 350,
    KernelKind.BST_INTERNAL: 350,
    KernelKind.BST_EXTERNAL: 350,
    KernelKind.HASH_PROBE: 22,
    KernelKind.SERVER_LIKE: 20,
}
DEFAULT_LOOKUP_IGAP = {
    KernelKind.HASH_TABLE: 350,
    KernelKind.SKIP_LIST: 350,
    KernelKind.BST_INTERNAL: 350,
    KernelKind.BST_EXTERNAL: 350,
    KernelKind.HASH_PROBE: 0,
    KernelKind.SERVER_LIKE: 0,
}


@dataclass(frozen=True)
class KernelConfig:
    kind: KernelKind = KernelKind.HASH_TABLE
    dataset_bytes: int = 1 * GB
    ops: int = 100_000
    key_dist: str = "uniform"
    locality_fraction: float = 1.0
    seed: int = 1
    heap_base: int = HEAP_BASE
    asid: int = 1
    elements: int | None = None  # overrides the count derived from dataset_bytes
    buckets: int | None = None  # hash table only; default = elements / load_factor
    load_factor: float = 1.0
    step_igap: int | None = None
    lookup_igap: int | None = None
    zipf_alpha: float = 1.0  # server_like only
    burst_lines: int = 16  # server_like only: consecutive lines read per page visit

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", KernelKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown kernel kind {self.kind!r}") from None
        if self.key_dist != "uniform":
            raise ConfigError("only uniform key distributions are generated")
        if not 0.0 <= self.locality_fraction <= 1.0:
            raise ConfigError("locality_fraction must lie in [0, 1]")
        if self.ops < 0 or self.dataset_bytes <= 0:
            raise ConfigError("ops and dataset_bytes must be positive")
        if self.heap_base % (4 * KB):
            raise ConfigError("heap_base must be page aligned")
        if self.load_factor <= 0:
            raise ConfigError("load_factor must be positive")
        if not 1 <= self.burst_lines <= 64 or self.zipf_alpha < 0:
            raise ConfigError("burst_lines must lie in 1..64 and zipf_alpha be non-negative")

    @property
    def igap_step(self) -> int:
        return DEFAULT_STEP_IGAP[self.kind] if self.step_igap is None else self.step_igap

    @property
    def igap_lookup(self) -> int:
        return DEFAULT_LOOKUP_IGAP[self.kind] if self.lookup_igap is None else self.lookup_igap

    def meta(self) -> dict[str, str]:
        d = {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}
        d["heap_base"] = f"{self.heap_base:x}"
        d["step_igap"] = self.igap_step
        d["lookup_igap"] = self.igap_lookup
        return {k: str(v) for k, v in d.items() if v is not None}


# -- keyed permutation ---------------------------------------------------------


class Permutation:
    """Bijection on ``[0, n)``: 4-round Feistel on the next even bit width plus cycle walking."""

    def __init__(self, n: int, seed: int):
        if n < 1:
            raise ConfigError("permutation domain must be non-empty")
        self.n = n
        bits = max(2, (n - 1).bit_length())
        bits += bits & 1
        self.half = bits // 2
        self.mask = np.uint64((1 << self.half) - 1)
        self.keys = [mix(r, seed=seed) for r in range(4)]

    def _round(self, x: np.ndarray) -> np.ndarray:
        h = np.uint64(self.half)
        left, right = x >> h, x & self.mask
        for k in self.keys:
            f = mix_np(right, seed=k) & self.mask
            left, right = right, left ^ f
        return (left << h) | right

    def __call__(self, idx) -> np.ndarray:
        x = np.asarray(idx, dtype=np.uint64)
        scalar = x.ndim == 0
        x = np.atleast_1d(x).copy()
        if self.n > 1:
            todo = np.ones(len(x), dtype=bool)
            while todo.any():
                x[todo] = self._round(x[todo])
                todo = x >= np.uint64(self.n)
        out = x.astype(np.int64)
        return out[0] if scalar else out


# -- kernels -------------------------------------------------------------------


def _page_align(x: int) -> int:
    return (x + 4 * KB - 1) // (4 * KB) * (4 * KB)


class _Kernel:
    def __init__(self, cfg: KernelConfig):
        self.cfg = cfg
        self.segments: list[tuple[int, int]] = []
        self.elements = 0

    def lookups(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Addresses for a batch of lookups plus the per-lookup reference counts."""
        raise NotImplementedError

    def key_space(self) -> int:
        return self.elements

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(0, self.key_space(), size=n, dtype=np.int64)

    def span(self) -> int:
        return max(hi for _, hi in self.segments) - self.cfg.heap_base


def _flatten(columns: list[np.ndarray], valid: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Interleave per-step columns (one entry per lookup) into lookup-major order."""
    addr = np.stack(columns, axis=1)
    ok = np.stack(valid, axis=1)
    return addr[ok], ok.sum(axis=1)


class _HashTable(_Kernel):
    def __init__(self, cfg: KernelConfig):
        super().__init__(cfg)
        if cfg.elements is not None:
            n = cfg.elements
            m = cfg.buckets or max(1, int(round(n / cfg.load_factor)))
        else:
            per_elem = 1 + 1 / cfg.load_factor
            n = max(1, int(cfg.dataset_bytes // BLOCK_BYTES / per_elem))
            m = cfg.buckets or max(1, int(round(n / cfg.load_factor)))
        self.elements, self.buckets = n, m
        self.bucket_base = cfg.heap_base
        self.node_base = _page_align(self.bucket_base + m * BLOCK_BYTES)
        self.segments = [(self.bucket_base, self.bucket_base + m * BLOCK_BYTES),
                         (self.node_base, self.node_base + n * BLOCK_BYTES)]
        self.perm = Permutation(n, cfg.seed ^ 0x4854)
        self.max_chain = -(-n // m)

    def lookups(self, keys):
        m = self.buckets
        b = keys % m
        pos = keys // m
        cols = [self.bucket_base + b * BLOCK_BYTES]
        valid = [np.ones(len(keys), dtype=bool)]
        for j in range(self.max_chain):
            ok = pos >= j
            node = j * m + b
            node = np.where(ok & (node < self.elements), node, 0)
            cols.append(self.node_base + self.perm(node) * BLOCK_BYTES)
            valid.append(ok)
        return _flatten(cols, valid)


class _SkipList(_Kernel):
    MAX_LEVEL = 32

    def __init__(self, cfg: KernelConfig):
        super().__init__(cfg)
        n = cfg.elements or max(1, int(cfg.dataset_bytes // BLOCK_BYTES) - 1)
        self.elements = n
        self.levels = max(1, min(self.MAX_LEVEL, (n - 1).bit_length()))
        self.head = cfg.heap_base
        self.node_base = cfg.heap_base + BLOCK_BYTES
        self.segments = [(self.head, self.node_base + n * BLOCK_BYTES)]
        self.perm = Permutation(n, cfg.seed ^ 0x534C)
        self.level_keys = self._build_levels(n, cfg.seed)

    def _build_levels(self, n: int, seed: int) -> list[np.ndarray]:
        # height-1 = number of trailing zero bits of a per-key hash (p = 1/2)
        dtype = np.int32 if n < (1 << 31) else np.int64
        parts: list[list[np.ndarray]] = [[] for _ in range(self.levels)]
        step = 1 << 22
        for lo in range(0, n, step):
            k = np.arange(lo, min(n, lo + step), dtype=np.uint64)
            h = mix_np(k, seed=seed ^ 0x4854)
            tz = np.zeros(len(k), dtype=np.int64)
            bit = np.ones(len(k), dtype=bool)
            for t in range(self.levels - 1):
                bit &= ((h >> np.uint64(t)) & np.uint64(1)) == 0
                tz += bit
                if not bit.any():
                    break
            for lvl in range(1, self.levels):
                sel = tz >= lvl
                if sel.any():
                    parts[lvl].append(k[sel].astype(dtype))
        out = [np.empty(0, dtype=dtype)]  # level 0 holds every key; handled implicitly
        for lvl in range(1, self.levels):
            out.append(np.concatenate(parts[lvl]) if parts[lvl] else np.empty(0, dtype=dtype))
        return out

    def _level(self, lvl: int) -> np.ndarray | None:
        return None if lvl == 0 else self.level_keys[lvl]

    def lookups(self, keys):
        nops = len(keys)
        addrs_per_op: list[list[np.ndarray]] = []
        cur = np.full(nops, -1, dtype=np.int64)  # -1 is the head sentinel
        counts = np.ones(nops, dtype=np.int64)  # the head tower is read first
        seg_start: list[np.ndarray] = []
        seg_len: list[np.ndarray] = []
        seg_lvl: list[int] = []
        for lvl in range(self.levels - 1, -1, -1):
            arr = self._level(lvl)
            if arr is None:
                # level 0: successors of cur are cur+1 .. key
                i0 = cur + 1
                i1 = keys
                ln = i1 - i0 + 1
                start = i0
                newcur = keys - 1
            else:
                size = len(arr)
                i0 = np.searchsorted(arr, cur, side="right")
                i1 = np.searchsorted(arr, keys, side="left")
                ln = i1 - i0 + (i1 < size)
                start = i0
                moved = i1 > i0
                prev = arr[np.maximum(i1 - 1, 0)].astype(np.int64) if size else cur
                newcur = np.where(moved, prev, cur)
            seg_start.append(start)
            seg_len.append(ln)
            seg_lvl.append(lvl)
            cur = newcur
            counts += ln
        # expand segments in lookup-major, level-descending order
        total = int(counts.sum())
        out = np.empty(total, dtype=np.int64)
        offs = np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[offs] = self.head
        pos = offs + 1
        for start, ln, lvl in zip(seg_start, seg_len, seg_lvl):
            m = int(ln.sum())
            if m == 0:
                continue
            rep = np.repeat(np.arange(nops), ln)
            within = np.arange(m) - np.repeat(np.cumsum(ln) - ln, ln)
            idx = start[rep] + within
            arr = self._level(lvl)
            node_keys = idx if arr is None else arr[idx].astype(np.int64)
            out[pos[rep] + within] = self.node_base + self.perm(node_keys) * BLOCK_BYTES
            pos = pos + ln
        return out, counts


def _depth_rank(depth: np.ndarray, j: np.ndarray, perms: list[Permutation]) -> np.ndarray:
    """Allocation rank of heap position ``j`` at ``depth``: breadth-first, shuffled per depth."""
    rank = np.empty(len(j), dtype=np.int64)
    for d in np.unique(depth).tolist():
        sel = depth == d
        rank[sel] = (1 << d) - 1 + perms[d](j[sel])
    return rank


class _BstInternal(_Kernel):
    def __init__(self, cfg: KernelConfig):
        super().__init__(cfg)
        want = cfg.elements or max(1, int(cfg.dataset_bytes // BLOCK_BYTES))
        self.depth = max(1, (want + 1).bit_length() - 1)  # complete tree of 2^D - 1 nodes
        self.elements = (1 << self.depth) - 1
        self.base = cfg.heap_base
        self.segments = [(self.base, self.base + self.elements * BLOCK_BYTES)]
        self.perms = [Permutation(1 << d, cfg.seed ^ (0x4249 + d)) for d in range(self.depth)]

    def lookups(self, keys):
        D = self.depth
        x1 = keys + 1
        stop = D - 1 - _ctz(x1)  # depth at which the key is found
        cols, valid = [], []
        for d in range(D):
            j = x1 >> (D - d)
            ok = d <= stop
            rank = _depth_rank(np.full(len(keys), d), j, self.perms)
            cols.append(self.base + rank * BLOCK_BYTES)
            valid.append(ok)
        return _flatten(cols, valid)


class _BstExternal(_Kernel):
    def __init__(self, cfg: KernelConfig):
        super().__init__(cfg)
        if cfg.elements:
            self.depth = max(1, (cfg.elements - 1).bit_length())
        else:
            blocks = max(3, int(cfg.dataset_bytes // BLOCK_BYTES))
            self.depth = max(1, ((blocks + 1) // 2).bit_length() - 1)
        self.elements = 1 << self.depth  # leaves
        internal = self.elements - 1
        self.base = cfg.heap_base
        self.leaf_base = _page_align(self.base + internal * BLOCK_BYTES)
        self.segments = [(self.base, self.base + internal * BLOCK_BYTES),
                         (self.leaf_base, self.leaf_base + self.elements * BLOCK_BYTES)]
        self.perms = [Permutation(1 << d, cfg.seed ^ (0x4245 + d)) for d in range(self.depth)]
        self.leaf_perm = Permutation(self.elements, cfg.seed ^ 0x4C46)

    def lookups(self, keys):
        D = self.depth
        cols, valid = [], []
        ones = np.ones(len(keys), dtype=bool)
        for d in range(D):
            j = keys >> (D - d)
            rank = _depth_rank(np.full(len(keys), d), j, self.perms)
            cols.append(self.base + rank * BLOCK_BYTES)
            valid.append(ones)
        cols.append(self.leaf_base + self.leaf_perm(keys) * BLOCK_BYTES)
        valid.append(ones)
        return _flatten(cols, valid)


class _HashProbe(_Kernel):
    def __init__(self, cfg: KernelConfig):
        super().__init__(cfg)
        self.elements = cfg.elements or max(1, int(cfg.dataset_bytes // BLOCK_BYTES))
        self.base = cfg.heap_base
        self.segments = [(self.base, self.base + self.elements * BLOCK_BYTES)]

    def lookups(self, keys):
        return self.base + keys * BLOCK_BYTES, np.ones(len(keys), dtype=np.int64)


class _ServerLike(_Kernel):
    """Each op picks a page by Zipf popularity and reads ``burst_lines`` consecutive lines."""

    def __init__(self, cfg: KernelConfig):
        super().__init__(cfg)
        self.pages = max(1, int(cfg.dataset_bytes // (4 * KB)))
        self.elements = self.pages
        self.base = cfg.heap_base
        self.segments = [(self.base, self.base + self.pages * 4 * KB)]
        w = 1.0 / np.arange(1, self.pages + 1, dtype=np.float64) ** cfg.zipf_alpha
        self.cdf = np.cumsum(w)
        self.cdf /= self.cdf[-1]
        self.perm = Permutation(self.pages, cfg.seed ^ 0x5356)

    def sample(self, rng, n):
        rank = np.searchsorted(self.cdf, rng.random(n), side="right")
        rank = np.minimum(rank, self.pages - 1)
        start = rng.integers(0, 64, size=n, dtype=np.int64)
        return self.perm(rank) * 64 + start

    def lookups(self, keys):
        b = self.cfg.burst_lines
        page, start = keys // 64, keys % 64
        lines = (start[:, None] + np.arange(b)[None, :]) % 64
        addr = self.base + page[:, None] * (4 * KB) + lines * BLOCK_BYTES
        return addr.reshape(-1), np.full(len(keys), b, dtype=np.int64)


def _ctz(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    return np.log2(x & -x).astype(np.int64)


_KERNELS = {
    KernelKind.HASH_TABLE: _HashTable,
    KernelKind.SKIP_LIST: _SkipList,
    KernelKind.BST_INTERNAL: _BstInternal,
    KernelKind.BST_EXTERNAL: _BstExternal,
    KernelKind.HASH_PROBE: _HashProbe,
    KernelKind.SERVER_LIKE: _ServerLike,
}


def build_kernel(cfg: KernelConfig) -> _Kernel:
    k = _KERNELS[cfg.kind](cfg)
    top = max(hi for _, hi in k.segments)
    if top > USER_TOP:
        raise ConfigError(f"dataset of {cfg.dataset_bytes} B does not fit the user address space")
    return k


def generate(cfg: KernelConfig) -> TraceStream:
    """Deterministic lookup trace for ``cfg``; re-iterating regenerates it from the seed."""
    kernel = build_kernel(cfg)
    step, first = cfg.igap_step, cfg.igap_lookup

    def chunks() -> Iterator[Chunk]:
        rng = np.random.default_rng(cfg.seed)
        left = cfg.ops
        while left > 0:
            nb = min(BATCH, left)
            left -= nb
            keys = kernel.sample(rng, nb)
            addrs, counts = kernel.lookups(keys)
            igaps = np.full(len(addrs), step, dtype=np.int64)
            heads = np.concatenate(([0], np.cumsum(counts)[:-1]))
            igaps[heads] += first
            yield make_chunk(addrs, igaps, cfg.asid)

    meta = cfg.meta()
    meta["elements"] = str(kernel.elements)
    meta["segments"] = ";".join(f"{lo:x}-{hi:x}" for lo, hi in kernel.segments)
    return TraceStream(chunks, meta=meta, source=f"gen:{cfg.kind.value}")


# -- page homes ------------------------------------------------------------------


@dataclass(frozen=True)
class PlacementConfig:
    """Page-granular data placement over chips and vaults."""

    chips: int = 4
    vaults: int = 16
    page_size: int = 4 * KB
    locality_fraction: float = 1.0
    mpu_chip: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.locality_fraction <= 1.0:
            raise ConfigError("locality_fraction must lie in [0, 1]")
        if not 0 <= self.mpu_chip < self.chips:
            raise ConfigError("mpu_chip outside the network")


def assign_home(vaddr: int, placement: PlacementConfig) -> tuple[int, int]:
    """(chip, vault) that owns the page of ``vaddr``.

    The vault comes from the low VPN bits; the chip is the MPU's own with
    probability ``locality_fraction`` (decided by a hash of the VPN, so every
    reference to a page agrees), otherwise a uniformly chosen remote chip.
    """
    p = placement
    vpn = vaddr // p.page_size
    vault = vpn % p.vaults
    if p.chips == 1:
        return 0, vault
    h = mix(vpn, seed=p.seed ^ 0x484F4D45)
    if unit(h) < p.locality_fraction:
        return p.mpu_chip, vault
    r = mix(1, vpn, seed=p.seed ^ 0x484F4D45) % (p.chips - 1)
    return (r if r < p.mpu_chip else r + 1), vault


def assign_home_np(vpns: np.ndarray, placement: PlacementConfig) -> tuple[np.ndarray, np.ndarray]:
    p = placement
    vpns = np.asarray(vpns, dtype=np.int64)
    vault = vpns % p.vaults
    if p.chips == 1:
        return np.zeros(len(vpns), dtype=np.int64), vault
    u = vpns.astype(np.uint64)
    local = unit_np(mix_np(u, seed=p.seed ^ 0x484F4D45)) < p.locality_fraction
    r = (mix_np(u, 1, seed=p.seed ^ 0x484F4D45) % np.uint64(p.chips - 1)).astype(np.int64)
    remote = np.where(r < p.mpu_chip, r, r + 1)
    return np.where(local, p.mpu_chip, remote), vault


def local_share(trace: TraceStream, placement: PlacementConfig) -> float:
    local = total = 0
    for ch in trace.chunks():
        chip, _ = assign_home_np(ch.vaddrs // placement.page_size, placement)
        local += int((chip == placement.mpu_chip).sum())
        total += len(ch)
    return local / total if total else 0.0
