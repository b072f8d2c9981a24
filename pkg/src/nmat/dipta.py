"""Per-vault distributed inverted page table (DIPTA).

Covers the 8-byte entry codec, the SRAM table with set-associative
lookup/install, the interleaved page-striping layout that lets the virtual
address pick the DRAM row, and the DRAM-embedded variant in which 63 page
frames share 64 rows so that every row can reserve its first block for
metadata.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigError

BLOCK = 64

VPN_BITS = 36
ASID_BITS = 12
FLAGS_BITS = 12

FLAG_VALID = 1 << 0
FLAG_READ = 1 << 1
FLAG_WRITE = 1 << 2
FLAG_EXEC = 1 << 3
FLAG_DIRTY = 1 << 4
FLAG_ACCESSED = 1 << 5
# bits 6..11 reserved
FLAGS_RW = FLAG_VALID | FLAG_READ | FLAG_WRITE
ENTRY_BYTES = 8

_TAG_MASK = (1 << (VPN_BITS + ASID_BITS)) - 1
_VALID_BIT = FLAG_VALID << (VPN_BITS + ASID_BITS)


def _log2(x: int, what: str) -> int:
    if x < 1 or x & (x - 1):
        raise ConfigError(f"{what} must be a power of two, got {x}")
    return x.bit_length() - 1


@dataclass(frozen=True)
class DiptaEntry:
    vpn: int
    asid: int
    flags: int = FLAGS_RW

    def __post_init__(self):
        if not 0 <= self.vpn < 1 << VPN_BITS:
            raise ConfigError(f"vpn {self.vpn:#x} does not fit 36 bits")
        if not 0 <= self.asid < 1 << ASID_BITS:
            raise ConfigError(f"asid {self.asid} does not fit 12 bits")
        if not 0 <= self.flags < 1 << FLAGS_BITS:
            raise ConfigError(f"flags {self.flags:#x} do not fit 12 bits")

    @property
    def valid(self) -> bool:
        return bool(self.flags & FLAG_VALID)

    def pack(self) -> int:
        # bits [35:0] vpn, [47:36] asid, [59:48] flags, [63:60] zero
        return self.vpn | self.asid << VPN_BITS | self.flags << (VPN_BITS + ASID_BITS)

    def encode(self) -> bytes:
        return self.pack().to_bytes(ENTRY_BYTES, "little")

    @classmethod
    def unpack(cls, word: int) -> "DiptaEntry":
        if word >> 60:
            raise ConfigError("reserved top bits of a DIPTA entry are set")
        return cls(word & ((1 << VPN_BITS) - 1),
                   (word >> VPN_BITS) & ((1 << ASID_BITS) - 1),
                   (word >> (VPN_BITS + ASID_BITS)) & ((1 << FLAGS_BITS) - 1))

    @classmethod
    def decode(cls, raw: bytes) -> "DiptaEntry":
        if len(raw) != ENTRY_BYTES:
            raise ConfigError(f"DIPTA entry must be {ENTRY_BYTES} bytes")
        return cls.unpack(int.from_bytes(raw, "little"))


HIT = "hit"
WAY_MISMATCH = "way_mismatch"
CONFLICT_MISS = "conflict_miss"


class Lookup(NamedTuple):
    status: str
    way: int | None = None
    flags: int | None = None


class Install(NamedTuple):
    way: int
    victim: DiptaEntry | None = None


class VaultDipta:
    """Inverted page table for one vault: one entry per page frame.

    Sets are materialized lazily and hold packed entry words (0 = never
    written); each set also keeps an LRU order (least recent first) used
    when an install needs a victim.
    """

    def __init__(self, frames_per_vault: int, associativity: int = 4,
                 lookup_cycles: int = 8):
        _log2(associativity, "associativity")
        if frames_per_vault < associativity or frames_per_vault % associativity:
            raise ConfigError("frames per vault must be a multiple of the associativity")
        self.frames_per_vault = frames_per_vault
        self.associativity = associativity
        self.sets = frames_per_vault // associativity
        self.lookup_cycles = lookup_cycles
        self._ways: dict[int, list[int]] = {}
        self._lru: dict[int, list[int]] = {}

    @property
    def entry_count(self) -> int:
        return self.frames_per_vault

    @property
    def table_bytes(self) -> int:
        return self.frames_per_vault * ENTRY_BYTES

    def _check_set(self, s: int) -> None:
        if not 0 <= s < self.sets:
            raise ConfigError(f"set {s} outside 0..{self.sets - 1}")

    def _touch(self, s: int, way: int) -> None:
        order = self._lru[s]
        if order[-1] != way:
            order.remove(way)
            order.append(way)

    def entry(self, s: int, way: int) -> DiptaEntry | None:
        ways = self._ways.get(s)
        if ways is None or not ways[way]:
            return None
        return DiptaEntry.unpack(ways[way])

    def find(self, vpn: int, asid: int, s: int) -> int | None:
        ways = self._ways.get(s)
        if ways is None:
            return None
        tag = vpn | asid << VPN_BITS
        for w, e in enumerate(ways):
            if e & _TAG_MASK == tag and e & _VALID_BIT:
                return w
        return None

    def sram_lookup(self, vpn: int, asid: int, s: int, predicted_way: int) -> Lookup:
        """Compare all ways of set ``s`` against (vpn, asid)."""
        self._check_set(s)
        w = self.find(vpn, asid, s)
        if w is None:
            return Lookup(CONFLICT_MISS)
        self._touch(s, w)
        flags = self._ways[s][w] >> (VPN_BITS + ASID_BITS)
        return Lookup(HIT if w == predicted_way else WAY_MISMATCH, w, flags)

    def install(self, vpn: int, asid: int, flags: int, s: int) -> Install:
        """Fault-service fill: reuse a matching way, else an invalid way, else the LRU way."""
        self._check_set(s)
        if not (0 <= vpn < 1 << VPN_BITS and 0 <= asid < 1 << ASID_BITS
                and 0 <= flags < 1 << FLAGS_BITS):
            DiptaEntry(vpn, asid, flags)  # raises the field-specific error
        new = vpn | asid << VPN_BITS | (flags | FLAG_VALID) << (VPN_BITS + ASID_BITS)
        ways = self._ways.get(s)
        if ways is None:
            ways = self._ways[s] = [0] * self.associativity
            ways[0] = new
            self._lru[s] = list(range(1, self.associativity)) + [0]
            return Install(0)
        tag = new & _TAG_MASK
        for w, e in enumerate(ways):
            if e and e & _TAG_MASK == tag:
                ways[w] = new
                self._touch(s, w)
                return Install(w)
        for w, e in enumerate(ways):
            if not e & _VALID_BIT:
                ways[w] = new
                self._touch(s, w)
                return Install(w)
        w = self._lru[s][0]
        victim = DiptaEntry.unpack(ways[w])
        ways[w] = new
        self._touch(s, w)
        return Install(w, victim)

    def invalidate(self, vpn: int, asid: int, s: int) -> bool:
        w = self.find(vpn, asid, s)
        if w is None:
            return False
        self._ways[s][w] &= ~_VALID_BIT
        return True

    def resident(self) -> int:
        return sum(1 for ways in self._ways.values() for e in ways if e & _VALID_BIT)


# -- interleaved placement ------------------------------------------------


def interleaved_locate(vaddr: int, associativity: int, page_size: int = 4096,
                       row_size: int = 4096) -> tuple[int, int]:
    """Row within the set's group of rows, plus the remaining in-stripe offset.

    Each page is cut into ``associativity`` stripes and row ``r`` of a set
    holds stripe ``r`` of every way, so the top page-offset bits name the
    row without knowing the way.
    """
    abits = _log2(associativity, "associativity")
    pbits = _log2(page_size, "page size")
    _log2(row_size, "row size")
    if row_size != page_size:
        raise ConfigError("interleaving assumes one page per DRAM row")
    off = vaddr & (page_size - 1)
    shift = pbits - abits
    return off >> shift, off & ((1 << shift) - 1)


def interleaved_block(s: int, way: int, page_offset: int, associativity: int,
                      page_size: int = 4096) -> tuple[int, int]:
    """(row, column block) of a byte of the page in ``(set, way)`` of a vault."""
    row_off, rest = interleaved_locate(page_offset, associativity, page_size, page_size)
    stripe_blocks = page_size // BLOCK // associativity
    return s * associativity + row_off, way * stripe_blocks + rest // BLOCK


# -- DRAM-embedded metadata -------------------------------------------------


class LayoutCoordinate(NamedTuple):
    row: int
    offset: int


def dram_locate(block_address: int, blocks_per_row: int = 64) -> LayoutCoordinate:
    """Row and in-row slot of a data block when slot 0 of every row is metadata."""
    k = blocks_per_row
    if k < 2:
        raise ConfigError("a row needs a metadata block and at least one data block")
    return LayoutCoordinate(block_address // (k - 1), block_address % (k - 1) + 1)


ENDING = "ending_page"
STARTING = "starting_page"


class MetaSlot(NamedTuple):
    row: int
    half: str


def dram_metadata_slot(page_index: int, blocks_per_row: int = 64,
                       page_blocks: int = 64) -> MetaSlot:
    """Where a page's translation lives: starting half of the row holding its first block."""
    first = dram_locate(page_index * page_blocks, blocks_per_row)
    return MetaSlot(first.row, STARTING)


def dram_metadata_slots(page_index: int, blocks_per_row: int = 64,
                        page_blocks: int = 64) -> list[MetaSlot]:
    first = dram_locate(page_index * page_blocks, blocks_per_row).row
    last = dram_locate(page_index * page_blocks + page_blocks - 1, blocks_per_row).row
    slots = [MetaSlot(first, STARTING)]
    if last != first:
        slots.append(MetaSlot(last, ENDING))
    return slots


def row_metadata(row: int, blocks_per_row: int = 64,
                 page_blocks: int = 64) -> tuple[int | None, int | None]:
    """(page ending in ``row``, page starting in ``row``); ``None`` marks an empty half."""
    dk = blocks_per_row - 1
    lo, hi = row * dk, row * dk + dk - 1  # data block addresses held by the row
    starting = None
    p = -(-lo // page_blocks)  # first page starting at or after lo
    if p * page_blocks <= hi:
        starting = p
    ending = None
    q = (lo - 1) // page_blocks if lo > 0 else None  # page covering the block before the row
    if q is not None and q >= 0 and q * page_blocks + page_blocks - 1 >= lo:
        ending = q
    return ending, starting


def dram_embedded_block(s: int, way: int, page_offset: int, associativity: int,
                        page_size: int = 4096) -> LayoutCoordinate:
    """Physical (row, slot) after striping then embedding metadata per row."""
    k = page_size // BLOCK
    row, col = interleaved_block(s, way, page_offset, associativity, page_size)
    return dram_locate(row * k + col, k)


def dram_overhead(associativity: int, line_size: int = 64, row_size: int = 4096) -> float:
    if associativity <= 0 or line_size <= 0 or row_size <= 0:
        raise ConfigError("sizes must be positive")
    return associativity * line_size / row_size


def chip_entries(chip_bytes: int, page_size: int = 4096) -> int:
    return chip_bytes // page_size


def chip_table_bytes(chip_bytes: int, page_size: int = 4096) -> int:
    return chip_entries(chip_bytes, page_size) * ENTRY_BYTES


def vault_table_bytes(chip_bytes: int, vaults: int, page_size: int = 4096) -> int:
    return chip_table_bytes(chip_bytes, page_size) // vaults
