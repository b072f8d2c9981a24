import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmat.dipta import (CONFLICT_MISS, ENDING, ENTRY_BYTES, FLAG_DIRTY, FLAGS_RW, HIT, STARTING,
                        WAY_MISMATCH, DiptaEntry, MetaSlot, VaultDipta, chip_entries,
                        chip_table_bytes, dram_embedded_block, dram_locate, dram_metadata_slot,
                        dram_metadata_slots, dram_overhead, interleaved_block, interleaved_locate,
                        row_metadata, vault_table_bytes)
from nmat.errors import ConfigError
from nmat.trace import GB, MB


@given(st.integers(0, (1 << 36) - 1), st.integers(0, (1 << 12) - 1), st.integers(0, (1 << 12) - 1))
def test_entry_codec_round_trip(vpn, asid, flags):
    e = DiptaEntry(vpn, asid, flags)
    raw = e.encode()
    assert len(raw) == ENTRY_BYTES
    assert DiptaEntry.decode(raw) == e
    assert raw[7] >> 4 == 0  # reserved nibble


def test_entry_bit_layout():
    e = DiptaEntry((1 << 36) - 1, 0, 0)
    assert e.pack() == (1 << 36) - 1
    assert DiptaEntry(0, 1, 0).pack() == 1 << 36
    assert DiptaEntry(0, 0, 1).pack() == 1 << 48
    assert DiptaEntry(0, 0, 1).encode() == bytes([0, 0, 0, 0, 0, 0, 1, 0])
    with pytest.raises(ConfigError):
        DiptaEntry(1 << 36, 0)
    with pytest.raises(ConfigError):
        DiptaEntry.unpack(1 << 60)


def test_lookup_examples():
    v = VaultDipta(16, 4)
    for vpn in (100, 101):
        v.install(vpn, 1, FLAGS_RW, 0)
    assert v.install(5, 1, FLAGS_RW, 0).way == 2
    assert v.sram_lookup(5, 1, 0, 2) == (HIT, 2, FLAGS_RW)
    assert v.sram_lookup(5, 1, 0, 0).status == WAY_MISMATCH
    assert v.sram_lookup(5, 1, 0, 0).way == 2
    assert v.sram_lookup(6, 1, 0, 0).status == CONFLICT_MISS
    assert v.sram_lookup(5, 2, 0, 2).status == CONFLICT_MISS  # asid is part of the tag


def test_install_examples():
    v = VaultDipta(8, 2)
    assert v.install(1, 1, FLAGS_RW, 0) == (0, None)
    assert v.install(2, 1, FLAGS_RW, 0).way == 1
    v.sram_lookup(1, 1, 0, 0)  # page 2 is now least recent
    out = v.install(3, 1, FLAGS_RW, 0)
    assert out.way == 1 and out.victim.vpn == 2
    again = v.install(3, 1, FLAGS_RW | FLAG_DIRTY, 0)
    assert again.way == 1 and again.victim is None
    assert v.entry(0, 1).flags & FLAG_DIRTY
    assert v.resident() == 2
    with pytest.raises(ConfigError):
        v.install(1, 1, FLAGS_RW, 4)


def test_invalidate_frees_way():
    v = VaultDipta(8, 2)
    v.install(1, 1, FLAGS_RW, 0)
    v.install(2, 1, FLAGS_RW, 0)
    assert v.invalidate(1, 1, 0)
    assert v.sram_lookup(1, 1, 0, 0).status == CONFLICT_MISS
    assert v.install(9, 1, FLAGS_RW, 0) == (0, None)


def test_interleaved_examples():
    assert interleaved_locate(0x000, 2)[0] == 0
    assert interleaved_locate(0x800, 2)[0] == 1
    assert interleaved_locate(0x7FF, 2) == (0, 0x7FF)
    assert all(interleaved_locate(off, 1)[0] == 0 for off in range(0, 4096, 64))
    with pytest.raises(ConfigError):
        interleaved_locate(0, 3)


@given(st.integers(0, (1 << 48) - 1), st.sampled_from([1, 2, 4, 8]))
def test_interleaved_row_depends_only_on_offset(vaddr, a):
    assert interleaved_locate(vaddr, a) == interleaved_locate(vaddr & 0xFFF, a)
    # every way of a set stores this offset in the same row
    rows = {interleaved_block(3, w, vaddr & 0xFFF, a)[0] for w in range(a)}
    assert len(rows) == 1


def test_interleaved_block_is_bijective():
    a = 4
    seen = set()
    for w in range(a):
        for off in range(0, 4096, 64):
            seen.add(interleaved_block(2, w, off, a))
    assert len(seen) == a * 64
    assert {r for r, _ in seen} == {8, 9, 10, 11}
    assert {c for _, c in seen} == set(range(64))


def test_dram_locate_anchors():
    assert dram_locate(0) == (0, 1)
    assert dram_locate(63) == (1, 1)
    assert dram_locate(3968) == (62, 63)


def test_dram_locate_cycle_is_bijective():
    coords = [dram_locate(b) for b in range(63 * 64)]
    assert len(set(coords)) == len(coords)
    assert all(off != 0 for _, off in coords)
    assert set(coords) == {(r, o) for r in range(64) for o in range(1, 64)}


def test_metadata_halves():
    assert dram_metadata_slot(0) == MetaSlot(0, STARTING)
    assert row_metadata(0) == (None, 0)
    assert dram_metadata_slot(62) == MetaSlot(62, STARTING)
    assert row_metadata(63) == (62, None)
    assert dram_metadata_slots(1) == [MetaSlot(1, STARTING), MetaSlot(2, ENDING)]
    assert row_metadata(2) == (1, 2)


def test_metadata_map_is_consistent():
    # each page starts in exactly one row and ends in at most one other
    starts, ends = {}, {}
    for r in range(64):
        e, s = row_metadata(r)
        if s is not None:
            starts[s] = r
        if e is not None:
            ends[e] = r
    assert sorted(starts) == list(range(63))
    for p in range(63):
        slots = dram_metadata_slots(p)
        assert slots[0] == MetaSlot(starts[p], STARTING)
        if len(slots) == 2:
            assert slots[1] == MetaSlot(ends[p], ENDING)


def test_embedded_layout_never_hits_slot_zero():
    for w in range(4):
        for off in range(0, 4096, 64):
            assert dram_embedded_block(5, w, off, 4).offset != 0


def test_overhead_examples():
    assert dram_overhead(1) == pytest.approx(1 / 64)
    assert dram_overhead(4) == pytest.approx(0.0625)
    assert dram_overhead(1, 64, 8192) == pytest.approx(1 / 128)


def test_sizing():
    assert chip_entries(2 * GB) == 524_288
    assert chip_table_bytes(2 * GB) <= 4 * MB
    assert 128 * 1024 <= vault_table_bytes(2 * GB, 16) <= 256 * 1024
    assert VaultDipta(1024, 4).table_bytes == 8192
