import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmat.errors import ConfigError
from nmat.memsys import (MESH_SHAPES, ROW_CONFLICT, ROW_HIT, ROW_MISS, MemorySystem, TimingConfig,
                         Topology, TopologyConfig, cpu_hops, dram_access_latency, hops, noc_hops,
                         reference_latency)

T = TimingConfig()


def test_dram_latencies():
    # tRCD + tCAS + 4 x tCK etc., from the timing table
    assert dram_access_latency(T, ROW_MISS) == pytest.approx(11.2 + 11.2 + 6.4)
    assert dram_access_latency(T, ROW_HIT) == pytest.approx(11.2 + 6.4)
    assert dram_access_latency(T, ROW_CONFLICT) == pytest.approx(11.2 * 3 + 6.4)
    with pytest.raises(ConfigError):
        T.dram_ps("open")


def test_unit_conversions():
    assert T.cycle_ps == 500
    assert T.noc_hop_ps == 1500
    assert T.sram_dipta_ps == 4000
    assert T.transfer_ps == 6400


def test_hops_examples():
    assert hops(TopologyConfig("daisy_chain", 16), 0, 15) == 15
    assert hops(TopologyConfig("mesh", 16), 0, 15) == 6
    for kind in Topology:
        topo = TopologyConfig(kind, 16)
        assert all(hops(topo, c, c) == 0 for c in range(16))
    star = TopologyConfig("star", 8)
    assert hops(star, 1, 5) == 2 and cpu_hops(star, 3) == 1
    assert cpu_hops(TopologyConfig("daisy_chain", 4), 0) == 1


def test_topology_errors():
    with pytest.raises(ConfigError):
        TopologyConfig("ring", 4)
    with pytest.raises(ConfigError):
        TopologyConfig("mesh", 6)
    with pytest.raises(ConfigError):
        hops(TopologyConfig("star", 4), 0, 4)


topos = st.sampled_from([TopologyConfig(k, n) for k in Topology for n in MESH_SHAPES])


@given(topos, st.data())
def test_hops_symmetric_and_triangle(topo, data):
    c = st.integers(0, topo.chips - 1)
    a, b, m = data.draw(c), data.draw(c), data.draw(c)
    assert hops(topo, a, b) == hops(topo, b, a)
    assert hops(topo, a, b) <= hops(topo, a, m) + hops(topo, m, b)


def test_reference_latency_examples():
    mem = MemorySystem(TopologyConfig("daisy_chain", 16), T)
    assert reference_latency(mem, (0, 0), (0, 0), ROW_MISS) == pytest.approx(28.8)
    assert reference_latency(mem, (0, 0), (15, 0), ROW_MISS) == pytest.approx(928.8)
    assert reference_latency(mem, (3, 5), (4, 5), ROW_HIT) == pytest.approx(77.6)
    # NoC: vault 0 to vault 15 on the 4x4 grid is 6 hops of 1.5ns, both ways
    assert reference_latency(mem, (0, 0), (0, 15), ROW_MISS) == pytest.approx(28.8 + 18.0)


@given(st.integers(0, 14), st.sampled_from([ROW_HIT, ROW_MISS, ROW_CONFLICT]))
def test_latency_increases_with_hops(d, kind):
    mem = MemorySystem(TopologyConfig("daisy_chain", 16), T)
    assert reference_latency(mem, (0, 0), (d + 1, 0), kind) > reference_latency(mem, (0, 0), (d, 0), kind)


def test_sram_lookup_beats_any_dram_access():
    assert T.sram_dipta_ps < min(T.dram_ps(k) for k in (ROW_HIT, ROW_MISS, ROW_CONFLICT))


def test_open_page_policy():
    mem = MemorySystem(TopologyConfig("daisy_chain", 2), T)
    assert mem.activate(0, 3, 10) == ROW_MISS
    assert mem.activate(0, 3, 10) == ROW_HIT
    assert mem.activate(0, 3, 11) == ROW_CONFLICT
    assert mem.activate(1, 3, 11) == ROW_MISS  # banks are per vault
    assert mem.row_events == {ROW_HIT: 1, ROW_MISS: 2, ROW_CONFLICT: 1}
    mem.reset()
    assert mem.activate(0, 3, 11) == ROW_MISS


def test_noc_hops_manhattan():
    topo = TopologyConfig()
    assert noc_hops(topo, 0, 15) == 6
    assert noc_hops(topo, 5, 6) == 1


def test_timing_validation():
    with pytest.raises(ConfigError):
        TimingConfig(tck_ns=0)
