import csv

import pytest

from nmat.cli import layout_check, main


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def comments(path):
    with open(path) as fh:
        return [line for line in fh if line.startswith("#")]


def test_gen_trace_is_byte_identical(tmp_path, capsys):
    args = ["gen-trace", "--kind", "skip_list", "--dataset", "16MiB", "--ops", "200", "--seed", "4"]
    assert main(args + ["-o", str(tmp_path / "a.trace")]) == 0
    assert main(args + ["-o", str(tmp_path / "b.trace")]) == 0
    assert (tmp_path / "a.trace").read_bytes() == (tmp_path / "b.trace").read_bytes()
    assert "locality" in capsys.readouterr().out


def test_unknown_kind_is_usage_error(tmp_path):
    assert main(["gen-trace", "--kind", "btree", "-o", str(tmp_path / "x")]) == 2
    assert main(["no-such-command"]) == 2


def test_layout_check(tmp_path, capsys):
    assert layout_check(64) == []
    assert layout_check(16, cycles=2) == []
    out, meta = tmp_path / "map.csv", tmp_path / "meta.csv"
    assert main(["layout-check", "-o", str(out), "--meta-out", str(meta)]) == 0
    assert capsys.readouterr().out.startswith("OK")
    rows = read_rows(out)
    assert len(rows) == 63 * 64
    assert rows[3968] == {"block": "3968", "row": "62", "offset": "63"}
    m = read_rows(meta)
    assert m[0] == {"row": "0", "ending_page": "", "starting_page": "0"}
    assert m[63] == {"row": "63", "ending_page": "62", "starting_page": ""}


def test_assoc_analyze(tmp_path):
    out = tmp_path / "assoc.csv"
    assert main(["assoc-analyze", "--kind", "hash_probe", "--dataset", "64MiB", "--ops", "2000",
                 "--capacity", "1MiB", "--ways", "1,4,full", "-o", str(out)]) == 0
    rows = read_rows(out)
    assert [r["associativity"] for r in rows] == ["DM", "4-way", "full"]
    assert comments(out)[0].startswith("# config_hash=")


def test_assoc_analyze_missing_trace(tmp_path):
    assert main(["assoc-analyze", "--trace", str(tmp_path / "nope.trace")]) == 1


def test_simulate_writes_reports(tmp_path):
    out = tmp_path / "res"
    assert main(["simulate", "--kind", "hash_table", "--dataset", "64MiB", "--ops", "300",
                 "--regime", "baseline_4k,dipta_sram", "--topology", "mesh:4",
                 "--out-dir", str(out)]) == 0
    rows = read_rows(out / "report.csv")
    assert [r["regime"] for r in rows] == ["baseline_4k", "dipta_sram"]
    assert any("seed=" in c for c in comments(out / "report.csv"))


def test_simulate_errors(tmp_path):
    assert main(["simulate", "--trace", str(tmp_path / "missing.trace")]) == 1
    assert main(["simulate", "--kind", "hash_table", "--regime", "warp"]) == 2
    assert main(["simulate", "--kind", "hash_table", "--topology", "ring:4"]) == 2
    bad = tmp_path / "bad.trace"
    bad.write_text("NMATTRACE v1\nL,zz,1,0\n")
    assert main(["simulate", "--trace", str(bad), "--out-dir", str(tmp_path / "o")]) == 1


CONFIG = """
[experiment]
regimes = baseline_4k, dipta_sram
topologies = daisy_chain:4, mesh:4
localities = 1.0, 0.25
seed = 5

[workload]
kind = hash_table
dataset = 32MiB
ops = 200
"""


def test_sweep_rows_and_determinism(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(CONFIG)
    assert main(["sweep", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["sweep", str(cfg), "--out-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_text()
    assert a == (tmp_path / "b" / "sweep.csv").read_text()
    assert len(read_rows(tmp_path / "a" / "sweep.csv")) == 8


def test_sweep_config_errors(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(CONFIG + "colour = blue\n")
    assert main(["sweep", str(cfg)]) == 2
    cfg.write_text("[experiment]\ntrace = nowhere.trace\nregimes = dipta_sram\n")
    assert main(["sweep", str(cfg)]) == 1


def test_nmat_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NMAT_SEED", "77")
    out = tmp_path / "assoc.csv"
    assert main(["assoc-analyze", "--kind", "hash_probe", "--dataset", "16MiB", "--ops", "100",
                 "--ways", "1", "-o", str(out)]) == 0
    assert "seed=77" in comments(out)[0]
    # an explicit flag beats the environment
    assert main(["assoc-analyze", "--kind", "hash_probe", "--dataset", "16MiB", "--ops", "100",
                 "--ways", "1", "--seed", "3", "-o", str(out)]) == 0
    assert "seed=3" in comments(out)[0]
