"""Experiment configuration files, sweep orchestration and CSV reports.

Configuration is INI-style (``configparser``)::

    [experiment]
    trace = path/to/file.trace      ; or omit and describe a [workload]
    regimes = baseline_4k, dipta_sram
    topologies = daisy_chain:16, mesh:16
    localities = 1.0, 0.25
    out_dir = results
    seed = 7

    [workload]
    kinds = hash_table, skip_list
    dataset = 1GiB
    ops = 20000

    [timing]
    tck_ns = 1.6

    [run]
    associativity = 4

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .engine import Regime, RunConfig, RunReport, run, speedup
from .errors import ConfigError, NmatError
from .memsys import TimingConfig, TopologyConfig
from .trace import TraceStream, open_trace
from .workloads import KernelConfig, KernelKind, generate

SEED_ENV = "NMAT_SEED"

_SIZE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([kmgt]?)(i?b)?\s*$", re.IGNORECASE)
_UNITS = {"": 1, "k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "t": 1 << 40}


def parse_size(text: str | int) -> int:
    """``"4GiB"``, ``"4GB"``, ``"512m"`` or a plain byte count; units are binary."""
    if isinstance(text, int):
        return text
    m = _SIZE.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse size {text!r}")
    value = float(m.group(1)) * _UNITS[m.group(2).lower()]
    if value != int(value):
        raise ConfigError(f"size {text!r} is not a whole number of bytes")
    return int(value)


def env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_topology(text: str) -> TopologyConfig:
    kind, _, chips = text.partition(":")
    try:
        n = int(chips) if chips else 4
    except ValueError:
        raise ConfigError(f"bad topology {text!r}; expected kind:chips") from None
    return TopologyConfig(kind.strip(), n)


@dataclass(frozen=True)
class ExperimentConfig:
    trace: str | None = None
    kernels: tuple[KernelConfig, ...] = ()
    regimes: tuple[Regime, ...] = (Regime.BASELINE_4K, Regime.DIPTA_SRAM)
    topologies: tuple[TopologyConfig, ...] = (TopologyConfig(),)
    localities: tuple[float, ...] = (1.0,)
    out_dir: str = "results"
    seed: int = 0
    timing: TimingConfig = field(default_factory=TimingConfig)
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trace is None and not self.kernels:
            raise ConfigError("experiment needs a trace file or a [workload] section")
        if self.trace is not None and self.kernels:
            raise ConfigError("give either a trace file or a [workload] section, not both")
        for loc in self.localities:
            if not 0.0 <= loc <= 1.0:
                raise ConfigError(f"locality {loc} outside [0, 1]")

    def config_hash(self) -> str:
        d = asdict(self)
        d["out_dir"] = None  # where results land does not change them
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def run_config(self, regime: Regime, topo: TopologyConfig, locality: float) -> RunConfig:
        return RunConfig(regime=regime, topology=topo, timing=self.timing,
                         locality_fraction=locality, seed=self.seed, **self.run)

    def kernel_names(self) -> list[str]:
        if self.trace is not None:
            return [Path(self.trace).stem]
        return [k.kind.value for k in self.kernels]


_EXPERIMENT_KEYS = {"trace", "regimes", "topologies", "localities", "out_dir", "seed"}
_WORKLOAD_KEYS = {"kinds", "kind", "dataset", "ops", "elements", "buckets", "load_factor",
                  "step_igap", "lookup_igap", "heap_base", "zipf_alpha", "burst_lines", "asid"}
_TIMING_KEYS = {f.name for f in fields(TimingConfig)}
_RUN_KEYS = {"associativity", "index_bits", "chip_bytes", "mpu_chip", "mpu_vault",
             "predictor", "fault_policy", "fault_ns", "l1_bytes", "l1_ways"}
_SECTIONS = {"experiment": _EXPERIMENT_KEYS, "workload": _WORKLOAD_KEYS,
             "timing": _TIMING_KEYS, "run": _RUN_KEYS}


def _num(section: str, key: str, raw: str, kind=float):
    try:
        if kind is int:
            return int(raw, 0)
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def parse_config(text: str, base_dir: str | Path = ".", seed_override: int | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - _SECTIONS[sec]
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]
    seed = _num("experiment", "seed", ex.get("seed", "0"), int)
    if seed_override is not None:
        seed = seed_override

    trace = ex.get("trace")
    if trace:
        p = Path(trace)
        if not p.is_absolute():
            p = Path(base_dir) / p
        trace = str(p)

    kernels: list[KernelConfig] = []
    if "workload" in cp:
        w = cp["workload"]
        kinds = _split(w.get("kinds", w.get("kind", "")))
        if not kinds:
            raise ConfigError("[workload] needs kinds")
        kw: dict = {"seed": seed}
        if "dataset" in w:
            kw["dataset_bytes"] = parse_size(w["dataset"])
        for key in ("ops", "elements", "buckets", "step_igap", "lookup_igap", "burst_lines", "asid"):
            if key in w:
                kw[key] = _num("workload", key, w[key], int)
        for key in ("load_factor", "zipf_alpha"):
            if key in w:
                kw[key] = _num("workload", key, w[key])
        if "heap_base" in w:
            kw["heap_base"] = _num("workload", "heap_base", w["heap_base"], int)
        kernels = [KernelConfig(kind=k, **kw) for k in kinds]

    timing_kw = {}
    if "timing" in cp:
        for key, raw in cp["timing"].items():
            kind = int if isinstance(getattr(TimingConfig(), key), int) else float
            timing_kw[key] = _num("timing", key, raw, kind)
    run_kw: dict = {}
    if "run" in cp:
        for key, raw in cp["run"].items():
            if key in ("predictor", "fault_policy"):
                run_kw[key] = raw.strip()
            elif key in ("chip_bytes", "l1_bytes"):
                run_kw[key] = parse_size(raw)
            elif key == "fault_ns":
                run_kw[key] = _num("run", key, raw)
            else:
                run_kw[key] = _num("run", key, raw, int)

    regimes = tuple(Regime(r) if r in {x.value for x in Regime} else _bad_regime(r)
                    for r in _split(ex.get("regimes", "baseline_4k, dipta_sram")))
    topologies = tuple(parse_topology(t) for t in _split(ex.get("topologies", "daisy_chain:4")))
    localities = tuple(_num("experiment", "localities", v) for v in _split(ex.get("localities", "1.0")))
    cfg = ExperimentConfig(
        trace=trace or None,
        kernels=tuple(kernels),
        regimes=regimes,
        topologies=topologies,
        localities=localities,
        out_dir=ex.get("out_dir", "results"),
        seed=seed,
        timing=TimingConfig(**timing_kw),
        run=run_kw,
    )
    # build one run config per topology so bad [run] values surface at load time
    for topo in topologies:
        cfg.run_config(regimes[0] if regimes else Regime.DIPTA_SRAM, topo, localities[0])
    return cfg


def _bad_regime(r: str):
    raise ConfigError(f"unknown regime {r!r}; choose from {', '.join(x.value for x in Regime)}")


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a config file; ``NMAT_SEED`` overrides its seed."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cfg = parse_config(p.read_text(), p.parent, env_seed())
    if cfg.trace is not None and not Path(cfg.trace).is_file():
        raise FileNotFoundError(f"trace file not found: {cfg.trace}")
    return cfg


# -- CSV -------------------------------------------------------------------------------


def write_csv(path: str | Path, header: list[str], rows: list[list], comments: list[str]) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue())


def csv_comments(cfg_hash: str, seed: int, *extra: str) -> list[str]:
    return [f"config_hash={cfg_hash} seed={seed}", *extra]


L1_NOTE = "L1 hit latency is charged to fetch_pct"
REPORT_HEADER = ["kernel", "regime", "topology", "chips", "locality", "instructions",
                 "references", "cpi", "core_pct", "fetch_pct", "translation_pct",
                 "predictor_accuracy"]


def report_row(kernel: str, topo: TopologyConfig, locality: float, rep: RunReport) -> list:
    r = rep.row()
    return [kernel, r["regime"], topo.kind.value, topo.chips, f"{locality:g}",
            r["instructions"], r["references"], r["cpi"], r["core_pct"], r["fetch_pct"],
            r["translation_pct"], r["predictor_accuracy"]]


def events_rows(rep: RunReport) -> list[list]:
    rows = [[k, v] for k, v in sorted(rep.events.items())]
    rows += [[f"accuracy_vault_{k}", f"{v:.6f}"] for k, v in rep.vault_accuracy.items()]
    return rows


def write_run(out_dir: Path, stem: str, kernel: str, topo: TopologyConfig, locality: float,
              rep: RunReport, comments: list[str]) -> None:
    write_csv(out_dir / f"{stem}.csv", REPORT_HEADER, [report_row(kernel, topo, locality, rep)],
              comments + [L1_NOTE])
    write_csv(out_dir / f"{stem}_events.csv", ["event", "count"], events_rows(rep), comments)


# -- sweep -----------------------------------------------------------------------------


SWEEP_HEADER = ["kernel", "topology", "chips", "locality", "regime", "cpi", "core_pct",
                "fetch_pct", "translation_pct", "predictor_accuracy", "speedup_vs_baseline_4k"]


@dataclass(frozen=True)
class Job:
    kernel_index: int
    topology: TopologyConfig
    locality: float
    regime: Regime


def trace_for(cfg: ExperimentConfig, i: int) -> TraceStream:
    if cfg.trace is not None:
        return open_trace(cfg.trace)
    return generate(cfg.kernels[i])


def _run_job(cfg: ExperimentConfig, job: Job) -> RunReport:
    return run(trace_for(cfg, job.kernel_index), cfg.run_config(job.regime, job.topology, job.locality))


def plan(cfg: ExperimentConfig) -> list[Job]:
    """Every (kernel, topology, locality, regime) run, plus the baseline_4k runs speedups need."""
    jobs = []
    n = 1 if cfg.trace is not None else len(cfg.kernels)
    regimes = list(cfg.regimes)
    if Regime.BASELINE_4K not in regimes:
        regimes.append(Regime.BASELINE_4K)
    for i in range(n):
        for topo in cfg.topologies:
            for loc in cfg.localities:
                for reg in regimes:
                    jobs.append(Job(i, topo, loc, reg))
    return jobs


class SweepError(NmatError):
    pass


def run_sweep(cfg: ExperimentConfig, jobs_n: int = 1, out_dir: str | Path | None = None) -> Path:
    """Run the cross-product, writing per-run CSVs and ``sweep.csv``.

    A failing run stops the sweep: finished runs stay on disk, ``sweep.csv``
    holds the rows that completed and ``errors.csv`` names the failure.
    """
    out = Path(out_dir or cfg.out_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    comments = csv_comments(cfg.config_hash(), cfg.seed)
    jobs = plan(cfg)
    names = cfg.kernel_names()
    results: dict[Job, RunReport] = {}
    failure: tuple[Job, BaseException] | None = None
    if jobs_n <= 1:
        for job in jobs:
            try:
                results[job] = _run_job(cfg, job)
            except Exception as e:  # noqa: BLE001 - recorded in the manifest
                failure = (job, e)
                break
    else:
        with ProcessPoolExecutor(max_workers=jobs_n) as pool:
            futs = [(job, pool.submit(_run_job, cfg, job)) for job in jobs]
            for job, fut in futs:
                try:
                    results[job] = fut.result()
                except Exception as e:  # noqa: BLE001
                    failure = failure or (job, e)
    rows = []
    for job in jobs:
        rep = results.get(job)
        if rep is None:
            continue
        name = names[job.kernel_index]
        stem = f"{name}_{job.topology.label}_loc{job.locality:g}_{job.regime.value}"
        write_run(runs_dir, stem, name, job.topology, job.locality, rep, comments)
        if job.regime not in cfg.regimes:
            continue
        base = results.get(Job(job.kernel_index, job.topology, job.locality, Regime.BASELINE_4K))
        sp = f"{speedup(rep, base):.6f}" if base is not None else ""
        r = rep.row()
        rows.append([name, job.topology.kind.value, job.topology.chips, f"{job.locality:g}",
                     job.regime.value, r["cpi"], r["core_pct"], r["fetch_pct"],
                     r["translation_pct"], r["predictor_accuracy"], sp])
    write_csv(out / "sweep.csv", SWEEP_HEADER, rows, comments + [L1_NOTE])
    if failure is not None:
        job, err = failure
        write_csv(out / "errors.csv", ["kernel", "topology", "locality", "regime", "error"],
                  [[names[job.kernel_index], job.topology.label, f"{job.locality:g}",
                    job.regime.value, f"{type(err).__name__}: {err}"]], comments)
        raise SweepError(f"run {job.regime.value} on {job.topology.label} failed: {err}") from err
    return out / "sweep.csv"
