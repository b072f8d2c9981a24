"""``nmat`` command line: trace generation, conflict analysis, layout check,
simulation and sweeps.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .assoc import FULL, AssocMemoryConfig, replay
from .dipta import dram_locate, row_metadata
from .engine import Regime, run
from .errors import ConfigError, NmatError, TraceFormatError
from .experiment import (L1_NOTE, REPORT_HEADER, ExperimentConfig, csv_comments, env_seed,
                         events_rows, load_config, parse_size, parse_topology, report_row,
                         run_sweep, trace_for, write_csv, write_run)
from .trace import open_trace, write_trace
from .workloads import KernelConfig, KernelKind, PlacementConfig, generate, local_share

log = logging.getLogger("nmat")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2, like argparse, but via our handler
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _kernel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=[k.value for k in KernelKind], default="hash_table",
                   help="data-structure kernel")
    p.add_argument("--dataset", default="1GiB", help="dataset size, e.g. 4GiB")
    p.add_argument("--ops", type=int, default=100_000, help="number of lookups")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $NMAT_SEED, else 1)")
    p.add_argument("--elements", type=int, default=None, help="element count (overrides --dataset)")
    p.add_argument("--buckets", type=int, default=None, help="hash-table bucket count")
    p.add_argument("--step-igap", type=int, default=None, help="instructions before each node visit")
    p.add_argument("--lookup-igap", type=int, default=None, help="extra instructions per lookup")


def _seed(flag: int | None, default: int) -> int:
    """An explicit ``--seed`` wins, then ``NMAT_SEED``, then ``default``."""
    if flag is not None:
        return flag
    env = env_seed()
    return default if env is None else env


def _args_hash(args) -> str:
    blob = json.dumps({k: v for k, v in sorted(vars(args).items()) if k not in ("out", "verbose")},
                      default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _kernel_from(args) -> KernelConfig:
    return KernelConfig(kind=args.kind, dataset_bytes=parse_size(args.dataset), ops=args.ops,
                        seed=_seed(args.seed, 1), elements=args.elements,
                        buckets=args.buckets, step_igap=args.step_igap,
                        lookup_igap=args.lookup_igap,
                        locality_fraction=getattr(args, "locality", 1.0))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nmat", description="Near-memory address translation simulator.")
    p.add_argument("--version", action="version", version=f"nmat {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-trace", help="write a synthetic kernel trace")
    _kernel_args(g)
    g.add_argument("--locality", type=float, default=1.0,
                   help="locality fraction used for the printed summary")
    g.add_argument("--chips", type=int, default=4, help="chip count used for the summary")
    g.add_argument("-o", "--out", required=True, help="output trace path")

    a = sub.add_parser("assoc-analyze", help="page conflicts and overhead per associativity")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace file")
    src.add_argument("--kind", choices=[k.value for k in KernelKind], help="generate instead")
    a.add_argument("--dataset", default="1GiB")
    a.add_argument("--ops", type=int, default=100_000)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--capacity", default="8GiB", help="physical memory size")
    a.add_argument("--page-size", default="4KiB")
    a.add_argument("--ways", default="1,2,4,8,16,full", help="comma list; 'full' = fully associative")
    a.add_argument("--penalty-ns", type=float, default=10e6, help="conflict (fault) penalty")
    a.add_argument("--mem-latency-ns", type=float, default=30.0, help="memory access latency")
    a.add_argument("-o", "--out", help="CSV path (default stdout)")

    lc = sub.add_parser("layout-check", help="verify the DRAM-embedded metadata layout")
    lc.add_argument("--blocks-per-row", type=int, default=64)
    lc.add_argument("--cycles", type=int, default=1, help="row cycles to enumerate")
    lc.add_argument("-o", "--out", help="optional CSV of block -> (row, offset)")
    lc.add_argument("--meta-out", help="optional CSV of row -> (ending page, starting page)")

    s = sub.add_parser("simulate", help="run one trace under one or more regimes")
    s.add_argument("--config", help="experiment config file (first topology/locality is used)")
    s.add_argument("--trace", help="trace file")
    s.add_argument("--kind", choices=[k.value for k in KernelKind], help="generate a kernel trace")
    s.add_argument("--dataset", default="1GiB")
    s.add_argument("--ops", type=int, default=20_000)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--regime", default="baseline_4k,dipta_sram",
                   help="comma list of " + ", ".join(r.value for r in Regime))
    s.add_argument("--topology", default="daisy_chain:4", help="kind:chips, e.g. mesh:16")
    s.add_argument("--locality", type=float, default=1.0)
    s.add_argument("--out-dir", default=None, help="output directory (default: config out_dir or results)")

    w = sub.add_parser("sweep", help="cross-product of regimes x topologies x localities")
    w.add_argument("config", help="experiment config file")
    w.add_argument("--out-dir", help="override out_dir from the config")
    w.add_argument("--jobs", type=int, default=1, help="parallel runs")
    return p


# -- commands ----------------------------------------------------------------------


def cmd_gen_trace(args) -> int:
    kcfg = _kernel_from(args)
    stream = generate(kcfg)
    n = write_trace(stream, args.out, stream.meta)
    share = local_share(stream, PlacementConfig(chips=args.chips, locality_fraction=args.locality,
                                                seed=kcfg.seed))
    print(f"wrote {n} records to {args.out}")
    print(f"locality: {share:.4f} of references homed on the issuing chip "
          f"(target {args.locality:g}, {args.chips} chips)")
    return 0


def _parse_ways(text: str) -> list:
    out = []
    for w in text.split(","):
        w = w.strip().lower()
        if not w:
            continue
        if w == FULL:
            out.append(FULL)
        else:
            try:
                out.append(int(w))
            except ValueError:
                raise ConfigError(f"bad associativity {w!r}") from None
    return out


def cmd_assoc_analyze(args) -> int:
    if args.trace:
        stream, name = open_trace(args.trace), Path(args.trace).stem
        seed = stream.meta.get("seed", "none")
    else:
        seed = _seed(args.seed, 1)
        stream = generate(KernelConfig(kind=args.kind, dataset_bytes=parse_size(args.dataset),
                                       ops=args.ops, seed=seed))
        name = args.kind
    cap, page = parse_size(args.capacity), parse_size(args.page_size)
    rows = []
    for a in _parse_ways(args.ways):
        cfg = AssocMemoryConfig(cap, page, a)
        rep = replay(stream, cfg, args.penalty_ns, args.mem_latency_ns)
        for msg in rep.warnings:
            log.warning(msg)
        rows.append([name, cfg.label, f"{rep.conflict_rate_per_million:.4f}",
                     f"{100 * rep.overhead_fraction:.4f}"])
    header = ["workload", "associativity", "conflicts_per_million", "overhead_pct"]
    comments = csv_comments(_args_hash(args), seed,
                            f"capacity={cap} page_size={page} penalty_ns={args.penalty_ns:g} "
                            f"mem_latency_ns={args.mem_latency_ns:g}")
    if args.out:
        write_csv(args.out, header, rows, comments)
    else:
        for c in comments:
            print(f"# {c}")
        wr = csv.writer(sys.stdout, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)
    return 0


def layout_check(k: int, cycles: int = 1) -> list[str]:
    """Problems found when enumerating ``cycles`` full row cycles; empty when sound."""
    problems = []
    if k < 2:
        return [f"blocks_per_row must be at least 2, got {k}"]
    n_blocks = (k - 1) * k * cycles
    seen: dict[tuple[int, int], int] = {}
    for b in range(n_blocks):
        row, off = dram_locate(b, k)
        if off == 0:
            problems.append(f"block {b} lands on a metadata slot")
        if (row, off) in seen:
            problems.append(f"blocks {seen[(row, off)]} and {b} collide at row {row} offset {off}")
        seen[(row, off)] = b
    expect = {(r, o) for r in range(k * cycles) for o in range(1, k)}
    if set(seen) != expect:
        problems.append("data slots are not covered exactly once")
    if k == 64:
        for b, want in ((0, (0, 1)), (63, (1, 1)), (3968, (62, 63))):
            got = tuple(dram_locate(b, k))
            if got != want:
                problems.append(f"block {b} -> {got}, expected {want}")
        if row_metadata(0) != (None, 0) or row_metadata(63)[1] is not None:
            problems.append("metadata halves of rows 0/63 are wrong")
    return problems


def cmd_layout_check(args) -> int:
    k = args.blocks_per_row
    problems = layout_check(k, args.cycles)
    if args.out:
        rows = [[b, *dram_locate(b, k)] for b in range((k - 1) * k * args.cycles)]
        write_csv(args.out, ["block", "row", "offset"], rows,
                  csv_comments(_args_hash(args), "none", f"blocks_per_row={k}"))
    if args.meta_out:
        rows = [[r, *("" if p is None else p for p in row_metadata(r, k, k))]
                for r in range(k * args.cycles)]
        write_csv(args.meta_out, ["row", "ending_page", "starting_page"], rows,
                  csv_comments(_args_hash(args), "none", f"blocks_per_row={k}"))
    for p in problems:
        print(f"FAIL {p}")
    if problems:
        return 1
    print(f"OK blocks_per_row={k}: {(k - 1) * k * args.cycles} data blocks map injectively "
          f"onto {k * args.cycles} rows, offset 0 reserved")
    return 0


def _simulate_config(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config)
    if bool(args.trace) == bool(args.kind):
        raise ConfigError("simulate needs exactly one of --trace or --kind (or --config)")
    seed = _seed(args.seed, 0)
    regimes = []
    for r in args.regime.split(","):
        r = r.strip()
        try:
            regimes.append(Regime(r))
        except ValueError:
            raise ConfigError(f"unknown regime {r!r}") from None
    kernels = ()
    trace = None
    if args.trace:
        if not Path(args.trace).is_file():
            raise FileNotFoundError(f"trace file not found: {args.trace}")
        trace = args.trace
    else:
        kernels = (KernelConfig(kind=args.kind, dataset_bytes=parse_size(args.dataset),
                                ops=args.ops, seed=seed),)
    return ExperimentConfig(trace=trace, kernels=kernels, regimes=tuple(regimes),
                            topologies=(parse_topology(args.topology),),
                            localities=(args.locality,), out_dir=args.out_dir or "results",
                            seed=seed)


def cmd_simulate(args) -> int:
    cfg = _simulate_config(args)
    out = Path(args.out_dir or cfg.out_dir)
    topo, loc = cfg.topologies[0], cfg.localities[0]
    comments = csv_comments(cfg.config_hash(), cfg.seed)
    name = cfg.kernel_names()[0]
    trace = trace_for(cfg, 0)
    rows = []
    for reg in cfg.regimes:
        rep = run(trace, cfg.run_config(reg, topo, loc))
        log.info("%s: cpi %.4f in %.1fs", reg.value, rep.cpi, rep.wall_seconds)
        write_run(out, f"{name}_{reg.value}", name, topo, loc, rep, comments)
        rows.append(report_row(name, topo, loc, rep))
        print(f"{reg.value}: cpi={rep.cpi:.4f} translation_pct={rep.breakdown()['translation_pct']:.2f}")
    write_csv(out / "report.csv", REPORT_HEADER, rows, comments + [L1_NOTE])
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    path = run_sweep(cfg, max(1, args.jobs), args.out_dir)
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "gen-trace": cmd_gen_trace,
    "assoc-analyze": cmd_assoc_analyze,
    "layout-check": cmd_layout_check,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"nmat: error: {e}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except ConfigError as e:
        print(f"nmat: config error: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, TraceFormatError, NmatError, OSError) as e:
        print(f"nmat: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
