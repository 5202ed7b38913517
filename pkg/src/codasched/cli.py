"""Command-line batch harness.

Subcommands::

    codasched gen       --qubits 20 --slices 40 --decoders 5 --density 0.05 --seed 7 --out w.toml
    codasched simulate  --policy mls --workload w.toml --out sched.csv
    codasched compare   --workload w.toml --bytes-per-syndrome 16 --time-budget-ms 500
    codasched sweep     --qubits 5:40:5 --decoder-ratio 4 --reps 3 --out sweep.csv
    codasched oracle    --workload w.toml --gap-max 4

Exit codes: 0 success, 2 bad command line, 3 unreadable or unwritable file,
4 invalid workload, 5 oracle instance over the enumeration cap, 6 solver
failure. Failures print one JSON object ``{"error", "message", ...}`` on
stderr. The default per-gap time budget is read from
``CODASCHED_TIME_BUDGET_MS`` (500 when unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .coda import BACKENDS, SolverConfig, SolverFault, coda_schedule, stirling_bound
from .metrics import compare_policies, compute_metrics, reports_to_csv, reports_to_text
from .oracle import DEFAULT_LEAF_CAP, OracleTooLarge, brute_force
from .policy import POLICIES
from .workload import (
    WorkloadError,
    WorkloadGenSpec,
    generate_clustered_workload,
    generate_phase_workload,
    generate_workload,
    load_workload,
    serialize_workload,
)

__all__ = ["SweepSpec", "run_sweep", "sweep_to_csv", "SWEEP_COLUMNS", "cli_main", "main",
           "EXIT_OK", "EXIT_USAGE", "EXIT_IO", "EXIT_WORKLOAD", "EXIT_ORACLE", "EXIT_SOLVER"]

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_WORKLOAD, EXIT_ORACLE, EXIT_SOLVER = 0, 2, 3, 4, 5, 6
TIME_BUDGET_ENV = "CODASCHED_TIME_BUDGET_MS"
GENERATORS = ("random", "phase", "burst")


def default_time_budget_ms() -> float:
    raw = os.environ.get(TIME_BUDGET_ENV)
    if raw is None:
        return 500.0
    value = float(raw)
    if not value > 0:
        raise ValueError(f"{TIME_BUDGET_ENV} must be positive, got {raw!r}")
    return value


# -- sweep -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """One scalability sweep.

    The decoder count is ``decoders`` when given, else
    ``max(1, ceil(N / decoder_ratio))``.
    """

    qubits: tuple[int, int, int] = (5, 40, 5)
    slices: int = 30
    decoders: int | None = None
    decoder_ratio: float = 4.0
    tgate_density: float = 0.05
    reps: int = 3
    time_budget_ms: float = 500.0
    seed: int = 0
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        start, stop, step = self.qubits
        if step < 1 or start < 1 or stop < start:
            raise ValueError(f"empty or invalid qubit range {self.qubits}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.slices < 1:
            raise ValueError("slices must be >= 1")
        if self.decoders is not None and self.decoders < 1:
            raise ValueError("decoders must be >= 1")
        if not self.decoder_ratio > 0:
            raise ValueError("decoder_ratio must be positive")
        if not self.time_budget_ms > 0:
            raise ValueError("time_budget_ms must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def qubit_counts(self) -> list[int]:
        start, stop, step = self.qubits
        return list(range(start, stop + 1, step))

    def decoders_for(self, n: int) -> int:
        if self.decoders is not None:
            return self.decoders
        return max(1, math.ceil(n / self.decoder_ratio))

    def points(self) -> list[tuple[int, int]]:
        return [(n, r) for n in self.qubit_counts() for r in range(self.reps)]


SWEEP_COLUMNS = ["num_qubits", "num_decoders", "num_slices", "rep", "seed", "num_tgates",
                 "gap_final", "gaps_tried", "timeouts", "exact", "longest_undecoded",
                 "gap_verdicts", "pow2_n", "stirling", "sched_time_s", "gap_times_ms", "error"]
SWEEP_TIMING_COLUMNS = ("sched_time_s", "gap_times_ms")


def _sweep_point(spec: SweepSpec, n: int, rep: int) -> dict:
    m = spec.decoders_for(n)
    seed = spec.seed * 1_000_003 + n * 1_000 + rep
    row = {"num_qubits": n, "num_decoders": m, "num_slices": spec.slices, "rep": rep,
           "seed": seed, "pow2_n": 2 ** n, "stirling": stirling_bound(n), "error": ""}
    try:
        w = generate_workload(WorkloadGenSpec(n, spec.slices, m, spec.tgate_density, seed))
        cfg = SolverConfig(time_budget=spec.time_budget_ms / 1e3)
        t0 = time.perf_counter()
        res = coda_schedule(w, cfg)
        elapsed = time.perf_counter() - t0
        report = compute_metrics(w, res.allocation, policy="CODA")
        row.update(
            num_tgates=w.total_tgates,
            gap_final=res.gap_final,
            gaps_tried=len(res.log),
            timeouts=sum(e.verdict == "timeout" for e in res.log),
            exact=res.exact,
            longest_undecoded=report.longest_undecoded,
            gap_verdicts=";".join(f"{e.gap}:{e.verdict}" for e in res.log),
            sched_time_s=elapsed,
            gap_times_ms=";".join(f"{e.gap}:{e.elapsed_ms:.3f}" for e in res.log),
        )
    except Exception as exc:  # recorded in-row, the sweep carries on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _sweep_point_star(args):
    return _sweep_point(*args)


def run_sweep(spec: SweepSpec) -> list[dict]:
    """Run every (N, repetition) point; rows come back in (N, rep) order.

    Writes :func:`sweep_to_csv` output to ``spec.out`` when set.
    """
    jobs = [(spec, n, r) for n, r in spec.points()]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_sweep_point_star, jobs))
    else:
        rows = [_sweep_point(*job) for job in jobs]
    if spec.out:
        Path(spec.out).write_text(sweep_to_csv(rows))
    return rows


def sweep_to_csv(rows: Sequence[dict], timing: bool = True) -> str:
    cols = [c for c in SWEEP_COLUMNS if timing or c not in SWEEP_TIMING_COLUMNS]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        out = []
        for c in cols:
            v = row.get(c)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(f"{v:.6g}")
            else:
                out.append(str(v))
        writer.writerow(out)
    return buf.getvalue()


# -- command line -------------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _qubit_range(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected START:STOP[:STEP]")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError("expected integers in START:STOP[:STEP]") from None
    return (nums[0], nums[1], nums[2] if len(nums) == 3 else 1)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="codasched", description="Decoder scheduling simulator (RR, MLS, CODA).")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a workload file")
    g.add_argument("--qubits", type=int, required=True)
    g.add_argument("--slices", type=int, required=True)
    g.add_argument("--decoders", type=int, required=True)
    g.add_argument("--density", type=float, default=0.05,
                   help="T-gate probability per qubit and slice (random generator)")
    g.add_argument("--generator", choices=GENERATORS, default="random")
    g.add_argument("--tgate-prob", type=float, default=0.85, help="phase generator only")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("--out", help="output path (stdout if omitted)")

    def solver_flags(sp):
        sp.add_argument("--time-budget-ms", type=float, default=None,
                        help=f"per-gap budget (default ${TIME_BUDGET_ENV} or 500)")
        sp.add_argument("--backend", choices=BACKENDS, default="complete-search")
        sp.add_argument("--solver-seed", type=int, default=0)
        sp.add_argument("--gap-log", help="write the CODA per-gap log here (JSON)")

    s = sub.add_parser("simulate", help="run one policy on a workload")
    s.add_argument("--policy", choices=("rr", "mls", "coda"), required=True)
    s.add_argument("--workload", required=True)
    s.add_argument("--out", help="schedule CSV (slice,decoder,qubit)")
    s.add_argument("--metrics-out", help="metrics file (stdout if omitted)")
    s.add_argument("--bytes-per-syndrome", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")
    solver_flags(s)

    c = sub.add_parser("compare", help="RR, MLS and CODA on one workload")
    c.add_argument("--workload", required=True)
    c.add_argument("--out", help="report path (stdout if omitted)")
    c.add_argument("--bytes-per-syndrome", type=int, default=1)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")
    solver_flags(c)

    w = sub.add_parser("sweep", help="scalability sweep over qubit counts")
    w.add_argument("--qubits", type=_qubit_range, default=(5, 40, 5), help="START:STOP[:STEP]")
    w.add_argument("--slices", type=int, default=30)
    grp = w.add_mutually_exclusive_group()
    grp.add_argument("--decoders", type=int)
    grp.add_argument("--decoder-ratio", type=float, default=4.0)
    w.add_argument("--density", type=float, default=0.05)
    w.add_argument("--reps", type=int, default=3)
    w.add_argument("--time-budget-ms", type=float, default=None)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--out", help="sweep CSV (stdout if omitted)")
    w.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")

    o = sub.add_parser("oracle", help="exhaustive ground truth for a tiny workload")
    o.add_argument("--workload", required=True)
    o.add_argument("--gap-max", type=int)
    o.add_argument("--cap", type=int, default=DEFAULT_LEAF_CAP)
    o.add_argument("--out")
    return p


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _solver_config(args) -> SolverConfig:
    ms = args.time_budget_ms if args.time_budget_ms is not None else default_time_budget_ms()
    return SolverConfig(time_budget=ms / 1e3, backend=args.backend, rng_seed=args.solver_seed)


def _write_gap_log(result, path: str | None) -> None:
    if path:
        Path(path).write_text(json.dumps([e.as_record() for e in result.log], indent=2) + "\n")


def _cmd_gen(args) -> int:
    if args.generator == "random":
        w = generate_workload(WorkloadGenSpec(args.qubits, args.slices, args.decoders,
                                              args.density, args.seed, args.name))
    elif args.generator == "phase":
        w = generate_phase_workload(args.qubits, args.slices, args.decoders, args.seed,
                                    tgate_prob=args.tgate_prob, name=args.name)
    else:
        w = generate_clustered_workload(args.qubits, args.slices, args.decoders, args.seed,
                                        name=args.name)
    _emit(serialize_workload(w), args.out)
    return EXIT_OK


def _report_text(reports, fmt: str, timing: bool) -> str:
    return reports_to_csv(reports, timing) if fmt == "csv" else reports_to_text(reports, timing)


def _cmd_simulate(args) -> int:
    w = load_workload(args.workload)
    if args.policy == "coda":
        t0 = time.perf_counter()
        result = coda_schedule(w, _solver_config(args))
        alloc = result.allocation
        report = compute_metrics(w, alloc, args.bytes_per_syndrome, "CODA")
        report = type(report)(**{**report.__dict__, "gap_final": result.gap_final,
                                 "gaps_tried": len(result.log),
                                 "timeouts": sum(e.verdict == "timeout" for e in result.log),
                                 "sched_time_ms": (time.perf_counter() - t0) * 1e3})
        _write_gap_log(result, args.gap_log)
    else:
        t0 = time.perf_counter()
        alloc = POLICIES[args.policy](w)
        report = compute_metrics(w, alloc, args.bytes_per_syndrome, args.policy.upper())
        report = type(report)(**{**report.__dict__,
                                 "sched_time_ms": (time.perf_counter() - t0) * 1e3})
    if args.out:
        Path(args.out).write_text(alloc.to_csv())
    _emit(_report_text([report], args.format, not args.no_timing), args.metrics_out)
    return EXIT_OK


def _cmd_compare(args) -> int:
    w = load_workload(args.workload)  # parsed once, shared by every policy
    rows, result = compare_policies(w, _solver_config(args), args.bytes_per_syndrome)
    _write_gap_log(result, args.gap_log)
    _emit(_report_text(rows, args.format, not args.no_timing), args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    ms = args.time_budget_ms if args.time_budget_ms is not None else default_time_budget_ms()
    spec = SweepSpec(qubits=args.qubits, slices=args.slices, decoders=args.decoders,
                     decoder_ratio=args.decoder_ratio, tgate_density=args.density,
                     reps=args.reps, time_budget_ms=ms, seed=args.seed, workers=args.workers)
    rows = run_sweep(spec)
    _emit(sweep_to_csv(rows, not args.no_timing), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    w = load_workload(args.workload)
    _emit(brute_force(w, args.gap_max, args.cap).to_text(), args.out)
    return EXIT_OK


_COMMANDS = {"gen": _cmd_gen, "simulate": _cmd_simulate, "compare": _cmd_compare,
             "sweep": _cmd_sweep, "oracle": _cmd_oracle}


def _fail(code: int, kind: str, message: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return its exit status (never raises for expected failures)."""
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    try:
        return _COMMANDS[args.command](args)
    except WorkloadError as exc:
        return _fail(EXIT_WORKLOAD, "invalid-workload", str(exc), location=exc.location)
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc), path=getattr(exc, "filename", None))
    except OracleTooLarge as exc:
        return _fail(EXIT_ORACLE, "oracle-too-large", str(exc), size=exc.size, cap=exc.cap)
    except SolverFault as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc))
    except ValueError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
