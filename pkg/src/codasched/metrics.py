"""Per-schedule metrics and policy comparison tables.

Definitions (the reference tables leave some of these informal):

``longest_undecoded``
    ``max U[q, t]`` over all qubits and slices.
``avg_used_decoders_per_slice``
    total assignments / L.
``decoder_utilization``
    total assignments / number of available (decoder, slice) pairs.
``peak_memory_bytes``
    ``bytes_per_syndrome_slice * max_t sum_q U[q, t]``: the largest volume
    of undecoded syndrome rounds held at once.
``avg_undecoded_run_length``
    mean length of the maximal runs of consecutive undecoded slices, pooled
    over all qubits (0 when there are none).
``runs_at_or_above_avg``
    number of such runs at least as long as that mean.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .coda import CodaResult, SolverConfig, coda_schedule
from .policy import AllocationMap, derive_backlog, schedule_mls, schedule_rr
from .workload import Workload

__all__ = ["MetricsReport", "compute_metrics", "undecoded_runs", "compare_policies",
           "geomean_rows", "reports_to_csv", "reports_to_text", "CSV_COLUMNS", "TIMING_COLUMNS"]


@dataclass(frozen=True)
class MetricsReport:
    workload: str
    policy: str
    longest_undecoded: int
    avg_used_decoders_per_slice: float
    decoder_utilization: float
    peak_memory_bytes: int
    avg_undecoded_run_length: float
    runs_at_or_above_avg: int
    gap_final: int | None = None
    gaps_tried: int | None = None
    timeouts: int | None = None
    sched_time_ms: float | None = None


CSV_COLUMNS = [f.name for f in fields(MetricsReport)]
TIMING_COLUMNS = ("sched_time_ms",)


def undecoded_runs(y: np.ndarray) -> list[int]:
    """Lengths of maximal runs of ``False`` in each row of ``y``, row by row."""
    runs = []
    for row in np.asarray(y, dtype=bool):
        length = 0
        for served in row:
            if served:
                if length:
                    runs.append(length)
                length = 0
            else:
                length += 1
        if length:
            runs.append(length)
    return runs


def compute_metrics(w: Workload, a: AllocationMap, bytes_per_syndrome_slice: int = 1,
                    policy: str = "") -> MetricsReport:
    """Score one schedule; raises ``AllocationError`` if ``a`` is structurally invalid."""
    if bytes_per_syndrome_slice < 1:
        raise ValueError("bytes_per_syndrome_slice must be a positive integer")
    trace = derive_backlog(w, a)
    total = a.total_assignments
    slots = int(w.availability.sum())
    runs = undecoded_runs(trace.y)
    avg_run = float(np.mean(runs)) if runs else 0.0
    return MetricsReport(
        workload=w.name,
        policy=policy,
        longest_undecoded=trace.longest,
        avg_used_decoders_per_slice=total / w.num_slices,
        decoder_utilization=total / slots if slots else 0.0,
        peak_memory_bytes=int(bytes_per_syndrome_slice * trace.U.sum(axis=0).max()),
        avg_undecoded_run_length=avg_run,
        runs_at_or_above_avg=sum(1 for r in runs if r >= avg_run) if runs else 0,
    )


def compare_policies(w: Workload, cfg: SolverConfig = SolverConfig(),
                     bytes_per_syndrome_slice: int = 1) -> tuple[list[MetricsReport], CodaResult]:
    """Run RR, MLS and CODA on the same workload object; one report per policy."""
    rows = []
    for name, fn in (("RR", schedule_rr), ("MLS", schedule_mls)):
        t0 = time.perf_counter()
        alloc = fn(w)
        dt = (time.perf_counter() - t0) * 1e3
        rep = compute_metrics(w, alloc, bytes_per_syndrome_slice, name)
        rows.append(_replace(rep, sched_time_ms=dt))
    result = coda_schedule(w, cfg)
    rep = compute_metrics(w, result.allocation, bytes_per_syndrome_slice, "CODA")
    rows.append(_replace(rep, gap_final=result.gap_final, gaps_tried=len(result.log),
                         timeouts=sum(e.verdict == "timeout" for e in result.log),
                         sched_time_ms=result.elapsed * 1e3))
    return rows, result


def _replace(rep: MetricsReport, **changes) -> MetricsReport:
    d = asdict(rep)
    d.update(changes)
    return MetricsReport(**d)


def geomean_rows(reports: Iterable[MetricsReport], label: str = "g-mean") -> list[MetricsReport]:
    """Per-policy geometric mean of ``longest_undecoded`` (values below 1 count as 1).

    Other numeric fields are arithmetic means; counts are rounded.
    """
    by_policy: dict[str, list[MetricsReport]] = {}
    for r in reports:
        by_policy.setdefault(r.policy, []).append(r)
    out = []
    for policy, rs in by_policy.items():
        gm = math.exp(sum(math.log(max(r.longest_undecoded, 1)) for r in rs) / len(rs))
        out.append(MetricsReport(
            workload=label,
            policy=policy,
            longest_undecoded=gm,
            avg_used_decoders_per_slice=float(np.mean([r.avg_used_decoders_per_slice for r in rs])),
            decoder_utilization=float(np.mean([r.decoder_utilization for r in rs])),
            peak_memory_bytes=round(float(np.mean([r.peak_memory_bytes for r in rs]))),
            avg_undecoded_run_length=float(np.mean([r.avg_undecoded_run_length for r in rs])),
            runs_at_or_above_avg=round(float(np.mean([r.runs_at_or_above_avg for r in rs]))),
        ))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def reports_to_csv(reports: Sequence[MetricsReport], timing: bool = True) -> str:
    cols = [c for c in CSV_COLUMNS if timing or c not in TIMING_COLUMNS]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in reports:
        writer.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def reports_to_text(reports: Sequence[MetricsReport], timing: bool = True) -> str:
    """JSON list of report records; run-length columns are interpretations (see module doc)."""
    records = []
    for r in reports:
        d = asdict(r)
        if not timing:
            for c in TIMING_COLUMNS:
                d.pop(c)
        records.append(d)
    return json.dumps(records, indent=2) + "\n"
