import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codasched import AllocationMap, SolverConfig, Workload, derive_backlog, schedule_mls, schedule_rr
from codasched.metrics import (
    CSV_COLUMNS,
    compare_policies,
    compute_metrics,
    geomean_rows,
    reports_to_csv,
    reports_to_text,
    undecoded_runs,
)

from conftest import tiny_workloads


def test_full_schedule():
    w = Workload.uniform(3, 4, 3)
    r = compute_metrics(w, AllocationMap.from_decode_sets(w, [[0, 1, 2]] * 4), policy="x")
    assert (r.longest_undecoded, r.decoder_utilization, r.peak_memory_bytes) == (0, 1.0, 0)
    assert r.avg_used_decoders_per_slice == 3.0
    assert (r.avg_undecoded_run_length, r.runs_at_or_above_avg) == (0.0, 0)


def test_idle_decoder():
    w = Workload.uniform(1, 5, 1)
    r = compute_metrics(w, AllocationMap.from_decode_sets(w, [[]] * 5), bytes_per_syndrome_slice=16)
    assert (r.longest_undecoded, r.peak_memory_bytes, r.decoder_utilization) == (4, 64, 0.0)
    assert r.avg_undecoded_run_length == 5.0


def test_runs():
    y = np.array([[1, 0, 0, 1, 0], [0, 0, 0, 0, 1]], dtype=bool)
    assert undecoded_runs(y) == [2, 1, 4]


def test_bad_bytes_rejected():
    w = Workload.uniform(1, 2, 1)
    with pytest.raises(ValueError):
        compute_metrics(w, schedule_rr(w), bytes_per_syndrome_slice=0)


@settings(max_examples=80, deadline=None)
@given(tiny_workloads(max_n=6, max_m=3, max_l=8), st.integers(1, 64))
def test_metric_invariants(w, k):
    a = schedule_mls(w)
    r1 = compute_metrics(w, a, 1)
    rk = compute_metrics(w, a, k)
    trace = derive_backlog(w, a)
    assert rk.peak_memory_bytes == k * r1.peak_memory_bytes
    assert r1.longest_undecoded == int(np.max(trace.U)) <= max(w.num_slices - 1, 0)
    assert 0.0 <= r1.decoder_utilization <= 1.0
    slots = int(w.availability.sum())
    assert (r1.decoder_utilization == 1.0) == (a.total_assignments == slots)
    if w.is_uniform:
        assert r1.decoder_utilization == pytest.approx(
            r1.avg_used_decoders_per_slice / w.num_decoders)


def test_compare_abundance():
    w = Workload.uniform(4, 6, 4, {2: {1}})
    rows, res = compare_policies(w)
    assert [r.policy for r in rows] == ["RR", "MLS", "CODA"]
    assert [r.longest_undecoded for r in rows] == [0, 0, 0]
    assert rows[2].gap_final == res.gap_final == 1


def test_compare_ordering_and_gap_bound(fixtures_dir):
    from codasched import load_workload
    w = load_workload(fixtures_dir / "six-qubit-trap.toml")
    rows, res = compare_policies(w, SolverConfig(time_budget=5))
    rr, mls, coda = (r.longest_undecoded for r in rows)
    assert coda <= mls <= rr
    assert coda <= res.gap_final


def test_csv_and_text_columns(fixtures_dir):
    from codasched import load_workload
    w = load_workload(fixtures_dir / "six-qubit-trap.toml")
    rows, _ = compare_policies(w)
    text = reports_to_csv(rows, timing=False)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0]) == [c for c in CSV_COLUMNS if c != "sched_time_ms"]
    assert parsed[2]["gap_final"] == "3" and parsed[0]["gap_final"] == ""
    again, _ = compare_policies(w)
    assert reports_to_csv(again, timing=False) == text
    doc = json.loads(reports_to_text(rows, timing=False))
    assert doc[1]["policy"] == "MLS" and "sched_time_ms" not in doc[1]


def test_geomean_row():
    w1 = Workload.uniform(4, 6, 1)
    w2 = Workload.uniform(2, 6, 1)
    reports = [compute_metrics(w, schedule_rr(w), policy="RR") for w in (w1, w2)]
    (g,) = geomean_rows(reports)
    assert g.policy == "RR" and g.workload == "g-mean"
    assert g.longest_undecoded == pytest.approx((3 * 1) ** 0.5)
