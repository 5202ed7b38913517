from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from codasched import Workload

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> (passed, detail); filled by test_acceptance, printed at session end
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def random_tiny_workload(rng: np.random.Generator, max_n=5, max_m=2, max_l=6,
                         holes: bool = True, name: str = "tiny") -> Workload:
    """Small random instance; sometimes knocks decoders out of slices."""
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    length = int(rng.integers(1, max_l + 1))
    avail = np.ones((m, length), dtype=bool)
    if holes and m > 1 and rng.random() < 0.3:
        avail &= rng.random((m, length)) > 0.25
    density = float(rng.choice([0.0, 0.1, 0.25, 0.5]))
    tgates = {}
    for tau in range(2, length + 1):
        cap = int(avail[:, tau - 2].sum())
        row = [q for q in range(n) if rng.random() < density][:cap]
        if row:
            tgates[tau] = frozenset(row)
    return Workload(name, n, length, tgates, avail)


def naive_counts(w: Workload, g_max: int) -> dict[int, int]:
    """Feasible-schedule counts by walking every leaf with itertools (no sharing)."""
    n, length = w.num_qubits, w.num_slices
    per_slice = []
    for t in range(1, length + 1):
        cap = w.slice_capacity(t)
        pins = w.pinned(t)
        opts = [frozenset(c) for k in range(0, min(cap, n) + 1)
                for c in itertools.combinations(range(n), k) if pins <= frozenset(c)]
        per_slice.append(opts)
    peaks = []
    for sched in itertools.product(*per_slice):
        last = [0] * n
        peak = 0
        for t in range(1, length + 1):
            for q in range(n):
                peak = max(peak, t - 1 - last[q])
            for q in sched[t - 1]:
                last[q] = t
        peaks.append(peak)
    return {g: sum(p <= g for p in peaks) for g in range(1, g_max + 1)}


@st.composite
def tiny_workloads(draw, max_n=4, max_m=2, max_l=5):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_tiny_workload(np.random.default_rng(seed), max_n, max_m, max_l)
