"""Gap-incremental constraint scheduling (CODA).

For a candidate gap ``G`` the model asks for a schedule in which no qubit's
backlog ever exceeds ``G``:

* capacity      sum_q x[d,q,t] <= a[d,t]           (M*L rows)
* uniqueness    sum_d x[d,q,t] <= 1                (N*L rows)
* recurrence    U[q,t+1] = (1 - y[q,t]) (U[q,t]+1) (N*(L-1) rows)
* bound         U[q,t] <= G                        (N*L rows)
* precedence    y[q,tau-1] = 1 for q in T_tau      (one row per T gate)

:func:`coda_schedule` tries ``G = 1, 2, ...`` and keeps the first schedule
found. Each check runs under a wall-clock budget; a timeout moves on to the
next gap exactly like a proof of infeasibility, but is logged as a timeout.

Two feasibility backends sit behind :func:`check_feasible`:

``complete-search``
    Chronological backtracking over slices. A qubit whose backlog reaches
    ``G`` must be decoded in that slice; a per-qubit "decode as late as
    possible" demand profile gives a capacity bound for pruning, checked
    once for every window of the horizon and again for every prefix
    during the search;
    failed states are cached modulo permutations of interchangeable qubits.
    Exhaustive, so "infeasible" is a proof.

``sat-encoding``
    Boolean ``y[q,t]`` with cardinality rows, handed to OR-Tools CP-SAT
    (optional dependency). Backlog is eliminated: ``U <= G`` holds iff every
    run of ``G+1`` consecutive slices inside ``1..L-1`` contains a decode.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .policy import AllocationMap
from .verify import check_schedule
from .workload import Workload

__all__ = [
    "GapModel",
    "SolverConfig",
    "FeasibilityOutcome",
    "GapLogEntry",
    "CodaResult",
    "SolverFault",
    "build_model",
    "check_feasible",
    "coda_schedule",
    "theoretical_search_space",
    "stirling_bound",
    "pigeonhole_floor",
    "expansion_ratio",
    "BACKENDS",
]

BACKENDS = ("complete-search", "sat-encoding")
FEASIBLE, INFEASIBLE, TIMEOUT = "feasible", "infeasible", "timeout"
_INF = 1 << 30


class SolverFault(RuntimeError):
    """A backend failed internally. Never reported as infeasibility."""


@dataclass(frozen=True)
class GapModel:
    """Constraint rows for one workload and one gap.

    Rows are index tuples: capacity ``(d, t)``, uniqueness ``(q, t)``,
    recurrence ``(q, t)`` linking ``t`` to ``t+1``, bound ``(q, t)`` and
    precedence ``(q, tau)``. Slices are 1-based.
    """

    workload: Workload
    gap: int
    capacity: tuple[tuple[int, int], ...]
    uniqueness: tuple[tuple[int, int], ...]
    recurrence: tuple[tuple[int, int], ...]
    bound: tuple[tuple[int, int], ...]
    precedence: tuple[tuple[int, int], ...]

    def row_counts(self) -> dict[str, int]:
        return {
            "capacity": len(self.capacity),
            "uniqueness": len(self.uniqueness),
            "recurrence": len(self.recurrence),
            "bound": len(self.bound),
            "precedence": len(self.precedence),
        }

    def violations(self, a: AllocationMap, U: np.ndarray | None = None) -> list[tuple[str, tuple]]:
        """Evaluate every row against ``a``; return the violated ones.

        ``U`` supplies the backlog variables (shape ``(N, L)``); when omitted
        they are computed from ``a`` through the recurrence rows themselves,
        so only the bound rows can then fail on backlog.
        """
        w = self.workload
        length = w.num_slices
        x = {(d, q, t) for t, pairs in enumerate(a.slices, start=1) for d, q in pairs}
        per_dt: dict[tuple[int, int], int] = {}
        per_qt: dict[tuple[int, int], int] = {}
        for d, q, t in x:
            per_dt[d, t] = per_dt.get((d, t), 0) + 1
            per_qt[q, t] = per_qt.get((q, t), 0) + 1
        bad: list[tuple[str, tuple]] = []
        if a.num_slices != length:
            return [("capacity", (-1, a.num_slices))]
        if any(not (0 <= d < w.num_decoders) for d, _ in per_dt):
            bad.append(("capacity", ("unknown decoder",)))
        for d, t in self.capacity:
            if per_dt.get((d, t), 0) > int(w.availability[d, t - 1]):
                bad.append(("capacity", (d, t)))
        for q, t in self.uniqueness:
            if per_qt.get((q, t), 0) > 1:
                bad.append(("uniqueness", (q, t)))
        y = lambda q, t: 1 if per_qt.get((q, t), 0) else 0  # noqa: E731
        if U is None:
            U = np.zeros((w.num_qubits, length), dtype=np.int64)
            for q, t in self.recurrence:
                U[q, t] = (1 - y(q, t)) * (U[q, t - 1] + 1)
        else:
            for q, t in self.recurrence:
                if U[q, t] != (1 - y(q, t)) * (U[q, t - 1] + 1):
                    bad.append(("recurrence", (q, t)))
            bad += [("recurrence", (q, 1)) for q in range(w.num_qubits) if U[q, 0] != 0]
        for q, t in self.bound:
            if U[q, t - 1] > self.gap:
                bad.append(("bound", (q, t)))
        for q, tau in self.precedence:
            if not y(q, tau - 1):
                bad.append(("precedence", (q, tau)))
        return bad


def build_model(w: Workload, gap: int) -> GapModel:
    """Enumerate the constraint rows for gap ``gap`` (``1 <= gap <= L``)."""
    length, n, m = w.num_slices, w.num_qubits, w.num_decoders
    if isinstance(gap, bool) or not isinstance(gap, (int, np.integer)) or not 1 <= gap <= length:
        raise ValueError(f"gap must be an integer in 1..{length}, got {gap!r}")
    slices = range(1, length + 1)
    return GapModel(
        workload=w,
        gap=int(gap),
        capacity=tuple((d, t) for d in range(m) for t in slices),
        uniqueness=tuple((q, t) for q in range(n) for t in slices),
        recurrence=tuple((q, t) for q in range(n) for t in range(1, length)),
        bound=tuple((q, t) for q in range(n) for t in slices),
        precedence=tuple((q, tau) for tau, qs in w.tgates.items() for q in sorted(qs)),
    )


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the gap search.

    ``time_budget`` is the per-gap wall-clock limit in seconds. ``gap_max``
    defaults to the slice count. ``fill_idle`` hands decoders a witness left
    idle to the largest-backlog qubits (never raises any backlog).
    """

    gap_start: int = 1
    time_budget: float = 0.5
    gap_max: int | None = None
    backend: str = "complete-search"
    rng_seed: int = 0
    fill_idle: bool = True

    def __post_init__(self):
        if self.gap_start < 1:
            raise ValueError("gap_start must be >= 1")
        if not self.time_budget > 0:
            raise ValueError("time_budget must be positive")
        if self.gap_max is not None and self.gap_max < 1:
            raise ValueError("gap_max must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")


@dataclass
class FeasibilityOutcome:
    verdict: str
    allocation: AllocationMap | None
    elapsed: float
    nodes: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.verdict == FEASIBLE


@dataclass(frozen=True)
class GapLogEntry:
    gap: int
    verdict: str
    elapsed_ms: float
    nodes: int

    def as_record(self) -> dict:
        return {"G": self.gap, "verdict": self.verdict,
                "elapsed_ms": round(self.elapsed_ms, 3), "nodes": self.nodes}


@dataclass
class CodaResult:
    """Outcome of the gap search.

    ``gap_final`` is ``None`` when every gap up to ``gap_max`` timed out; the
    allocation is then the greedy fallback (pins plus fill), which satisfies
    every constraint except possibly the bound.
    """

    allocation: AllocationMap
    gap_final: int | None
    log: list[GapLogEntry]
    elapsed: float

    @property
    def found(self) -> bool:
        return self.gap_final is not None

    @property
    def exact(self) -> bool:
        """True when every gap below ``gap_final`` was proven infeasible."""
        return self.found and all(e.verdict == INFEASIBLE for e in self.log[:-1])


class _Timeout(Exception):
    pass


class _GapSearch:
    """Exhaustive slice-by-slice search for one gap."""

    def __init__(self, w: Workload, gap: int, deadline: float):
        self.n = n = w.num_qubits
        self.L = length = w.num_slices
        self.G = gap
        self.deadline = deadline
        self.cap = [0] + [w.slice_capacity(t) for t in range(1, length + 1)] + [0]
        self.pins = [frozenset()] + [w.pinned(t) for t in range(1, length + 1)] + [frozenset()]
        # next_pin[q][t]: first slice >= t in which q is pinned
        self.next_pin = []
        for q in range(n):
            row = [_INF] * (length + 2)
            for t in range(length, 0, -1):
                row[t] = t if q in self.pins[t] else row[t + 1]
            self.next_pin.append(row)
        # sig[t][q]: equal iff two qubits share their pins from slice t on
        intern: dict = {}
        self.sig = [None] * (length + 2)
        self.sig[length + 1] = [0] * n
        for t in range(length, 0, -1):
            self.sig[t] = [intern.setdefault((q in self.pins[t], self.sig[t + 1][q]), len(intern))
                           for q in range(n)]
        self.failed: set = set()
        self.choice: list = [None] * (length + 1)
        self.nodes = 0
        self.cache_hits = 0
        self.pruned = 0

    def run(self) -> list[list[int]] | None:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * (self.L + self.n) + 200))
        try:
            ok = self._intervals_ok() and self._dfs(1, (0,) * self.n)
        finally:
            sys.setrecursionlimit(limit)
        if not ok:
            return None
        out = []
        for t in range(1, self.L + 1):
            pins = sorted(self.pins[t])
            out.append(pins + sorted(set(self.choice[t]) - set(pins)))
        return out

    def _intervals_ok(self) -> bool:
        """Every window ``[s, e]`` must fit the decodes it needs from a fresh start.

        Starting with zero backlog at ``s`` is the most lenient history, so
        the per-qubit greedy count is a lower bound whatever came before.
        """
        zero = (0,) * self.n
        return all(self._demand_ok(s, zero) for s in range(2, self.L))

    def _demand_ok(self, t: int, U: tuple) -> bool:
        L, G = self.L, self.G
        demand = [0] * (L + 2)
        for q in range(self.n):
            nxt = self.next_pin[q]
            dl = t + G - U[q]
            pos = t
            while True:
                e = dl if dl <= L - 1 else _INF
                p = nxt[pos] if pos <= L else _INF
                if p < e:
                    e = p
                if e == _INF:
                    break
                demand[e] += 1
                dl = e + G + 1
                pos = e + 1
        need = have = 0
        cap = self.cap
        for s in range(t, L + 1):
            need += demand[s]
            have += cap[s]
            if need > have:
                return False
        return True

    def _dfs(self, t: int, U: tuple) -> bool:
        self.nodes += 1
        if time.perf_counter() > self.deadline:
            raise _Timeout
        L, G, n = self.L, self.G, self.n
        if t == L:
            self.choice[t] = list(self.pins[t])
            return True
        sig = self.sig[t]
        key = (t, tuple(sorted(zip(sig, U))))
        if key in self.failed:
            self.cache_hits += 1
            return False
        if not self._demand_ok(t, U):
            self.pruned += 1
            self.failed.add(key)
            return False
        pins = self.pins[t]
        must = set(pins)
        must.update(q for q in range(n) if U[q] == G)
        room = self.cap[t] - len(must)
        if room < 0:
            self.failed.add(key)
            return False
        # A qubit is worth decoding now only if its deadline comes before
        # its next pin; otherwise the pin resets it first anyway. Qubits with
        # the same remaining pins are interchangeable, so within such a group
        # serving a smaller backlog ahead of a larger one is dominated: only
        # "how many from each group" is branched on, largest backlog first.
        classes: dict[int, list[int]] = {}
        sig_next = self.sig[t + 1]
        for q in range(n):
            if q in must:
                continue
            dl = t + G - U[q]
            if dl <= L - 1 and dl < self.next_pin[q][t + 1]:
                classes.setdefault(sig_next[q], []).append(q)
        groups = [sorted(g, key=lambda q: (-U[q], q)) for g in classes.values()]
        groups.sort(key=lambda g: (-U[g[0]], -self.next_pin[g[0]][t + 1], g[0]))
        take = min(room, sum(len(g) for g in groups))
        for counts in _allocations([len(g) for g in groups], take):
            chosen = set(must)
            for g, c in zip(groups, counts):
                chosen.update(g[:c])
            self.choice[t] = chosen
            nxt = tuple(0 if q in chosen else U[q] + 1 for q in range(n))
            if self._dfs(t + 1, nxt):
                return True
        if len(self.failed) > 2_000_000:
            self.failed.clear()
        self.failed.add(key)
        return False


def _allocations(sizes: Sequence[int], total: int) -> Iterator[tuple[int, ...]]:
    """Ways to draw ``total`` items from bins of ``sizes``; front bins filled first."""
    k = len(sizes)
    suffix = [0] * (k + 1)
    for i in range(k - 1, -1, -1):
        suffix[i] = suffix[i + 1] + sizes[i]

    def rec(i: int, rem: int):
        if rem == 0:
            yield (0,) * (k - i)
            return
        if i == k:
            return
        lo = max(0, rem - suffix[i + 1])
        for c in range(min(sizes[i], rem), lo - 1, -1):
            for rest in rec(i + 1, rem - c):
                yield (c,) + rest

    if total <= suffix[0]:
        yield from rec(0, total)


def _search_backend(model: GapModel, cfg: SolverConfig, start: float):
    search = _GapSearch(model.workload, model.gap, start + cfg.time_budget)
    try:
        sets = search.run()
    except _Timeout:
        return TIMEOUT, None, search.nodes, _stats(search)
    if sets is None:
        return INFEASIBLE, None, search.nodes, _stats(search)
    return FEASIBLE, sets, search.nodes, _stats(search)


def _stats(search: _GapSearch) -> dict:
    return {"cache_hits": search.cache_hits, "pruned": search.pruned,
            "cached_states": len(search.failed)}


def _sat_backend(model: GapModel, cfg: SolverConfig, start: float):
    try:
        from ortools.sat.python import cp_model
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise SolverFault("sat-encoding backend needs the 'ortools' package") from exc
    w, G = model.workload, model.gap
    n, length = w.num_qubits, w.num_slices
    mdl = cp_model.CpModel()
    y = [[mdl.NewBoolVar(f"y_{q}_{t}") for t in range(1, length + 1)] for q in range(n)]
    for t in range(1, length + 1):
        mdl.Add(sum(y[q][t - 1] for q in range(n)) <= w.slice_capacity(t))
    for q, tau in model.precedence:
        mdl.Add(y[q][tau - 2] == 1)
    for q in range(n):
        for s in range(1, length - G):  # window s..s+G within 1..L-1
            mdl.AddBoolOr([y[q][u - 1] for u in range(s, s + G + 1)])
    solver = cp_model.CpSolver()
    remaining = max(cfg.time_budget - (time.perf_counter() - start), 1e-3)
    solver.parameters.max_time_in_seconds = remaining
    solver.parameters.num_search_workers = 1
    solver.parameters.random_seed = cfg.rng_seed
    status = solver.Solve(mdl)
    stats = {"conflicts": solver.NumConflicts(), "branches": solver.NumBranches()}
    nodes = int(solver.NumBranches())
    if status in (cp_model.OPTIMAL, cp_model.FEASIBLE):
        sets = []
        for t in range(1, length + 1):
            pins = sorted(w.pinned(t))
            rest = [q for q in range(n) if solver.Value(y[q][t - 1]) and q not in w.pinned(t)]
            sets.append(pins + rest)
        return FEASIBLE, sets, nodes, stats
    if status == cp_model.INFEASIBLE:
        return INFEASIBLE, None, nodes, stats
    if status == cp_model.UNKNOWN:
        return TIMEOUT, None, nodes, stats
    raise SolverFault(f"CP-SAT returned status {solver.StatusName(status)}")


def check_feasible(model: GapModel, cfg: SolverConfig = SolverConfig()) -> FeasibilityOutcome:
    """Decide whether ``model`` admits a schedule within ``cfg.time_budget``.

    A feasible verdict carries a witness that has been re-checked against
    every row of ``model``; a witness that fails the re-check raises
    :class:`SolverFault`.
    """
    start = time.perf_counter()
    if cfg.backend == "complete-search":
        verdict, sets, nodes, stats = _search_backend(model, cfg, start)
    else:
        verdict, sets, nodes, stats = _sat_backend(model, cfg, start)
    alloc = None
    if verdict == FEASIBLE:
        alloc = AllocationMap.from_decode_sets(model.workload, sets)
        broken = model.violations(alloc)
        if broken:
            raise SolverFault(f"{cfg.backend} produced an invalid witness: {broken[:3]}")
    return FeasibilityOutcome(verdict, alloc, time.perf_counter() - start, nodes, stats)


def _fill_idle(w: Workload, a: AllocationMap) -> AllocationMap:
    """Give every idle available decoder to the undecoded qubit with the largest backlog."""
    n = w.num_qubits
    U = np.zeros(n, dtype=np.int64)
    sets = []
    for t in range(1, w.num_slices + 1):
        chosen = [q for _, q in sorted(a.slices[t - 1])]
        room = w.slice_capacity(t) - len(chosen)
        if room > 0:
            have = set(chosen)
            rest = sorted((q for q in range(n) if q not in have), key=lambda q: (-U[q], q))
            chosen += rest[:room]
        sets.append(chosen)
        served = np.zeros(n, dtype=bool)
        served[chosen] = True
        U = np.where(served, 0, U + 1)
    return AllocationMap.from_decode_sets(w, sets)


def _greedy_fallback(w: Workload) -> AllocationMap:
    return _fill_idle(w, AllocationMap.from_decode_sets(
        w, [sorted(w.pinned(t)) for t in range(1, w.num_slices + 1)]))


def coda_schedule(w: Workload, cfg: SolverConfig = SolverConfig()) -> CodaResult:
    """Search gaps ``cfg.gap_start, ...`` and return the first feasible schedule."""
    gap_max = cfg.gap_max if cfg.gap_max is not None else w.num_slices
    if gap_max > w.num_slices:
        raise ValueError(f"gap_max {gap_max} exceeds the slice count {w.num_slices}")
    start = time.perf_counter()
    log: list[GapLogEntry] = []
    for gap in range(cfg.gap_start, gap_max + 1):
        outcome = check_feasible(build_model(w, gap), cfg)
        log.append(GapLogEntry(gap, outcome.verdict, outcome.elapsed * 1e3, outcome.nodes))
        if outcome.feasible:
            alloc = outcome.allocation
            if cfg.fill_idle:
                alloc = _fill_idle(w, alloc)
            broken = check_schedule(w, alloc, gap)
            if broken:
                raise SolverFault(f"witness for G={gap} fails the checker: {broken[:3]}")
            return CodaResult(alloc, gap, log, time.perf_counter() - start)
    return CodaResult(_greedy_fallback(w), None, log, time.perf_counter() - start)


def theoretical_search_space(n: int, m: int, t: int) -> int:
    """Lower bound ``C(N, M) ** T`` on the number of schedules (exact integer)."""
    if not (isinstance(n, int) and isinstance(m, int) and isinstance(t, int)):
        raise TypeError("arguments must be integers")
    if not 0 < m <= n:
        raise ValueError(f"need 0 < M <= N, got N={n}, M={m}")
    if t < 1:
        raise ValueError(f"need T >= 1, got {t}")
    return math.comb(n, m) ** t


def stirling_bound(n: int) -> float:
    """Stirling estimate ``sqrt(2 / (pi N)) * 2**N`` of ``C(N, N/2)``."""
    if n < 1:
        raise ValueError(f"need N >= 1, got {n}")
    return math.sqrt(2.0 / (math.pi * n)) * 2.0 ** n


def pigeonhole_floor(n: int, m: int) -> int:
    """``ceil(N / M)``: slices needed to decode all N qubits once with M decoders."""
    if m < 1:
        raise ValueError(f"need M >= 1, got {m}")
    return -(-n // m)


def expansion_ratio(windows: Sequence[int]) -> float:
    """Approximate feasible-set growth ``prod(1 + 1/w_q)`` when every window widens by one."""
    if any(w < 1 for w in windows):
        raise ValueError("windows must be >= 1")
    return math.prod(1.0 + 1.0 / w for w in windows)
