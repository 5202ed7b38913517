"""Exhaustive ground truth for tiny instances.

Every slice may decode any set of qubits that contains that slice's pinned
qubits and fits the slice capacity (decoders are interchangeable, so a slice
decision is a qubit subset). All such schedules are enumerated; schedules that
share the same backlog vector and running maximum are counted together layer
by layer, which keeps the count exact without walking every leaf.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterator

from .policy import AllocationMap
from .workload import Workload

__all__ = ["OracleResult", "OracleTooLarge", "enumeration_size", "brute_force",
           "iter_feasible_schedules", "DEFAULT_LEAF_CAP"]

DEFAULT_LEAF_CAP = 10 ** 7


class OracleTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        self.size, self.cap = size, cap
        super().__init__(f"enumeration size {size} exceeds cap {cap}")


@dataclass
class OracleResult:
    min_feasible_G: int | None
    feasible_count_by_G: dict[int, int]
    witness: AllocationMap | None
    enumeration_size: int
    states_visited: int = 0
    meta: dict = field(default_factory=dict)

    def to_text(self) -> str:
        doc = {
            "min_feasible_G": self.min_feasible_G,
            "feasible_count_by_G": {str(g): c for g, c in self.feasible_count_by_G.items()},
            "enumeration_size": self.enumeration_size,
            "witness": None if self.witness is None else [
                [{"decoder": d, "qubit": q} for d, q in pairs] for pairs in self.witness.slices],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def enumeration_size(w: Workload) -> int:
    """``prod_t C(N, min(cap_t, N))``; equals ``C(N, M) ** L`` for uniform availability."""
    n = w.num_qubits
    return math.prod(math.comb(n, min(w.slice_capacity(t), n)) for t in range(1, w.num_slices + 1))


def _slice_choices(w: Workload, t: int) -> list[frozenset[int]]:
    pins = w.pinned(t)
    free = [q for q in range(w.num_qubits) if q not in pins]
    room = w.slice_capacity(t) - len(pins)
    out = []
    for k in range(0, max(room, -1) + 1):
        for extra in itertools.combinations(free, k):
            out.append(pins.union(extra))
    return out


def brute_force(w: Workload, G_max: int | None = None, cap: int = DEFAULT_LEAF_CAP) -> OracleResult:
    """Count feasible schedules for every gap ``1..G_max`` and find the minimum gap.

    Raises:
        OracleTooLarge: if :func:`enumeration_size` exceeds ``cap``; nothing
            is sampled in that case.
    """
    size = enumeration_size(w)
    if size > cap:
        raise OracleTooLarge(size, cap)
    n, length = w.num_qubits, w.num_slices
    G_max = length if G_max is None else G_max
    if G_max < 1:
        raise ValueError("G_max must be >= 1")

    start = ((0,) * n, 0)
    layer: dict[tuple, int] = {start: 1}
    parents: list[dict[tuple, tuple]] = []
    visited = 1
    for t in range(1, length + 1):
        choices = _slice_choices(w, t)
        if t == length:
            # last slice: decisions do not reach any backlog that is checked
            layer = {s: c * len(choices) for s, c in layer.items()}
            parents.append({s: (s, choices[0]) for s in layer})
            break
        nxt: dict[tuple, int] = {}
        back: dict[tuple, tuple] = {}
        for (U, peak), count in layer.items():
            for chosen in choices:
                U2 = tuple(0 if q in chosen else U[q] + 1 for q in range(n))
                peak2 = max(peak, max(U2))
                if peak2 > G_max:
                    continue
                key = (U2, peak2)
                if key not in nxt:
                    back[key] = ((U, peak), chosen)
                    nxt[key] = 0
                nxt[key] += count
        parents.append(back)
        layer = nxt
        visited += len(layer)

    by_peak: dict[int, int] = {}
    for (_, peak), count in layer.items():
        by_peak[peak] = by_peak.get(peak, 0) + count
    counts, running = {}, 0
    for g in range(0, G_max + 1):
        running += by_peak.get(g, 0)
        if g >= 1:
            counts[g] = running
    min_g = next((g for g in range(1, G_max + 1) if counts[g] > 0), None)

    witness = None
    if min_g is not None:
        state = min((s for s in layer if s[1] <= min_g), key=lambda s: (s[1], s[0]))
        sets = []
        for back in reversed(parents):
            state, chosen = back[state]
            sets.append(sorted(chosen))
        sets.reverse()
        witness = AllocationMap.from_decode_sets(w, sets)
    return OracleResult(min_g, counts, witness, size, visited)


def iter_feasible_schedules(w: Workload, gap: int) -> Iterator[AllocationMap]:
    """Yield every schedule (as qubit subsets per slice) whose backlog stays within ``gap``.

    Plain depth-first enumeration; only for instances with a handful of leaves.
    """
    n, length = w.num_qubits, w.num_slices
    choices = [_slice_choices(w, t) for t in range(1, length + 1)]

    def rec(t: int, U: tuple, prefix: list):
        if t > length:
            yield AllocationMap.from_decode_sets(w, [sorted(s) for s in prefix])
            return
        for chosen in choices[t - 1]:
            if t < length:
                U2 = tuple(0 if q in chosen else U[q] + 1 for q in range(n))
                if max(U2) > gap:
                    continue
            else:
                U2 = U
            prefix.append(chosen)
            yield from rec(t + 1, U2, prefix)
            prefix.pop()

    yield from rec(1, (0,) * n, [])
