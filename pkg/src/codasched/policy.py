"""Schedules, backlog traces and the two heuristic baselines (RR and MLS).

An :class:`AllocationMap` lists, for every slice, which decoder serves which
qubit. The backlog ``U[q, t]`` follows

    U[q, 1] = 0
    U[q, t + 1] = 0              if q is decoded in slice t
                  U[q, t] + 1    otherwise

Both baselines serve the qubits that run a T gate in the next slice first
(ascending qubit id onto ascending free decoder id) and then hand the rest of
the decoders out by their own rule. Neither looks further ahead than one slice.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .workload import Workload

__all__ = [
    "AllocationError",
    "AllocationMap",
    "BacklogTrace",
    "derive_backlog",
    "schedule_rr",
    "schedule_mls",
    "POLICIES",
]


class AllocationError(ValueError):
    """A schedule that breaks capacity, uniqueness or availability.

    ``decoder``, ``qubit`` and ``slice`` locate the first offending entry
    (any of them may be ``None`` when not applicable).
    """

    def __init__(self, message: str, *, decoder=None, qubit=None, slice=None):
        self.decoder, self.qubit, self.slice = decoder, qubit, slice
        where = ", ".join(f"{k}={v}" for k, v in
                          (("d", decoder), ("q", qubit), ("t", slice)) if v is not None)
        super().__init__(f"{message} ({where})" if where else message)


@dataclass(frozen=True)
class AllocationMap:
    """Per-slice ``(decoder, qubit)`` pairs; ``slices[t - 1]`` is slice ``t``."""

    slices: tuple[tuple[tuple[int, int], ...], ...]

    @classmethod
    def from_pairs(cls, per_slice: Iterable[Iterable[tuple[int, int]]]) -> "AllocationMap":
        return cls(tuple(tuple(sorted((int(d), int(q)) for d, q in pairs))
                         for pairs in per_slice))

    @classmethod
    def from_decode_sets(cls, w: Workload, decode_sets: Sequence[Sequence[int]]) -> "AllocationMap":
        """Materialize decoder ids for per-slice qubit lists.

        Qubits are paired in the given order with the slice's available
        decoders in ascending order. Raises :class:`AllocationError` if a
        list is longer than the slice capacity.
        """
        if len(decode_sets) != w.num_slices:
            raise AllocationError(f"expected {w.num_slices} slices, got {len(decode_sets)}")
        out = []
        for t, qubits in enumerate(decode_sets, start=1):
            free = w.available_decoders(t)
            qubits = list(qubits)
            if len(qubits) > len(free):
                raise AllocationError(
                    f"{len(qubits)} qubits but {len(free)} decoders available", slice=t)
            out.append(list(zip(free, qubits)))
        return cls.from_pairs(out)

    @property
    def num_slices(self) -> int:
        return len(self.slices)

    @property
    def total_assignments(self) -> int:
        return sum(len(s) for s in self.slices)

    def decoded(self, t: int) -> frozenset[int]:
        """Qubits decoded in slice ``t`` (1-based)."""
        return frozenset(q for _, q in self.slices[t - 1])

    def decode_matrix(self, num_qubits: int) -> np.ndarray:
        """Bool array ``y`` of shape ``(N, L)``; ``y[q, t-1]`` iff q decoded in slice t."""
        y = np.zeros((num_qubits, self.num_slices), dtype=bool)
        for j, pairs in enumerate(self.slices):
            for _, q in pairs:
                y[q, j] = True
        return y

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["slice", "decoder", "qubit"])
        for t, pairs in enumerate(self.slices, start=1):
            for d, q in pairs:
                writer.writerow([t, d, q])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, num_slices: int) -> "AllocationMap":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["slice", "decoder", "qubit"]:
            raise AllocationError(f"bad header {reader.fieldnames}")
        per_slice: list[list[tuple[int, int]]] = [[] for _ in range(num_slices)]
        for row in reader:
            t = int(row["slice"])
            if not 1 <= t <= num_slices:
                raise AllocationError("slice out of range", slice=t)
            per_slice[t - 1].append((int(row["decoder"]), int(row["qubit"])))
        return cls.from_pairs(per_slice)


def validate_allocation(w: Workload, a: AllocationMap) -> None:
    """Raise :class:`AllocationError` on the first structural violation."""
    if a.num_slices != w.num_slices:
        raise AllocationError(f"schedule has {a.num_slices} slices, workload {w.num_slices}")
    m, n = w.num_decoders, w.num_qubits
    for t, pairs in enumerate(a.slices, start=1):
        seen_d, seen_q = set(), set()
        for d, q in pairs:
            if not 0 <= d < m:
                raise AllocationError("unknown decoder", decoder=d, qubit=q, slice=t)
            if not 0 <= q < n:
                raise AllocationError("unknown qubit", decoder=d, qubit=q, slice=t)
            if not w.availability[d, t - 1]:
                raise AllocationError("decoder unavailable", decoder=d, qubit=q, slice=t)
            if d in seen_d:
                raise AllocationError("decoder assigned twice", decoder=d, qubit=q, slice=t)
            if q in seen_q:
                raise AllocationError("qubit decoded twice", decoder=d, qubit=q, slice=t)
            seen_d.add(d)
            seen_q.add(q)


@dataclass(frozen=True)
class BacklogTrace:
    """Backlog matrix ``U`` (shape ``(N, L)``, column ``t-1`` is slice ``t``) and decode indicator ``y``."""

    U: np.ndarray
    y: np.ndarray

    @property
    def longest(self) -> int:
        return int(self.U.max()) if self.U.size else 0

    def at(self, q: int, t: int) -> int:
        return int(self.U[q, t - 1])


def derive_backlog(w: Workload, a: AllocationMap) -> BacklogTrace:
    """Run the backlog recurrence over a schedule.

    Raises:
        AllocationError: if ``a`` double-books a decoder or qubit, or uses an
            unavailable decoder.
    """
    validate_allocation(w, a)
    y = a.decode_matrix(w.num_qubits)
    U = np.zeros((w.num_qubits, w.num_slices), dtype=np.int64)
    for j in range(w.num_slices - 1):
        U[:, j + 1] = np.where(y[:, j], 0, U[:, j] + 1)
    U.setflags(write=False)
    y.setflags(write=False)
    return BacklogTrace(U, y)


def _mandatory(w: Workload, t: int) -> list[int]:
    return sorted(w.pinned(t))


def schedule_rr(w: Workload) -> AllocationMap:
    """Round-robin baseline.

    After the T-gate qubits of slice ``t + 1`` are served, a cursor over qubit
    ids (carried across slices) hands the remaining decoders out in cyclic
    order. The cursor moves just past the last qubit it served; mandatory
    assignments leave it alone.
    """
    n = w.num_qubits
    cursor = 0
    decode_sets = []
    for t in range(1, w.num_slices + 1):
        mand = _mandatory(w, t)
        chosen = list(mand)
        slots = w.slice_capacity(t) - len(mand)
        taken = set(mand)
        last = None
        for k in range(n):
            if slots <= 0:
                break
            q = (cursor + k) % n
            if q in taken:
                continue
            chosen.append(q)
            taken.add(q)
            last = q
            slots -= 1
        if last is not None:
            cursor = (last + 1) % n
        decode_sets.append(chosen)
    return AllocationMap.from_decode_sets(w, decode_sets)


def schedule_mls(w: Workload) -> AllocationMap:
    """Minimize-longest-undecoded-sequence baseline.

    After the T-gate qubits of slice ``t + 1`` are served, the remaining
    decoders go to the qubits with the largest current backlog, lowest id
    first on ties.
    """
    n = w.num_qubits
    U = np.zeros(n, dtype=np.int64)
    decode_sets = []
    for t in range(1, w.num_slices + 1):
        mand = _mandatory(w, t)
        slots = w.slice_capacity(t) - len(mand)
        taken = set(mand)
        rest = sorted((q for q in range(n) if q not in taken), key=lambda q: (-U[q], q))
        chosen = mand + rest[:max(slots, 0)]
        decode_sets.append(chosen)
        served = np.zeros(n, dtype=bool)
        served[chosen] = True
        U = np.where(served, 0, U + 1)
    return AllocationMap.from_decode_sets(w, decode_sets)


POLICIES: dict[str, Callable[[Workload], AllocationMap]] = {
    "rr": schedule_rr,
    "mls": schedule_mls,
}
