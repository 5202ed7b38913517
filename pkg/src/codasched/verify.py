"""Independent constraint checker for schedules.

Shares no code with the schedulers or with :func:`derive_backlog`: backlog
is recomputed in closed form as "slices since the last decode".
"""

from __future__ import annotations

from dataclasses import dataclass

from .policy import AllocationMap, BacklogTrace
from .workload import Workload

__all__ = ["Violation", "check_schedule", "assert_valid"]

FAMILIES = ("capacity", "uniqueness", "availability", "recurrence", "bound", "precedence")


@dataclass(frozen=True)
class Violation:
    family: str
    slice: int
    decoder: int | None = None
    qubit: int | None = None
    detail: str = ""


def _closed_form_backlog(n: int, length: int, decoded: list[set[int]]) -> list[list[int]]:
    backlog = [[0] * length for _ in range(n)]
    for q in range(n):
        last = 0  # slice of last decode; 0 = never
        for t in range(1, length + 1):
            backlog[q][t - 1] = t - 1 - last
            if q in decoded[t - 1]:
                last = t
    return backlog


def check_schedule(w: Workload, a: AllocationMap, gap: int | None = None,
                   trace: BacklogTrace | None = None) -> list[Violation]:
    """Return every constraint violation of ``a`` against ``w``.

    ``gap`` enables the backlog bound ``U <= gap``. If ``trace`` is given, it
    is compared entry by entry with the closed-form backlog (recurrence check).
    """
    out: list[Violation] = []
    n, length, m = w.num_qubits, w.num_slices, w.num_decoders
    if a.num_slices != length:
        return [Violation("capacity", 0, detail=f"{a.num_slices} slices, expected {length}")]
    decoded: list[set[int]] = []
    for t in range(1, length + 1):
        per_decoder: dict[int, int] = {}
        per_qubit: dict[int, int] = {}
        for d, q in a.slices[t - 1]:
            per_decoder[d] = per_decoder.get(d, 0) + 1
            per_qubit[q] = per_qubit.get(q, 0) + 1
            if not (0 <= d < m) or not w.availability[d, t - 1]:
                out.append(Violation("availability", t, d, q))
            if not 0 <= q < n:
                out.append(Violation("uniqueness", t, d, q, "unknown qubit"))
        out += [Violation("capacity", t, d, detail=f"{c} qubits")
                for d, c in per_decoder.items() if c > 1]
        out += [Violation("uniqueness", t, qubit=q, detail=f"{c} decoders")
                for q, c in per_qubit.items() if c > 1]
        decoded.append(set(per_qubit))

    backlog = _closed_form_backlog(n, length, decoded)
    if trace is not None:
        for q in range(n):
            for t in range(1, length + 1):
                if int(trace.U[q, t - 1]) != backlog[q][t - 1]:
                    out.append(Violation("recurrence", t, qubit=q,
                                         detail=f"{int(trace.U[q, t - 1])} != {backlog[q][t - 1]}"))
    if gap is not None:
        for q in range(n):
            for t in range(1, length + 1):
                if backlog[q][t - 1] > gap:
                    out.append(Violation("bound", t, qubit=q,
                                         detail=f"U={backlog[q][t - 1]} > {gap}"))
    for tau, qubits in w.tgates.items():
        for q in sorted(qubits):
            if q not in decoded[tau - 2]:
                out.append(Violation("precedence", tau - 1, qubit=q,
                                     detail=f"T gate at slice {tau}"))
    return out


def assert_valid(w: Workload, a: AllocationMap, gap: int | None = None,
                 trace: BacklogTrace | None = None) -> None:
    found = check_schedule(w, a, gap, trace)
    if found:
        head = "; ".join(f"{v.family}@t={v.slice} d={v.decoder} q={v.qubit} {v.detail}"
                         for v in found[:5])
        raise AssertionError(f"{len(found)} violation(s): {head}")
