"""Scheduling instances: the time-sliced decoding workload.

A workload fixes ``N`` logical qubits, ``L`` time slices, ``M`` decoders, the
qubits that execute a T gate at each slice, and a decoder availability matrix.
Slices are numbered from 1 in files and in the public API; the availability
matrix is stored 0-based (column ``j`` is slice ``j + 1``).

File format (TOML)::

    name = "example"
    num_qubits = 6
    num_slices = 8
    num_decoders = 3

    [[tgates]]
    slice = 4
    qubits = [0, 1, 2]

    [[availability]]
    decoder = 2
    unavailable_slices = [5, 6]
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import tomli
import tomli_w

__all__ = [
    "Workload",
    "WorkloadGenSpec",
    "WorkloadError",
    "WorkloadSyntaxError",
    "WorkloadSemanticError",
    "WorkloadInfeasibleError",
    "parse_workload",
    "serialize_workload",
    "load_workload",
    "save_workload",
    "generate_workload",
    "generate_clustered_workload",
    "generate_phase_workload",
]


class WorkloadError(ValueError):
    """Base class for every workload rejection.

    ``location`` names the offending key or record, e.g. ``"tgates[2].qubits"``.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class WorkloadSyntaxError(WorkloadError):
    """Malformed document (not TOML, missing keys, wrong value types)."""


class WorkloadSemanticError(WorkloadError):
    """Well-formed document whose values break the model's index ranges."""


class WorkloadInfeasibleError(WorkloadError):
    """More T-gate qubits at slice tau than decoders available at tau - 1."""


@dataclass(frozen=True, eq=False)
class Workload:
    """A validated scheduling instance.

    Attributes:
        name: identifier carried into reports.
        num_qubits: ``N``.
        num_slices: ``L``.
        tgates: slice ``tau`` (2..L) -> frozenset of qubits with a T gate there.
        availability: bool array of shape ``(M, L)``; ``availability[d, t-1]``
            says whether decoder ``d`` can be used in slice ``t``.
    """

    name: str
    num_qubits: int
    num_slices: int
    tgates: Mapping[int, frozenset[int]]
    availability: np.ndarray = field(repr=False)

    def __post_init__(self):
        avail = np.array(self.availability, dtype=bool)
        avail.setflags(write=False)
        object.__setattr__(self, "availability", avail)
        tg = {int(k): frozenset(int(q) for q in v) for k, v in self.tgates.items() if v}
        object.__setattr__(self, "tgates", dict(sorted(tg.items())))
        _validate(self)

    @classmethod
    def uniform(cls, num_qubits: int, num_slices: int, num_decoders: int,
                tgates: Mapping[int, object] | None = None, name: str = "workload") -> "Workload":
        """Build a workload whose decoders are available in every slice."""
        avail = np.ones((num_decoders, num_slices), dtype=bool)
        tg = {k: frozenset(v) for k, v in (tgates or {}).items()}
        return cls(name, num_qubits, num_slices, tg, avail)

    @property
    def num_decoders(self) -> int:
        return self.availability.shape[0]

    @property
    def capacity(self) -> np.ndarray:
        """Number of available decoders per slice, 0-based over slices."""
        return self.availability.sum(axis=0).astype(int)

    def slice_capacity(self, t: int) -> int:
        return int(self.availability[:, t - 1].sum())

    def available_decoders(self, t: int) -> list[int]:
        return [int(d) for d in np.flatnonzero(self.availability[:, t - 1])]

    def pinned(self, t: int) -> frozenset[int]:
        """Qubits that must be decoded in slice ``t`` (they run a T gate at ``t + 1``)."""
        return self.tgates.get(t + 1, frozenset())

    @property
    def total_tgates(self) -> int:
        return sum(len(v) for v in self.tgates.values())

    @property
    def is_uniform(self) -> bool:
        return bool(self.availability.all())

    def __eq__(self, other):
        if not isinstance(other, Workload):
            return NotImplemented
        return (self.name == other.name
                and self.num_qubits == other.num_qubits
                and self.num_slices == other.num_slices
                and dict(self.tgates) == dict(other.tgates)
                and self.availability.shape == other.availability.shape
                and bool((self.availability == other.availability).all()))

    __hash__ = None


def _validate(w: Workload) -> None:
    if not isinstance(w.num_qubits, int) or w.num_qubits < 1:
        raise WorkloadSemanticError("must be a positive integer", "num_qubits")
    if not isinstance(w.num_slices, int) or w.num_slices < 1:
        raise WorkloadSemanticError("must be a positive integer", "num_slices")
    if w.availability.ndim != 2 or w.availability.shape[0] < 1:
        raise WorkloadSemanticError("need at least one decoder", "num_decoders")
    if w.availability.shape[1] != w.num_slices:
        raise WorkloadSemanticError(
            f"availability covers {w.availability.shape[1]} slices, expected {w.num_slices}",
            "availability")
    for tau, qubits in w.tgates.items():
        loc = f"tgates[slice={tau}]"
        if not 2 <= tau <= w.num_slices:
            raise WorkloadSemanticError(
                f"slice {tau} outside 2..{w.num_slices} (no earlier slice to decode in)", loc)
        bad = sorted(q for q in qubits if not 0 <= q < w.num_qubits)
        if bad:
            raise WorkloadSemanticError(f"qubit ids {bad} outside 0..{w.num_qubits - 1}", loc)
        cap = w.slice_capacity(tau - 1)
        if len(qubits) > cap:
            raise WorkloadInfeasibleError(
                f"{len(qubits)} T-gate qubits but only {cap} decoders available in slice {tau - 1}",
                loc)


def _expect_int(value, location: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise WorkloadSyntaxError(f"expected integer, got {value!r}", location)
    return value


def _expect_int_list(value, location: str) -> list[int]:
    if not isinstance(value, list):
        raise WorkloadSyntaxError(f"expected list of integers, got {value!r}", location)
    return [_expect_int(v, f"{location}[{i}]") for i, v in enumerate(value)]


def parse_workload(text: str) -> Workload:
    """Parse and validate a workload document.

    Raises:
        WorkloadSyntaxError: unreadable TOML, missing keys, wrong types.
        WorkloadSemanticError: out-of-range ids or slices, duplicate records.
        WorkloadInfeasibleError: a T-gate set exceeds the previous slice's capacity.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise WorkloadSyntaxError(str(exc), "document") from exc

    for key in ("num_qubits", "num_slices", "num_decoders"):
        if key not in doc:
            raise WorkloadSyntaxError("missing required key", key)
    name = doc.get("name", "workload")
    if not isinstance(name, str):
        raise WorkloadSyntaxError(f"expected string, got {name!r}", "name")
    n = _expect_int(doc["num_qubits"], "num_qubits")
    length = _expect_int(doc["num_slices"], "num_slices")
    m = _expect_int(doc["num_decoders"], "num_decoders")
    if n < 1:
        raise WorkloadSemanticError("must be >= 1", "num_qubits")
    if length < 1:
        raise WorkloadSemanticError("must be >= 1", "num_slices")
    if m < 1:
        raise WorkloadSemanticError("must be >= 1", "num_decoders")

    records = doc.get("tgates", [])
    if not isinstance(records, list):
        raise WorkloadSyntaxError("expected array of tables", "tgates")
    tgates: dict[int, frozenset[int]] = {}
    for i, rec in enumerate(records):
        loc = f"tgates[{i}]"
        if not isinstance(rec, dict) or "slice" not in rec or "qubits" not in rec:
            raise WorkloadSyntaxError("record needs 'slice' and 'qubits'", loc)
        tau = _expect_int(rec["slice"], f"{loc}.slice")
        qubits = _expect_int_list(rec["qubits"], f"{loc}.qubits")
        if tau in tgates:
            raise WorkloadSemanticError(f"slice {tau} listed twice", loc)
        if not 2 <= tau <= length:
            raise WorkloadSemanticError(
                f"slice {tau} outside 2..{length} (no earlier slice to decode in)", f"{loc}.slice")
        bad = sorted(q for q in qubits if not 0 <= q < n)
        if bad:
            raise WorkloadSemanticError(f"qubit ids {bad} outside 0..{n - 1}", f"{loc}.qubits")
        tgates[tau] = frozenset(qubits)

    avail = np.ones((m, length), dtype=bool)
    records = doc.get("availability", [])
    if not isinstance(records, list):
        raise WorkloadSyntaxError("expected array of tables", "availability")
    seen = set()
    for i, rec in enumerate(records):
        loc = f"availability[{i}]"
        if not isinstance(rec, dict) or "decoder" not in rec:
            raise WorkloadSyntaxError("record needs 'decoder'", loc)
        d = _expect_int(rec["decoder"], f"{loc}.decoder")
        slices = _expect_int_list(rec.get("unavailable_slices", []), f"{loc}.unavailable_slices")
        if not 0 <= d < m:
            raise WorkloadSemanticError(f"decoder {d} outside 0..{m - 1}", f"{loc}.decoder")
        if d in seen:
            raise WorkloadSemanticError(f"decoder {d} listed twice", loc)
        seen.add(d)
        for t in slices:
            if not 1 <= t <= length:
                raise WorkloadSemanticError(
                    f"slice {t} outside 1..{length}", f"{loc}.unavailable_slices")
            avail[d, t - 1] = False

    try:
        return Workload(name, n, length, tgates, avail)
    except WorkloadInfeasibleError as exc:
        # re-anchor the location onto the record index in the document
        tau = int(exc.location.split("=")[1].rstrip("]"))
        idx = [r.get("slice") for r in doc.get("tgates", [])].index(tau)
        raise WorkloadInfeasibleError(str(exc).split(": ", 1)[1], f"tgates[{idx}]") from None


def serialize_workload(w: Workload) -> str:
    """Render ``w`` in the TOML workload format (stable key and record order)."""
    doc: dict = {
        "name": w.name,
        "num_qubits": w.num_qubits,
        "num_slices": w.num_slices,
        "num_decoders": w.num_decoders,
        "tgates": [{"slice": tau, "qubits": sorted(qs)} for tau, qs in w.tgates.items()],
    }
    unavailable = []
    for d in range(w.num_decoders):
        off = [int(j) + 1 for j in np.flatnonzero(~w.availability[d])]
        if off:
            unavailable.append({"decoder": d, "unavailable_slices": off})
    if unavailable:
        doc["availability"] = unavailable
    return tomli_w.dumps(doc)


def load_workload(path) -> Workload:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_workload(fh.read())


def save_workload(w: Workload, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_workload(w))


@dataclass(frozen=True)
class WorkloadGenSpec:
    """Parameters of the random workload generator.

    Each (qubit, slice) pair for slices 2..L independently carries a T gate
    with probability ``tgate_density``. A slice whose draw exceeds the
    decoder count is redrawn.
    """

    num_qubits: int
    num_slices: int
    num_decoders: int
    tgate_density: float = 0.05
    rng_seed: int = 0
    name: str | None = None
    max_resamples: int = 1000

    def __post_init__(self):
        if self.num_qubits < 1 or self.num_slices < 1 or self.num_decoders < 1:
            raise ValueError("num_qubits, num_slices and num_decoders must be >= 1")
        if not 0.0 <= self.tgate_density <= 1.0:
            raise ValueError(f"tgate_density must lie in [0, 1], got {self.tgate_density}")


def generate_workload(spec: WorkloadGenSpec) -> Workload:
    """Draw a random workload; deterministic in ``spec.rng_seed``."""
    n, length, m = spec.num_qubits, spec.num_slices, spec.num_decoders
    if spec.tgate_density > m / n:
        warnings.warn(
            f"tgate_density {spec.tgate_density} exceeds decoders/qubits = {m}/{n}; "
            "many slices will need redrawing", RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(spec.rng_seed)
    tgates = {}
    for tau in range(2, length + 1):
        for _ in range(spec.max_resamples):
            row = np.flatnonzero(rng.random(n) < spec.tgate_density)
            if len(row) <= m:
                break
        else:
            raise WorkloadInfeasibleError(
                f"could not draw at most {m} T-gate qubits in {spec.max_resamples} tries",
                f"tgates[slice={tau}]")
        if len(row):
            tgates[tau] = frozenset(int(q) for q in row)
    name = spec.name or f"rand-n{n}-l{length}-m{m}-s{spec.rng_seed}"
    return Workload.uniform(n, length, m, tgates, name=name)


def generate_clustered_workload(num_qubits: int, num_slices: int, num_decoders: int,
                                rng_seed: int = 0, *, burst_len: int = 3,
                                burst_gap: int = 4, burst_fill: float = 1.0,
                                name: str | None = None) -> Workload:
    """Draw a workload whose T gates arrive in bursts.

    Each burst picks a random group of ``ceil(burst_fill * M)`` qubits and puts
    a T gate on every one of them for ``burst_len`` consecutive slices; bursts
    are separated by ``burst_gap`` quiet slices (first burst offset is random).
    While a full burst runs, every decoder is pinned to the burst group and
    all other qubits go unserved.
    """
    if burst_len < 1 or burst_gap < 0:
        raise ValueError("burst_len must be >= 1 and burst_gap >= 0")
    if not 0.0 < burst_fill <= 1.0:
        raise ValueError("burst_fill must lie in (0, 1]")
    n, length, m = num_qubits, num_slices, num_decoders
    rng = np.random.default_rng(rng_seed)
    size = min(n, m, max(1, math.ceil(burst_fill * m)))
    tgates: dict[int, frozenset[int]] = {}
    tau = 2 + int(rng.integers(0, burst_gap + 1))
    while tau <= length:
        group = frozenset(int(q) for q in rng.choice(n, size=size, replace=False))
        for k in range(burst_len):
            if tau + k <= length:
                tgates[tau + k] = group
        tau += burst_len + burst_gap
    name = name or f"burst-n{n}-l{length}-m{m}-s{rng_seed}"
    return Workload.uniform(n, length, m, tgates, name=name)


def generate_phase_workload(num_qubits: int, num_slices: int, num_decoders: int,
                            rng_seed: int = 0, *, period: int | None = None,
                            tgate_prob: float = 0.8, shuffle: bool = False,
                            name: str | None = None) -> Workload:
    """Draw a workload whose T gates follow a fixed per-group cadence.

    Qubits are split into groups of ``M`` (in reversed id order, or a random
    order if ``shuffle``); group ``k`` owns phase ``k % period`` and each of
    its qubits runs a T gate at slice ``tau`` with probability ``tgate_prob``
    whenever ``(tau - 2) % period`` equals that phase. ``period`` defaults to
    ``ceil(N / M)``. At most ``M`` qubits share a phase only if ``period``
    covers every group, which the default guarantees.
    """
    if not 0.0 <= tgate_prob <= 1.0:
        raise ValueError("tgate_prob must lie in [0, 1]")
    n, length, m = num_qubits, num_slices, num_decoders
    period = period if period is not None else -(-n // m)
    if period < 1:
        raise ValueError("period must be >= 1")
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(n) if shuffle else np.arange(n)[::-1]
    phase = np.empty(n, dtype=np.int64)
    phase[order] = (np.arange(n) // m) % period
    tgates: dict[int, frozenset[int]] = {}
    for tau in range(2, length + 1):
        hit = (phase == (tau - 2) % period) & (rng.random(n) < tgate_prob)
        row = np.flatnonzero(hit)[:m]
        if len(row):
            tgates[tau] = frozenset(int(q) for q in row)
    name = name or f"phase-n{n}-l{length}-m{m}-s{rng_seed}"
    return Workload.uniform(n, length, m, tgates, name=name)
