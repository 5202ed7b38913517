import numpy as np

from codasched import AllocationMap, Workload, derive_backlog
from codasched.policy import BacklogTrace
from codasched.verify import assert_valid, check_schedule

import pytest


def families(found):
    return sorted({v.family for v in found})


def test_clean_schedule_has_no_violations():
    w = Workload.uniform(2, 3, 1, {3: {1}})
    a = AllocationMap.from_decode_sets(w, [[0], [1], [0]])
    assert check_schedule(w, a, gap=1, trace=derive_backlog(w, a)) == []
    assert_valid(w, a, gap=1)


def test_each_family_is_detected():
    avail = np.array([[True, True, False], [True, True, True]])
    w = Workload("w", 3, 3, {3: frozenset({2})}, avail)
    a = AllocationMap.from_pairs([
        [(0, 0), (0, 1)],   # decoder 0 twice
        [(0, 1), (1, 1)],   # qubit 1 twice; qubit 2 not decoded before its T gate
        [(0, 0)],           # decoder 0 unavailable in slice 3
    ])
    found = check_schedule(w, a)
    assert families(found) == ["availability", "capacity", "precedence", "uniqueness"]


def test_bound_and_recurrence():
    w = Workload.uniform(2, 4, 1)
    a = AllocationMap.from_decode_sets(w, [[0], [0], [0], [0]])
    found = check_schedule(w, a, gap=2)
    assert [(v.family, v.qubit, v.slice) for v in found] == [("bound", 1, 4)]
    trace = derive_backlog(w, a)
    U = np.array(trace.U)
    U[1, 2] = 0
    bad = check_schedule(w, a, trace=BacklogTrace(U, trace.y))
    assert [(v.family, v.qubit, v.slice) for v in bad] == [("recurrence", 1, 3)]


def test_assert_valid_raises_with_summary():
    w = Workload.uniform(1, 2, 1, {2: {0}})
    with pytest.raises(AssertionError, match="precedence"):
        assert_valid(w, AllocationMap.from_pairs([[], []]))
