import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings

from codasched import OracleTooLarge, Workload, brute_force, theoretical_search_space
from codasched.oracle import enumeration_size, iter_feasible_schedules
from codasched.verify import check_schedule

from conftest import naive_counts, random_tiny_workload, tiny_workloads


def test_one_qubit_two_slices():
    res = brute_force(Workload.uniform(1, 2, 1))
    assert res.min_feasible_G == 1
    assert res.feasible_count_by_G == {1: 4, 2: 4}


def test_three_qubits_one_decoder_counts():
    w = Workload.uniform(3, 4, 1)
    res = brute_force(w)
    assert res.min_feasible_G == 2
    assert res.feasible_count_by_G == {1: 0, 2: 24, 3: 256, 4: 256}
    assert res.feasible_count_by_G == naive_counts(w, 4)
    assert check_schedule(w, res.witness, gap=2) == []


def test_enumeration_size_matches_search_space():
    w = Workload.uniform(4, 3, 2)
    assert enumeration_size(w) == theoretical_search_space(4, 2, 3) == 216


def test_cap_is_enforced_before_work():
    w = Workload.uniform(10, 10, 5)
    with pytest.raises(OracleTooLarge) as info:
        brute_force(w)
    assert info.value.size == 252 ** 10


def test_result_text_is_json():
    doc = json.loads(brute_force(Workload.uniform(2, 3, 1)).to_text())
    assert doc["min_feasible_G"] == 1
    assert set(doc["feasible_count_by_G"]) == {"1", "2", "3"}


@settings(max_examples=60, deadline=None)
@given(tiny_workloads(max_n=3, max_m=2, max_l=4))
def test_layered_counts_match_leaf_walk(w):
    g_max = max(w.num_slices, 1)
    assert brute_force(w, g_max).feasible_count_by_G == naive_counts(w, g_max)


@settings(max_examples=60, deadline=None)
@given(tiny_workloads(max_n=3, max_m=2, max_l=4))
def test_every_enumerated_schedule_is_valid(w):
    counts = brute_force(w).feasible_count_by_G
    for g in counts:
        seen = list(iter_feasible_schedules(w, g))
        assert len(seen) == counts[g]
        for a in seen:
            assert check_schedule(w, a, gap=g) == []


def test_heterogeneous_availability():
    avail = np.array([[True, False, True], [True, True, False]])
    w = Workload("w", 3, 3, {2: frozenset({0})}, avail)
    res = brute_force(w)
    assert res.feasible_count_by_G == naive_counts(w, 3)
    assert check_schedule(w, res.witness, gap=res.min_feasible_G) == []
