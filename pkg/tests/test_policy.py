import numpy as np
import pytest
from hypothesis import given, settings

from codasched import AllocationError, AllocationMap, Workload, derive_backlog, schedule_mls, schedule_rr
from codasched.verify import check_schedule

from conftest import tiny_workloads


def test_full_service_keeps_backlog_zero():
    w = Workload.uniform(3, 5, 3)
    trace = derive_backlog(w, AllocationMap.from_decode_sets(w, [[0, 1, 2]] * 5))
    assert trace.longest == 0
    assert not trace.U.any()


def test_never_decoded_unrolls():
    w = Workload.uniform(1, 5, 1)
    trace = derive_backlog(w, AllocationMap.from_decode_sets(w, [[]] * 5))
    assert trace.U[0].tolist() == [0, 1, 2, 3, 4]


def test_single_step_of_recurrence():
    w = Workload.uniform(1, 5, 1)
    idle = derive_backlog(w, AllocationMap.from_decode_sets(w, [[], [], [], [], []]))
    served = derive_backlog(w, AllocationMap.from_decode_sets(w, [[], [], [], [0], []]))
    assert idle.at(0, 4) == 3 and idle.at(0, 5) == 4
    assert served.at(0, 4) == 3 and served.at(0, 5) == 0


@pytest.mark.parametrize("pairs, field", [
    ([[(0, 0), (0, 1)]], "decoder"),
    ([[(0, 0), (1, 0)]], "qubit"),
    ([[(5, 0)]], "decoder"),
    ([[(0, 7)]], "qubit"),
])
def test_derive_backlog_rejects_bad_allocations(pairs, field):
    w = Workload.uniform(2, 1, 2)
    with pytest.raises(AllocationError) as info:
        derive_backlog(w, AllocationMap.from_pairs(pairs))
    assert getattr(info.value, field) is not None
    assert info.value.slice == 1


def test_unavailable_decoder_rejected():
    avail = np.array([[True, False]])
    w = Workload("w", 1, 2, {}, avail)
    with pytest.raises(AllocationError, match="unavailable"):
        derive_backlog(w, AllocationMap.from_pairs([[], [(0, 0)]]))


def test_csv_round_trip():
    w = Workload.uniform(4, 3, 2, {3: {1, 2}})
    a = schedule_mls(w)
    text = a.to_csv()
    assert text.splitlines()[0] == "slice,decoder,qubit"
    assert AllocationMap.from_csv(text, 3) == a


def test_rr_abundance_and_alternation():
    w = Workload.uniform(3, 6, 3)
    assert derive_backlog(w, schedule_rr(w)).longest == 0
    w = Workload.uniform(2, 4, 1)
    assert derive_backlog(w, schedule_rr(w)).longest == 1
    w = Workload.uniform(4, 12, 1)
    a = schedule_rr(w)
    assert [sorted(a.decoded(t)) for t in range(1, 6)] == [[0], [1], [2], [3], [0]]
    assert derive_backlog(w, a).longest == 3


def test_rr_serves_pins_without_moving_cursor():
    w = Workload.uniform(3, 4, 1, {3: {2}})
    a = schedule_rr(w)
    assert [sorted(a.decoded(t)) for t in range(1, 5)] == [[0], [2], [1], [2]]


def test_mls_equals_rr_when_decoders_suffice():
    w = Workload.uniform(4, 6, 4, {2: {0}, 5: {1, 3}})
    assert (schedule_mls(w).decode_matrix(4) == schedule_rr(w).decode_matrix(4)).all()
    assert derive_backlog(w, schedule_mls(w)).longest == 0


def test_mls_beats_rr_on_skewed_tgates():
    w = Workload.uniform(6, 10, 2, {2: {2, 3}, 3: {5}, 4: {1}, 5: {2, 3}, 7: {2}, 10: {0, 5}})
    assert derive_backlog(w, schedule_rr(w)).longest == 4
    assert derive_backlog(w, schedule_mls(w)).longest == 3


def test_mls_breaks_ties_by_lowest_id():
    w = Workload.uniform(3, 3, 1)
    a = schedule_mls(w)
    assert [sorted(a.decoded(t)) for t in (1, 2, 3)] == [[0], [1], [2]]


@settings(max_examples=150, deadline=None)
@given(tiny_workloads(max_n=6, max_m=3, max_l=8))
def test_baselines_emit_valid_schedules(w):
    for policy in (schedule_rr, schedule_mls):
        a = policy(w)
        trace = derive_backlog(w, a)
        assert check_schedule(w, a, trace=trace) == []
        assert trace.longest <= max(w.num_slices - 1, 0)
        # both baselines use every decoder they can
        for t in range(1, w.num_slices + 1):
            assert len(a.decoded(t)) == min(w.slice_capacity(t), w.num_qubits)


@settings(max_examples=100, deadline=None)
@given(tiny_workloads(max_n=6, max_m=3, max_l=8))
def test_backlog_matches_last_decode(w):
    a = schedule_rr(w)
    trace = derive_backlog(w, a)
    for q in range(w.num_qubits):
        last = 0
        for t in range(1, w.num_slices + 1):
            assert trace.at(q, t) == t - 1 - last
            if q in a.decoded(t):
                last = t
