import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import trajectory_set_oracle
from twentyq.kinematics import SlotSchedule, TargetState, quantized_trajectory, slot_cells
from twentyq.trajectories import (EnumerationCapExceeded, confusable_sets, enumerate_first_slot,
                                  enumerate_later_slot, first_slot_bound, in_neighborhood,
                                  in_velocity_neighborhood, later_slot_bound, later_slot_start,
                                  verify_intersection_bound)


def first(n, M, v, d=1, rf=4):
    return enumerate_first_slot(SlotSchedule((n,), d, v), M, rf)


def test_stationary_set_is_constant_sequences():
    ts = first(5, 3, 0.0)
    assert len(ts) == 15
    assert ts.as_set() == {(k,) * 5 for k in range(1, 16)}


def test_small_config_matches_oracle_and_bound():
    ts = first(2, 1, 0.25)
    assert ts.as_set() == trajectory_set_oracle(2, 1, 0.25)
    assert len(ts) <= first_slot_bound(2, 1, 0.25, 1) == pytest.approx(112)


@pytest.mark.parametrize("n,M,v", [(3, 2, 0.1), (2, 3, 0.25), (4, 1, 0.1)])
def test_dimension_product(n, M, v):
    one, two = first(n, M, v), first(n, M, v, d=2)
    assert len(two) == len(one) ** 2
    assert two.entries.shape[1:] == (n, 2)


@pytest.mark.parametrize("n,M,v", [(n, M, v) for n in (2, 3, 4) for M in (1, 3) for v in (0.1, 0.3)])
def test_grid_refinement_fixed_point(n, M, v):
    grid = [enumerate_first_slot(SlotSchedule((n,), 1, v), M, rf, method="grid").as_set() for rf in (4, 8)]
    assert grid[0] == grid[1] == first(n, M, v).as_set()


@pytest.mark.parametrize("n,M,v", [(20, 2, 0.01), (16, 8, 1 / 1024), (10, 4, 0.1)])
def test_exact_contains_grid(n, M, v):
    sched = SlotSchedule((n,), 1, v)
    exact = enumerate_first_slot(sched, M).as_set()
    grid = enumerate_first_slot(sched, M, method="grid").as_set()
    assert grid <= exact


def test_grid_misses_thin_faces():
    # every sequence the grid misses is hit by random interior (s, v) points,
    # so the missing faces have positive area
    n, M, v = 20, 2, 0.01
    sched = SlotSchedule((n,), 1, v)
    missing = enumerate_first_slot(sched, M).as_set() - enumerate_first_slot(sched, M, method="grid").as_set()
    assert len(missing) > 0
    rng = np.random.default_rng(0)
    s, vel = rng.random(2 * 10**6), rng.uniform(-v, v, 2 * 10**6)
    hit = {tuple(r) for r in slot_cells(s, vel, n, M).tolist()}
    assert len(missing & hit) > 0.95 * len(missing)


def test_unknown_method():
    with pytest.raises(ValueError):
        enumerate_first_slot(SlotSchedule((3,), 1, 0.1), 2, method="magic")


@pytest.mark.parametrize("n,M,v", [(3, 2, 0.25), (4, 3, 0.1), (6, 2, 0.2)])
def test_witness_soundness(n, M, v):
    ts = first(n, M, v)
    cells = slot_cells(ts.witness_s[:, 0], ts.witness_v[:, 0], n, M)
    assert np.array_equal(cells, ts.entries[:, :, 0])


def test_witness_soundness_2d():
    ts = first(3, 2, 0.2, d=2)
    sched = SlotSchedule((3,), 2, 0.2)
    for i in range(0, len(ts), 97):
        st_ = TargetState(ts.witness_s[i], ts.witness_v[i][None])
        assert np.array_equal(quantized_trajectory(st_, sched, 2)[0], ts.entries[i])


def test_entries_sorted_and_unique():
    ts = first(4, 2, 0.25)
    flat = [tuple(r) for r in ts.flat().tolist()]
    assert flat == sorted(flat) and len(set(flat)) == len(flat)


def test_later_slot_stationary_singleton():
    sched = SlotSchedule((3, 7), 1, 0.0)
    ts = enumerate_later_slot([0.4], sched, 1, 2)
    assert len(ts) == 1


def test_later_slot_size_bound_random_prefixes():
    rng = np.random.default_rng(8)
    sched = SlotSchedule((4, 9), 1, 0.2)
    for _ in range(20):
        s = rng.random(1)
        v1 = rng.uniform(-0.2, 0.2, (1, 1))
        start = later_slot_start(s, v1, sched, 1)
        ts = enumerate_later_slot(start, sched, 1, 2)
        assert len(ts) <= later_slot_bound(5, 2, 0.2, 1)


@pytest.mark.parametrize("N,M,v", [(2, 1, 0.25), (3, 2, 0.1), (4, 3, 0.25)])
def test_later_slot_matches_oracle(N, M, v):
    sched = SlotSchedule((5, 5 + N), 1, v)
    start = 0.37
    ts = enumerate_later_slot([start], sched, 1, M)
    assert ts.as_set() == trajectory_set_oracle(N, M, v, start=start)


def test_later_slot_index_check():
    with pytest.raises(ValueError):
        enumerate_later_slot([0.5], SlotSchedule((3, 6)), 0, 2)


def test_later_slot_start_composition():
    sched = SlotSchedule((5, 10, 12), 1, 0.1)
    pos = later_slot_start([0.3], [[0.1], [-0.1]], sched, 2)
    assert pos[0] == pytest.approx(0.3)


def test_cap():
    with pytest.raises(EnumerationCapExceeded):
        enumerate_first_slot(SlotSchedule((40,), 1, 0.5), 8)


@pytest.mark.parametrize("n,M,v", [(n, M, v) for n in (2, 3, 4) for M in (1, 2, 3) for v in (0, 0.1, 0.25)])
def test_size_bounds(n, M, v):
    assert len(first(n, M, v)) <= first_slot_bound(n, M, v, 1)


def test_neighborhoods():
    assert in_velocity_neighborhood([0.1], [0.1], 4, 2)
    assert in_velocity_neighborhood([0.0], [1 / 8], 4, 2)  # closed at the boundary
    assert not in_velocity_neighborhood([0.0], [1 / 8 + 1e-9], 4, 2)
    assert in_neighborhood([0.5], [0.0], [0.0], [0.0], 4, 2)
    assert not in_neighborhood([0.5], [0.0], [0.0 - 1e-9], [0.0], 4, 2)


@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(1, 10), st.integers(1, 5))
def test_velocity_neighborhood_matches_inequality(v, vb, n, M):
    assert in_velocity_neighborhood([v], [vb], n, M) == (abs(v - vb) <= 1 / (n * M) + 1e-15)


def test_confusable_partition_covers_outside():
    ts = first(4, 2, 0.25)
    s, v = ts.witness_s[10], ts.witness_v[10]
    parts = confusable_sets(s, v, ts, 2)
    idx = np.concatenate(list(parts.values()))
    assert len(idx) == len(set(idx.tolist())) <= len(ts)
    assert all(not in_neighborhood(s, v, ts.witness_s[i], ts.witness_v[i], 4, 2) for i in idx)


def test_stationary_confusables_never_coincide():
    ts = first(5, 2, 0.0)
    for k in range(len(ts)):
        parts = confusable_sets(ts.witness_s[k], ts.witness_v[k], ts, 2)
        assert set(parts) <= {0}


def test_antipodal_parallel_trajectories_never_meet():
    n, M = 6, 2
    a = slot_cells(0.05, 0.05, n, M)
    b = slot_cells(0.55, 0.05, n, M)
    assert not np.any(a == b)


def test_crossing_pairs_without_reflection():
    # exhaustive scan at v_+ = 0.1, n = 10: pairs whose straight paths never
    # reach a wall share at most ceil(2 n v_+) = 2 cells
    n, M, v = 10, 1, 0.1
    ts = first(n, M, v)
    truth_s, truth_v = np.array([0.3]), np.array([0.05])
    cells = slot_cells(0.3, 0.05, n, M)
    ends = ts.witness_s[:, 0] + n * ts.witness_v[:, 0]
    straight = (ends >= 0) & (ends <= 1)
    parts = confusable_sets(truth_s, truth_v, ts, M)
    crossing = [i for idx in parts.values() for i in idx if straight[i]]
    assert crossing
    assert max(int(np.sum(ts.entries[i, :, 0] == cells)) for i in crossing) <= 2


def test_crossing_pair_with_reflection_exceeds_two():
    # the truth bounces off x = 1 at t = 5 and revisits its cells on the way back
    n, M = 10, 1
    truth = slot_cells(0.5, 0.1, n, M)
    other = slot_cells(0.5925, -0.01, n, M)
    assert truth.tolist() == [6, 7, 8, 9, 10, 9, 8, 7, 6, 5]
    assert not in_velocity_neighborhood([0.1], [-0.01], n, M)
    assert int(np.sum(truth == other)) == 3 > math.ceil(2 * n * 0.1)


def test_intersection_bound_stationary_passes():
    ts = first(4, 3, 0.0)
    rep = verify_intersection_bound(ts, SlotSchedule((4,), 1, 0.0), 3)
    assert rep.passed and rep.limit == 0


def test_intersection_bound_reflection_counterexample():
    # a reflected trajectory can share more cells with the truth than ceil(2 n v_+)
    n, M, v = 4, 2, 0.1
    truth = slot_cells(0.03125, -0.1, n, M)
    other = slot_cells(0.1016, 0.0703, n, M)
    assert truth.tolist() == [1, 2, 3, 3] and other.tolist() == [2, 2, 3, 4]
    assert not in_neighborhood([0.03125], [-0.1], [0.1016], [0.0703], n, M)
    assert int(np.sum(truth == other)) == 2 > math.ceil(2 * n * v)
