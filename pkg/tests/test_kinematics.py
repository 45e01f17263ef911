import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from twentyq.kinematics import (SlotSchedule, TargetState, locate, locate_piecewise, quantize_cell,
                                quantized_trajectory, trajectory)


def reference_locate(s, v, t):
    """Straight from the reflected-motion formula, one scalar at a time."""
    r = math.fmod(s + t * v, 2.0)
    if r < 0:
        r += 2.0
    return r if r <= 1 else 2 - r


def reference_cell(x, n, M):
    y = x * n * M
    if abs(y - round(y)) < 1e-12:
        y = round(y)
    return max(1, math.ceil(y))


@pytest.mark.parametrize("s,v,t,want", [
    (0.3, 0.1, 3, 0.6),
    (0.3, 0.1, 8, 0.9),
    (0.5, 0.0, 100, 0.5),
    (0.9, 0.3, 4, 0.1),
])
def test_locate_examples(s, v, t, want):
    assert locate(s, v, t) == pytest.approx(want, abs=1e-12)


def test_locate_closure_many():
    rng = np.random.default_rng(1)
    s = rng.random(10**6)
    v = rng.uniform(-0.5, 0.5, 10**6)
    t = rng.integers(0, 10**4, 10**6)
    out = locate(s, v, t)
    assert out.min() >= 0.0 and out.max() <= 1.0


@given(st.floats(0, 1), st.integers(1, 20), st.integers(0, 200), st.integers(1, 5))
def test_locate_period(s, k, t, shift):
    v = 2.0 / k  # period in t is k
    assert locate(s, v, t + shift * k) == pytest.approx(locate(s, v, t), abs=1e-9)


@given(st.floats(0, 1), st.floats(-0.5, 0.5), st.integers(0, 500), st.integers(0, 500))
def test_locate_semigroup_in_unreflected_phase(s, v, t1, t2):
    # restarting from locate(s, v, t1) with the same v is only the same motion
    # when the target is not on a reflected leg at t1
    assume(1e-9 < np.mod(s + t1 * v, 2.0) < 1 - 1e-9)
    assert locate(s, v, t1 + t2) == pytest.approx(locate(locate(s, v, t1), v, t2), abs=1e-9)


def test_locate_restart_on_reflected_leg_differs():
    # after bouncing off x = 1 the target moves with -v; restarting with +v does not
    assert locate(0.9, 0.2, 2) == pytest.approx(0.7)
    assert locate(locate(0.9, 0.2, 1), 0.2, 1) == pytest.approx(0.9)
    assert locate(locate(0.9, 0.2, 1), -0.2, 1) == pytest.approx(0.7)


@given(st.floats(-3, 3), st.floats(-0.5, 0.5), st.integers(0, 1000))
def test_locate_matches_reference(s, v, t):
    assert locate(s, v, t) == pytest.approx(reference_locate(s, v, t), abs=1e-9)


def test_piecewise_single_slot_is_locate():
    sched = SlotSchedule((7,), 2, 0.3)
    st_ = TargetState([0.2, 0.9], [[0.3, -0.25]])
    for t in range(8):
        np.testing.assert_allclose(locate_piecewise(st_, sched, t), locate([0.2, 0.9], [0.3, -0.25], t))


def test_piecewise_zero_velocity():
    sched = SlotSchedule((3, 6, 10), 1, 0.2)
    st_ = TargetState([0.42], np.zeros((3, 1)))
    assert all(locate_piecewise(st_, sched, t)[0] == 0.42 for t in range(11))


def test_piecewise_hand_composition():
    sched = SlotSchedule((5, 10), 1, 0.1)
    st_ = TargetState([0.3], [[0.1], [-0.1]])
    assert locate_piecewise(st_, sched, 10)[0] == pytest.approx(0.3, abs=1e-12)


def test_piecewise_out_of_range():
    with pytest.raises(ValueError):
        locate_piecewise(TargetState([0.3], [[0.0]]), SlotSchedule((5,)), 6)


def test_trajectory_matches_piecewise():
    sched = SlotSchedule((4, 9, 13), 2, 0.2)
    rng = np.random.default_rng(3)
    st_ = TargetState(rng.random(2), rng.uniform(-0.2, 0.2, (3, 2)))
    tr = trajectory(st_, sched)
    for t in range(14):
        np.testing.assert_allclose(tr[t], locate_piecewise(st_, sched, t), atol=1e-12)


@pytest.mark.parametrize("x,want", [(0.3, 6), (1.0, 20), (0.0, 1)])
def test_quantize_examples(x, want):
    assert quantize_cell(x, 10, 2) == want


@given(st.lists(st.floats(0, 1), min_size=2, max_size=50), st.integers(1, 12), st.integers(1, 6))
def test_quantize_monotone(xs, n, M):
    xs = np.sort(xs)
    c = quantize_cell(xs, n, M)
    assert np.all(np.diff(c) >= 0) and c.min() >= 1 and c.max() <= n * M


@pytest.mark.parametrize("n,M", [(1, 1), (3, 2), (10, 2), (7, 5)])
def test_quantize_surjective(n, M):
    # cell k contains ((k-1)/(nM), k/(nM)]; its upper edge maps to k
    edges = np.arange(1, n * M + 1) / (n * M)
    assert set(quantize_cell(edges, n, M).tolist()) == set(range(1, n * M + 1))


def test_quantized_trajectory_constant_when_stationary():
    sched = SlotSchedule((4, 7), 1, 0.0)
    cells = quantized_trajectory(TargetState([0.37], np.zeros((2, 1))), sched, 3)
    assert len(set(cells[0][:, 0])) == 1 and len(set(cells[1][:, 0])) == 1


def test_quantized_trajectory_hand_value():
    cells = quantized_trajectory(TargetState([0.3], [[0.1]]), SlotSchedule((2,), 1, 0.1), 1)
    assert cells[0][:, 0].tolist() == [1, 1]


def test_quantized_trajectory_oracle():
    rng = np.random.default_rng(7)
    sched = SlotSchedule((3, 8, 12), 1, 0.3)
    M = 3
    for _ in range(10**4 // 10):
        s = rng.random()
        vel = rng.uniform(-0.3, 0.3, 3)
        got = quantized_trajectory(TargetState([s], vel[:, None]), sched, M)
        pos, start = s, 0
        for j, end in enumerate(sched.ending_times):
            N = end - start
            want = [reference_cell(reference_locate(pos, vel[j], k), N, M) for k in range(1, N + 1)]
            assert got[j][:, 0].tolist() == want
            pos, start = reference_locate(pos, vel[j], N), end


@pytest.mark.parametrize("bad", [dict(ending_times=()), dict(ending_times=(3, 3)),
                                 dict(ending_times=(2,), dimension=0), dict(ending_times=(2,), max_speed=-1)])
def test_schedule_validation(bad):
    with pytest.raises(ValueError):
        SlotSchedule(**bad)


def test_equal_split():
    sched = SlotSchedule.equal_split(300, 2, 1, 0.01)
    assert sched.ending_times == (200, 300) and sched.slot_lengths == (200, 100)


def test_state_speed_check():
    with pytest.raises(ValueError):
        TargetState([0.5], [[0.2]]).check(SlotSchedule((3,), 1, 0.1))
    with pytest.raises(ValueError):
        TargetState([1.5])
