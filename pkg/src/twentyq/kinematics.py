"""Reflected motion on the unit cube and cell quantization.

A target starts at ``s`` and moves with velocity ``v``; each coordinate
bounces off the faces of ``[0, 1]``, so its position is a triangle wave of
the unfolded coordinate ``s + t v`` with period 2.  Velocities change at the
known slot ending times ``n_1 < ... < n_B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SNAP_TOL = 1e-12


@dataclass(frozen=True)
class SlotSchedule:
    ending_times: tuple[int, ...]
    dimension: int = 1
    max_speed: float = 0.0

    def __post_init__(self):
        times = tuple(int(n) for n in self.ending_times)
        object.__setattr__(self, "ending_times", times)
        if not times:
            raise ValueError("schedule needs at least one slot")
        if self.dimension < 1:
            raise ValueError(f"dimension must be positive, got {self.dimension}")
        if self.max_speed < 0:
            raise ValueError(f"max_speed must be >= 0, got {self.max_speed}")
        prev = 0
        for n in times:
            if n - prev < 1:
                raise ValueError(f"ending times must be strictly increasing positive integers: {times}")
            prev = n

    @property
    def num_slots(self) -> int:
        return len(self.ending_times)

    @property
    def total_time(self) -> int:
        return self.ending_times[-1]

    @property
    def slot_starts(self) -> tuple[int, ...]:
        """n_{j-1} for each slot j (n_0 = 0)."""
        return (0,) + self.ending_times[:-1]

    @property
    def slot_lengths(self) -> tuple[int, ...]:
        return tuple(n - m for m, n in zip(self.slot_starts, self.ending_times))

    def slot_of(self, t: int) -> int:
        """0-based slot index containing time ``t`` (t=0 belongs to slot 0)."""
        if t < 0 or t > self.total_time:
            raise ValueError(f"time {t} outside [0, {self.total_time}]")
        for j, n in enumerate(self.ending_times):
            if t <= n:
                return j
        raise AssertionError("unreachable")

    @classmethod
    def equal_split(cls, n_total: int, num_slots: int, dimension: int = 1,
                    max_speed: float = 0.0) -> "SlotSchedule":
        """Schedule with n_j = (j+1) n_B / (B+1): a double-length first slot."""
        if n_total % (num_slots + 1):
            raise ValueError(f"n_total={n_total} not divisible by B+1={num_slots + 1}")
        unit = n_total // (num_slots + 1)
        return cls(tuple((j + 2) * unit for j in range(num_slots)), dimension, max_speed)


@dataclass(frozen=True)
class TargetState:
    initial_location: np.ndarray
    velocities: np.ndarray = field(default=None)

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.initial_location, dtype=float))
        v = self.velocities
        v = np.zeros((1, s.size)) if v is None else np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, s.size)
        if v.shape[1] != s.size:
            raise ValueError(f"velocities shape {v.shape} incompatible with d={s.size}")
        if np.any(s < 0) or np.any(s > 1):
            raise ValueError(f"initial location outside the unit cube: {s}")
        object.__setattr__(self, "initial_location", s)
        object.__setattr__(self, "velocities", v)

    @property
    def dimension(self) -> int:
        return self.initial_location.size

    def check(self, sched: SlotSchedule) -> None:
        if self.velocities.shape != (sched.num_slots, sched.dimension):
            raise ValueError(
                f"velocities shape {self.velocities.shape} != ({sched.num_slots}, {sched.dimension})")
        if np.any(np.abs(self.velocities) > sched.max_speed + 1e-15):
            raise ValueError(f"speed exceeds v_+={sched.max_speed}")


def reflect(u):
    """Fold an unfolded coordinate back into [0, 1]."""
    r = np.mod(u, 2.0)
    return np.where(r <= 1.0, r, 2.0 - r)


def locate(s, v, t):
    """Coordinate at time ``t`` of a target started at ``s`` with speed ``v``."""
    out = reflect(np.asarray(s, dtype=float) + np.asarray(t, dtype=float) * np.asarray(v, dtype=float))
    return out if np.ndim(out) else float(out)


def locate_piecewise(state: TargetState, sched: SlotSchedule, t: int) -> np.ndarray:
    """Location vector at integer time ``t`` under the piecewise constant velocity model."""
    j = sched.slot_of(t)
    pos = state.initial_location
    starts = sched.slot_starts
    for k in range(j):
        pos = locate(pos, state.velocities[k], sched.ending_times[k] - starts[k])
    return np.atleast_1d(locate(pos, state.velocities[j], t - starts[j]))


def trajectory(state: TargetState, sched: SlotSchedule) -> np.ndarray:
    """Locations at every t in [0, n_B]; shape (n_B + 1, d)."""
    out = np.empty((sched.total_time + 1, state.dimension))
    out[0] = state.initial_location
    pos = state.initial_location
    for j, (start, end) in enumerate(zip(sched.slot_starts, sched.ending_times)):
        steps = np.arange(1, end - start + 1)[:, None]
        out[start + 1:end + 1] = locate(pos, state.velocities[j], steps)
        pos = out[end]
    return out


def quantize_cell(x, n: int, M: int):
    """Cell index in [1, nM] of position ``x``: ceil(x n M), with 0 mapped to 1.

    Products within SNAP_TOL of an integer are snapped first, so positions
    that land on a cell boundary up to rounding go to the lower cell.
    """
    y = np.asarray(x, dtype=float) * (n * M)
    r = np.rint(y)
    y = np.where(np.abs(y - r) < SNAP_TOL, r, y)
    cells = np.clip(np.ceil(y), 1, n * M).astype(np.int64)
    return cells if cells.ndim else int(cells)


def slot_cells(start, velocity, length: int, M: int) -> np.ndarray:
    """Cells of one slot for a target at ``start`` (end of the previous slot).

    ``start`` and ``velocity`` broadcast against each other; the time axis is
    appended last, so scalar inputs give shape (length,).
    """
    start = np.asarray(start, dtype=float)[..., None]
    velocity = np.asarray(velocity, dtype=float)[..., None]
    steps = np.arange(1, length + 1)
    return quantize_cell(locate(start, velocity, steps), length, M)


def quantized_trajectory(state: TargetState, sched: SlotSchedule, M: int) -> list[np.ndarray]:
    """Per-slot cell matrices, slot j of shape (N_j, d) on the N_j M grid."""
    locs = trajectory(state, sched)
    return [quantize_cell(locs[start + 1:end + 1], end - start, M)
            for start, end in zip(sched.slot_starts, sched.ending_times)]


def max_trajectory_error(est: TargetState, truth: TargetState, sched: SlotSchedule) -> np.ndarray:
    """L-infinity location error at each t in [0, n_B]."""
    return np.max(np.abs(trajectory(est, sched) - trajectory(truth, sched)), axis=1)
