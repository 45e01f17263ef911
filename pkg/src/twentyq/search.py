"""Slot-by-slot non-adaptive search: query, decode, recover the trajectory.

Slot 1 decodes among all first-slot trajectories; every later slot decodes
among the trajectories that continue the running estimate, so an early
mistake propagates exactly as the procedure prescribes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelModel, sample_output
from .infodensity import info_density
from .kinematics import SlotSchedule, TargetState, max_trajectory_error, quantized_trajectory
from .querying import QueryCodebook, generate_codebook, query_measures
from .trajectories import (DEFAULT_CAP, TrajectorySet, enumerate_first_slot, enumerate_later_slot,
                           in_neighborhood, in_velocity_neighborhood, later_slot_start)

TIE_RTOL = 1e-9
EXCESS_TOL = 1e-12


@dataclass(frozen=True)
class SlotDecode:
    index: int
    entry: np.ndarray
    witness_s: np.ndarray
    witness_v: np.ndarray
    score: float
    margin: float
    num_candidates: int
    in_neighborhood: bool


@dataclass(frozen=True)
class SearchOutcome:
    estimate: TargetState
    errors: np.ndarray
    delta: float
    excess: bool
    slots: tuple[SlotDecode, ...]

    @property
    def max_error(self) -> float:
        return float(self.errors.max())


def _pick(scores: np.ndarray, maximize: bool, rtol: float) -> tuple[int, float, float]:
    """Winner index (lowest index among near-ties), its score and the margin to the runner-up."""
    s = scores if maximize else -scores
    best = s.max()
    tied = np.flatnonzero(s >= best - rtol * max(1.0, abs(best))) if rtol else np.flatnonzero(s == best)
    k = int(tied[0])
    rest = np.delete(s, k)
    margin = float(best - rest.max()) if rest.size else float("inf")
    return k, float(scores[k]), margin


def mi_scores(j: int, candidates: TrajectorySet, cb: QueryCodebook, y_slot, p: float,
              ch: ChannelModel) -> np.ndarray:
    """Empirical information density of each candidate's codeword against y_slot."""
    y = np.asarray(y_slot, dtype=float)
    state = ch.state(p)
    i0 = info_density(ch, p, state, 0.0, y)[:, None]
    i1 = info_density(ch, p, state, 1.0, y)[:, None]
    per_cell = np.where(cb.table(j) == 1, i1, i0)
    return per_cell.ravel()[candidates.table_index].sum(axis=1)


def nn_scores(j: int, candidates: TrajectorySet, cb: QueryCodebook, y_slot) -> np.ndarray:
    """Squared Euclidean distance between each candidate's codeword and y_slot."""
    y = np.asarray(y_slot, dtype=float)[:, None]
    per_cell = (cb.table(j) - y) ** 2
    return per_cell.ravel()[candidates.table_index].sum(axis=1)


def _result(candidates: TrajectorySet, k: int):
    return candidates.entries[k], candidates.witness_s[k], candidates.witness_v[k]


def mi_decode(j: int, candidates: TrajectorySet, cb: QueryCodebook, y_slot, p: float,
              ch: ChannelModel):
    """Maximal information-density decoding; returns (index, entry, witness s, witness v, score, margin)."""
    if len(candidates) == 0:
        raise ValueError("empty candidate set")
    k, score, margin = _pick(mi_scores(j, candidates, cb, y_slot, p, ch), True, TIE_RTOL)
    return (k, *_result(candidates, k), score, margin)


def nn_decode(j: int, candidates: TrajectorySet, cb: QueryCodebook, y_slot):
    """Minimum squared-distance decoding; same return layout as mi_decode."""
    if len(candidates) == 0:
        raise ValueError("empty candidate set")
    k, score, margin = _pick(nn_scores(j, candidates, cb, y_slot), False, 0.0)
    return (k, *_result(candidates, k), score, margin)


def trial_streams(seed):
    """(codebook seed, noise generator) derived from a trial seed or seed tuple."""
    ss = np.random.SeedSequence(seed)
    cb_ss, noise_ss = ss.spawn(2)
    return int(cb_ss.generate_state(1, np.uint64)[0]), np.random.default_rng(noise_ss)


def observe(cb: QueryCodebook, ch: ChannelModel, state: TargetState, sched: SlotSchedule,
            rng: np.random.Generator) -> list[np.ndarray]:
    """Noisy responses to every query of every slot (all queries fixed in advance)."""
    truth = quantized_trajectory(state, sched, cb.M)
    out = []
    for j in range(sched.num_slots):
        x = cb.codewords(j, truth[j][None])[0]
        out.append(sample_output(ch, query_measures(cb, j), x, rng))
    return out


def run_trial(sched: SlotSchedule, M: int, p: float, ch: ChannelModel, state: TargetState, seed,
              first_slot: TrajectorySet | None = None, decoder: str = "mi",
              resolution_factor: int = 4, cap: float = DEFAULT_CAP,
              method: str = "exact") -> SearchOutcome:
    """One run of the procedure against a fixed target.

    ``first_slot`` may carry a precomputed first-slot set (it only depends on
    the schedule and M); later-slot sets depend on the running estimate and
    are always enumerated here.
    """
    state.check(sched)
    if first_slot is None:
        first_slot = enumerate_first_slot(sched, M, resolution_factor, cap, method)
    elif first_slot.slot_length != sched.ending_times[0] or first_slot.M != M:
        raise ValueError("precomputed first-slot set does not match the schedule")
    cb_seed, rng = trial_streams(seed)
    cb = generate_codebook(sched, M, p, cb_seed)
    ys = observe(cb, ch, state, sched, rng)

    def decode(j, cands):
        if decoder == "mi":
            return mi_decode(j, cands, cb, ys[j], p, ch)
        if decoder == "nn":
            return nn_decode(j, cands, cb, ys[j])
        raise ValueError(f"unknown decoder {decoder!r}")

    s_true, v_true = state.initial_location, state.velocities
    k, entry, ws, wv, score, margin = decode(0, first_slot)
    slots = [SlotDecode(k, entry, ws, wv, score, margin, len(first_slot),
                        in_neighborhood(s_true, v_true[0], ws, wv, sched.ending_times[0], M))]
    s_hat, v_hat = ws.copy(), [wv.copy()]
    for j in range(1, sched.num_slots):
        start = later_slot_start(s_hat, np.array(v_hat), sched, j)
        cands = enumerate_later_slot(start, sched, j, M, resolution_factor, cap, method)
        k, entry, ws, wv, score, margin = decode(j, cands)
        slots.append(SlotDecode(k, entry, ws, wv, score, margin, len(cands),
                                in_velocity_neighborhood(v_true[j], wv, sched.slot_lengths[j], M)))
        v_hat.append(wv.copy())
    est = TargetState(s_hat, np.array(v_hat))
    errors = max_trajectory_error(est, state, sched)
    delta = (sched.num_slots + 1) / M
    return SearchOutcome(est, errors, delta, bool(errors.max() > delta + EXCESS_TOL), tuple(slots))
