"""Enumeration of quantized trajectory sets and the confusable-set machinery.

Trajectories factorize over dimensions: coordinate i of the cell matrix only
depends on (s_i, v_i).  Every set is therefore built from 1-D sweeps and a
Cartesian product, which keeps the grid work linear in d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kinematics import SlotSchedule, locate, quantize_cell, reflect

DEFAULT_CAP = 10**7
_CHUNK = 1 << 22


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectorySet:
    """Deduplicated cell matrices with one witness each.

    ``entries`` has shape (K, n, d) and is sorted lexicographically on the
    time-major flattening.  ``witness_s`` (K, d) and ``witness_v`` (K, d)
    reproduce each entry exactly.  Later-slot sets store the fixed slot start
    location in ``start`` and leave ``witness_s`` equal to it.
    """

    slot_length: int
    M: int
    entries: np.ndarray
    witness_s: np.ndarray
    witness_v: np.ndarray
    start: np.ndarray | None = None

    def __len__(self):
        return self.entries.shape[0]

    @property
    def dimension(self) -> int:
        return self.entries.shape[2]

    def flat(self) -> np.ndarray:
        return self.entries.reshape(len(self), -1)

    def as_set(self) -> set[tuple[int, ...]]:
        return {tuple(row) for row in self.flat().tolist()}

    @cached_property
    def table_index(self) -> np.ndarray:
        """(K, n) positions into a row-major (n, (nM)^d) per-time cell table."""
        side = self.slot_length * self.M
        cells = self.entries.astype(np.int64) - 1
        weights = side ** np.arange(self.dimension - 1, -1, -1, dtype=np.int64)
        flat = cells @ weights
        return flat + np.arange(self.slot_length, dtype=np.int64)[None, :] * side ** self.dimension


def first_slot_bound(n: int, M: int, v_plus: float, d: int) -> float:
    return (2 * (n * v_plus + 3) * n**4 * M**2) ** d


def later_slot_bound(n: int, M: int, v_plus: float, d: int) -> float:
    return ((2 * n * v_plus + 3) * n**3 * M) ** d


def _check_cap(points: float, cap: float, what: str) -> None:
    """The cap limits the work done: (s, v) points swept, or the size of a d-fold product."""
    if points > cap:
        raise EnumerationCapExceeded(f"{what}: {points:.3g} points exceeds cap {cap:.3g}")


def axis_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Multiples of ``step`` inside [lo, hi] plus both endpoints."""
    k_lo = math.ceil(lo / step - 1e-9)
    k_hi = math.floor(hi / step + 1e-9)
    pts = np.arange(k_lo, k_hi + 1) * step
    pts = np.clip(pts, lo, hi)
    return np.unique(np.concatenate([[lo], pts, [hi]]))


def _pack_keys(cells: np.ndarray, max_step: int) -> np.ndarray:
    """Exact uint64 keys for 1-D cell rows (first cell + bounded increments).

    Consecutive cells differ by at most ``max_step``, so each increment fits
    in a few bits; rows pack into a handful of words instead of n int32s.
    """
    rows, n = cells.shape
    diffs = np.diff(cells, axis=1) + max_step
    if diffs.size and (diffs.min() < 0 or diffs.max() > 2 * max_step):
        raise AssertionError("cell increment exceeds the speed bound")
    bits = max(1, int(2 * max_step).bit_length())
    per_word = 64 // bits
    n_words = 1 + -(-(n - 1) // per_word) if n > 1 else 1
    keys = np.zeros((rows, n_words), dtype=np.uint64)
    keys[:, 0] = cells[:, 0].astype(np.uint64)
    for w in range(1, n_words):
        chunk = diffs[:, (w - 1) * per_word:w * per_word].astype(np.uint64)
        shifts = (np.arange(chunk.shape[1], dtype=np.uint64) * np.uint64(bits))
        keys[:, w] = np.bitwise_or.reduce(chunk << shifts, axis=1)
    return keys


def _unique_keys(keys: np.ndarray) -> np.ndarray:
    """Indices of the first occurrence of each distinct key row."""
    if keys.shape[1] == 1:
        _, idx = np.unique(keys[:, 0], return_index=True)
        return idx
    order = np.lexsort(keys.T[::-1])
    sk = keys[order]
    new = np.ones(len(order), dtype=bool)
    new[1:] = np.any(sk[1:] != sk[:-1], axis=1)
    # first occurrence = smallest original index within each run
    starts = np.flatnonzero(new)
    return np.minimum.reduceat(order, starts) if len(order) else order


def _sweep_1d(starts: np.ndarray, velocities: np.ndarray, n: int, M: int, v_plus: float):
    """Distinct 1-D cell sequences over the product grid starts x velocities.

    Returns (rows (K, n) in lexicographic order, witness start (K,), witness velocity (K,)).
    """
    steps = np.arange(1, n + 1, dtype=float)
    max_step = math.ceil(v_plus * n * M + 1e-9)
    per_v = max(1, _CHUNK // max(1, starts.size * n))
    rows_acc, s_acc, v_acc = [], [], []
    for lo in range(0, velocities.size, per_v):
        vs = velocities[lo:lo + per_v]
        u = starts[None, :, None] + vs[:, None, None] * steps[None, None, :]
        cells = quantize_cell(reflect(u), n, M).astype(np.int32).reshape(-1, n)
        idx = _unique_keys(_pack_keys(cells, max_step))
        rows_acc.append(cells[idx])
        s_acc.append(starts[idx % starts.size])
        v_acc.append(vs[idx // starts.size])
    rows = np.concatenate(rows_acc)
    s = np.concatenate(s_acc)
    v = np.concatenate(v_acc)
    idx = _unique_keys(_pack_keys(rows, max_step))
    rows, s, v = rows[idx], s[idx], v[idx]
    order = np.lexsort(rows.T[::-1])
    return rows[order], s[order], v[order]


def _sweep_pairs(starts: np.ndarray, velocities: np.ndarray, n: int, M: int, v_plus: float):
    """Like _sweep_1d, but over paired (start, velocity) points instead of a product grid."""
    steps = np.arange(1, n + 1, dtype=float)
    max_step = math.ceil(v_plus * n * M + 1e-9)
    per = max(1, _CHUNK // n)
    rows_acc, s_acc, v_acc = [], [], []
    for lo in range(0, starts.size, per):
        s, v = starts[lo:lo + per], velocities[lo:lo + per]
        cells = quantize_cell(reflect(s[:, None] + v[:, None] * steps[None, :]), n, M).astype(np.int32)
        idx = _unique_keys(_pack_keys(cells, max_step))
        rows_acc.append(cells[idx])
        s_acc.append(s[idx])
        v_acc.append(v[idx])
    rows = np.concatenate(rows_acc)
    s = np.concatenate(s_acc)
    v = np.concatenate(v_acc)
    idx = _unique_keys(_pack_keys(rows, max_step))
    rows, s, v = rows[idx], s[idx], v[idx]
    order = np.lexsort(rows.T[::-1])
    return rows[order], s[order], v[order]


def _with_midpoints(points: np.ndarray) -> np.ndarray:
    pts = np.unique(points)
    return np.concatenate([pts, (pts[1:] + pts[:-1]) / 2])


def critical_velocities(n: int, M: int, v_plus: float) -> np.ndarray:
    """Velocities at which two boundary lines s + t v = k/(nM) swap order in s.

    Lines for times t and t' (t' = 0 standing for the edges s = 0, 1) cross at
    v = m / ((t - t') n M); between consecutive critical values the order of
    all breakpoints in s is fixed, so one velocity per gap suffices.
    """
    L = n * M
    out = [np.array([-v_plus, 0.0, v_plus])]
    for dt in range(1, n + 1):
        m = np.arange(math.ceil(-v_plus * dt * L - 1e-9), math.floor(v_plus * dt * L + 1e-9) + 1)
        out.append(m / (dt * L))
    v = np.concatenate(out)
    return np.unique(v[(v >= -v_plus) & (v <= v_plus)])


def _location_breakpoints(v: float, n: int, M: int) -> np.ndarray:
    """Starts in [0, 1] where some s + t v, t in [1, n], lies on a cell boundary, plus 0 and 1."""
    L = n * M
    t = np.arange(1, n + 1)
    lo = math.floor(min(0.0, n * v) * L) - 1
    hi = math.ceil((1 + max(0.0, n * v)) * L) + 1
    k = np.arange(lo, hi + 1)
    s = (k[None, :] / L - t[:, None] * v).ravel()
    s = s[(s >= 0) & (s <= 1)]
    return np.concatenate([[0.0, 1.0], s])


def exact_points_1d(n: int, M: int, v_plus: float, start: float | None = None):
    """Paired (s, v) sample points meeting every face, edge and vertex of the boundary arrangement."""
    L = n * M
    if start is not None:
        t = np.arange(1, n + 1)
        k = np.arange(math.floor((start - n * v_plus) * L) - 1, math.ceil((start + n * v_plus) * L) + 2)
        v = ((k[None, :] / L - start) / t[:, None]).ravel()
        v = np.concatenate([[-v_plus, 0.0, v_plus], v[(v >= -v_plus) & (v <= v_plus)]])
        v = _with_midpoints(v)
        return np.full(v.size, float(start)), v
    vs = _with_midpoints(critical_velocities(n, M, v_plus))
    s_acc, v_acc = [], []
    for v in vs:
        s = _with_midpoints(_location_breakpoints(v, n, M))
        s_acc.append(s)
        v_acc.append(np.full(s.size, v))
    return np.concatenate(s_acc), np.concatenate(v_acc)


def _product(per_dim, n: int, M: int, start=None) -> TrajectorySet:
    """Cartesian product of per-dimension 1-D sets, sorted lexicographically."""
    d = len(per_dim)
    sizes = [rows.shape[0] for rows, _, _ in per_dim]
    grids = np.meshgrid(*[np.arange(k) for k in sizes], indexing="ij")
    picks = [g.ravel() for g in grids]
    entries = np.stack([per_dim[i][0][picks[i]] for i in range(d)], axis=2)
    ws = np.stack([per_dim[i][1][picks[i]] for i in range(d)], axis=1)
    wv = np.stack([per_dim[i][2][picks[i]] for i in range(d)], axis=1)
    if d > 1:
        flat = entries.reshape(entries.shape[0], -1)
        order = np.lexsort(flat.T[::-1])
        entries, ws, wv = entries[order], ws[order], wv[order]
    return TrajectorySet(n, M, entries, ws, wv,
                         None if start is None else np.asarray(start, dtype=float))


METHODS = ("exact", "grid")


def _exact_point_count(n: int, M: int, v_plus: float) -> float:
    """Upper estimate of the number of (s, v) points exact_points_1d generates."""
    L = n * M
    nv = 2 * critical_velocities(n, M, v_plus).size
    ns = 2 * (n * (L * (1 + n * v_plus) + 3) + 2)
    return float(nv * ns)


def enumerate_first_slot(sched: SlotSchedule, M: int, resolution_factor: int = 4,
                         cap: float = DEFAULT_CAP, method: str = "exact") -> TrajectorySet:
    """All first-slot quantized trajectories.

    ``exact`` evaluates one point per face, edge and vertex of the arrangement
    of boundary lines s + t v = k/(nM), which yields the complete set.
    ``grid`` sweeps a uniform (s, v) grid with step 1/(resolution_factor n^2 M)
    and can miss thin faces; it is kept as an independent cross-check.
    """
    n, d, v_plus = sched.ending_times[0], sched.dimension, sched.max_speed
    what = f"first slot (n={n}, M={M}, d={d})"
    if method == "exact":
        _check_cap(_exact_point_count(n, M, v_plus), cap, what)
        s, v = exact_points_1d(n, M, v_plus)
        one = _sweep_pairs(s, v, n, M, v_plus)
        _check_cap(float(len(one[0])) ** d, cap, what)
    elif method == "grid":
        step = 1.0 / (resolution_factor * n * n * M)
        starts = axis_grid(0.0, 1.0, step)
        velocities = axis_grid(-v_plus, v_plus, step)
        _check_cap(float(starts.size * velocities.size) ** d, cap, what)
        one = _sweep_1d(starts, velocities, n, M, v_plus)
    else:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    return _product([one] * d, n, M)


def enumerate_later_slot(start, sched: SlotSchedule, j: int, M: int,
                         resolution_factor: int = 4, cap: float = DEFAULT_CAP,
                         method: str = "exact") -> TrajectorySet:
    """Slot-j trajectories (j 0-based, j >= 1) from a fixed start location.

    ``start`` is the location at n_{j-1}, i.e. the end of the previous slot
    for the conditioning (s, v^{j-1}); only the slot velocity is swept.
    """
    if not 1 <= j < sched.num_slots:
        raise ValueError(f"later slot index must be in [1, {sched.num_slots - 1}], got {j}")
    n = sched.slot_lengths[j]
    d, v_plus = sched.dimension, sched.max_speed
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if start.size != d:
        raise ValueError(f"start has {start.size} coordinates, expected {d}")
    what = f"slot {j + 1} (N={n}, M={M}, d={d})"
    if method == "exact":
        _check_cap(2.0 * n * (2 * n * v_plus * n * M + 4) * d, cap, what)
        per_dim = [_sweep_pairs(*exact_points_1d(n, M, v_plus, float(x)), n, M, v_plus) for x in start]
        _check_cap(float(np.prod([len(p[0]) for p in per_dim])), cap, what)
    elif method == "grid":
        step = 1.0 / (resolution_factor * n * n * M)
        velocities = axis_grid(-v_plus, v_plus, step)
        _check_cap(float(velocities.size) ** d, cap, what)
        per_dim = [_sweep_1d(start[i:i + 1], velocities, n, M, v_plus) for i in range(d)]
    else:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    return _product(per_dim, n, M, start=start)


def later_slot_start(s, v_prefix, sched: SlotSchedule, j: int) -> np.ndarray:
    """Location at n_{j-1} given initial location and velocities of slots < j."""
    pos = np.atleast_1d(np.asarray(s, dtype=float))
    v_prefix = np.atleast_2d(np.asarray(v_prefix, dtype=float))
    for k in range(j):
        pos = np.atleast_1d(locate(pos, v_prefix[k], sched.slot_lengths[k]))
    return pos


def in_velocity_neighborhood(v, v_bar, n: int, M: int) -> bool:
    """v_bar within 1/(nM) of v in every coordinate (closed)."""
    diff = np.max(np.abs(np.asarray(v, dtype=float) - np.asarray(v_bar, dtype=float)))
    return bool(diff <= 1.0 / (n * M) + 1e-15)


def in_neighborhood(s, v, s_bar, v_bar, n: int, M: int) -> bool:
    """(s_bar, v_bar) within 1/M in location and 1/(nM) in velocity of (s, v)."""
    ds = np.max(np.abs(np.asarray(s, dtype=float) - np.asarray(s_bar, dtype=float)))
    return bool(ds <= 1.0 / M + 1e-15) and in_velocity_neighborhood(v, v_bar, n, M)


def confusable_sets(truth_s, truth_v, tset: TrajectorySet, M: int) -> dict[int, np.ndarray]:
    """Partition of the confusable entries by their number of coincidences.

    An entry is confusable when its witness lies outside the success
    neighborhood of the truth: D(s, v, n, M) for first-slot sets, and the
    velocity-only D(v, n, M) for later-slot sets (those carry ``start``).
    Returns {l: indices into tset} for every coincidence count l that occurs,
    l = 0 included.
    """
    n = tset.slot_length
    truth_s = np.atleast_1d(np.asarray(truth_s, dtype=float))
    truth_v = np.atleast_1d(np.asarray(truth_v, dtype=float))
    tol = 1e-15
    far_v = np.max(np.abs(tset.witness_v - truth_v), axis=1) > 1.0 / (n * M) + tol
    if tset.start is None:
        far_s = np.max(np.abs(tset.witness_s - truth_s), axis=1) > 1.0 / M + tol
        outside = far_s | far_v
        origin = truth_s
    else:
        outside = far_v
        origin = tset.start
    truth_cells = quantize_cell(
        locate(origin[None, :], truth_v[None, :], np.arange(1, n + 1)[:, None]), n, M)
    coincide = np.all(tset.entries == truth_cells[None], axis=2).sum(axis=1)
    idx = np.flatnonzero(outside)
    return {int(l): idx[coincide[idx] == l] for l in np.unique(coincide[idx])}


@dataclass(frozen=True)
class IntersectionReport:
    max_coincidences: int
    limit: int
    pairs_checked: int

    @property
    def passed(self) -> bool:
        return self.max_coincidences <= self.limit


def verify_intersection_bound(tset: TrajectorySet, sched: SlotSchedule, M: int,
                              truths=None) -> IntersectionReport:
    """Max coincidence count over (truth, confusable entry) pairs vs ceil(2 n v_+).

    ``truths`` is an iterable of (s, v) pairs; by default every witness in the
    set serves as a truth, so all enumerated pairs are covered.
    """
    n = tset.slot_length
    limit = math.ceil(2 * n * sched.max_speed - 1e-12)
    if truths is None:
        truths = zip(tset.witness_s, tset.witness_v)
    worst, pairs = 0, 0
    for s, v in truths:
        parts = confusable_sets(s, v, tset, M)
        for l, idx in parts.items():
            pairs += idx.size
            if idx.size:
                worst = max(worst, l)
    return IntersectionReport(worst, limit, pairs)
