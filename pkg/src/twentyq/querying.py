"""Random query codebooks.

Each bit x_t(cell) of slot j is an independent Bernoulli(p) draw produced by
hashing (seed, slot, t, cell) with splitmix64.  Any bit can be looked up on
its own, so a slot's table only needs to exist when it is actually used, and
the stream is identical however the work is split across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import SlotSchedule, TargetState, locate_piecewise, quantize_cell

MAX_TABLE_BITS = 1 << 26

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer (wrapping uint64 arithmetic)."""
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, slot: int, t, cell) -> np.ndarray:
    """Uniform [0, 1) variates keyed by (seed, slot, t, cell), broadcast over t and cell."""
    h = _mix(np.uint64(int(seed) % (1 << 64)))
    h = _mix(h ^ np.uint64(slot))
    h = _mix(h ^ np.asarray(t, dtype=np.uint64))
    h = _mix(h ^ np.asarray(cell, dtype=np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def flat_cell_index(cells: np.ndarray, side: int) -> np.ndarray:
    """Row-major 0-based index of 1-based cell tuples (last axis = dimension)."""
    cells = np.asarray(cells, dtype=np.int64) - 1
    d = cells.shape[-1]
    weights = side ** np.arange(d - 1, -1, -1, dtype=np.int64)
    return cells @ weights


@dataclass(frozen=True)
class QueryCodebook:
    sched: SlotSchedule
    M: int
    p: float
    seed: int
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"Bernoulli parameter must lie in [0, 1], got {self.p}")

    def side(self, j: int) -> int:
        """Cells per axis in slot j (0-based)."""
        return self.sched.slot_lengths[j] * self.M

    def num_cells(self, j: int) -> int:
        return self.side(j) ** self.sched.dimension

    def bits(self, j: int, t, cell_flat) -> np.ndarray:
        """Bits x_t(cell) for local times t in [0, N_j) and flat cell indices."""
        return (hash_uniform(self.seed, j, t, cell_flat) < self.p).astype(np.int8)

    def table(self, j: int) -> np.ndarray:
        """Full slot table of shape (N_j, cells); cached once built."""
        if j not in self._tables:
            n, k = self.sched.slot_lengths[j], self.num_cells(j)
            if n * k > MAX_TABLE_BITS:
                raise MemoryError(f"slot {j + 1} codebook has {n * k} bits (> {MAX_TABLE_BITS})")
            self._tables[j] = self.bits(j, np.arange(n)[:, None], np.arange(k)[None, :])
        return self._tables[j]

    def codewords(self, j: int, entries: np.ndarray) -> np.ndarray:
        """Codeword sequences x^{N_j}(w) for candidate cell matrices (K, N_j, d)."""
        flat = flat_cell_index(entries, self.side(j))
        tab = self.table(j)
        return tab[np.arange(flat.shape[1])[None, :], flat]


def generate_codebook(sched: SlotSchedule, M: int, p: float, seed: int) -> QueryCodebook:
    return QueryCodebook(sched, M, float(p), int(seed))


def query_measures(cb: QueryCodebook, j: int) -> np.ndarray:
    """|A_t| for every query of slot j: fraction of active cells."""
    return cb.table(j).mean(axis=1, dtype=float)


def query_measure(cb: QueryCodebook, j: int, t: int) -> float:
    """|A_t| for local time t of slot j (0-based)."""
    return float(query_measures(cb, j)[t])


def is_typical(cb: QueryCodebook, j: int, p: float, eta: float) -> bool:
    return bool(np.max(np.abs(query_measures(cb, j) - p)) <= eta)


def answer_query(cb: QueryCodebook, state: TargetState, sched: SlotSchedule, M: int, t: int) -> int:
    """Noiseless answer X_t at global time t in [1, n_B]: is the target in A_t."""
    if t < 1:
        raise ValueError("queries are posed at times t >= 1")
    j = sched.slot_of(t)
    local = t - sched.slot_starts[j] - 1
    cell = quantize_cell(locate_piecewise(state, sched, t), sched.slot_lengths[j], M)
    return int(cb.bits(j, local, flat_cell_index(cell, cb.side(j))))
