"""Self-check suite run by ``twentyq verify``.

Each check returns a CheckResult; none of them raise on a failed property,
only on invalid input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .bounds import GAUSS_TAIL_EXPONENT, chernoff_exponent, gaussian_tail
from .channels import ChannelModel
from .infodensity import exp_neg_density_mean
from .kinematics import SlotSchedule
from .montecarlo import draw_state
from .querying import generate_codebook
from .search import mi_decode, nn_decode, observe, trial_streams
from .trajectories import (DEFAULT_CAP, enumerate_first_slot, enumerate_later_slot, first_slot_bound,
                           later_slot_bound, verify_intersection_bound)

EXP_TOL = {"bsc": 1e-12, "awgn": 1e-6}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def decoder_equivalence(sched: SlotSchedule, M: int, p: float, ch: ChannelModel, instances: int = 200,
                        seed: int = 0, first=None) -> CheckResult:
    """MI and NN decoding pick the same first-slot winner on random instances."""
    first = enumerate_first_slot(sched, M) if first is None else first
    one = SlotSchedule(sched.ending_times[:1], sched.dimension, sched.max_speed)
    disagree = 0
    for i in range(instances):
        cb_seed, rng = trial_streams([seed, i])
        cb = generate_codebook(one, M, p, cb_seed)
        y = observe(cb, ch, draw_state(one, rng), one, rng)[0]
        if mi_decode(0, first, cb, y, p, ch)[0] != nn_decode(0, first, cb, y)[0]:
            disagree += 1
    return CheckResult("decoder_equivalence", disagree == 0,
                       f"{instances - disagree}/{instances} identical winners ({ch.kind})")


def size_bounds(sched: SlotSchedule, M: int, cap: float = DEFAULT_CAP, first=None) -> CheckResult:
    """Enumerated set sizes stay within the analytic upper bounds."""
    d, vp = sched.dimension, sched.max_speed
    first = enumerate_first_slot(sched, M, cap=cap) if first is None else first
    ok = len(first) <= first_slot_bound(sched.ending_times[0], M, vp, d)
    detail = [f"slot 1: {len(first)} <= {first_slot_bound(sched.ending_times[0], M, vp, d):.4g}"]
    for j in range(1, sched.num_slots):
        n = sched.slot_lengths[j]
        later = enumerate_later_slot(np.full(d, 0.5), sched, j, M, cap=cap)
        ok &= len(later) <= later_slot_bound(n, M, vp, d)
        detail.append(f"slot {j + 1}: {len(later)} <= {later_slot_bound(n, M, vp, d):.4g}")
    return CheckResult("size_bounds", bool(ok), "; ".join(detail))


def intersection_bound(sched: SlotSchedule, M: int, max_truths: int = 200, seed: int = 0,
                       first=None) -> CheckResult:
    """Coincidence counts of confusable first-slot pairs against ceil(2 n v_+).

    Uses every witness as a truth when the set is small, else a seeded sample
    of ``max_truths`` witnesses.
    """
    first = enumerate_first_slot(sched, M) if first is None else first
    idx = np.arange(len(first))
    if idx.size > max_truths:
        idx = np.sort(np.random.default_rng(seed).choice(idx, max_truths, replace=False))
    rep = verify_intersection_bound(first, sched, M,
                                    truths=((first.witness_s[i], first.witness_v[i]) for i in idx))
    return CheckResult("intersection_bound", rep.passed,
                       f"max coincidences {rep.max_coincidences} vs limit {rep.limit} "
                       f"over {rep.pairs_checked} pairs ({idx.size} truths)")


def exp_neg_identity(ch: ChannelModel, count: int = 20, seed: int = 0) -> CheckResult:
    """E[exp(-iota)] = 1 at random input biases."""
    ps = np.random.default_rng(seed).uniform(0.02, 0.98, count)
    worst = max(abs(exp_neg_density_mean(ch, float(p)) - 1.0) for p in ps)
    tol = EXP_TOL[ch.kind]
    return CheckResult("exp_neg_identity", worst <= tol, f"max |E[exp(-iota)] - 1| = {worst:.3g} (tol {tol:g})")


def max_chernoff_exponent(sigma: float) -> tuple[float, float]:
    """(max over theta of I(theta, sigma^2), argmax) by bounded scalar search."""
    hi = 1.0 / (2 * sigma * sigma)
    res = optimize.minimize_scalar(lambda th: -float(chernoff_exponent(th, sigma)),
                                   bounds=(0.0, hi * (1 - 1e-12)), method="bounded",
                                   options={"xatol": 1e-14})
    return -float(res.fun), float(res.x)


def tail_probability(n: int, sigma: float, draws: int, seed: int = 0) -> float:
    """Monte Carlo Pr{sum of n squared N(0, sigma^2) > 2 n sigma^2}."""
    rng = np.random.default_rng(seed)
    hits, done, chunk = 0, 0, 100_000
    while done < draws:
        m = min(chunk, draws - done)
        z = rng.normal(0.0, sigma, (m, n))
        hits += int(np.count_nonzero((z * z).sum(axis=1) > 2 * n * sigma * sigma))
        done += m
    return hits / draws


def gaussian_tail_check(sigmas=(0.5, 1.0, 2.0), ns=(10, 50), draws: int = 100_000,
                        seed: int = 0) -> CheckResult:
    worst = max(abs(max_chernoff_exponent(s)[0] - GAUSS_TAIL_EXPONENT) for s in sigmas)
    ok = worst <= 1e-10
    parts = [f"|max I - (1-log 2)/2| = {worst:.2g}"]
    for n in ns:
        bound, _ = gaussian_tail(n, 1.0)
        mc = tail_probability(n, 1.0, draws, seed)
        ok &= mc <= bound
        parts.append(f"n={n}: MC {mc:.4g} <= {bound:.4g}")
    return CheckResult("gaussian_tail", bool(ok), "; ".join(parts))


def run_all(sched: SlotSchedule, M: int, p: float, ch: ChannelModel, cap: float = DEFAULT_CAP,
            seed: int = 0) -> list[CheckResult]:
    first = enumerate_first_slot(sched, M, cap=cap)
    return [
        decoder_equivalence(sched, M, p, ch, seed=seed, first=first),
        size_bounds(sched, M, cap, first=first),
        intersection_bound(sched, M, seed=seed, first=first),
        exp_neg_identity(ch, seed=seed),
        gaussian_tail_check(seed=seed),
    ]


def any_failed(results) -> bool:
    return not all(r.passed for r in results)

