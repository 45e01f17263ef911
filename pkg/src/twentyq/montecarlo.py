"""Monte Carlo estimation of the excess-resolution probability.

Every trial draws its own codebook, noise and target state from streams
derived from (base_seed, point_id, trial), so results are independent of the
number of worker threads; workers only change the order in which trials are
computed, never which numbers they consume.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .bounds import BoundQuery, achievability_bound, best_eta
from .channels import ChannelModel
from .kinematics import SlotSchedule, TargetState
from .search import run_trial
from .trajectories import DEFAULT_CAP, enumerate_first_slot

Z95 = stats.norm.ppf(0.975)
AXES = ("M", "n", "zeta", "sigma", "v_plus")


@dataclass(frozen=True)
class ExcessEstimate:
    p_hat: float
    ci_lo: float
    ci_hi: float
    trials: int
    excess_count: int

    @property
    def wilson_se(self) -> float:
        """Half-width of the 95% Wilson interval in standard-error units."""
        return (self.ci_hi - self.ci_lo) / (2 * Z95)


def wilson_interval(k: int, n: int) -> tuple[float, float]:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def adversarial_states(sched: SlotSchedule, M: int) -> list[TargetState]:
    """Cube corners, cell boundaries and extreme speeds, per coordinate."""
    d, B, vp = sched.dimension, sched.num_slots, sched.max_speed
    n1 = sched.ending_times[0]
    locs = [0.0, 1.0, 0.5, 1.0 / (n1 * M), 1.0 - 1.0 / (n1 * M)]
    speeds = sorted({vp, -vp, 0.0})
    out = []
    for s in locs:
        for v in speeds:
            vel = np.full((B, d), v)
            vel[1::2] *= -1  # alternate direction between slots
            out.append(TargetState(np.full(d, s), vel))
    return out


def draw_state(sched: SlotSchedule, rng: np.random.Generator) -> TargetState:
    d, B, vp = sched.dimension, sched.num_slots, sched.max_speed
    return TargetState(rng.random(d), rng.uniform(-vp, vp, (B, d)) if vp > 0 else np.zeros((B, d)))


@dataclass(frozen=True)
class TrialPlan:
    sched: SlotSchedule
    M: int
    p: float
    channel: ChannelModel
    trials: int = 1000
    base_seed: int = 0
    point_id: int = 0
    states: str = "uniform"
    decoder: str = "mi"
    resolution_factor: int = 4
    cap: float = DEFAULT_CAP
    enumeration: str = "exact"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.states not in ("uniform", "adversarial"):
            raise ValueError(f"states must be 'uniform' or 'adversarial', got {self.states!r}")


def _trial_state(plan: TrialPlan, i: int, fixed: list | None) -> TargetState:
    if fixed is not None:
        return fixed[i % len(fixed)]
    return draw_state(plan.sched, np.random.default_rng([plan.base_seed, plan.point_id, i, 2]))


def run_trials(plan: TrialPlan, threads: int = 1) -> list:
    """All trial outcomes of a plan, in trial order."""
    first = enumerate_first_slot(plan.sched, plan.M, plan.resolution_factor, plan.cap, plan.enumeration)
    fixed = adversarial_states(plan.sched, plan.M) if plan.states == "adversarial" else None

    def one(i):
        st = _trial_state(plan, i, fixed)
        return run_trial(plan.sched, plan.M, plan.p, plan.channel, st,
                         [plan.base_seed, plan.point_id, i], first_slot=first, decoder=plan.decoder,
                         resolution_factor=plan.resolution_factor, cap=plan.cap, method=plan.enumeration)

    if threads <= 1:
        return [one(i) for i in range(plan.trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(plan.trials)))


def summarize(outcomes: list, trials: int) -> ExcessEstimate:
    k = sum(o.excess for o in outcomes)
    lo, hi = wilson_interval(k, trials)
    return ExcessEstimate(k / trials, lo, hi, trials, k)


def estimate_excess_probability(plan: TrialPlan, threads: int = 1) -> ExcessEstimate:
    return summarize(run_trials(plan, threads), plan.trials)


def trial_rows(plan: TrialPlan, outcomes: list) -> list[dict]:
    """Per-trial records: seed triple, excess flag, max error and one decode margin per slot."""
    rows = []
    for i, o in enumerate(outcomes):
        row = {"point_id": plan.point_id, "trial": i, "seed": f"{plan.base_seed}:{plan.point_id}:{i}",
               "excess": int(o.excess), "max_error": o.max_error}
        row.update({f"margin_{j + 1}": s.margin for j, s in enumerate(o.slots)})
        rows.append(row)
    return rows


@dataclass(frozen=True)
class SweepConfig:
    base: TrialPlan
    axis: str = "M"
    values: tuple = (2, 3, 4)
    eta: float | None = None  # None: tightest bound over a grid of eta

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.base.trials < 100:
            raise ValueError("sweeps need at least 100 trials per point")

    def plan_at(self, i: int) -> TrialPlan:
        v = self.values[i]
        b = self.base
        if self.axis == "M":
            return replace(b, M=int(v), point_id=i)
        if self.axis == "n":
            sched = replace(b.sched, ending_times=(int(v),)) if b.sched.num_slots == 1 else \
                SlotSchedule.equal_split(int(v), b.sched.num_slots, b.sched.dimension, b.sched.max_speed)
            return replace(b, sched=sched, point_id=i)
        if self.axis == "v_plus":
            return replace(b, sched=replace(b.sched, max_speed=float(v)), point_id=i)
        ch = b.channel
        if (self.axis == "zeta") != ch.discrete:
            raise ValueError(f"axis {self.axis} does not match channel type {ch.kind}")
        return replace(b, channel=ChannelModel(ch.kind, float(v), ch.f), point_id=i)


SWEEP_COLUMNS = ("point_id", "axis", "value", "delta", "rate", "trials", "excess_count", "p_hat",
                 "ci_lo", "ci_hi", "bound_rcu", "bound_gaussian")


def point_bounds(plan: TrialPlan, eta: float | None) -> tuple[float, float]:
    """(rcu_exact, gaussian_approx) bounds; rcu_exact is NaN for the Gaussian channel."""
    out = []
    for mode in ("rcu_exact", "gaussian_approx"):
        if mode == "rcu_exact" and not plan.channel.discrete:
            out.append(math.nan)
            continue
        e = best_eta(plan.sched, plan.M, plan.p, plan.channel, mode) if eta is None else eta
        out.append(achievability_bound(BoundQuery(plan.sched, plan.M, plan.p, e, plan.channel, mode)).value)
    return tuple(out)


def sweep(cfg: SweepConfig, threads: int = 1, per_trial: list | None = None) -> list[dict]:
    """One row per sweep point; per-trial records are appended to ``per_trial`` if given."""
    rows = []
    for i, v in enumerate(cfg.values):
        plan = cfg.plan_at(i)
        outcomes = run_trials(plan, threads)
        est = summarize(outcomes, plan.trials)
        if per_trial is not None:
            per_trial.extend(trial_rows(plan, outcomes))
        b_rcu, b_gauss = point_bounds(plan, cfg.eta)
        B = plan.sched.num_slots
        delta = (B + 1) / plan.M
        rows.append({"point_id": i, "axis": cfg.axis, "value": v, "delta": delta,
                     "rate": math.log(plan.M / (B + 1)) / plan.sched.total_time, "trials": est.trials,
                     "excess_count": est.excess_count, "p_hat": est.p_hat, "ci_lo": est.ci_lo,
                     "ci_hi": est.ci_hi, "bound_rcu": b_rcu, "bound_gaussian": b_gauss})
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows: list[dict], columns=SWEEP_COLUMNS, extra: dict | None = None) -> str:
    """RFC-4180 CSV with round-trip float formatting; ``extra`` adds constant trailing columns."""
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(list(columns) + list(extra))
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns] + [_fmt(v) for v in extra.values()])
    return buf.getvalue()


def crossing_rate(rows: list[dict], level: float = 0.5) -> float:
    """Rate at which p_hat first reaches ``level``, by linear interpolation (NaN if it never does)."""
    pts = sorted((r["rate"], r["p_hat"]) for r in rows)
    for (r0, p0), (r1, p1) in zip(pts, pts[1:]):
        if p0 < level <= p1:
            return r0 + (level - p0) * (r1 - r0) / (p1 - p0)
    return math.nan


def monotone_up_to_ci(rows: list[dict]) -> bool:
    """Each step in rate either raises p_hat or has overlapping Wilson intervals."""
    pts = sorted(rows, key=lambda r: r["rate"])
    return all(b["p_hat"] >= a["p_hat"] or b["ci_hi"] >= a["ci_lo"] for a, b in zip(pts, pts[1:]))
