"""Non-asymptotic and second-order bounds on the achievable resolution.

Conventions: all logs are natural; d is the schedule dimension; slot 1 pays
for two unknowns (location and velocity, M^{2d} confusable cells, k = 4 in
zeta) and every later slot for one (M^d, k = 3).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from .channels import DEFAULT_XI_MAX, ChannelModel, continuity_constant
from .infodensity import CapacityReport, capacity, exp_neg_density_mean, moments
from .kinematics import SlotSchedule

MODES = ("literal", "rcu_exact", "gaussian_approx")
ZEROED_NOTE = "O(1) and O(log n) remainder terms set to 0"
GAUSS_TAIL_EXPONENT = (1.0 - math.log(2.0)) / 2.0


def _check_p(p):
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def zeta_terms(n: int, k: int, p: float, v_plus: float, eta: float, ch: ChannelModel, d: int = 1,
               xi_max: float = DEFAULT_XI_MAX) -> dict:
    """The four summands of zeta; the continuity term is 0 for the Gaussian channel."""
    _check_p(p)
    cont = 2 * n * eta * ch.K * continuity_constant(ch, ch.state(p), xi_max) if ch.discrete and eta else 0.0
    return {
        "continuity": cont,
        "speed": -math.ceil(2 * n * v_plus - 1e-12) * min(math.log(p), math.log1p(-p)),
        "velocity_classes": d * math.log(2 * n * v_plus + 3),
        "polynomial": k * d * math.log(n),
    }


def zeta(n: int, k: int, p: float, v_plus: float, eta: float, ch: ChannelModel, d: int = 1,
         xi_max: float = DEFAULT_XI_MAX) -> float:
    """Penalty exponent for unknown velocity, change of measure and trajectory counting (BSC)."""
    if not ch.discrete:
        raise ValueError("zeta needs the continuity constant; use tau_and_zeta_g for the Gaussian channel")
    return sum(zeta_terms(n, k, p, v_plus, eta, ch, d, xi_max).values())


def tau(p: float, eta: float, ch: ChannelModel) -> float:
    """Per-query change-of-measure cost of the truncated Gaussian channel."""
    f, K = ch.state(p), ch.K
    ke = K * eta
    den = f * f * (f * f - 2 * ke * (f - ke))
    if den <= 0:
        raise ValueError(f"eta={eta} too large for f(p)={f}, K={K}: tau denominator is {den}")
    return 2 * (ke * (f + ke)) * (f * f + 4 * ke * (f + ke)) / den


def tau_and_zeta_g(n: int, k: int, p: float, eta: float, ch: ChannelModel, v_plus: float,
                   d: int = 1) -> tuple[float, float]:
    """(tau, zeta_G) with zeta_G = zeta + n tau - (continuity term of zeta)."""
    t = tau(p, eta, ch)
    terms = zeta_terms(n, k, p, v_plus, eta, ch, d)
    return t, sum(terms.values()) - terms["continuity"] + n * t


def slot_penalty(n: int, k: int, p: float, v_plus: float, eta: float, ch: ChannelModel, d: int) -> float:
    """zeta for discrete channels, zeta_G for the Gaussian channel."""
    if ch.discrete:
        return zeta(n, k, p, v_plus, eta, ch, d)
    return tau_and_zeta_g(n, k, p, eta, ch, v_plus, d)[1]


@dataclass(frozen=True)
class BoundQuery:
    sched: SlotSchedule
    M: int
    p: float
    eta: float
    channel: ChannelModel
    mode: str = "rcu_exact"
    beta: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        _check_p(self.p)
        if self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")


@dataclass(frozen=True)
class BoundResult:
    total: float
    slot_terms: tuple[float, ...]
    atypical_terms: tuple[float, ...]
    truncation_terms: tuple[float, ...]
    mode: str
    warning: str | None = None

    @property
    def value(self) -> float:
        return min(1.0, self.total)

    def to_dict(self) -> dict:
        return {"bound": self.value, "total": self.total, "slot_terms": list(self.slot_terms),
                "atypical_terms": list(self.atypical_terms),
                "truncation_terms": list(self.truncation_terms), "mode": self.mode,
                "warning": self.warning}


def _binom_logpmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + k * math.log(p) + (n - k) * math.log1p(-p)


def rcu_bsc(n: int, log_A: float, p: float, eps: float) -> float:
    """E[min{1, A exp(-iota_n)}] for n uses of a BSC(eps) with Bern(p) inputs.

    iota_n is determined by the number of ones a in x^n and the flip counts
    among the ones (f1) and zeros (f0); all three are enumerated exactly.
    """
    py1 = p * (1 - eps) + (1 - p) * eps
    i11 = math.log1p(-eps) - math.log(py1)
    i10 = math.log(eps) - math.log1p(-py1)
    i00 = math.log1p(-eps) - math.log1p(-py1)
    i01 = math.log(eps) - math.log(py1)
    log_pa = _binom_logpmf(n, p)
    total = 0.0
    for a in range(n + 1):
        f1 = np.arange(a + 1)[:, None]
        f0 = np.arange(n - a + 1)[None, :]
        iota = (a - f1) * i11 + f1 * i10 + (n - a - f0) * i00 + f0 * i01
        logw = log_pa[a] + _binom_logpmf(a, eps)[:, None] + _binom_logpmf(n - a, eps)[None, :]
        total += float(np.sum(np.exp(logw + np.minimum(0.0, log_A - iota))))
    return total


def _slot_plan(sched: SlotSchedule):
    """(length, k, exponent multiplier of d log M) per slot."""
    return [(n, 4 if j == 0 else 3, 2 if j == 0 else 1) for j, n in enumerate(sched.slot_lengths)]


def achievability_bound(bq: BoundQuery) -> BoundResult:
    """Upper bound on the excess-resolution probability at resolution (B+1)/M."""
    sched, ch, p, M, eta = bq.sched, bq.channel, bq.p, bq.M, bq.eta
    d, v_plus = sched.dimension, sched.max_speed
    if bq.mode == "rcu_exact" and not ch.discrete:
        raise ValueError("rcu_exact needs a discrete channel; use gaussian_approx or literal for AWGN")
    slot_terms, atyp, trunc = [], [], []
    warning = None
    mom = moments(ch, p) if bq.mode == "gaussian_approx" else None
    for n, k, mult in _slot_plan(sched):
        log_A = slot_penalty(n, k, p, v_plus, eta, ch, d) + mult * d * math.log(M)
        if bq.mode == "literal":
            e_neg = exp_neg_density_mean(ch, p) ** n
            term = min(1.0, math.exp(min(log_A, 700.0)) * e_neg)
            if log_A >= 0:
                warning = ("literal form is vacuous: E[exp(-iota)] = 1 and exp(zeta) M^{kd} >= 1, "
                           "so the first term is 1")
        elif bq.mode == "rcu_exact":
            term = rcu_bsc(n, log_A, p, ch.flip_prob(ch.state(p)))
        else:
            thr = log_A + math.log(n)
            sd = math.sqrt(n * mom.variance)
            be = 6 * mom.third_abs_moment / math.sqrt(n * mom.variance ** 3)
            term = min(1.0, stats.norm.cdf((thr - n * mom.mean) / sd) + be + 1.0 / n)
        slot_terms.append(term)
        atyp.append(4 * n * math.exp(-2 * (n * M) ** d * eta * eta))
        trunc.append(0.0 if ch.discrete else math.exp(-n * GAUSS_TAIL_EXPONENT))
    total = sum(slot_terms) + sum(atyp) + sum(trunc)
    if warning:
        warnings.warn(warning, stacklevel=2)
    return BoundResult(total, tuple(slot_terms), tuple(atyp), tuple(trunc), bq.mode, warning)


ETA_GRID = tuple(np.geomspace(1e-4, 1.0, 81).tolist())


def best_eta(sched: SlotSchedule, M: int, p: float, ch: ChannelModel, mode: str = "rcu_exact",
             grid=ETA_GRID) -> float:
    """The eta on ``grid`` giving the smallest achievability bound (any eta > 0 is admissible)."""
    best, arg = math.inf, None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for eta in grid:
            try:
                total = achievability_bound(BoundQuery(sched, M, p, eta, ch, mode)).total
            except ValueError:
                continue
            if total < best:
                best, arg = total, eta
    if arg is None:
        raise ValueError("no admissible eta on the grid")
    return float(arg)


@dataclass(frozen=True)
class ConverseResult:
    value: float
    q_star: float
    q_grid: tuple[float, ...]
    r_values: tuple[float, ...]
    beta: float
    kappa: float

    def rate(self, sched: SlotSchedule) -> float:
        """Upper bound on -log(delta) / n_B."""
        return self.value / ((sched.num_slots + 1) * sched.dimension * sched.total_time)


def converse_bound(sched: SlotSchedule, eps: float, ch: ChannelModel, q_grid=None,
                   beta: float | None = None, kappa: float | None = None,
                   statement_form: bool = False) -> ConverseResult:
    """Upper bound on -(B+1) d log(delta) for any non-adaptive procedure.

    The supremum over query sequences is restricted to constant-measure plans
    |A_t| = q; the information-spectrum quantile is replaced by its
    Berry-Esseen normal approximation.  ``statement_form`` uses 2(1+4B)d beta
    instead of 2(1+4B v_+)d beta for the slack.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    v_plus, B, d, nB = sched.max_speed, sched.num_slots, sched.dimension, sched.total_time
    if v_plus <= 0:
        raise ValueError("converse needs v_+ > 0 (the velocity-resolution term diverges at 0)")
    beta = 1 / math.sqrt(nB) if beta is None else beta
    kappa = 1 / nB if kappa is None else kappa
    beta_term = 2 * (1 + 4 * B * (1 if statement_form else v_plus)) * d * beta
    slack = beta_term + kappa
    if not 0 < beta < (1 - eps) / 2 or not 0 < kappa < 1 - eps - beta_term:
        raise ValueError(f"beta={beta}, kappa={kappa} violate the admissible ranges for eps={eps}")
    if q_grid is None:
        cap = capacity(ch)
        q_grid = sorted(set(np.round(np.linspace(0.05, 0.95, 91), 12).tolist()) | set(cap.maximizers))
    r_vals = []
    for q in q_grid:
        m = moments(ch, float(q))
        arg = eps + slack + 6 * m.third_abs_moment / math.sqrt(nB * m.variance ** 3)
        if not 0 < arg < 1:
            raise ValueError(f"normal-quantile argument {arg:.4g} outside (0,1) at q={q}; "
                             "n_B too small for this q grid")
        r_vals.append(nB * m.mean + math.sqrt(nB * m.variance) * stats.norm.ppf(arg))
    i = int(np.argmax(r_vals))
    value = (r_vals[i] - (B + 1) * d * math.log(beta)
             - sum(math.log(2 * N * v_plus) for N in sched.slot_lengths) - math.log(kappa))
    return ConverseResult(value, float(q_grid[i]), tuple(float(q) for q in q_grid), tuple(r_vals), beta, kappa)


@dataclass(frozen=True)
class RateReport:
    achievable_neg_log_delta: float
    converse_neg_log_delta: float
    achievable_rate: float
    converse_rate: float
    corollary_rate: float
    cold_restart_rate: float
    eps_split: tuple[float, ...]
    p: float
    eta: float
    notes: str = ZEROED_NOTE
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _lower_value(split, sched, cap, p, eta, ch):
    d, v_plus = sched.dimension, sched.max_speed
    parts = []
    for j, ((n, k, _), ej) in enumerate(zip(_slot_plan(sched), split)):
        val = (n * cap.C + math.sqrt(n * cap.V_eps(ej)) * stats.norm.ppf(ej)
               - slot_penalty(n, k, p, v_plus, eta, ch, d) - math.log(n))
        parts.append(val / 2 if j == 0 else val)
    return min(parts) - d * math.log(sched.num_slots + 1)


def _simplex(B: int, units: int):
    """All compositions of ``units`` into B positive parts."""
    if B == 1:
        yield (units,)
        return
    for first in range(1, units - B + 2):
        for rest in _simplex(B - 1, units - first):
            yield (first,) + rest


def second_order_rates(sched: SlotSchedule, eps: float, ch: ChannelModel, p: float | None = None,
                       eta: float | None = None, step: float = 0.01,
                       cap: CapacityReport | None = None) -> RateReport:
    """Second-order achievable and converse resolution rates with remainders zeroed."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    cap = capacity(ch) if cap is None else cap
    p = cap.p_star if p is None else p
    nB, B, d = sched.total_time, sched.num_slots, sched.dimension
    eta = math.log(nB) / nB if eta is None else eta
    units = int(round(1 / step))
    if units < B:
        raise ValueError(f"step {step} too coarse for {B} slots")
    best, best_split = -math.inf, None
    for comp in _simplex(B, units):
        split = tuple(eps * c / units for c in comp)
        v = _lower_value(split, sched, cap, p, eta, ch)
        if v > best:
            best, best_split = v, split
    if B == 2:
        w0 = best_split[0] / eps
        res = optimize.minimize_scalar(
            lambda w: -_lower_value((eps * w, eps * (1 - w)), sched, cap, p, eta, ch),
            bounds=(max(w0 - step, 1e-9), min(w0 + step, 1 - 1e-9)), method="bounded",
            options={"xatol": 1e-10})
        if -res.fun > best:
            best, best_split = -float(res.fun), (eps * float(res.x), eps * (1 - float(res.x)))
    upper = nB * cap.C + math.sqrt(nB * cap.V_eps(eps)) * stats.norm.ppf(eps)
    lower_nld = best / d
    upper_nld = upper / ((B + 1) * d)
    corollary = cap.C / ((B + 1) * d)
    return RateReport(lower_nld, upper_nld, lower_nld / nB, upper_nld / nB, corollary, corollary / 2,
                      best_split, p, eta)


@dataclass(frozen=True)
class PhaseCurve:
    n: int
    rates: np.ndarray
    eps_star: np.ndarray
    threshold: float


def phase_curve(n: int, d: int, ch: ChannelModel, eps_for_Veps: float, rate_grid,
                printed_form: bool = False, cap: CapacityReport | None = None) -> PhaseCurve:
    """Normal approximation of the minimal excess-resolution probability vs rate -log(delta)/n.

    The default uses the factor 2d, which puts eps* = 1/2 at rate C/(2d);
    ``printed_form`` uses d and moves the crossing to C/d.
    """
    cap = capacity(ch) if cap is None else cap
    factor = d if printed_form else 2 * d
    rates = np.asarray(rate_grid, dtype=float)
    V = cap.V_eps(eps_for_Veps)
    eps_star = stats.norm.cdf((factor * n * rates - n * cap.C) / math.sqrt(n * V))
    return PhaseCurve(n, rates, eps_star, cap.C / factor)


def chernoff_exponent(theta, sigma: float):
    """I(theta, sigma^2) = 2 theta sigma^2 + log(1 - 2 theta sigma^2) / 2."""
    x = 2 * np.asarray(theta, dtype=float) * sigma * sigma
    return x + 0.5 * np.log1p(-x)


def gaussian_tail(n: int, sigma: float) -> tuple[float, float]:
    """Chernoff bound on Pr{sum of n squared N(0, sigma^2) > 2 n sigma^2} and its optimal theta."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return math.exp(-n * GAUSS_TAIL_EXPONENT), 1.0 / (4 * sigma * sigma)

