"""Information density under Bernoulli(p) inputs and its moments.

The density at input bias p and channel state u is
    iota(x; y) = log P^u(y|x) - log(p P^u(y|1) + (1-p) P^u(y|0)).
For capacity the state follows the input bias, u = f(p), which can make the
objective non-concave in p, so capacity is found by a global grid scan
followed by bounded scalar refinement of every grid-local maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .channels import ChannelModel

QUAD_TAIL = 14.0  # integrate AWGN outputs over x +- QUAD_TAIL noise stds
QUAD_TOL = 1e-12


@dataclass(frozen=True)
class MomentReport:
    p: float
    state: float
    mean: float
    variance: float
    third_abs_moment: float


@dataclass(frozen=True)
class CapacityReport:
    C: float
    maximizers: tuple[float, ...]
    variances: tuple[float, ...]
    third_moments: tuple[float, ...]

    @property
    def V_eps_low(self) -> float:
        return min(self.variances)

    @property
    def V_eps_high(self) -> float:
        return max(self.variances)

    @property
    def p_star(self) -> float:
        return self.maximizers[0]

    def V_eps(self, eps: float) -> float:
        return self.V_eps_high if eps <= 0.5 else self.V_eps_low

    def maximizer_for(self, eps: float) -> int:
        """Index of the maximizer whose dispersion is selected for ``eps``."""
        target = self.V_eps(eps)
        return self.variances.index(target)

    def to_dict(self) -> dict:
        return {"C": self.C, "maximizers": list(self.maximizers), "variances": list(self.variances),
                "third_abs_moments": list(self.third_moments),
                "V_eps_low": self.V_eps_low, "V_eps_high": self.V_eps_high}


def _check_p(p):
    if not 0 < p < 1:
        raise ValueError(f"input bias p must lie in (0, 1), got {p}")


def log_output_marginal(ch: ChannelModel, p: float, state, y):
    """log P_Y(y) = log(p P(y|1) + (1-p) P(y|0))."""
    return np.logaddexp(np.log(p) + ch.log_lik(state, 1.0, y),
                        np.log1p(-p) + ch.log_lik(state, 0.0, y))


def info_density(ch: ChannelModel, p: float, state, x, y):
    """Per-symbol information density in nats (vectorized over x, y).

    Zero-probability outputs of a discrete channel give -inf.
    """
    _check_p(p)
    with np.errstate(divide="ignore"):
        out = ch.log_lik(state, x, y) - log_output_marginal(ch, p, state, y)
    return out if np.ndim(out) else float(out)


def empirical_info_density(ch: ChannelModel, p: float, state, x_vec, y_vec) -> float:
    x_vec = np.asarray(x_vec, dtype=float)
    if x_vec.size == 0:
        return 0.0
    return float(np.sum(info_density(ch, p, state, x_vec, np.asarray(y_vec, dtype=float))))


def _awgn_expect(ch: ChannelModel, p: float, state: float, g) -> float:
    """E[g(iota(X;Y), X, Y)] by adaptive quadrature over y for each input."""
    s = ch.noise_std(state)
    total = 0.0
    for x, px in ((0.0, 1.0 - p), (1.0, p)):
        def integrand(y, x=x):
            return np.exp(ch.log_lik(state, x, y)) * g(info_density(ch, p, state, x, y), x, y)
        val, _ = integrate.quad(integrand, x - QUAD_TAIL * s, x + QUAD_TAIL * s,
                                points=[0.0, 0.5, 1.0], epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        total += px * val
    return total


def _bsc_table(ch: ChannelModel, p: float, state: float):
    """(probabilities, densities) over the four (x, y) pairs."""
    eps = ch.flip_prob(state)
    x = np.array([0, 0, 1, 1], dtype=float)
    y = np.array([0, 1, 0, 1], dtype=float)
    px = np.where(x == 1, p, 1 - p)
    pyx = np.where(x == y, 1 - eps, eps)
    return px * pyx, info_density(ch, p, state, x, y)


def expect(ch: ChannelModel, p: float, g, state=None) -> float:
    """E[g(iota)] under Bern(p) inputs and state ``state`` (default f(p))."""
    _check_p(p)
    state = ch.state(p) if state is None else state
    if ch.discrete:
        w, i = _bsc_table(ch, p, state)
        mask = w > 0
        return float(np.sum(w[mask] * g(i[mask])))
    return _awgn_expect(ch, p, state, lambda i, x, y: g(i))


def moments(ch: ChannelModel, p: float, state=None) -> MomentReport:
    """Mean, variance and centered third absolute moment of iota."""
    _check_p(p)
    return _moments(ch, float(p), float(ch.state(p) if state is None else state))


@lru_cache(maxsize=4096)
def _moments(ch: ChannelModel, p: float, state: float) -> MomentReport:
    mean = expect(ch, p, lambda i: i, state)
    var = expect(ch, p, lambda i: (i - mean) ** 2, state)
    third = expect(ch, p, lambda i: np.abs(i - mean) ** 3, state)
    return MomentReport(p, state, mean, max(var, 0.0), third)


def exp_neg_density_mean(ch: ChannelModel, p: float, state=None) -> float:
    """E[exp(-iota)]; identically 1 under the generating measure."""
    return expect(ch, p, lambda i: np.exp(-i), state)


def mean_density(ch: ChannelModel, p: float) -> float:
    """Capacity objective E[iota_{p, f(p)}]."""
    return expect(ch, p, lambda i: i)


@lru_cache(maxsize=64)
def capacity(ch: ChannelModel, grid_size: int = 1001, refine_tol: float = 1e-9,
             merge_tol: float = 1e-6) -> CapacityReport:
    """C = max_p E[iota_{p,f(p)}] with the set of maximizers and their moments."""
    if grid_size < 101:
        raise ValueError(f"grid_size must be >= 101, got {grid_size}")
    grid = np.linspace(0.0, 1.0, grid_size + 2)[1:-1]
    vals = np.array([mean_density(ch, float(p)) for p in grid])
    peaks = [i for i in range(grid_size)
             if (i == 0 or vals[i] >= vals[i - 1]) and (i == grid_size - 1 or vals[i] >= vals[i + 1])]
    h = grid[1] - grid[0]
    cands = []
    for i in peaks:
        lo, hi = max(grid[i] - h, 1e-12), min(grid[i] + h, 1 - 1e-12)
        res = optimize.minimize_scalar(lambda p: -mean_density(ch, p), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        p_ref, v_ref = (float(res.x), -float(res.fun))
        if vals[i] > v_ref:
            p_ref, v_ref = float(grid[i]), float(vals[i])
        cands.append((p_ref, v_ref))
    best = max(v for _, v in cands)
    keep = sorted(p for p, v in cands if v >= best - refine_tol)
    merged = []
    for p in keep:
        if not merged or p - merged[-1] > merge_tol:
            merged.append(p)
    reports = [moments(ch, p) for p in merged]
    return CapacityReport(best, tuple(merged), tuple(r.variance for r in reports),
                          tuple(r.third_abs_moment for r in reports))
