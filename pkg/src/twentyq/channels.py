"""Query-dependent noisy oracles.

The noise level of each answer depends on the Lebesgue measure q of the
queried region through a state f(q).  For the binary symmetric variant the
answer is flipped with probability zeta * f(q); for the Gaussian variant the
answer is x + sigma * f(q) * Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_XI_MAX = 1e-3
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class ChannelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SizeFunction:
    """Affine state map f(q) = a q + b."""

    a: float = 2.0
    b: float = 0.5

    def __call__(self, q):
        return self.a * np.asarray(q, dtype=float) + self.b if np.ndim(q) else self.a * float(q) + self.b

    @property
    def lipschitz_K(self) -> float:
        return abs(self.a)

    def range_on_unit(self) -> tuple[float, float]:
        ends = (self.b, self.a + self.b)
        return min(ends), max(ends)


@dataclass(frozen=True)
class ChannelModel:
    kind: str
    param: float
    f: SizeFunction = field(default_factory=SizeFunction)

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        lo, hi = self.f.range_on_unit()
        if kind == "bsc":
            if not 0 < self.param <= 1:
                raise ChannelConfigError(f"BSC zeta must lie in (0, 1], got {self.param}")
            if lo * self.param <= 0:
                raise ChannelConfigError(
                    f"BSC flip probability zeta*f(q) must be > 0 on [0,1]; min is {lo * self.param}")
            if hi * self.param > 0.5:
                raise ChannelConfigError(
                    f"BSC flip probability zeta*f(q) must be <= 0.5 on [0,1]; max is {hi * self.param}")
        elif kind == "awgn":
            if not self.param > 0:
                raise ChannelConfigError(f"AWGN sigma must be > 0, got {self.param}")
            if lo <= 0:
                raise ChannelConfigError(f"AWGN noise std f(q)*sigma must be > 0 on [0,1]; min f is {lo}")
        else:
            raise ChannelConfigError(f"unknown channel type {self.kind!r}")

    @classmethod
    def bsc(cls, zeta: float = 0.2, f: SizeFunction | None = None) -> "ChannelModel":
        return cls("bsc", zeta, f or SizeFunction())

    @classmethod
    def awgn(cls, sigma: float = 2.0, f: SizeFunction | None = None) -> "ChannelModel":
        return cls("awgn", sigma, f or SizeFunction())

    @classmethod
    def from_dict(cls, spec: dict) -> "ChannelModel":
        kind = str(spec.get("type", "bsc")).lower()
        fd = spec.get("f", {})
        f = SizeFunction(float(fd.get("a", 2.0)), float(fd.get("b", 0.5)))
        if kind == "bsc":
            return cls("bsc", float(spec.get("zeta", 0.2)), f)
        if kind == "awgn":
            return cls("awgn", float(spec.get("sigma", 2.0)), f)
        raise ChannelConfigError(f"unknown channel type {kind!r}")

    def to_dict(self) -> dict:
        key = "zeta" if self.kind == "bsc" else "sigma"
        return {"type": self.kind, key: self.param, "f": {"a": self.f.a, "b": self.f.b}}

    @property
    def discrete(self) -> bool:
        return self.kind == "bsc"

    @property
    def K(self) -> float:
        return self.f.lipschitz_K

    def flip_prob(self, state):
        """BSC crossover probability at a given state value u = f(q)."""
        return self.param * state

    def noise_std(self, state):
        return self.param * state

    def state(self, q):
        return self.f(q)

    def log_lik(self, state, x, y):
        """log P^state(y | x); a density for the Gaussian channel."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.discrete:
            eps = self.flip_prob(state)
            with np.errstate(divide="ignore"):
                return np.where(y == x, np.log1p(-eps), np.log(eps))
        s = self.noise_std(state)
        return -0.5 * ((y - x) / s) ** 2 - np.log(s) - _LOG_SQRT_2PI


def _check_q(q):
    qa = np.asarray(q, dtype=float)
    if np.any(qa < 0) or np.any(qa > 1) or np.any(np.isnan(qa)):
        raise ValueError(f"query measure must lie in [0, 1], got {q}")


def transition_prob(ch: ChannelModel, q, x, y):
    """P^{f(q)}(y | x): a probability for the BSC, a density for AWGN."""
    _check_q(q)
    out = np.exp(ch.log_lik(ch.state(q), x, y))
    return out if np.ndim(out) else float(out)


def sample_output(ch: ChannelModel, q, x, rng: np.random.Generator):
    """Noisy answers to bits ``x`` posed with query measures ``q`` (broadcast)."""
    _check_q(q)
    x = np.asarray(x)
    state = ch.state(q)
    if ch.discrete:
        flips = rng.random(np.broadcast(x, state).shape) < ch.flip_prob(state)
        return np.bitwise_xor(x.astype(np.int8), flips.astype(np.int8))
    z = rng.standard_normal(np.broadcast(x, state).shape)
    return x + ch.noise_std(state) * z


def continuity_constant(ch: ChannelModel, u: float, xi_max: float = DEFAULT_XI_MAX) -> float:
    """Lipschitz majorant c(u) of the BSC log-likelihood in the state.

    d/du' log(zeta u') = 1/u' and |d/du' log(1 - zeta u')| = zeta / (1 - zeta u'),
    so the supremum over u' in [u - xi_max, u + xi_max] is attained at the
    interval ends: 1/(u - xi_max) for the first branch, zeta/(1 - zeta (u + xi_max))
    for the second.
    """
    if not ch.discrete:
        raise ValueError("the continuity constant is defined for the BSC only; "
                         "the Gaussian channel is handled through its truncated variant")
    if xi_max <= 0:
        raise ValueError(f"xi_max must be > 0, got {xi_max}")
    zeta = ch.param
    lo, hi = u - xi_max, u + xi_max
    if lo <= 0 or zeta * hi >= 1:
        raise ValueError(f"interval [{lo}, {hi}] leaves the valid state range (0, {1 / zeta})")
    return max(1.0 / lo, zeta / (1.0 - zeta * hi))
