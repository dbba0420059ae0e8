"""The spatial Chinese-restaurant-like process Y on [0, 1).

Forward increments over (s, t] are Polya sum draws with parameter
(t - s)/(1 - s) and intensity rho + Y_s; the backward kernel thins
with retention s(1 - t)/(t(1 - s)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measure_core import BaseMeasure, PointConfiguration, Trajectory, Window, count, superpose
from .polya_sum import PolyaParams, sample_urn, thin
from .rand_kit import BetaLaw, RngStream, negative_binomial, rising_factorial


@dataclass(frozen=True)
class TimePair:
    s: float
    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.s <= self.t < 1.0:
            raise ValueError(f"need 0 <= s <= t < 1, got s={self.s}, t={self.t}")

    @property
    def forward_z(self) -> float:
        return (self.t - self.s) / (1.0 - self.s)

    @property
    def retention(self) -> float:
        return retention(self.s, self.t)


@dataclass(frozen=True)
class CountFunctional:
    """phi(nu) = phi(nu(B)) for a bounded map ``phi`` on counts."""

    window: Window
    phi: Callable[[int], float]
    bound: float

    def __call__(self, config: PointConfiguration) -> float:
        return float(self.phi(count(config, self.window)))


def capped_count(window: Window, cap: int) -> CountFunctional:
    return CountFunctional(window, lambda n: np.minimum(n, cap) * 1.0, float(cap))


def forward_step(
    nu: PointConfiguration,
    tp: TimePair,
    base: BaseMeasure,
    window: Window | None,
    rng: RngStream,
) -> PointConfiguration:
    """Y_t given Y_s = nu, observed on ``window`` (``None``: all of ``base``)."""
    if tp.s == tp.t:
        return nu
    inc = sample_urn(PolyaParams(tp.forward_z, base, window), nu, rng)
    return superpose(nu, inc)


def sample_path(
    grid: Sequence[float],
    base: BaseMeasure,
    windows: Window | None = None,
    rng: RngStream | None = None,
) -> Trajectory:
    """Y on an increasing time grid, started from Y_0 = 0."""
    grid = [float(t) for t in grid]
    if not grid:
        raise ValueError("empty grid")
    if grid[0] < 0 or grid[-1] >= 1:
        raise ValueError("grid times must lie in [0, 1)")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    rng = rng if rng is not None else RngStream(0)
    states = []
    state, s = PointConfiguration(), 0.0
    for t in grid:
        state = forward_step(state, TimePair(s, t), base, windows, rng)
        states.append(state)
        s = t
    return Trajectory(tuple(grid), tuple(states))


def retention(s: float, t: float) -> float:
    if t == 0.0:
        if s > 0.0:
            raise ValueError("backward step from t = 0 needs s = 0")
        return 1.0
    return s * (1.0 - t) / (t * (1.0 - s))


def backward_step(nu: PointConfiguration, tp: TimePair, rng: RngStream) -> PointConfiguration:
    """Y_s given Y_t = nu: independent thinning."""
    return thin(nu, retention(tp.s, tp.t), rng)


@dataclass(frozen=True)
class ArrivalLaw:
    """Law of the (m+1)-th arrival time in a window of mass ``rho_b``."""

    m: int
    rho_b: float

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if not 0.0 < self.rho_b < math.inf:
            raise ValueError(f"window mass must be positive and finite, got {self.rho_b}")

    def survival(self, t: float) -> float:
        """P(tau_{m+1} > t) = P(Y_t(B) <= m)."""
        acc, term = 0.0, 1.0
        for k in range(self.m + 1):
            if k:
                term *= t * (self.rho_b + k - 1) / k
            acc += term
        return (1.0 - t) ** self.rho_b * acc

    def density(self, t: float) -> float:
        return (
            rising_factorial(self.rho_b, self.m + 1)
            / math.factorial(self.m)
            * t**self.m
            * (1.0 - t) ** (self.rho_b - 1.0)
        )

    def beta(self) -> BetaLaw:
        return BetaLaw(self.m + 1.0, self.rho_b)

    def joint_density(self, s: float, t: float) -> float:
        """Joint density of (tau_m, tau_{m+1}) at (s, t), m >= 1."""
        if self.m < 1:
            raise ValueError("joint density needs m >= 1")
        if not 0.0 <= s <= t <= 1.0:
            return 0.0
        m, r = self.m, self.rho_b
        return (
            rising_factorial(r, m + 1)
            / math.factorial(m - 1)
            * (1.0 - t) ** (r + m - 1)
            * s ** (m - 1)
            / (1.0 - s) ** (m + 1)
        )


def arrival_law(m: int, rho_b: float) -> ArrivalLaw:
    return ArrivalLaw(int(m), float(rho_b))


def sample_arrivals_stick(rho_b: float, m_max: int, rng: RngStream) -> np.ndarray:
    """tau_1 < ... < tau_{m_max}: tau_m = 1 - prod_{k<=m} (1 - U_k), U_k ~ Beta(1, rho_b + k - 1)."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    b = rho_b + np.arange(m_max)
    u = rng.gen.beta(1.0, b)
    # log-space keeps 1 - prod strictly increasing once prod is tiny
    return -np.expm1(np.cumsum(np.log1p(-u)))


def generator_apply(f: CountFunctional, nu: PointConfiguration, s: float) -> float:
    """A_s phi(nu) = (rho(B) + nu(B)) / (1 - s) [phi(nu(B) + 1) - phi(nu(B))].

    rho(B) is the mass of ``f.window``.
    """
    if not s < 1.0:
        raise ValueError("generator defined for s < 1")
    return float(generator_apply_count(f.phi, count(nu, f.window), s, f.window.mass))


def generator_apply_count(phi: Callable, n, s: float, rho_b: float):
    """Vectorized generator on a count functional evaluated at counts ``n``."""
    if not s < 1.0:
        raise ValueError("generator defined for s < 1")
    n = np.asarray(n)
    return (rho_b + n) / (1.0 - s) * (phi(n + 1) - phi(n))


@dataclass(frozen=True)
class KolmogorovResult:
    lhs: float
    rhs: float
    mc_se: float
    n: int

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs


def kolmogorov_residual(
    f: CountFunctional,
    t: float,
    h: float,
    n_samples: int,
    rng: RngStream,
) -> KolmogorovResult:
    """Central difference of E phi(Y_t(B)) against E A_t phi(Y_t(B)).

    The three times t-h, t, t+h are sampled on one monotone count path
    (the single-window chain: Y_{t-h} ~ NB(rho(B), t-h), then NB(rho(B) +
    current count, (t'-s)/(1-s)) increments), so the difference uses common
    random numbers.  ``f.phi`` must act elementwise on integer arrays.
    """
    fd, gen = kolmogorov_samples(f, t, h, n_samples, rng)
    se = float((fd - gen).std(ddof=1) / math.sqrt(n_samples))
    return KolmogorovResult(float(fd.mean()), float(gen.mean()), se, n_samples)


def kolmogorov_samples(
    f: CountFunctional, t: float, h: float, n_samples: int, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Per-path finite difference and generator value behind ``kolmogorov_residual``."""
    phi, rho_b = f.phi, f.window.mass
    if not (0 < t - h and t + h < 1):
        raise ValueError("need 0 < t - h and t + h < 1")
    y0 = negative_binomial(rho_b, t - h).sample(rng, n_samples)
    y1 = y0 + count_increment(y0, rho_b, t - h, t, rng)
    y2 = y1 + count_increment(y1, rho_b, t, t + h, rng)
    fd = (phi(y2) - phi(y0)) / (2 * h)
    return fd, generator_apply_count(phi, y1, t, rho_b)


def count_increment(y, rho_b: float, s: float, t: float, rng: RngStream):
    """Vectorized NB(rho(B) + y, (t-s)/(1-s)) increments of the count chain."""
    z = (t - s) / (1.0 - s)
    if z == 0:
        return np.zeros_like(y)
    lam = rng.gen.gamma(rho_b + np.asarray(y, dtype=float), z / (1.0 - z))
    return rng.gen.poisson(lam)


def time_change(u: float) -> float:
    if u < 0:
        raise ValueError("u must be >= 0")
    return u / (1.0 + u)


def inverse_time_change(t: float) -> float:
    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    return t / (1.0 - t)
