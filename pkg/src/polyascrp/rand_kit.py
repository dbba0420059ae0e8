"""Random streams, samplers and exact mass/density evaluators."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

TAIL_MASS = 1e-12


def derive_seed(master_seed: int, label: str) -> int:
    """Deterministic 64-bit seed for a named experiment under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(zlib.crc32(label.encode()),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class RngStream:
    """Random stream keyed by ``(master_seed, stream_index)``.

    The key fully determines the output; distinct indices give independent
    streams.  Fresh atom tags are ``(stream_index, *spawn_path, n)`` with
    ``n`` counting up, so tags from different streams never collide.
    """

    master_seed: int
    stream_index: int = 0
    spawn_path: tuple[int, ...] = ()
    gen: np.random.Generator = field(init=False, repr=False)
    _tags: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        key = (int(self.stream_index),) + tuple(self.spawn_path)
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        """Independent sub-stream ``k`` of this stream."""
        return RngStream(self.master_seed, self.stream_index, self.spawn_path + (int(k),))

    def fresh_tag(self) -> tuple[int, ...]:
        self._tags += 1
        return (int(self.stream_index),) + self.spawn_path + (self._tags,)


def as_stream(rng: RngStream | int) -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))


def rising_factorial(x: float, k: int) -> float:
    """x (x+1) ... (x+k-1); the empty product for k = 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = 1.0
    for i in range(k):
        out *= x + i
    return out


# -- elementary samplers --------------------------------------------------------


def poisson(rng: RngStream, lam, size=None):
    if np.any(np.asarray(lam) < 0):
        raise ValueError(f"Poisson mean must be >= 0, got {lam}")
    return rng.gen.poisson(lam, size)


def gamma(rng: RngStream, shape, scale, size=None):
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(scale) <= 0):
        raise ValueError(f"Gamma needs shape > 0 and scale > 0, got {shape}, {scale}")
    return rng.gen.gamma(shape, scale, size)


def binomial(rng: RngStream, n, p, size=None):
    if np.any(np.asarray(n) < 0) or not np.all((0 <= np.asarray(p)) & (np.asarray(p) <= 1)):
        raise ValueError(f"Binomial needs n >= 0 and p in [0, 1], got {n}, {p}")
    return rng.gen.binomial(n, p, size)


def bernoulli(rng: RngStream, p, size=None):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Bernoulli needs p in [0, 1], got {p}")
    return rng.gen.random(size) < p


def poisson_pmf(k, lam: float):
    k = np.asarray(k)
    if lam == 0:
        return np.where(k == 0, 1.0, 0.0)
    return np.exp(k * math.log(lam) - lam - special.gammaln(k + 1))


# -- laws ----------------------------------------------------------------------


@dataclass(frozen=True)
class NegativeBinomial:
    """NB(r, z): pmf (1-z)^r z^k r^[k] / k!, real shape r >= 0."""

    r: float
    z: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.z < 1.0:
            raise ValueError(f"NB success parameter must lie in [0, 1), got {self.z}")
        if self.r < 0:
            raise ValueError(f"NB shape must be >= 0, got {self.r}")

    @property
    def degenerate(self) -> bool:
        return self.r == 0 or self.z == 0

    def pmf(self, k):
        k = np.asarray(k, dtype=float)
        if self.degenerate:
            return np.where(k == 0, 1.0, 0.0)
        logp = (
            special.gammaln(self.r + k)
            - special.gammaln(self.r)
            - special.gammaln(k + 1)
            + self.r * math.log1p(-self.z)
            + k * math.log(self.z)
        )
        return np.where(k >= 0, np.exp(logp), 0.0)

    @property
    def mean(self) -> float:
        return self.r * self.z / (1 - self.z)

    @property
    def var(self) -> float:
        return self.r * self.z / (1 - self.z) ** 2

    def cutoff(self, tail: float = TAIL_MASS) -> int:
        """Smallest K with P(X > K) < tail."""
        if self.degenerate:
            return 0
        return int(special.nbdtrik(1 - tail, self.r, 1 - self.z)) + 1

    def sample(self, rng: RngStream, size=None):
        """Gamma(r, z/(1-z)) mixed Poisson draw."""
        if self.degenerate:
            return 0 if size is None else np.zeros(size, dtype=np.int64)
        lam = gamma(rng, self.r, self.z / (1 - self.z), size)
        return rng.gen.poisson(lam)


def negative_binomial(r: float, z: float) -> NegativeBinomial:
    return NegativeBinomial(float(r), float(z))


@dataclass(frozen=True)
class BetaLaw:
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta parameters must be positive, got {self.a}, {self.b}")

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < 1)
        x = np.where(inside, t, 0.5)
        logp = (self.a - 1) * np.log(x) + (self.b - 1) * np.log1p(-x) - special.betaln(self.a, self.b)
        return np.where(inside, np.exp(logp), 0.0)

    def cdf(self, t):
        return special.betainc(self.a, self.b, np.clip(t, 0.0, 1.0))

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def var(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1))

    def sample(self, rng: RngStream, size=None):
        return rng.gen.beta(self.a, self.b, size)


def beta_law(a: float, b: float) -> BetaLaw:
    return BetaLaw(float(a), float(b))


@lru_cache(maxsize=64)
def _log_series_table(t: float) -> np.ndarray:
    """Cumulative pmf up to the first j with remaining mass below TAIL_MASS."""
    norm = -math.log1p(-t)
    cdf = []
    term, acc, j = t, 0.0, 1
    while True:
        p = term / (j * norm)
        acc += p
        cdf.append(acc)
        # tail after j is below t^(j+1) / ((j+1)(1-t) norm)
        if t ** (j + 1) / ((j + 1) * (1 - t) * norm) < TAIL_MASS:
            break
        j += 1
        term *= t
    arr = np.array(cdf)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LogSeries:
    """Logarithmic series law on {1, 2, ...}: pmf t^j / (j L), L = -log(1-t)."""

    t: float

    def __post_init__(self) -> None:
        if not 0.0 < self.t < 1.0:
            raise ValueError(f"log-series parameter must lie in (0, 1), got {self.t}")

    @property
    def norm(self) -> float:
        return -math.log1p(-self.t)

    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.exp(j * math.log(self.t) - np.log(np.maximum(j, 1))) / self.norm
        return np.where(j >= 1, val, 0.0)

    @property
    def truncation(self) -> int:
        """Site beyond which the tail mass is below TAIL_MASS."""
        return len(_log_series_table(self.t))

    @property
    def mean(self) -> float:
        return self.t / ((1 - self.t) * self.norm)

    @property
    def var(self) -> float:
        L = self.norm
        return self.t * (L - self.t) / ((1 - self.t) ** 2 * L * L)

    def _invert_tail(self, u: float) -> int:
        cdf = _log_series_table(self.t)
        j = len(cdf)
        acc = cdf[-1]
        term = self.t**j
        while acc < u:
            j += 1
            term *= self.t
            new = acc + term / (j * self.norm)
            if new == acc:
                break
            acc = new
        return j

    def sample(self, rng: RngStream, size=None):
        cdf = _log_series_table(self.t)
        u = rng.gen.random(size)
        j = np.searchsorted(cdf, u, side="right") + 1
        if size is None:
            return int(j) if j <= len(cdf) else self._invert_tail(float(u))
        j = np.asarray(j, dtype=np.int64)
        for i in np.flatnonzero(j > len(cdf)):
            j[i] = self._invert_tail(float(u[i]))
        return j


def log_series(t: float) -> LogSeries:
    return LogSeries(float(t))
