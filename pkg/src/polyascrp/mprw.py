"""Multiplicity random walk U_{B,t} on the positive integers.

Tables are particles sitting at their size; a new table enters at 1 at
rate rho(B)/(1-s) and each stack of size-j tables moves one site right at
rate j eta(j)/(1-s).  In the clock u = -log(1-s) every rate is constant
between events, so the chain is simulated exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .measure_core import MultiplicityProfile, SignedProfile
from .rand_kit import TAIL_MASS, LogSeries, NegativeBinomial, RngStream

BIRTH = "birth"
HOP = "hop"


@dataclass(frozen=True)
class ProfileEvent:
    u: float
    s: float
    kind: str
    j: int  # 1 for a birth, origin site for a hop


@dataclass(frozen=True)
class ProfileTrajectory:
    events: tuple[ProfileEvent, ...]
    final: MultiplicityProfile
    t_end: float

    def states(self) -> list[MultiplicityProfile]:
        """Profile after each event (replayed from the empty profile)."""
        eta = MultiplicityProfile()
        out = []
        for ev in self.events:
            eta = eta.birth() if ev.kind == BIRTH else eta.hop(ev.j)
            out.append(eta)
        return out

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("u_time", "s_time", "event_kind", "j"))
        for ev in self.events:
            w.writerow((repr(ev.u), repr(ev.s), ev.kind, ev.j))
        w.writerow(())
        w.writerow(("j", "count"))
        for j, c in self.final.items():
            w.writerow((j, c))


class _Stacks:
    """Mutable site counts with O(support) weighted site selection."""

    def __init__(self) -> None:
        self.counts: dict[int, int] = {}
        self.mass = 0  # sum_j j * counts[j]

    def birth(self) -> None:
        self.counts[1] = self.counts.get(1, 0) + 1
        self.mass += 1

    def pick(self, k: int) -> int:
        """Site of the k-th unit (0 <= k < mass) in site order."""
        for j in sorted(self.counts):
            w = j * self.counts[j]
            if k < w:
                return j
            k -= w
        raise IndexError(k)

    def hop(self, j: int) -> None:
        c = self.counts[j] - 1
        if c:
            self.counts[j] = c
        else:
            del self.counts[j]
        self.counts[j + 1] = self.counts.get(j + 1, 0) + 1
        self.mass += 1


def simulate_events(
    rho_b: float,
    t_end: float,
    rng: RngStream,
    *,
    record: bool = True,
) -> ProfileTrajectory:
    """Exact path of U_{B,s} for s in [0, t_end].

    With ``record=False`` only the terminal profile is kept.
    """
    if not 0.0 <= t_end < 1.0:
        raise ValueError(f"t_end must lie in [0, 1), got {t_end}")
    u_end = -math.log1p(-t_end)
    st = _Stacks()
    events = []
    u = 0.0
    gen = rng.gen
    while True:
        total = rho_b + st.mass
        if total <= 0:
            break
        u += gen.standard_exponential() / total
        if u > u_end:
            break
        x = gen.random() * total
        if x < rho_b:
            st.birth()
            kind, j = BIRTH, 1
        else:
            j = st.pick(min(int(x - rho_b), st.mass - 1))
            st.hop(j)
            kind = HOP
        if record:
            events.append(ProfileEvent(u, -math.expm1(-u), kind, j))
    return ProfileTrajectory(tuple(events), MultiplicityProfile(st.counts), t_end)


def simulate_event_profiles(
    rho_b: float, t_end: float, rng: RngStream, birth_after: float | None = None
) -> tuple[MultiplicityProfile, list[int]]:
    """Terminal profile plus, if ``birth_after`` is given, the terminal sizes
    of tables born after that time.

    Individual tables are tracked, so the sizes at ``t_end`` of late-born
    tables can be compared with their predicted law.
    """
    u_end = -math.log1p(-t_end)
    u_cut = -math.log1p(-birth_after) if birth_after is not None else math.inf
    sizes: list[int] = []
    late: list[bool] = []
    units: list[int] = []  # table index of each unit of mass
    gen = rng.gen
    u = 0.0
    while True:
        total = rho_b + len(units)
        u += gen.standard_exponential() / total
        if u > u_end:
            break
        x = gen.random() * total
        if x < rho_b:
            sizes.append(1)
            late.append(u > u_cut)
            units.append(len(sizes) - 1)
        else:
            k = units[min(int(x - rho_b), len(units) - 1)]
            sizes[k] += 1
            units.append(k)
    eta = MultiplicityProfile(_tally(sizes))
    return eta, [m for m, l in zip(sizes, late) if l]


def entry_size_law(s: float, t: float) -> LogSeries:
    """Sizes at time t of the tables opened during (s, t].

    Under the forward kernel these tables are the fresh part of
    Poy_{z, rho} with z = (t-s)/(1-s), so their sizes are i.i.d.
    log-series(z); their number is Poisson(-rho(B) log(1-z)).
    """
    if not 0.0 <= s < t < 1.0:
        raise ValueError("need 0 <= s < t < 1")
    return LogSeries((t - s) / (1.0 - s))


def _tally(values) -> dict[int, int]:
    out: dict[int, int] = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return out


@dataclass(frozen=True)
class ProfileLaw:
    """Independent Poisson(lambda_j) site counts, sites 1..truncation."""

    means: np.ndarray
    truncation: int

    def mean(self, j: int) -> float:
        return float(self.means[j - 1]) if j <= self.truncation else 0.0


def marginal_profile_law(rho_b: float, t: float, tail: float = TAIL_MASS) -> ProfileLaw:
    """lambda_j = rho(B) t^j / j, truncated once the remaining total mass is below ``tail``."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    lam = []
    j = 1
    while True:
        lam.append(rho_b * t**j / j)
        # sum_{k>j} rho t^k / k <= rho t^{j+1} / ((j+1)(1-t))
        if rho_b * t ** (j + 1) / ((j + 1) * (1 - t)) < tail:
            break
        j += 1
    return ProfileLaw(np.array(lam), len(lam))


def sample_profile(rho_b: float, t: float, rng: RngStream, j_max: int | None = None) -> np.ndarray:
    """U_{B,t} drawn from its Poisson law: counts at sites 1..j_max."""
    law = marginal_profile_law(rho_b, t)
    lam = law.means
    if j_max is not None:
        lam = np.concatenate([lam, np.zeros(max(0, j_max - len(lam)))])[:j_max]
    return rng.gen.poisson(lam)


def profile_generator_apply(
    f: Callable[[MultiplicityProfile], float],
    eta: MultiplicityProfile,
    s: float,
    rho_b: float,
) -> float:
    if not s < 1.0:
        raise ValueError("generator defined for s < 1")
    f0 = f(eta)
    acc = rho_b * (f(eta.birth()) - f0)
    for j, c in eta.items():
        acc += j * c * (f(eta.hop(j)) - f0)
    return acc / (1.0 - s)


@dataclass(frozen=True)
class DifferentiableFunctional:
    """Functional on signed profiles with its Gateaux derivatives.

    ``grad(xi, j)`` is f'(xi)[delta_j]; ``hess(xi, j, k)`` is
    f''(xi)[delta_j, delta_k].  The gradient (and Hessian, if given) are
    compared against finite differences of ``eval`` at construction.
    """

    eval: Callable[[SignedProfile], float]
    grad: Callable[[SignedProfile, int], float]
    hess: Callable[[SignedProfile, int, int], float] | None = None
    bound: float = 1.0
    probe_sites: int = 4
    check: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        if self.check:
            self.verify()

    def __call__(self, xi: SignedProfile) -> float:
        return self.eval(xi)

    def directional(self, xi: SignedProfile, direction: SignedProfile) -> float:
        return sum(direction[j] * self.grad(xi, j) for j in range(1, direction.j_max + 1))

    def verify(self, rtol: float = 1e-6) -> None:
        probes = [
            SignedProfile.zeros(self.probe_sites),
            SignedProfile(0.1 * np.sin(np.arange(1, self.probe_sites + 1))),
        ]
        for xi in probes:
            for j in range(1, self.probe_sites + 1):
                fd = _central(lambda e: self.eval(xi.shifted(j, e)))
                g = self.grad(xi, j)
                if abs(fd - g) > rtol * max(1.0, abs(g)):
                    raise ValueError(f"gradient mismatch at site {j}: {g} vs finite difference {fd}")
                if self.hess is None:
                    continue
                for k in range(1, self.probe_sites + 1):
                    fdh = _central(lambda e: self.grad(xi.shifted(k, e), j))
                    h = self.hess(xi, j, k)
                    if abs(fdh - h) > 1e-5 * max(1.0, abs(h)):
                        raise ValueError(f"hessian mismatch at ({j},{k}): {h} vs {fdh}")


def _central(fun: Callable[[float], float], eps: float = 1e-5) -> float:
    return (fun(eps) - fun(-eps)) / (2 * eps)


def exp_linear(g) -> DifferentiableFunctional:
    """f(xi) = exp(xi(g)); f' = f g, f'' = f g (x) g."""
    g = np.asarray(g, dtype=float)
    gv = lambda j: float(g[j - 1]) if 1 <= j <= len(g) else 0.0
    val = lambda xi: math.exp(xi.pair(g))
    return DifferentiableFunctional(
        eval=val,
        grad=lambda xi, j: val(xi) * gv(j),
        hess=lambda xi, j, k: val(xi) * gv(j) * gv(k),
        bound=math.inf,
        probe_sites=len(g) + 1,
    )


def linear(g) -> DifferentiableFunctional:
    """f(xi) = xi(g)."""
    g = np.asarray(g, dtype=float)
    gv = lambda j: float(g[j - 1]) if 1 <= j <= len(g) else 0.0
    return DifferentiableFunctional(
        eval=lambda xi: xi.pair(g),
        grad=lambda xi, j: gv(j),
        hess=lambda xi, j, k: 0.0,
        bound=float(np.abs(g).max(initial=0.0)),
        probe_sites=len(g) + 1,
    )


def site_square(site: int) -> DifferentiableFunctional:
    """f(xi) = xi(site)^2."""
    return DifferentiableFunctional(
        eval=lambda xi: xi[site] ** 2,
        grad=lambda xi, j: 2 * xi[site] if j == site else 0.0,
        hess=lambda xi, j, k: 2.0 if j == k == site else 0.0,
        bound=math.inf,
        probe_sites=site + 1,
    )


def _series_cutoff(s: float, support: int, scale: float, eps: float = 1e-14) -> int:
    """Last site j to sum: past ``support`` and with s^j * scale below eps."""
    j = max(support, 1)
    if s <= 0.0:
        return j
    scale = max(1.0, scale)
    while s**j * scale >= eps:
        j += 1
    return j


def centered_generator_apply(
    f: DifferentiableFunctional,
    xi: SignedProfile,
    s: float,
    rho_b: float,
) -> float:
    """Generator of U_{B,t} - rho(B) tau_t applied to f at xi."""
    if not s < 1.0:
        raise ValueError("generator defined for s < 1")
    f0 = f(xi)
    scale = abs(f0) + max((abs(f.grad(xi, j)) for j in range(1, xi.j_max + 2)), default=0.0)
    j_top = _series_cutoff(s, xi.j_max + 1, rho_b * scale)
    birth = rho_b / (1.0 - s) * (f(xi.shifted(1, 1.0)) - f0)
    drift = -rho_b * sum(s ** (j - 1) * f.grad(xi, j) for j in range(1, j_top + 1))
    hops = 0.0
    for j in range(1, j_top + 1):
        w = j * xi[j] + rho_b * s**j
        if w:
            hops += w * (f(xi.hop(j)) - f0)
    return birth + drift + hops / (1.0 - s)


def particle_step_law(j: int, s: float, t: float) -> NegativeBinomial:
    """Displacement of one size-j table over (s, t]: NB(j, (t-s)/(1-s))."""
    if not 0.0 <= s <= t < 1.0:
        raise ValueError("need 0 <= s <= t < 1")
    return NegativeBinomial(float(j), (t - s) / (1.0 - s))


def tracked_steps(
    j: int, rho_b: float, s: float, t: float, rng: RngStream
) -> list[int]:
    """Displacements over (s, t] of every table that has size ``j`` at time s.

    Runs a table-tracking event simulation to ``t`` and reads off the
    growth of the tables that sat at site ``j`` at time ``s``.
    """
    u_s, u_t = -math.log1p(-s), -math.log1p(-t)
    sizes: list[int] = []
    units: list[int] = []
    snap: list[int] | None = None
    gen = rng.gen
    u = 0.0
    while True:
        total = rho_b + len(units)
        u_next = u + gen.standard_exponential() / total
        if snap is None and u_next > u_s:
            snap = [k for k, m in enumerate(sizes) if m == j]
            start = {k: j for k in snap}
        if u_next > u_t:
            break
        u = u_next
        x = gen.random() * total
        if x < rho_b:
            sizes.append(1)
            units.append(len(sizes) - 1)
        else:
            k = units[min(int(x - rho_b), len(units) - 1)]
            sizes[k] += 1
            units.append(k)
    return [sizes[k] - start[k] for k in snap]


def centered_state(eta: MultiplicityProfile, rho_b: float, t: float, j_max: int) -> SignedProfile:
    """xi = U - rho(B) tau_t on sites 1..j_max."""
    jj = np.arange(1, j_max + 1)
    return SignedProfile(eta.as_array(j_max) - rho_b * t**jj / jj)

