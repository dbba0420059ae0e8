"""Samplers of the Polya sum process on a window, thinning and condensation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure_core import (
    BaseMeasure,
    Location,
    PointConfiguration,
    Window,
    superpose,
)
from .rand_kit import RngStream, log_series, negative_binomial


@dataclass(frozen=True)
class PolyaParams:
    """Parameters z and rho of Poy_{z, rho}, observed on ``window``.

    ``window=None`` observes the union of all windows of ``base``.
    """

    z: float
    base: BaseMeasure
    window: Window | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.z < 1.0:
            raise ValueError(f"z must lie in [0, 1), got {self.z}")
        self.base.region(self.window)

    @property
    def region(self) -> tuple[Window, ...]:
        return self.base.region(self.window)

    @property
    def mass(self) -> float:
        return self.base.mass(self.window)


def fresh_location(region: tuple[Window, ...], rng: RngStream, weights=None) -> Location:
    """New atom in ``region``: window chosen by mass, uniform coordinate."""
    if len(region) == 1:
        w = region[0]
    else:
        w = region[int(rng.gen.choice(len(region), p=weights))]
    return Location(w.id, rng.fresh_tag(), float(rng.gen.random()))


def _region_weights(region: tuple[Window, ...]):
    if len(region) == 1:
        return None
    m = np.array([w.mass for w in region])
    return m / m.sum()


def sample_urn(p: PolyaParams, boost: PointConfiguration, rng: RngStream) -> PointConfiguration:
    """Draw from Poy_{z, rho + boost} on the window by sequential allocation.

    The total is NB(rho(B) + boost(B), z); the i-th point opens a new atom
    with probability rho(B) / (rho(B) + boost(B) + i - 1) and otherwise
    joins an atom chosen proportionally to its current multiplicity, boost
    atoms included.  Only the newly added points are returned.
    """
    region = p.region
    boost = boost.restrict(p.window)
    rho_b = p.mass
    n_boost = boost.total
    n = int(negative_binomial(rho_b + n_boost, p.z).sample(rng))
    if n == 0:
        return PointConfiguration()
    weights = _region_weights(region)
    # one entry per unit of mass already present; a uniform pick is a
    # multiplicity-proportional pick of an atom
    units: list[Location] = []
    for loc, m in boost.items():
        units.extend([loc] * m)
    added: dict[Location, int] = {}
    u = rng.gen.random(n)
    for i in range(n):
        denom = rho_b + len(units)
        x = u[i] * denom
        if x < rho_b:
            loc = fresh_location(region, rng, weights)
        else:
            loc = units[min(int(x - rho_b), len(units) - 1)]
        units.append(loc)
        added[loc] = added.get(loc, 0) + 1
    return PointConfiguration(added)


def sample_profile_method(p: PolyaParams, rng: RngStream) -> PointConfiguration:
    """Draw from Poy_{z, rho}: Poisson(-rho(B) log(1-z)) atoms with i.i.d.
    log-series(z) multiplicities."""
    if p.z == 0.0 or p.mass == 0.0:
        return PointConfiguration()
    k = int(rng.gen.poisson(-p.mass * math.log1p(-p.z)))
    if k == 0:
        return PointConfiguration()
    sizes = log_series(p.z).sample(rng, k)
    region, weights = p.region, _region_weights(p.region)
    return PointConfiguration(
        (fresh_location(region, rng, weights), int(m)) for m in sizes
    )


def thin(config: PointConfiguration, q: float, rng: RngStream) -> PointConfiguration:
    """Keep each unit of multiplicity independently with probability ``q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"retention must lie in [0, 1], got {q}")
    if q == 1.0 or not len(config):
        return config
    if q == 0.0:
        return PointConfiguration()
    locs = list(config)
    kept = rng.gen.binomial([config[l] for l in locs], q)
    return PointConfiguration(zip(locs, kept.tolist()))


def gamma_param(z: float, q: float) -> float:
    """Parameter of the Polya sum process obtained by thinning Poy_z with retention q."""
    return z * q / (1.0 - z * (1.0 - q))


def condense(
    z: float,
    gamma: float,
    base: BaseMeasure,
    rng: RngStream,
    window: Window | None = None,
) -> PointConfiguration:
    """Poy_{z, rho} assembled from nu ~ Poy_{gamma, rho} and
    mu ~ Poy_{(z-gamma)/(1-gamma), rho+nu}; returns mu + nu."""
    if not 0.0 <= gamma <= z < 1.0:
        raise ValueError(f"need 0 <= gamma <= z < 1, got gamma={gamma}, z={z}")
    nu = sample_profile_method(PolyaParams(gamma, base, window), rng)
    z2 = (z - gamma) / (1.0 - gamma)
    mu = sample_urn(PolyaParams(z2, base, window), nu, rng)
    return superpose(mu, nu)
