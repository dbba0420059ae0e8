"""Hydrodynamic limit of the renormalized profile and its Gaussian fluctuations.

The limit profile is tau_t(j) = t^j / j.  It solves the transport system

    dV(1)/dt = (1 - V(1)) / (1 - t)
    dV(j)/dt = ((j-1) V(j-1) - j V(j)) / (1 - t),   j > 1,

which is lower triangular, so truncating at J_max does not perturb the
first J_max sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure_core import MultiplicityProfile, SignedProfile
from .mprw import DifferentiableFunctional, _series_cutoff, marginal_profile_law
from .rand_kit import RngStream


class HydroInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class HydroState:
    t: float
    V: np.ndarray

    @property
    def j_max(self) -> int:
        return len(self.V)

    @property
    def outflow(self) -> float:
        """Mass per unit time leaving through the truncation, times (1 - t)."""
        return self.j_max * float(self.V[-1])

    def analytic(self) -> np.ndarray:
        return tau(self.t, self.j_max)

    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.V - self.analytic())))


def tau(t: float, j_max: int) -> np.ndarray:
    jj = np.arange(1, j_max + 1)
    return t**jj / jj


def tau_tail(t: float, j_max: int) -> float:
    """Upper bound on sum_{j > j_max} t^j / j."""
    return t ** (j_max + 1) / ((j_max + 1) * (1 - t))


def scaled_profile(eta: MultiplicityProfile, rho_b: float, j_max: int | None = None) -> SignedProfile:
    if not rho_b > 0:
        raise ValueError("rho(B) must be positive")
    return SignedProfile(eta.as_array(j_max) / rho_b)


def _rhs(t: float, V: np.ndarray, jj: np.ndarray) -> np.ndarray:
    flux = jj * V
    d = np.empty_like(V)
    d[0] = 1.0 - flux[0]
    d[1:] = flux[:-1] - flux[1:]
    return d / (1.0 - t)


def hydro_rhs(state: HydroState) -> np.ndarray:
    if not state.t < 1.0:
        raise ValueError("the limit dynamics is defined for t < 1")
    return _rhs(state.t, np.asarray(state.V, dtype=float), np.arange(1, state.j_max + 1))


def hydro_integrate(
    t_end: float,
    j_max: int,
    step: float,
    *,
    check_fixed_point: bool = False,
    fixed_point_tol: float = 1e-10,
) -> HydroState:
    """Classical RK4 from V(0) = 0 to ``t_end`` with uniform steps close to ``step``.

    With ``check_fixed_point`` the analytic curve is plugged into the
    right-hand side at every step and its residual against
    d/dt (t^j / j) = t^(j-1) must stay below ``fixed_point_tol``.
    """
    if not 0.0 < t_end < 1.0:
        raise ValueError("t_end must lie in (0, 1)")
    V = _rk4_segment(np.zeros(j_max), 0.0, t_end, step, check_fixed_point, fixed_point_tol)
    return HydroState(t_end, V)


def hydro_curve(times, j_max: int, step: float) -> list[HydroState]:
    """States at each of the increasing ``times``, integrated in one pass from V(0) = 0."""
    times = [float(t) for t in times]
    if not times or times[0] <= 0 or times[-1] >= 1:
        raise ValueError("times must lie in (0, 1)")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    out, V, t0 = [], np.zeros(j_max), 0.0
    for t in times:
        V = _rk4_segment(V, t0, t, step)
        out.append(HydroState(t, V))
        t0 = t
    return out


def _rk4_segment(
    V: np.ndarray,
    t0: float,
    t1: float,
    step: float,
    check_fixed_point: bool = False,
    fixed_point_tol: float = 1e-10,
) -> np.ndarray:
    if not step > 0:
        raise ValueError("step must be positive")
    j_max = len(V)
    n = max(1, int(math.ceil((t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / n
    jj = np.arange(1, j_max + 1, dtype=float)
    for i in range(n):
        t = t0 + i * h
        k1 = _rhs(t, V, jj)
        k2 = _rhs(t + h / 2, V + h / 2 * k1, jj)
        k3 = _rhs(t + h / 2, V + h / 2 * k2, jj)
        k4 = _rhs(t + h, V + h * k3, jj)
        V = V + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(V)) or V.min() < -1e-12:
            bad = int(np.argmin(np.nan_to_num(V, nan=-np.inf))) + 1
            raise HydroInstabilityError(
                f"RK4 unstable at t={t + h:.6g} (site {bad}, value {V[bad - 1]!r}); "
                f"step {h:.3g} exceeds the stability limit near {2.78 * (1 - t) / j_max:.3g}"
            )
        if check_fixed_point:
            resid = fixed_point_residual(t, j_max)
            if resid > fixed_point_tol:
                raise AssertionError(f"analytic curve residual {resid} at t={t}")
    return V


def fixed_point_residual(t: float, j_max: int) -> float:
    jj = np.arange(1, j_max + 1, dtype=float)
    expected = t ** (jj - 1)
    return float(np.max(np.abs(_rhs(t, tau(t, j_max), jj) - expected)))


def limit_generator_apply(f: DifferentiableFunctional, eta: SignedProfile, s: float) -> float:
    """(1/(1-s)) [f'(eta)[delta_1] + sum_j j eta(j) f'(eta)[delta_{j+1} - delta_j]]."""
    if not s < 1.0:
        raise ValueError("generator defined for s < 1")
    acc = f.grad(eta, 1)
    for j in range(1, eta.j_max + 1):
        w = j * eta[j]
        if w:
            acc += w * (f.grad(eta, j + 1) - f.grad(eta, j))
    return acc / (1.0 - s)


def fluct_sample(
    rho_b: float,
    t: float,
    rng: RngStream,
    j_max: int | None = None,
    *,
    jitter: bool = False,
) -> SignedProfile:
    """Z_{B,t}(j) = (U_{B,t}(j) - rho(B) t^j / j) / sqrt(rho(B)).

    ``jitter`` spreads each integer count uniformly over its unit cell
    (a continuity correction for tests against continuous laws).
    """
    if not rho_b > 0:
        raise ValueError("rho(B) must be positive")
    law = marginal_profile_law(rho_b, t)
    lam = law.means
    if j_max is not None:
        lam = np.zeros(j_max)
        k = min(j_max, law.truncation)
        lam[:k] = law.means[:k]
    u = rng.gen.poisson(lam).astype(float)
    if jitter:
        u += rng.gen.random(len(u)) - 0.5
    return SignedProfile((u - lam) / math.sqrt(rho_b))


def fluct_limit_sample(t: float, j_max: int, rng: RngStream) -> SignedProfile:
    """Independent N(0, t^j / j), j = 1..j_max."""
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    return SignedProfile(rng.gen.standard_normal(j_max) * np.sqrt(tau(t, j_max)))


def limit_fluct_generator_apply(
    f: DifferentiableFunctional,
    xi: SignedProfile,
    s: float,
    *,
    form: str = "primary",
) -> float:
    """Generator of the limiting fluctuation field.

    ``form="primary"`` sums the drift as j xi(j) (f'[delta_{j+1}] - f'[delta_j]);
    ``form="rearranged"`` as -(j xi(j) - (j-1) xi(j-1)) f'[delta_j] with xi(0) = 0.
    """
    if f.hess is None:
        raise ValueError("the fluctuation generator needs second derivatives")
    if not s < 1.0:
        raise ValueError("generator defined for s < 1")
    scale = max((abs(f.hess(xi, j, j)) for j in range(1, xi.j_max + 2)), default=0.0)
    j_top = _series_cutoff(s, xi.j_max + 1, scale)
    diag = sum(s ** (j - 1) * f.hess(xi, j, j) for j in range(1, j_top + 1))
    cross = sum(s**j * f.hess(xi, j, j + 1) for j in range(1, j_top + 1))
    if form == "primary":
        drift = sum(
            j * xi[j] * (f.grad(xi, j + 1) - f.grad(xi, j)) for j in range(1, xi.j_max + 1)
        )
    elif form == "rearranged":
        drift = -sum(
            (j * xi[j] - (j - 1) * xi[j - 1]) * f.grad(xi, j) for j in range(1, xi.j_max + 2)
        )
    else:
        raise ValueError(f"unknown form {form!r}")
    return 0.5 * (1 + s) / (1 - s) * diag - cross / (1 - s) + drift / (1 - s)


def log_mgf(g, s: float) -> float:
    """log E exp(Z_s(g)) = 1/2 sum_j (s^j / j) g(j)^2."""
    g = np.asarray(g, dtype=float)
    return 0.5 * float(np.dot(tau(s, len(g)), g * g))


def log_mgf_rate(g, s: float) -> float:
    """d/ds log E exp(Z_s(g)) = 1/2 sum_j s^(j-1) g(j)^2."""
    g = np.asarray(g, dtype=float)
    jj = np.arange(1, len(g) + 1)
    return 0.5 * float(np.dot(s ** (jj - 1), g * g))


@dataclass(frozen=True)
class MGFCheck:
    analytic: float
    empirical_prelimit: float
    empirical_limit: float
    se_prelimit: float
    se_limit: float
    generator_mean: float
    generator_target: float
    generator_se: float
    rate_analytic: float
    rate_numeric: float
    n: int


def _log_mean_exp(x: np.ndarray) -> tuple[float, float]:
    """log of the sample mean of exp(x) and its delta-method standard error."""
    e = np.exp(x)
    m = float(e.mean())
    return math.log(m), float(e.std(ddof=1) / (m * math.sqrt(len(e))))


def mgf_check(
    g,
    s: float,
    rho_b: float,
    n_samples: int,
    rng: RngStream,
) -> MGFCheck:
    """Compare log E exp(Z_s(g)) in the limit field, at finite rho(B) and in
    closed form, and test E[C_s f(Z_s)] = (1/2 sum_j s^(j-1) g(j)^2) E f(Z_s)
    for f = exp(xi(g)).

    The generator identity is checked on the exponential family in
    vectorized form; f'' = f g (x) g reduces the three sums to scalars per
    sample.
    """
    g = np.asarray(g, dtype=float)
    if np.abs(g).max(initial=0.0) > 4:
        raise ValueError("max |g| must not exceed 4")
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    J = len(g)
    lim_rng, pre_rng = rng.child(0), rng.child(1)
    sd = np.sqrt(tau(s, J))
    Z = lim_rng.gen.standard_normal((n_samples, J)) * sd
    zg = Z @ g
    emp_lim, se_lim = _log_mean_exp(zg)

    law = marginal_profile_law(rho_b, s)
    lam = np.zeros(J)
    k = min(J, law.truncation)
    lam[:k] = law.means[:k]
    U = pre_rng.gen.poisson(lam, size=(n_samples, J))
    Zp = (U - lam) / math.sqrt(rho_b)
    emp_pre, se_pre = _log_mean_exp(Zp @ g)

    f = np.exp(zg)
    gen = f * _exp_family_generator_factor(Z, g, s)
    target = log_mgf_rate(g, s) * f
    d = gen - target
    h = 1e-5
    rate_numeric = (log_mgf(g, s + h) - log_mgf(g, s - h)) / (2 * h)
    return MGFCheck(
        analytic=log_mgf(g, s),
        empirical_prelimit=emp_pre,
        empirical_limit=emp_lim,
        se_prelimit=se_pre,
        se_limit=se_lim,
        generator_mean=float(gen.mean()),
        generator_target=float(target.mean()),
        generator_se=float(d.std(ddof=1) / math.sqrt(n_samples)),
        rate_analytic=log_mgf_rate(g, s),
        rate_numeric=rate_numeric,
        n=n_samples,
    )


def _exp_family_generator_factor(Z: np.ndarray, g: np.ndarray, s: float) -> np.ndarray:
    """C_s f / f for f = exp(xi(g)), rows of Z being xi on sites 1..len(g).

    g vanishes beyond its support, so only sites up to len(g) contribute.
    """
    J = len(g)
    jj = np.arange(1, J + 1)
    g_next = np.append(g[1:], 0.0)
    diag = np.dot(s ** (jj - 1), g * g)
    cross = np.dot(s**jj, g * g_next)
    drift = (Z * jj) @ (g_next - g)
    return 0.5 * (1 + s) / (1 - s) * diag - cross / (1 - s) + drift / (1 - s)
