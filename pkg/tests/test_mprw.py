import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from polyascrp import mprw
from polyascrp.measure_core import MultiplicityProfile, SignedProfile, first_moment
from polyascrp.rand_kit import RngStream
from polyascrp.stats_harness import chi_square_gof, histogram


def test_marginal_profile_law_means_and_truncation():
    law = mprw.marginal_profile_law(2.0, 0.5)
    assert law.means[:3].tolist() == pytest.approx([1.0, 0.25, 1 / 12])
    tail = sum(2.0 * 0.5**j / j for j in range(law.truncation + 1, 400))
    assert tail < 1e-12
    assert law.mean(law.truncation + 1) == 0.0
    with pytest.raises(ValueError):
        mprw.marginal_profile_law(1.0, 1.0)


@given(st.integers(0, 10_000), st.floats(0.05, 0.9))
def test_event_path_is_consistent(seed, t):
    traj = mprw.simulate_events(3.0, t, RngStream(seed))
    states = traj.states()
    assert (states[-1] if states else MultiplicityProfile()) == traj.final
    births = sum(ev.kind == mprw.BIRTH for ev in traj.events)
    assert traj.final.total == births
    assert first_moment(traj.final) == len(traj.events)
    us = [ev.u for ev in traj.events]
    assert us == sorted(us) and all(0 < ev.s <= t for ev in traj.events)
    assert all(ev.s == pytest.approx(-math.expm1(-ev.u)) for ev in traj.events)


def test_trajectory_export_layout():
    traj = mprw.simulate_events(2.0, 0.5, RngStream(1))
    buf = io.StringIO()
    traj.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "u_time,s_time,event_kind,j"
    blank = lines.index("")
    assert blank == len(traj.events) + 1
    assert lines[blank + 1] == "j,count"


def test_event_simulation_first_moment_is_nb():
    rng = RngStream(2)
    J = np.array([first_moment(mprw.simulate_events(2.0, 0.5, rng).final) for _ in range(20_000)])
    # NB(2, 0.5): mean 2, variance 4
    assert abs(J.mean() - 2.0) < 4 * math.sqrt(4 / J.size)


def test_profile_generator_on_site_one():
    # f = eta(1): A f = (rho - eta(1)) / (1 - s); its mean under Poisson(rho s) is rho = d/ds E f
    f = lambda eta: eta[1]
    eta = MultiplicityProfile({1: 3, 2: 1})
    assert mprw.profile_generator_apply(f, eta, 0.5, 2.0) == pytest.approx((2.0 - 3) / 0.5)
    with pytest.raises(ValueError):
        mprw.profile_generator_apply(f, eta, 1.0, 2.0)


def test_functional_derivatives_are_checked():
    with pytest.raises(ValueError):
        mprw.DifferentiableFunctional(eval=lambda xi: xi[1] ** 2, grad=lambda xi, j: 0.0)
    f = mprw.exp_linear([0.5, -1.0])
    xi = SignedProfile([0.2, 0.1])
    assert f(xi) == pytest.approx(math.exp(0.1 - 0.1))
    assert f.directional(xi, SignedProfile([1.0, 1.0])) == pytest.approx(f(xi) * (-0.5))


def _gaussian_like_mean(q, var):
    """Exact mean of a quadratic q(xi) under centered independent coordinates."""
    J = len(var)
    zero = SignedProfile.zeros(J)
    acc = q(zero)
    for j in range(1, J + 1):
        plus, minus = zero.shifted(j, 1.0), zero.shifted(j, -1.0)
        acc += 0.5 * var[j - 1] * (q(plus) + q(minus) - 2 * q(zero))
    return acc


def test_centered_generator_mean_on_site_square():
    # E[C f] for f = xi(1)^2 under U(1) ~ Poisson(rho s): computed by summing the pmf
    rho, s = 3.0, 0.4
    f = mprw.site_square(1)
    lam = rho * s
    k = np.arange(0, 80)
    pmf = stats.poisson(lam).pmf(k)
    vals = [mprw.centered_generator_apply(f, SignedProfile([kk - lam]), s, rho) for kk in k]
    assert float(np.dot(pmf, vals)) == pytest.approx(rho, rel=1e-10)


def test_centered_generator_mean_on_linear_functional():
    rho, s = 2.0, 0.5
    f = mprw.linear([0.7, -0.4, 1.1])
    rng = RngStream(6)
    vals = []
    for _ in range(20_000):
        eta = MultiplicityProfile(dict(enumerate(mprw.sample_profile(rho, s, rng, 12).tolist(), 1)))
        xi = mprw.centered_state(eta, rho, s, 12)
        vals.append(mprw.centered_generator_apply(f, xi, s, rho))
    vals = np.array(vals)
    assert abs(vals.mean()) < 4 * vals.std() / math.sqrt(vals.size)


def test_particle_step_law_parameter():
    law = mprw.particle_step_law(3, 0.2, 0.6)
    assert law.r == 3 and law.z == pytest.approx(0.4 / 0.8)
    assert law.mean == pytest.approx(3 * 0.4 / 0.4)
    with pytest.raises(ValueError):
        mprw.particle_step_law(1, 0.6, 0.2)


def test_tracked_steps_follow_the_kernel_parameter():
    # table-tracking oracle: (t-s)/(1-s) fits, (t-s)/(1-t) does not
    j, s, t = 2, 0.3, 0.6
    rng = RngStream(9)
    steps = []
    while len(steps) < 20_000:
        steps.extend(mprw.tracked_steps(j, 3.0, s, t, rng))
    steps = np.array(steps[:20_000])
    good = mprw.particle_step_law(j, s, t)
    obs = histogram(steps, 40)
    assert chi_square_gof(obs, good.pmf).passed
    from polyascrp.rand_kit import NegativeBinomial

    bad = NegativeBinomial(j, (t - s) / (1 - t))
    assert not chi_square_gof(obs, bad.pmf).passed


def test_entry_sizes_are_log_series_not_geometric():
    s, t, rho = 0.3, 0.7, 2.0
    rng = RngStream(10)
    sizes = []
    while len(sizes) < 20_000:
        sizes.extend(mprw.simulate_event_profiles(rho, t, rng, birth_after=s)[1])
    sizes = np.array(sizes[:20_000])
    law = mprw.entry_size_law(s, t)
    obs = histogram(sizes, 60)
    assert chi_square_gof(obs, law.pmf).passed
    # geometric on {1, 2, ...} with the same mean
    p = 1 / law.mean
    geo = lambda k: np.where(np.asarray(k) >= 1, p * (1 - p) ** (np.asarray(k) - 1.0), 0.0)
    assert not chi_square_gof(obs, geo).passed
