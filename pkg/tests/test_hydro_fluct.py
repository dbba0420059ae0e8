import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyascrp import hydro_fluct as hf
from polyascrp import mprw
from polyascrp.measure_core import MultiplicityProfile, SignedProfile
from polyascrp.rand_kit import RngStream


def test_tau_and_tail():
    assert hf.tau(0.5, 3).tolist() == pytest.approx([0.5, 0.125, 0.125 / 3])
    exact = sum(0.9**j / j for j in range(11, 2000))
    assert exact <= hf.tau_tail(0.9, 10)


@pytest.mark.parametrize("t", [0.1, 0.5, 0.95])
def test_analytic_curve_is_a_fixed_point(t):
    assert hf.fixed_point_residual(t, 40) < 1e-12
    rhs = hf.hydro_rhs(hf.HydroState(t, hf.tau(t, 40)))
    assert rhs[:-1] == pytest.approx(t ** np.arange(39), abs=1e-12)


def test_rk4_accuracy_and_order():
    state = hf.hydro_integrate(0.9, 60, 1e-4)
    assert state.max_abs_error() <= 1e-8
    e1 = hf.hydro_integrate(0.9, 60, 0.005).max_abs_error()
    e2 = hf.hydro_integrate(0.9, 60, 0.0025).max_abs_error()
    assert 12 <= e1 / e2 <= 20


def test_rk4_fixed_point_monitor():
    hf.hydro_integrate(0.5, 20, 0.01, check_fixed_point=True)


def test_rk4_instability_is_reported():
    with pytest.raises(hf.HydroInstabilityError):
        hf.hydro_integrate(0.9, 60, 0.05)
    with pytest.raises(ValueError):
        hf.hydro_integrate(1.0, 10, 0.01)


def test_curve_matches_single_integration():
    states = hf.hydro_curve([0.3, 0.6, 0.9], 30, 1e-3)
    assert [s.t for s in states] == [0.3, 0.6, 0.9]
    assert all(s.max_abs_error() < 1e-9 for s in states)
    with pytest.raises(ValueError):
        hf.hydro_curve([0.5, 0.4], 10, 1e-3)


def test_truncation_is_exact_for_leading_sites():
    small = hf.hydro_integrate(0.7, 10, 1e-3).V
    big = hf.hydro_integrate(0.7, 40, 1e-3).V[:10]
    assert np.array_equal(small, big)


def test_scaled_profile():
    eta = MultiplicityProfile({1: 50, 3: 10})
    assert hf.scaled_profile(eta, 100.0, 3).values.tolist() == [0.5, 0.0, 0.1]
    with pytest.raises(ValueError):
        hf.scaled_profile(eta, 0.0)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.floats(0.05, 0.9))
def test_limit_generator_on_tau_is_its_time_derivative(g, s):
    f = mprw.linear(g)
    eta = SignedProfile(hf.tau(s, 200))
    expected = sum(s ** (j - 1) * g[j - 1] for j in range(1, len(g) + 1))
    assert hf.limit_generator_apply(f, eta, s) == pytest.approx(expected, abs=1e-10)


@given(
    st.lists(st.floats(-1, 1), min_size=1, max_size=5),
    st.lists(st.floats(-2, 2), min_size=1, max_size=6),
    st.floats(0.01, 0.95),
)
def test_two_forms_of_fluctuation_generator_agree(g, xi, s):
    xi = SignedProfile(xi)
    for f in (mprw.exp_linear(g), mprw.linear(g), mprw.site_square(len(g))):
        a = hf.limit_fluct_generator_apply(f, xi, s)
        b = hf.limit_fluct_generator_apply(f, xi, s, form="rearranged")
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)


def test_fluctuation_generator_needs_hessian_and_valid_form():
    f = mprw.DifferentiableFunctional(eval=lambda xi: xi[1], grad=lambda xi, j: float(j == 1))
    with pytest.raises(ValueError):
        hf.limit_fluct_generator_apply(f, SignedProfile([0.0]), 0.5)
    with pytest.raises(ValueError):
        hf.limit_fluct_generator_apply(mprw.linear([1.0]), SignedProfile([0.0]), 0.5, form="other")


@pytest.mark.parametrize("j", [1, 2, 4])
def test_site_square_generator_mean_is_variance_rate(j):
    # E[C_s xi(j)^2] under independent N(0, s^k/k) equals d/ds s^j/j = s^(j-1)
    s = 0.6
    f = mprw.site_square(j)
    var = hf.tau(s, j + 1)
    zero = SignedProfile.zeros(j + 1)
    q = lambda xi: hf.limit_fluct_generator_apply(f, xi, s)
    mean = q(zero) + sum(
        0.5 * var[k - 1] * (q(zero.shifted(k, 1.0)) + q(zero.shifted(k, -1.0)) - 2 * q(zero))
        for k in range(1, j + 2)
    )
    assert mean == pytest.approx(s ** (j - 1), rel=1e-10)


def test_log_mgf_values():
    assert hf.log_mgf([1.0], 0.5) == pytest.approx(0.25)
    assert hf.log_mgf([0.0, 2.0], 0.5) == pytest.approx(0.5 * 0.125 * 4)
    assert hf.log_mgf_rate([1.0, 1.0], 0.5) == pytest.approx(0.5 * 1.5)


def test_exp_family_factor_matches_generic_generator():
    g = np.array([0.8, -0.5, 0.6])
    rng = RngStream(3)
    Z = rng.gen.normal(0, 0.5, (5, 3))
    fac = hf._exp_family_generator_factor(Z, g, 0.4)
    f = mprw.exp_linear(g)
    for row, c in zip(Z, fac):
        xi = SignedProfile(row)
        assert f(xi) * c == pytest.approx(hf.limit_fluct_generator_apply(f, xi, 0.4), rel=1e-12)


def test_mgf_check_small_run():
    res = hf.mgf_check([0.8, -0.5, 0.6], 0.5, 1e4, 50_000, RngStream(4))
    assert abs(res.empirical_limit - res.analytic) < 4 * res.se_limit
    assert abs(res.generator_mean - res.generator_target) < 4 * res.generator_se
    assert res.rate_numeric == pytest.approx(res.rate_analytic, abs=1e-8)
    with pytest.raises(ValueError):
        hf.mgf_check([5.0], 0.5, 1e4, 10, RngStream(0))


def test_fluct_samples_have_the_limit_variance():
    rng = RngStream(5)
    Z = np.array([hf.fluct_sample(1e4, 0.6, rng, 3).values for _ in range(20_000)])
    var = hf.tau(0.6, 3)
    assert Z.mean(axis=0) == pytest.approx(np.zeros(3), abs=4 * math.sqrt(var.max() / 20_000))
    assert Z.var(axis=0) == pytest.approx(var, rel=0.05)
    L = np.array([hf.fluct_limit_sample(0.6, 3, rng).values for _ in range(20_000)])
    assert L.var(axis=0) == pytest.approx(var, rel=0.05)
