import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from polyascrp.measure_core import BaseMeasure, Location, PointConfiguration, Window
from polyascrp.rand_kit import NegativeBinomial, RngStream
from polyascrp.scrp import (
    ArrivalLaw,
    CountFunctional,
    TimePair,
    arrival_law,
    capped_count,
    count_increment,
    generator_apply,
    generator_apply_count,
    inverse_time_change,
    kolmogorov_residual,
    retention,
    sample_arrivals_stick,
    sample_path,
    time_change,
)
from polyascrp.verify import capped_generator_mean


def test_time_pair_parameters():
    tp = TimePair(0.25, 0.5)
    assert tp.forward_z == pytest.approx(1 / 3)
    assert tp.retention == pytest.approx(1 / 3)
    assert retention(0.25, 0.5) == pytest.approx(1 / 3)
    assert retention(0.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        TimePair(0.6, 0.5)


@given(st.floats(0.0, 0.98), st.floats(0.0, 0.98))
def test_retention_is_a_probability_and_composes(a, b):
    s, t = sorted((a, b))
    if t == 0:
        return
    q = retention(s, t)
    assert 0.0 <= q <= 1.0 + 1e-12
    u = (s + t) / 2
    assert retention(s, u) * retention(u, t) == pytest.approx(q, abs=1e-12) if u > 0 else True


@given(st.integers(0, 10_000))
def test_sample_path_is_monotone(seed):
    base = BaseMeasure((Window("A", 0.5), Window("B", 1.5)))
    traj = sample_path([0.1, 0.3, 0.6, 0.9], base, None, RngStream(seed))
    assert len(traj) == 4


def test_sample_path_validates_grid():
    base = BaseMeasure.single(1.0)
    for grid in ([], [0.5, 0.4], [0.2, 1.0], [-0.1]):
        with pytest.raises(ValueError):
            sample_path(grid, base)


def test_sample_path_mean():
    base = BaseMeasure.single(2.0)
    rng = RngStream(8)
    n = 20_000
    x = np.array([sample_path([0.3, 0.6], base, None, rng.child(i)).states[-1].total for i in range(n)])
    law = NegativeBinomial(2.0, 0.6)
    assert abs(x.mean() - law.mean) < 4 * math.sqrt(law.var / n)


def test_arrival_law_is_beta():
    law = arrival_law(2, 1.5)
    ref = stats.beta(3, 1.5)
    for t in (0.1, 0.5, 0.9):
        assert law.density(t) == pytest.approx(ref.pdf(t))
        assert law.survival(t) == pytest.approx(ref.sf(t))
    assert law.beta().a == 3.0 and law.beta().b == 1.5
    with pytest.raises(ValueError):
        ArrivalLaw(-1, 1.0)
    with pytest.raises(ValueError):
        ArrivalLaw(1, 0.0)


@pytest.mark.parametrize("m,rho", [(1, 0.7), (3, 2.0)])
def test_joint_density_marginals(m, rho):
    law = arrival_law(m, rho)
    # integrating out the later time gives the Beta(m, rho) density of tau_m
    for s in (0.2, 0.6):
        val = integrate.quad(lambda t: law.joint_density(s, t), s, 1)[0]
        assert val == pytest.approx(stats.beta(m, rho).pdf(s), rel=1e-8)
    # integrating out the earlier time gives Beta(m + 1, rho)
    for t in (0.3, 0.8):
        val = integrate.quad(lambda s: law.joint_density(s, t), 0, t)[0]
        assert val == pytest.approx(stats.beta(m + 1, rho).pdf(t), rel=1e-8)
    assert law.joint_density(0.5, 0.4) == 0.0
    with pytest.raises(ValueError):
        arrival_law(0, rho).joint_density(0.1, 0.2)


@given(st.floats(0.1, 5.0), st.integers(0, 1000))
def test_stick_arrivals_strictly_increasing(rho, seed):
    taus = sample_arrivals_stick(rho, 8, RngStream(seed))
    assert np.all(np.diff(taus) > 0) and 0 < taus[0] and taus[-1] < 1


def test_generator_on_counts():
    w = Window("B", 2.0)
    ident = capped_count(w, 100)
    nu = PointConfiguration({Location("B", (0, 1), 0.3): 3})
    assert generator_apply(ident, nu, 0.5) == pytest.approx((2 + 3) / 0.5)
    cap = capped_count(w, 3)
    assert generator_apply(cap, nu, 0.5) == 0.0
    assert cap(nu) == 3.0
    square = CountFunctional(w, lambda k: min(k, 10) ** 2, 100.0)
    assert generator_apply(square, nu, 0.0) == pytest.approx(5 * 7)
    n = np.array([0, 1, 2])
    assert generator_apply_count(lambda k: k**2, n, 0.0, 1.0).tolist() == [1, 6, 15]
    with pytest.raises(ValueError):
        generator_apply(ident, nu, 1.0)


def test_capped_generator_mean_closed_form():
    # with a large cap the mean is d/dt E Y_t = rho / (1 - t)^2
    assert capped_generator_mean(1.0, 0.5, 50) == pytest.approx(4.0, abs=1e-9)
    assert capped_generator_mean(2.0, 0.3, 80) == pytest.approx(2 / 0.49, abs=1e-9)


def test_count_increments_keep_nb_marginal():
    rng = RngStream(12)
    y = NegativeBinomial(1.0, 0.3).sample(rng, 200_000)
    y2 = y + count_increment(y, 1.0, 0.3, 0.6, rng)
    law = NegativeBinomial(1.0, 0.6)
    assert abs(y2.mean() - law.mean) < 4 * math.sqrt(law.var / y.size)
    assert abs(y2.var() - law.var) < 0.05 * law.var


def test_kolmogorov_residual_small():
    res = kolmogorov_residual(capped_count(Window("B", 1.0), 50), 0.5, 0.01, 200_000, RngStream(2))
    assert abs(res.residual) < 4 * res.mc_se
    assert res.n == 200_000


@given(st.floats(0.0, 100.0))
def test_time_change_roundtrip(u):
    assert inverse_time_change(time_change(u)) == pytest.approx(u, rel=1e-9, abs=1e-12)
