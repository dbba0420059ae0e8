import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyascrp.measure_core import EMPTY, BaseMeasure, Location, PointConfiguration, Window, count, dominates
from polyascrp.polya_sum import PolyaParams, condense, gamma_param, sample_profile_method, sample_urn, thin
from polyascrp.rand_kit import NegativeBinomial, RngStream


def test_gamma_param_values():
    assert gamma_param(0.5, 0.5) == pytest.approx(1 / 3)
    assert gamma_param(0.8, 0.25) == pytest.approx(0.5)
    assert gamma_param(0.7, 1.0) == pytest.approx(0.7)
    assert gamma_param(0.7, 0.0) == 0.0


@given(st.floats(0.0, 0.99), st.floats(0.0, 1.0))
def test_gamma_param_is_between_zero_and_z(z, q):
    g = gamma_param(z, q)
    assert -1e-15 <= g <= z + 1e-15


@given(st.floats(0.01, 0.95), st.floats(0.01, 0.95))
def test_gamma_composes_like_successive_thinnings(z, q):
    # thinning by q1 then q2 equals thinning by q1 q2
    q2 = 0.5
    assert gamma_param(gamma_param(z, q), q2) == pytest.approx(gamma_param(z, q * q2))


def test_single_atom_mult_two_probability():
    # P(N = 2 and one atom) = NB(1, 0.5)(2) * P(second joins first) = 0.125 * 1/2
    law = NegativeBinomial(1.0, 0.5)
    assert float(law.pmf(2)) * (1 / (1 + 1)) == pytest.approx(0.0625)
    # profile form: one atom (Poisson(log 2) = 1) of log-series size 2, no others
    lam = math.log(2)
    assert math.exp(-lam) * lam * (0.25 / (2 * lam)) == pytest.approx(0.0625)


def test_params_validation():
    with pytest.raises(ValueError):
        PolyaParams(1.0, BaseMeasure.single(1.0))
    with pytest.raises(ValueError):
        PolyaParams(-0.1, BaseMeasure.single(1.0))


def test_samplers_put_atoms_in_region():
    base = BaseMeasure((Window("A", 1.0), Window("B", 3.0)))
    rng = RngStream(1)
    c = sample_urn(PolyaParams(0.8, base, Window("B", 3.0)), EMPTY, rng)
    assert all(l.window_id == "B" for l in c)
    d = sample_profile_method(PolyaParams(0.8, base), rng)
    assert count(d, Window("A", 1)) + count(d, Window("B", 3)) == d.total


def test_urn_boost_only_returns_new_points():
    boost = PointConfiguration({Location("B", (9, 9), 0.5): 4})
    rng = RngStream(2)
    seen_join = False
    for _ in range(200):
        new = sample_urn(PolyaParams(0.5, BaseMeasure.single(0.1)), boost, rng)
        seen_join |= new[Location("B", (9, 9), 0.5)] > 0
    assert seen_join


def test_zero_parameters_give_empty():
    base = BaseMeasure.single(2.0)
    assert sample_urn(PolyaParams(0.0, base), EMPTY, RngStream(0)) == EMPTY
    assert sample_profile_method(PolyaParams(0.0, base), RngStream(0)) == EMPTY


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_thinning_is_dominated(seed, q):
    rng = RngStream(seed)
    c = sample_urn(PolyaParams(0.7, BaseMeasure.single(2.0)), EMPTY, rng)
    d = thin(c, q, rng)
    assert dominates(c, d)


def test_thinning_extremes_and_domain():
    c = PointConfiguration({Location("B", (0, 1), 0.1): 3})
    assert thin(c, 1.0, RngStream(0)) == c
    assert thin(c, 0.0, RngStream(0)) == EMPTY
    with pytest.raises(ValueError):
        thin(c, 1.5, RngStream(0))


def test_condense_validation():
    with pytest.raises(ValueError):
        condense(0.3, 0.5, BaseMeasure.single(1.0), RngStream(0))


def test_condense_mean():
    rng = RngStream(4)
    n = 20_000
    totals = [condense(0.7, 0.3, BaseMeasure.single(2.0), rng).total for _ in range(n)]
    law = NegativeBinomial(2.0, 0.7)
    assert abs(sum(totals) / n - law.mean) < 4 * math.sqrt(law.var / n)
