import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyascrp.measure_core import (
    EMPTY,
    BaseMeasure,
    Location,
    MultiplicityProfile,
    PointConfiguration,
    SignedProfile,
    Trajectory,
    Window,
    count,
    difference,
    dominates,
    first_moment,
    profile,
    read_configuration_csv,
    read_profile_csv,
    superpose,
    write_configuration_csv,
    write_profile_csv,
)

WINDOW_IDS = ("A", "B", "A/x")


@st.composite
def configurations(draw, max_atoms=6):
    atoms = draw(
        st.dictionaries(
            st.tuples(st.sampled_from(WINDOW_IDS), st.integers(0, 8)),
            st.integers(1, 5),
            max_size=max_atoms,
        )
    )
    return PointConfiguration(
        {Location(w, (0, k), k / 10): m for (w, k), m in atoms.items()}
    )


profiles = st.dictionaries(st.integers(1, 12), st.integers(0, 6)).map(MultiplicityProfile)


def loc(w="B", k=1):
    return Location(w, (0, k), 0.5)


def test_window_hierarchy():
    outer = Window("O", 2.0)
    assert outer.contains("O") and outer.contains("O/inner")
    assert not outer.contains("OX") and not outer.contains("P/O")


def test_base_measure_rejects_overlap_and_duplicates():
    with pytest.raises(ValueError):
        BaseMeasure((Window("A", 1), Window("A", 2)))
    with pytest.raises(ValueError):
        BaseMeasure((Window("A", 1), Window("A/b", 1)))
    with pytest.raises(ValueError):
        Window("A", -1.0)


def test_region_and_mass():
    base = BaseMeasure((Window("O/in", 1.0), Window("O/ring", 1.5), Window("P", 4.0)))
    assert base.total_mass == 6.5
    assert base.mass(Window("O", 2.5)) == 2.5
    assert [w.id for w in base.region(Window("O", 2.5))] == ["O/in", "O/ring"]
    assert base.mass(None) == 6.5


def test_configuration_basics():
    c = PointConfiguration({loc(k=1): 2, loc(k=2): 1, loc("A", 3): 0})
    assert len(c) == 2 and c.total == 3
    assert c[loc(k=1)] == 2 and c[loc(k=9)] == 0
    assert count(c, Window("B", 1.0)) == 3 and count(c, Window("A", 1.0)) == 0
    with pytest.raises(ValueError):
        PointConfiguration({loc(): -1})


@given(configurations(), configurations(), configurations())
def test_superposition_is_commutative_and_associative(a, b, c):
    assert superpose(a, b) == superpose(b, a)
    assert superpose(superpose(a, b), c) == superpose(a, superpose(b, c))
    assert superpose(a, EMPTY) == a
    assert (a + b).total == a.total + b.total


@given(configurations(), configurations())
def test_difference_inverts_superposition(a, b):
    s = superpose(a, b)
    assert dominates(s, a) and dominates(s, b)
    assert difference(s, a) == b


@given(configurations(), configurations(), configurations())
def test_dominance_is_a_partial_order(a, b, c):
    assert dominates(a, a)
    if dominates(a, b) and dominates(b, a):
        assert a == b
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


@given(configurations())
def test_counts_add_over_disjoint_windows(c):
    a, b = Window("A", 1.0), Window("B", 1.0)
    assert count(c, a) + count(c, b) == c.total
    assert count(c, Window("A/x", 1.0)) <= count(c, a)
    assert c.restrict(a).total == count(c, a)


@given(configurations())
def test_profile_first_moment_is_the_count(c):
    eta = profile(c)
    assert first_moment(eta) == c.total
    assert eta.total == len(c)


@given(configurations(), configurations())
def test_profile_is_additive_over_disjoint_supports(a, b):
    b = PointConfiguration({Location(l.window_id, (1,) + l.tag, l.coord): m for l, m in b.items()})
    assert profile(superpose(a, b)) == profile(a) + profile(b)


@given(profiles, st.integers(1, 12))
def test_hop_and_birth_moves(eta, j):
    born = eta.birth()
    assert born.total == eta.total + 1 and first_moment(born) == first_moment(eta) + 1
    if eta[j]:
        moved = eta.hop(j)
        assert moved.total == eta.total
        assert first_moment(moved) == first_moment(eta) + 1
        assert moved[j + 1] == eta[j + 1] + 1
    else:
        with pytest.raises(ValueError):
            eta.hop(j)


def test_profile_as_array():
    eta = MultiplicityProfile({1: 3, 4: 1})
    assert eta.as_array().tolist() == [3, 0, 0, 1]
    assert eta.as_array(2).tolist() == [3, 0]
    assert eta.support == (1, 4) and eta.max_site == 4


@given(st.lists(st.floats(-5, 5), max_size=6), st.lists(st.floats(-5, 5), max_size=6))
def test_signed_profile_algebra(u, v):
    a, b = SignedProfile(u), SignedProfile(v)
    n = max(len(u), len(v))
    assert np.allclose((a + b).padded(n), a.padded(n) + b.padded(n))
    assert (a - a).allclose(SignedProfile.zeros(len(u)))
    assert a[len(u) + 3] == 0.0
    g = np.ones(n + 1)
    assert (a * 2.0).pair(g) == pytest.approx(2 * a.pair(g))


def test_signed_profile_hop_and_delta():
    xi = SignedProfile.delta(2, 3.0)
    assert xi.values.tolist() == [0.0, 3.0]
    assert xi.hop(2).values.tolist() == [0.0, 2.0, 1.0]
    assert xi.shifted(5, 1.0)[5] == 1.0
    with pytest.raises(ValueError):
        xi.values[0] = 1.0


def test_trajectory_validation():
    a = PointConfiguration({loc(): 1})
    b = PointConfiguration({loc(): 2})
    traj = Trajectory((0.1, 0.5), (a, b))
    assert traj.at(0.5) == b and traj.counts(Window("B", 1)) == [1, 2]
    with pytest.raises(ValueError):
        Trajectory((0.5, 0.1), (a, b))
    with pytest.raises(ValueError):
        Trajectory((0.1, 0.5), (b, a))
    with pytest.raises(ValueError):
        Trajectory((0.1, 1.0), (a, b))


@given(configurations())
def test_configuration_csv_roundtrip(c):
    buf = io.StringIO()
    write_configuration_csv(c, buf)
    assert buf.getvalue().splitlines()[0] == "window_id,tag,coord,multiplicity"
    buf.seek(0)
    assert read_configuration_csv(buf) == c


@given(profiles)
def test_profile_csv_roundtrip(eta):
    buf = io.StringIO()
    write_profile_csv(eta, buf)
    buf.seek(0)
    assert read_profile_csv(buf) == eta
