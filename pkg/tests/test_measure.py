import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzmax import (
    MeasureSpace,
    RearrangementProfile,
    ScalarField,
    distribution_function,
    indicator,
    read_field,
    rearrange,
    support,
    write_field,
)
from oracles import distribution_scan, random_space, random_values, sorted_profile


def two_atoms():
    space = MeasureSpace.from_weights([1.0, 2.0])
    return ScalarField(space, [3.0, 1.0])


def step_values(t, h, s):
    idx = np.searchsorted(t, s, side="right") - 1
    return np.append(h, 0.0)[np.minimum(idx, len(h))]


def assert_profile_matches_oracle(f):
    prof = rearrange(f)
    t, h = sorted_profile(f)
    assert prof.support_measure == t[-1]
    probes = np.union1d(prof.t, t)
    probes = np.concatenate((probes, 0.5 * (probes[1:] + probes[:-1]), [probes[-1] + 1.0]))
    np.testing.assert_array_equal(prof(probes), step_values(t, h, probes))


# -- space and field ----------------------------------------------------------

def test_space_rejects_bad_weights_and_duplicate_ids():
    with pytest.raises(ValueError):
        MeasureSpace.from_weights([1.0, 0.0])
    with pytest.raises(ValueError):
        MeasureSpace.from_weights([1.0, np.inf])
    with pytest.raises(ValueError):
        MeasureSpace(("a", "a"), np.ones(2))


def test_field_rejects_nonfinite_values():
    space = MeasureSpace.from_weights([1.0])
    with pytest.raises(ValueError):
        ScalarField(space, [np.nan])


def test_uniform_grid_midpoints_and_weights():
    g = MeasureSpace.uniform_grid(-1.0, 1.0, 4)
    np.testing.assert_allclose(g.points, [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_allclose(g.weights, 0.5)
    assert g.total == pytest.approx(2.0)


# -- distribution function ----------------------------------------------------

def test_distribution_of_zero_field():
    f = ScalarField(MeasureSpace.from_weights([1.0, 2.0]), [0.0, 0.0])
    assert distribution_function(f, 0.0) == 0.0


def test_distribution_two_atoms():
    assert distribution_function(two_atoms(), 2.0) == 1.0


def test_distribution_matches_atom_scan():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        f = ScalarField(random_space(rng, n), random_values(rng, n))
        for s in np.concatenate(([0.0], np.unique(f.abs), rng.uniform(0, 3, 5))):
            assert distribution_function(f, s) == pytest.approx(distribution_scan(f, s), rel=1e-14, abs=0)


# -- rearrangement ------------------------------------------------------------

def test_rearrange_two_atoms():
    prof = rearrange(two_atoms())
    assert prof.breakpoints() == [(0.0, 3.0), (1.0, 1.0), (3.0, 0.0)]
    np.testing.assert_array_equal(prof([0.0, 0.99, 1.0, 2.9, 3.0, 10.0]), [3, 3, 1, 1, 0, 0])


def test_rearrange_characteristic_function():
    space = MeasureSpace.from_weights([1.0, 2.0, 4.0, 0.5])
    prof = rearrange(indicator(space, [0, 2], c=-2.5j))
    np.testing.assert_array_equal(prof([0.0, 4.99, 5.0]), [2.5, 2.5, 0.0])
    assert prof.support_measure == 5.0


def test_rearrange_matches_sort_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 65))
        assert_profile_matches_oracle(ScalarField(random_space(rng, n), random_values(rng, n)))


def test_rearrange_zero_field_is_empty():
    prof = rearrange(ScalarField(MeasureSpace.from_weights([1.0]), [0.0]))
    assert prof.support_measure == 0.0 and prof.heights.size == 0


def test_profile_validation():
    with pytest.raises(ValueError):
        RearrangementProfile([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        RearrangementProfile([0.0, 1.0], [2.0, 1.0])


# -- support ------------------------------------------------------------------

def test_support_examples():
    space = MeasureSpace.from_weights([1.0, 1.0, 1.0])
    np.testing.assert_array_equal(support(ScalarField(space, [0.0, 5.0, 0.0])), [1])
    assert support(ScalarField(space, [0.0, 0.0, 0.0])).size == 0


def test_support_matches_scan():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(1, 40))
        f = ScalarField(random_space(rng, n), random_values(rng, n))
        thr = float(rng.uniform(0, 2))
        assert support(f, thr).tolist() == [i for i, v in enumerate(f.values) if np.abs(v) > thr]


# -- serialization ------------------------------------------------------------

def test_field_round_trip_is_exact():
    rng = np.random.default_rng(9)
    f = ScalarField(random_space(rng, 20), random_values(rng, 20))
    buf = io.StringIO()
    write_field(f, buf)
    g = read_field(io.StringIO("# header\n\n" + buf.getvalue()))
    assert g.space.ids == f.space.ids
    np.testing.assert_array_equal(g.space.weights, f.space.weights)
    np.testing.assert_array_equal(g.values, f.values)


def test_read_field_rejects_malformed_line():
    with pytest.raises(ValueError):
        read_field(io.StringIO("a 1.0 2.0\n"))


# -- properties ---------------------------------------------------------------

fields = st.integers(1, 24).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.01, 10), min_size=n, max_size=n),
        st.lists(st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.5]) | st.floats(-5, 5), min_size=n, max_size=n),
    )
)


@settings(max_examples=200, deadline=None)
@given(fields)
def test_equimeasurable_at_breakpoints(data):
    w, v = data
    f = ScalarField(MeasureSpace.from_weights(w), v)
    prof = rearrange(f)
    for s in np.concatenate(([0.0], prof.values)):
        assert prof.level_measure(s) == pytest.approx(distribution_function(f, s), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(fields)
def test_rearrangement_preserves_integral(data):
    w, v = data
    f = ScalarField(MeasureSpace.from_weights(w), v)
    assert rearrange(f).integral() == pytest.approx(float(np.sum(np.asarray(w) * np.abs(v))), rel=1e-12, abs=1e-12)
