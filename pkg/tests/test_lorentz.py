import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzmax import (
    INF,
    LorentzIndex,
    MeasureSpace,
    ScalarField,
    from_recip,
    indicator,
    lp_norm,
    norm_via_maximal_average,
    quasinorm,
    recip,
    rearrange,
)
from oracles import quasinorm_layer_cake, random_space, random_values


def two_atoms():
    return ScalarField(MeasureSpace.from_weights([1.0, 2.0]), [3.0, 1.0])


def chi(measure):
    return indicator(MeasureSpace.from_weights([measure]), [0])


def maximal_average_by_quadrature(f, p, q, samples=1_000_000):
    """Independent f** evaluation: trapezoid rule in log t on a dense grid."""
    prof = rearrange(f)
    T = prof.support_measure
    s = np.linspace(math.log(T) - 40, math.log(T) + 400, samples)
    t = np.exp(s)
    starts, ends, h = prof.starts, prof.ends, prof.heights
    F = np.sum(h[None, :] * np.clip(t[:, None] - starts[None, :], 0, (ends - starts)[None, :]), axis=1)
    integrand = (F / t) ** q * t ** (q / p)
    return (q / p * np.trapezoid(integrand, s)) ** (1 / q)


# -- exponents ----------------------------------------------------------------

def test_reciprocals_of_infinity():
    assert recip(INF) == 0.0 and from_recip(0.0) is INF
    assert recip(4.0) == 0.25 and from_recip(0.25) == 4.0


def test_index_validation():
    LorentzIndex(INF, INF)
    LorentzIndex("inf", "inf")
    with pytest.raises(ValueError):
        LorentzIndex(0.5, 2)
    with pytest.raises(ValueError):
        LorentzIndex(2, 0.5)
    with pytest.raises(ValueError):
        LorentzIndex(INF, 2)


# -- quasinorm ----------------------------------------------------------------

def test_characteristic_function_example():
    assert quasinorm(chi(8.0), LorentzIndex(2, 1)) == pytest.approx(2.828427, abs=1e-6)


@pytest.mark.parametrize("p", [1.0, 4 / 3, 2.0, 3.0])
@pytest.mark.parametrize("q", [1.0, 2.0, "p", INF])
@pytest.mark.parametrize("mu", [1.0, 8.0, 100.0])
def test_characteristic_function_closed_form(p, q, mu):
    q = p if q == "p" else q
    assert quasinorm(chi(mu), LorentzIndex(p, q)) == pytest.approx(mu ** (1 / p), rel=1e-12)


def test_step_profile_weak_norm():
    assert quasinorm(two_atoms(), LorentzIndex(2, INF)) == 3.0


def test_step_profile_p2_q2():
    assert quasinorm(two_atoms(), LorentzIndex(2, 2)) == pytest.approx(math.sqrt(11), rel=1e-15)


def test_q_equal_p_is_lp():
    rng = np.random.default_rng(4)
    for p in (1.0, 1.5, 2.0, 3.0, 7.0):
        for _ in range(20):
            n = int(rng.integers(1, 40))
            f = ScalarField(random_space(rng, n), random_values(rng, n, zeros=0.1))
            assert quasinorm(f, LorentzIndex(p, p)) == pytest.approx(lp_norm(f, p), rel=1e-12)


def test_p_infinite_is_sup():
    f = ScalarField(MeasureSpace.from_weights([1.0, 2.0, 3.0]), [1.0, -7.0, 2j])
    assert quasinorm(f, LorentzIndex(INF, INF)) == 7.0 == lp_norm(f, INF)


def test_quasinorm_matches_layer_cake_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n = int(rng.integers(1, 40))
        f = ScalarField(random_space(rng, n), random_values(rng, n))
        for p, q in [(1, 1), (4 / 3, 2), (2, 1), (3, 5), (1.5, INF), (2, INF)]:
            assert quasinorm(f, LorentzIndex(p, q)) == pytest.approx(quasinorm_layer_cake(f, p, q), rel=1e-12, abs=1e-300)


def test_zero_field_norms():
    f = ScalarField(MeasureSpace.from_weights([1.0]), [0.0])
    assert quasinorm(f, LorentzIndex(2, 2)) == 0.0
    assert norm_via_maximal_average(f, LorentzIndex(2, 2)) == 0.0


def test_extreme_magnitudes_do_not_overflow():
    f = ScalarField(MeasureSpace.from_weights([1e-30, 1e30]), [1e200, 1e-200])
    val = quasinorm(f, LorentzIndex(1.5, 3))
    assert np.isfinite(val) and val > 0


# -- maximal-average norm -----------------------------------------------------

@pytest.mark.parametrize("p", [4 / 3, 2.0, 3.0])
@pytest.mark.parametrize("q", [1.0, 2.0, 3.5])
def test_maximal_average_characteristic_closed_form(p, q):
    # f** = 1 up to mu(E), mu(E)/t after: norm = mu^{1/p} (p/(p-1))^{1/q}
    mu = 5.0
    expected = mu ** (1 / p) * (p / (p - 1)) ** (1 / q)
    assert norm_via_maximal_average(chi(mu), LorentzIndex(p, q)) == pytest.approx(expected, rel=1e-12)


def test_maximal_average_weak_type_of_characteristic():
    assert norm_via_maximal_average(chi(9.0), LorentzIndex(2, INF)) == pytest.approx(3.0, rel=1e-14)


def test_maximal_average_two_atom_value():
    # f* = 3 on [0,1), 1 on [1,3): hand integration gives 5.13755...
    assert norm_via_maximal_average(two_atoms(), LorentzIndex(2, 2)) == pytest.approx(5.137552837, rel=1e-9)
    assert norm_via_maximal_average(two_atoms(), LorentzIndex(2, INF)) == pytest.approx(3.0, rel=1e-14)


def test_maximal_average_matches_quadrature():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = int(rng.integers(2, 12))
        f = ScalarField(random_space(rng, n), random_values(rng, n, zeros=0.0))
        for p, q in [(2.0, 2.0), (4 / 3, 1.0), (3.0, 4.0)]:
            ref = maximal_average_by_quadrature(f, p, q)
            assert norm_via_maximal_average(f, LorentzIndex(p, q)) == pytest.approx(ref, rel=1e-7)


def test_maximal_average_needs_p_above_one():
    with pytest.raises(ValueError):
        norm_via_maximal_average(chi(1.0), LorentzIndex(1, 1))
    with pytest.raises(ValueError):
        norm_via_maximal_average(chi(1.0), LorentzIndex(INF, INF))


def test_maximal_average_within_hardy_factor():
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        f = ScalarField(random_space(rng, n), random_values(rng, n))
        for p in (4 / 3, 2.0, 3.0):
            for q in (1.0, 2.0, INF):
                idx = LorentzIndex(p, q)
                a, b = quasinorm(f, idx), norm_via_maximal_average(f, idx)
                assert a * (1 - 1e-12) <= b <= p / (p - 1) * a * (1 + 1e-12)


# -- properties ---------------------------------------------------------------

exponents = st.sampled_from([1.0, 4 / 3, 1.5, 2.0, 3.0, 6.0])
fields = st.integers(1, 16).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.05, 20), min_size=n, max_size=n),
        st.lists(st.floats(-10, 10), min_size=n, max_size=n),
    )
)


@settings(max_examples=200, deadline=None)
@given(fields, exponents, exponents, st.floats(0.01, 100))
def test_homogeneity(data, p, q, c):
    w, v = data
    f = ScalarField(MeasureSpace.from_weights(w), v)
    idx = LorentzIndex(p, q)
    assert quasinorm(f.scaled(-c), idx) == pytest.approx(c * quasinorm(f, idx), rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(fields, exponents, exponents, exponents)
def test_nonincreasing_in_second_index(data, p, q1, q2):
    w, v = data
    f = ScalarField(MeasureSpace.from_weights(w), v)
    lo, hi = sorted((q1, q2))
    assert quasinorm(f, LorentzIndex(p, hi)) <= quasinorm(f, LorentzIndex(p, lo)) * (1 + 1e-12)
    assert quasinorm(f, LorentzIndex(p, INF)) <= quasinorm(f, LorentzIndex(p, lo)) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(fields, st.integers(0, 10))
def test_norm_depends_only_on_rearrangement(data, seed):
    w, v = data
    f = ScalarField(MeasureSpace.from_weights(w), v)
    perm = np.random.default_rng(seed).permutation(len(w))
    g = ScalarField(MeasureSpace.from_weights(np.asarray(w)[perm]), np.asarray(v)[perm])
    for idx in (LorentzIndex(2, 1), LorentzIndex(1.5, INF)):
        assert quasinorm(g, idx) == pytest.approx(quasinorm(f, idx), rel=1e-12, abs=1e-300)
