import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzmax import (
    CSV_COLUMNS,
    INF,
    KernelSpec,
    LorentzIndex,
    ScalarField,
    build_kernel,
    characteristic_bound_ratios,
    estimate_endpoint_constant,
    interpolate_exponents,
    interpolate_pair,
    quasinorm,
    random_field,
    recip,
    trial_seed,
    verify_maximal_bound,
    with_size,
)

ZYGMUND = dict(p1=1, s1=INF, p2=2, s2=2)


def small_fourier(size):
    return build_kernel(with_size(KernelSpec("fourier", {"L": 8.0}), size))


# -- exponent arithmetic -------------------------------------------------------

def test_zygmund_midpoint():
    prof = interpolate_exponents(**ZYGMUND, r=0.5)
    assert prof.p_r == pytest.approx(4 / 3, rel=1e-15)
    assert prof.s_r == pytest.approx(4.0, rel=1e-15)
    assert prof.q == prof.p_r


def test_zygmund_r_03():
    p_r, s_r = interpolate_pair(1, INF, 2, 2, 0.3)
    assert p_r == pytest.approx(20 / 17, rel=1e-14)
    assert s_r == pytest.approx(20 / 3, rel=1e-14)


def test_endpoints_are_reproduced():
    assert interpolate_pair(1, INF, 2, 2, 0.0) == (1.0, INF)
    assert interpolate_pair(1, INF, 2, 2, 1.0) == (2.0, 2.0)
    p, s = interpolate_pair(1, INF, 2, 2, 1e-12)
    assert p == pytest.approx(1.0) and recip(s) == pytest.approx(0.0, abs=1e-11)


def test_chain_exponents_are_ordered():
    prof = interpolate_exponents(**ZYGMUND, r=0.5, q=4 / 3)
    assert (prof.r3, prof.r4) == (0.25, 0.75)
    assert recip(prof.s1) < recip(prof.s3) < recip(prof.s_r) < recip(prof.s4) < recip(prof.s2)
    assert prof.q_prime == pytest.approx(2 * max(prof.p3, prof.p4))
    assert prof.as_dict()["s1"] == "inf"


@pytest.mark.parametrize("kwargs", [
    dict(p1=0.5, s1=INF, p2=2, s2=2, r=0.5),
    dict(p1=1, s1=2, p2=2, s2=INF, r=0.5),
    dict(p1=2, s1=INF, p2=2, s2=2, r=0.5),
    dict(p1=1, s1=INF, p2=2, s2=2, r=1.0),
    dict(p1=1, s1=INF, p2=2, s2=2, r=0.5, q=0.5),
    dict(p1=1, s1=INF, p2=2, s2=2, r=0.5, q_prime=1.0),
])
def test_invalid_profiles(kwargs):
    with pytest.raises(ValueError):
        interpolate_exponents(**kwargs)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1, 10), st.floats(1, 10), st.floats(1, 10), st.floats(1, 10), st.floats(0, 1),
)
def test_reciprocals_interpolate_linearly(p1, s1, p2, s2, r):
    p_r, s_r = interpolate_pair(p1, s1, p2, s2, r)
    assert recip(p_r) == pytest.approx((1 - r) / p1 + r / p2, rel=1e-12)
    assert recip(s_r) == pytest.approx((1 - r) / s1 + r / s2, rel=1e-12)


# -- seeding and trials --------------------------------------------------------

def test_trial_seeds_are_stable_and_distinct():
    assert trial_seed(1, 256, 0) == trial_seed(1, 256, 0)
    seeds = {trial_seed(1, n, i) for n in (256, 512) for i in range(100)}
    assert len(seeds) == 200


def test_random_field_is_union_of_stages():
    scn = small_fourier(64)
    f = random_field(scn.space, scn.family, np.random.default_rng(0))
    stage = scn.family.stage_index()
    on = np.flatnonzero(f.values)
    for j in np.unique(stage[on]):
        assert np.all(f.values[scn.family.stages[j]] != 0)
    assert np.all(f.abs[on] >= 1.0)


def test_empty_trials_give_empty_report():
    prof = interpolate_exponents(**ZYGMUND, r=0.5)
    rep = verify_maximal_bound(small_fourier, prof, trials=0, sizes=[32], seed=0)
    assert rep.records == [] and rep.to_csv() == ",".join(CSV_COLUMNS) + "\n"


def test_single_atom_ratio_closed_form():
    prof = interpolate_exponents(**ZYGMUND, r=0.5, q=4 / 3)
    scn = small_fourier(32)
    atom = 5

    def one_atom(space, family, rng):
        v = np.zeros(len(space), dtype=complex)
        v[atom] = 2.0 - 3.0j
        return ScalarField(space, v)

    rep = verify_maximal_bound(lambda n: scn, prof, trials=2, sizes=[32], seed=0, generator=one_atom)
    w = scn.space.weights[atom]
    row = ScalarField(scn.grid, np.abs(scn.kernel.evaluate(scn.grid.points, scn.space.points[atom])))
    expected = w ** (1 - 1 / prof.p_r) * quasinorm(row, prof.output_index)
    np.testing.assert_allclose(rep.ratios(32), expected, rtol=1e-12)


def test_verification_is_reproducible_and_thread_independent():
    prof = interpolate_exponents(**ZYGMUND, r=0.5, q=4 / 3)
    a = verify_maximal_bound(small_fourier, prof, trials=6, sizes=[32, 64], seed=9)
    b = verify_maximal_bound(small_fourier, prof, trials=6, sizes=[32, 64], seed=9, threads=3)
    assert a.to_csv() == b.to_csv()
    c = verify_maximal_bound(small_fourier, prof, trials=6, sizes=[32, 64], seed=10)
    assert a.to_csv() != c.to_csv()
    summary = a.summary()
    assert summary["trials"] == 12 and set(summary["per_size"]) == {"32", "64"}
    assert "growth_largest_over_smallest" in summary and "chain_constants" in summary


def test_endpoint_constant_of_parseval_kernel():
    # DFT-exact geometry: ||T||_{2->2} = sqrt(2 pi), attained by any f
    scn = build_kernel(KernelSpec("fourier", {"n": 64, "L": 8.0}))

    def gen(rng):
        return ScalarField(scn.space, rng.normal(size=64) + 1j * rng.normal(size=64))

    c = estimate_endpoint_constant(scn.kernel, scn.space, scn.grid, LorentzIndex(2, 2), LorentzIndex(2, 2), gen, 5)
    assert c == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    with pytest.raises(ValueError):
        estimate_endpoint_constant(scn.kernel, scn.space, scn.grid, LorentzIndex(2, 2), LorentzIndex(2, 2), gen, 0)


def test_zero_kernel_constant():
    scn = build_kernel(KernelSpec("fourier", {"n": 16, "L": 4.0}))
    scn.kernel.func = lambda k, x: np.zeros(np.broadcast(k, x).shape)

    def gen(rng):
        return ScalarField(scn.space, rng.normal(size=16))

    assert estimate_endpoint_constant(scn.kernel, scn.space, scn.grid, LorentzIndex(1, 1), LorentzIndex(2, 2), gen, 3) == 0.0


def test_characteristic_ratios_are_flat_for_walsh():
    prof = interpolate_exponents(**ZYGMUND, r=0.5, q=4 / 3)
    scn = build_kernel(KernelSpec("orthonormal", {"system": "walsh", "n": 64}))
    ratios = characteristic_bound_ratios(scn, prof, range(1, 7))
    for r in ratios.values():
        assert r.max() / r.min() < 4
    with pytest.raises(ValueError):
        characteristic_bound_ratios(scn, prof, [7])
