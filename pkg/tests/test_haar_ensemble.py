import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qdarwin import qmath
from qdarwin.errors import GuardError, InvalidInputError
from qdarwin.haar_ensemble import (
    UniverseSpec,
    haar_mutual_information_mean,
    haar_pip_analytic,
    haar_pip_montecarlo,
    page_mean_entropy,
    page_mean_entropy_harmonic,
    page_symmetric,
)
from qdarwin.redundancy import interpolate_scaled, scaled_pip


def test_page_examples():
    assert page_mean_entropy(1, 7) == 0.0
    assert_allclose(page_mean_entropy(2, 2), 1 / 3, atol=1e-14)
    assert_allclose(page_mean_entropy(2, 4), 1 / 5 + 1 / 6 + 1 / 7 + 1 / 8 - 1 / 8, atol=1e-14)
    assert_allclose(page_mean_entropy(2, 4), 0.509524, atol=1e-6)


def test_page_argument_order_enforced():
    with pytest.raises(InvalidInputError):
        page_mean_entropy(4, 2)
    with pytest.raises(InvalidInputError):
        page_mean_entropy(0, 2)
    assert page_symmetric(4, 2) == page_mean_entropy(2, 4)


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 300), extra=st.integers(0, 3000))
def test_page_paths_agree(m, extra):
    n = m + extra
    if m * n > 10 ** 6:
        n = 10 ** 6 // m
    if n < m:
        return
    h = page_mean_entropy(m, n)
    assert_allclose(h, page_mean_entropy_harmonic(m, n), atol=1e-12)
    assert -1e-15 <= h <= math.log(m) + 1e-15


def test_page_large_dimensions():
    # m << n: H -> ln m - m/(2n)
    h = page_mean_entropy(2 ** 10, 2 ** 300)
    assert_allclose(h, 10 * math.log(2), atol=1e-12)
    assert np.isfinite(page_mean_entropy(2 ** 400, 2 ** 400))


def test_analytic_pip_small_example():
    pip = haar_pip_analytic(UniverseSpec(2, 2, 2))
    H = lambda a, b: page_mean_entropy_harmonic(min(a, b), max(a, b))
    # H(D_S, D_E^2) + H(D_E, D_S D_E) - H(D_S D_E, D_E), all three equal H(2, 4)
    assert_allclose(pip.i_mean[1], H(2, 4) + H(2, 4) - H(4, 2), atol=1e-13)
    assert_allclose(pip.i_mean[1], 0.509524, atol=1e-6)
    assert pip.i_mean[0] == 0.0
    assert_allclose(pip.i_mean[2], 2 * page_mean_entropy(2, 4), atol=1e-14)


@pytest.mark.parametrize("ds,de,n", [(2, 2, 12), (3, 2, 9), (2, 5, 7), (16, 4, 12), (2, 2, 200)])
def test_analytic_pip_antisymmetry(ds, de, n):
    pip = haar_pip_analytic(UniverseSpec(ds, de, n))
    assert_allclose(pip.i_mean + pip.i_mean[::-1], 2 * pip.h_sys, atol=1e-9)
    assert_allclose(pip.i_mean[n], 2 * pip.h_sys, atol=1e-12)
    assert np.all(np.diff(pip.i_mean) >= -1e-12)


def test_encoding_profile_small_fragments():
    pip = haar_pip_analytic(UniverseSpec(2, 2, 12))
    # frozen from the harmonic-sum evaluation
    assert_allclose(pip.i_mean[1:5] / pip.h_sys, [0.000792689, 0.003963447, 0.016646476, 0.067378593], rtol=1e-6)
    assert pip.i_mean[3] < 0.05 * pip.h_sys


def test_equivalent_environments_overlay():
    curves = [scaled_pip(haar_pip_analytic(UniverseSpec(16, de, n))) for de, n in [(2, 24), (4, 12), (16, 6)]]
    common = np.arange(7) / 6
    ref = interpolate_scaled(curves[0], common)
    for c in curves[1:]:
        assert_allclose(interpolate_scaled(c, common), ref, atol=1e-6)


def test_montecarlo_whole_environment():
    spec = UniverseSpec(2, 3, 1)
    mc = haar_pip_montecarlo(spec, 50, qmath.RngStream(1))
    assert mc.i_mean[0] == 0.0
    hs = [
        qmath.entropy_of_bipartite_cut(qmath.haar_state(6, qmath.RngStream(1).substream(k)), [2, 3], [0])
        for k in range(50)
    ]
    assert_allclose(mc.i_mean[1], 2 * np.mean(hs), atol=1e-12)


def test_montecarlo_matches_analytic_and_symmetry():
    spec = UniverseSpec(2, 2, 6)
    mc = haar_pip_montecarlo(spec, 600, qmath.RngStream(17))
    an = haar_pip_analytic(spec)
    se = mc.std_error
    assert np.all(np.abs(mc.i_mean - an.i_mean) <= 4 * se + 1e-15)
    sym_se = math.hypot(se[3], se[3])
    assert abs(mc.i_mean[3] + mc.i_mean[3] - 2 * an.h_sys) <= 4 * sym_se


def test_montecarlo_permuted_fragments_equivalent():
    spec = UniverseSpec(2, 2, 5)
    rng = qmath.RngStream(5)
    perm = np.random.default_rng(0).permutation(5)
    frags = [tuple(perm[:m]) for m in range(6)]
    a = haar_pip_montecarlo(spec, 400, rng.substream(0))
    b = haar_pip_montecarlo(spec, 400, rng.substream(1), fragments=frags)
    se = np.hypot(a.std_error, b.std_error)
    assert np.all(np.abs(a.i_mean - b.i_mean) <= 4 * se + 1e-15)


def test_montecarlo_deterministic_and_worker_independent():
    spec = UniverseSpec(2, 2, 4)
    a = haar_pip_montecarlo(spec, 20, qmath.RngStream(3))
    b = haar_pip_montecarlo(spec, 20, qmath.RngStream(3), workers=2)
    assert np.array_equal(a.i_mean, b.i_mean)


def test_montecarlo_guard():
    with pytest.raises(GuardError):
        haar_pip_montecarlo(UniverseSpec(2, 2, 14), 2, qmath.RngStream(0))


def test_universe_spec_validation():
    with pytest.raises(InvalidInputError):
        UniverseSpec(1, 2, 3)
    with pytest.raises(InvalidInputError):
        UniverseSpec(2, 2, 3, "weird")
    with pytest.raises(InvalidInputError):
        UniverseSpec(3, 2, 3, "custom", (1, 0))
    spec = UniverseSpec(2, 4, 3)
    assert spec.env_dim == 64 and spec.total_dim == 128
    assert_allclose(spec.capacity, 3 * math.log(4))
    assert haar_mutual_information_mean(spec, 0) == pytest.approx(0.0, abs=1e-15)
