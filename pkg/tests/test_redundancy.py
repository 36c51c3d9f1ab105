import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qdarwin import branching as b
from qdarwin import qmath
from qdarwin import redundancy as r
from qdarwin.errors import InvalidInputError
from qdarwin.haar_ensemble import Pip, UniverseSpec, haar_pip_analytic


def hadamard_state(n, seed, ds=2, de=2):
    return b.sample_branching_state(UniverseSpec(ds, de, n), qmath.RngStream(seed))


def test_sufficient_threshold():
    assert r.sufficient_threshold(math.log(2), 0.0) == math.log(2)
    assert_allclose(r.sufficient_threshold(math.log(2), 0.1), 0.9 * math.log(2))
    assert r.sufficient_threshold(math.log(2), 1.0) == 0.0
    assert_allclose(r.sufficient_threshold(1.0, 0.1, mode="total"), 1.8)
    with pytest.raises(InvalidInputError):
        r.sufficient_threshold(1.0, 1.5)
    with pytest.raises(InvalidInputError):
        r.sufficient_threshold(1.0, 0.1, mode="other")


def test_greedy_counts_match_reference_walk():
    st_ = hadamard_state(16, 3)
    h = b.system_entropy(st_)
    orders = r.random_orders(16, 12, qmath.RngStream(1))
    counts, first = r.greedy_counts(st_, orders, 0.9 * h)
    for order, c, f in zip(orders, counts, first):
        frags = r.greedy_fragments(st_, order, 0.9 * h)
        assert c == len(frags)
        assert f == len(frags[0])


def test_greedy_fragments_disjoint_and_sufficient():
    st_ = hadamard_state(16, 5)
    h = b.system_entropy(st_)
    frags = r.greedy_fragments(st_, np.random.default_rng(2).permutation(16), 0.9 * h)
    members = [k for f in frags for k in f]
    assert len(members) == len(set(members))
    assert all(b.mutual_information(st_, f) >= 0.9 * h for f in frags)


@pytest.mark.parametrize("delta", [0.01, 0.1, 0.25, 0.9])
def test_ghz_counts_every_subenvironment(delta):
    st_ = b.ghz_branching_state(UniverseSpec(2, 2, 16, "ghz"))
    rep = r.report_for_state(st_, delta, 10, qmath.RngStream(0))
    assert rep.n_delta_mean == 16
    assert rep.m_delta_mean == 1
    assert_allclose(rep.specific_r, 1 - delta)


def test_ghz_report_value():
    st_ = b.ghz_branching_state(UniverseSpec(2, 2, 16, "ghz"))
    rep = r.r_delta(st_, 0.1, 8, qmath.RngStream(0))
    assert_allclose(rep.r_delta, 13.4, atol=1e-12)


def test_unreachable_threshold_counts_zero():
    st_ = hadamard_state(6, 1)
    h = b.system_entropy(st_)
    counts, first = r.greedy_counts(st_, r.random_orders(6, 4, qmath.RngStream(0)), 2 * h + 1e-6)
    assert np.all(counts == 0) and np.all(np.isnan(first))


def test_system_without_information_has_no_fragments():
    amps = b.SystemAmplitudes(np.array([1.0, 0.0]))
    st_ = b.BranchingState(amps, np.stack([np.eye(2)] * 4))
    rep = r.report_for_state(st_, 0.1, 5, qmath.RngStream(0))
    assert rep.n_delta_mean == 0
    assert rep.r_delta == -1.0 and rep.r_display == 0.0
    assert math.isnan(rep.m_delta_mean) and rep.specific_r == 0.0


def test_n_delta_reference_oracle():
    st_ = hadamard_state(16, 11)
    h = b.system_entropy(st_)
    orders = r.random_orders(16, 20, qmath.RngStream(7))
    brute = np.mean([len(r.greedy_fragments(st_, o, 0.9 * h)) for o in orders])
    assert r.n_delta(st_, 0.1, 20, qmath.RngStream(7)) == brute


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d1=st.floats(0.01, 0.5), d2=st.floats(0.01, 0.5))
def test_counts_monotone_in_delta(seed, d1, d2):
    lo, hi = sorted((d1, d2))
    st_ = hadamard_state(12, seed, ds=3)
    a = r.report_for_state(st_, lo, 8, qmath.RngStream(seed))
    c = r.report_for_state(st_, hi, 8, qmath.RngStream(seed))
    assert a.n_delta_mean <= c.n_delta_mean


def test_report_consistency():
    rep = r.report_for_state(hadamard_state(20, 2), 0.1, 16, qmath.RngStream(3))
    assert rep.r_delta == (1 - 0.1) * rep.n_delta_mean - 1
    assert rep.specific_r == (1 - 0.1) / rep.m_delta_mean
    assert rep.samples == 16


def test_ensemble_reports_share_states():
    spec = UniverseSpec(3, 3, 16)
    reps = r.ensemble_redundancy(spec, [0.05, 0.1, 0.2], 6, 8, qmath.RngStream(5))
    n = [x.n_delta_mean for x in reps]
    assert n == sorted(n)
    single = r.ensemble_redundancy(spec, 0.1, 6, 8, qmath.RngStream(5))[0]
    assert single.n_delta_mean == reps[1].n_delta_mean
    par = r.ensemble_redundancy(spec, [0.05, 0.1, 0.2], 6, 8, qmath.RngStream(5), workers=2)
    assert [x.r_delta for x in par] == [x.r_delta for x in reps]


def test_ghz_sweep_slope():
    sw = r.specific_redundancy_sweep(UniverseSpec(2, 2, 4, "ghz"), [8, 16, 32], 0.1, 2, 4, qmath.RngStream(0))
    assert_allclose(sw.slope, 0.9, atol=1e-12)
    assert_allclose(sw.intercept, -1.0, atol=1e-12)
    assert_allclose(sw.r_squared, 1.0)
    with pytest.raises(InvalidInputError):
        r.specific_redundancy_sweep(UniverseSpec(2, 2, 4), [8, 16], 0.1, 2, 4)


def test_redundancy_insensitive_to_delta_small():
    reps = r.ensemble_redundancy(UniverseSpec(5, 5, 32), [0.02, 0.25], 8, 16, qmath.RngStream(1))
    assert reps[1].r_delta / reps[0].r_delta < 2.0


def test_scaled_pip_endpoints():
    pip = haar_pip_analytic(UniverseSpec(2, 2, 10))
    sp = r.scaled_pip(pip)
    assert_allclose([sp.f_cap[0], sp.f_info[0]], [0, 0], atol=1e-15)
    assert_allclose([sp.f_cap[-1], sp.f_info[-1]], [1, 1], atol=1e-12)
    assert_allclose([sp.f_cap[5], sp.f_info[5]], [0.5, 0.5], atol=1e-12)


def test_decompose_ghz():
    pip = b.exact_pip(UniverseSpec(2, 2, 8, "ghz"), 1, 4, qmath.RngStream(0))
    dec = r.decompose_information(pip, 0.1)
    h = math.log(2)
    assert_allclose([dec.i_redundant, dec.i_nonredundant, dec.i_quantum], [h, 0, h], atol=1e-12)
    assert dec.m_star == 1


def test_decompose_haar_has_no_redundant_part():
    pip = haar_pip_analytic(UniverseSpec(2, 2, 12))
    dec = r.decompose_information(pip, 0.1)
    assert dec.i_redundant == 0.0 and dec.m_star is None
    assert_allclose(dec.total, 2 * pip.h_sys, atol=1e-12)


def test_decompose_large_delta_uses_first_fragment():
    pip = b.exact_pip(UniverseSpec(2, 2, 10), 20, 8, qmath.RngStream(1))
    dec = r.decompose_information(pip, 0.999)
    assert dec.m_star == 1 and dec.i_redundant == pytest.approx(pip.i_mean[1])


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(0.01, 0.99), seed=st.integers(0, 1000))
def test_decomposition_sums_to_total(delta, seed):
    pip = b.exact_pip(UniverseSpec(2, 3, 6), 3, 4, qmath.RngStream(seed))
    dec = r.decompose_information(pip, delta)
    assert abs(dec.total - 2 * pip.h_sys) <= 1e-6
    assert min(dec.i_redundant, dec.i_nonredundant, dec.i_quantum) >= 0.0
