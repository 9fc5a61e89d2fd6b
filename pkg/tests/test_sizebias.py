import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import ks_2samp

from trimmedpd.errors import DomainError, InsufficientEnumerationError
from trimmedpd.nbproc import NBParams, PointBatch, PointMeasure, nb_totals, sample_nb_batches
from trimmedpd.sizebias import (
    SizeBiasedDraw,
    chain_batch,
    first_pick_batch,
    markov_chain_sampler,
    ratio_first_pick,
    residual_fractions,
    size_biased_permutation,
    stick_reconstruct,
)

from conftest import binomial_z

points = st.lists(st.floats(1e-3, 0.999), min_size=1, max_size=30)


def test_residual_fractions_example():
    d = SizeBiasedDraw(np.array([0.5, 0.25]), np.array([1.0, 0.5, 0.25]), np.array([0.5, 0.5]))
    np.testing.assert_allclose(residual_fractions(d), [0.5, 0.5])


def test_stick_example_and_domain():
    np.testing.assert_allclose(stick_reconstruct([0.5, 0.5]), [0.5, 0.25])
    for bad in ([0.5, 1.0], [0.0], [1.2]):
        with pytest.raises(DomainError):
            stick_reconstruct(bad)


def test_draw_validation():
    with pytest.raises(DomainError):
        SizeBiasedDraw(np.array([0.5]), np.array([1.0, 1.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        SizeBiasedDraw(np.array([0.5]), np.array([1.0]), np.array([]))


def test_too_many_picks(rng):
    with pytest.raises(InsufficientEnumerationError):
        size_biased_permutation(PointMeasure([0.5, 0.2]), 3, rng)
    with pytest.raises(DomainError):
        size_biased_permutation(PointMeasure([0.5, 0.2]), 0, rng)


@given(points, st.integers(0, 2**32 - 1))
def test_full_permutation(pts, seed):
    d = size_biased_permutation(PointMeasure(pts), len(pts), np.random.default_rng(seed))
    np.testing.assert_array_equal(np.sort(d.picks), np.sort(pts))


@given(points, st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_draw_identities(pts, small, seed):
    m = PointMeasure(pts, 1e-3, small)
    n = len(pts)
    d = size_biased_permutation(m, n, np.random.default_rng(seed))
    T = d.totals
    # J_k + T_k = T_{k-1} up to one rounding of the subtraction
    np.testing.assert_allclose(d.picks + T[1:], T[:-1], rtol=1e-15, atol=1e-15)
    u = residual_fractions(d)
    assert np.all((u > 0) & (u < 1))
    assert T[-1] == pytest.approx(T[0] * np.prod(u), rel=1e-12)
    np.testing.assert_allclose(d.picks, T[:-1] * (1 - u), rtol=1e-12, atol=1e-300)
    v = stick_reconstruct(u)
    np.testing.assert_allclose(v, d.picks / T[0], rtol=1e-12, atol=1e-15)
    assert v.sum() == pytest.approx(1 - np.prod(u), rel=1e-12, abs=1e-15)


def test_first_pick_probability(rng):
    m = PointMeasure([0.6, 0.3, 0.1])
    n = 20_000
    first = np.array([size_biased_permutation(m, 1, rng).picks[0] for _ in range(n)])
    for p in (0.6, 0.3, 0.1):
        assert abs(binomial_z(np.sum(first == p), n, p)) < 3


def test_first_pick_frequencies_batch(rng):
    n = 100_000
    batch = PointBatch(np.tile([0.6, 0.3, 0.1], n), np.arange(0, 3 * n + 1, 3),
                       np.zeros(n), 0.05, 0.5)
    T0, J1 = first_pick_batch(batch, rng)
    np.testing.assert_allclose(T0, 1.0)
    for p in (0.6, 0.3, 0.1):
        assert abs(binomial_z(np.sum(J1 == p), n, p)) < 3


def test_small_mass_only_in_denominator_without_alpha(rng):
    m = PointMeasure([0.5], 0.1, 1.0)
    picks = [size_biased_permutation(m, 1, rng).picks[0] for _ in range(200)]
    assert set(picks) == {0.5}


def test_small_mass_pickable_with_alpha(rng):
    m = PointMeasure([0.5], 0.1, 1.0, alpha=0.5)
    picks = np.array([size_biased_permutation(m, 1, rng).picks[0] for _ in range(400)])
    small = picks[picks < 0.1]
    # the small mass carries two thirds of the total
    assert abs(binomial_z(small.size, 400, 2 / 3)) < 3
    assert np.all(small > 0)


def test_chain_gaps(fam05, rng):
    for _ in range(20):
        t = markov_chain_sampler(0.5, 1, 3, fam05, rng)
        gaps = -np.diff(t)
        assert np.all((gaps > 0) & (gaps < 1))
        assert np.all(t > 0)
    with pytest.raises(DomainError):
        markov_chain_sampler(0.5, 1, 0, fam05, rng)


def test_chain_batch_gaps(fam05, rng):
    t = chain_batch(0.5, 2, 2, 5000, fam05, rng)
    gaps = -np.diff(t, axis=1)
    assert np.all((gaps > 0) & (gaps < 1))


def test_chain_start_matches_nb_totals(fam05, rng):
    chain = np.array([markov_chain_sampler(0.5, 1, 1, fam05, rng)[0] for _ in range(3000)])
    direct = nb_totals(NBParams(0.5, 1), 1e-6, 20_000, rng)
    assert ks_2samp(chain, direct).pvalue > 1e-3


def test_chain_step_matches_direct_removal(fam05, rng):
    """T_1 from the kernel and from removing the first size-biased pick agree in law."""
    n = 20_000
    chain = chain_batch(0.5, 1, 1, n, fam05, rng)[:, 1]
    (batch,) = list(sample_nb_batches(NBParams(0.5, 1), 1e-4, n, rng))
    T0, J1 = first_pick_batch(batch, rng)
    assert ks_2samp(chain, T0 - J1).pvalue > 1e-3


def test_ratio_and_nb_first_picks_agree(rng):
    n = 20_000
    T_r, J_r = ratio_first_pick(0.5, 2, n, rng)
    (batch,) = list(sample_nb_batches(NBParams(0.5, 2), 1e-4, n, rng))
    T_b, J_b = first_pick_batch(batch, rng)
    assert ks_2samp(J_r / T_r, J_b / T_b).pvalue > 1e-3
    with pytest.raises(DomainError):
        ratio_first_pick(0.5, 0, 10, rng)
