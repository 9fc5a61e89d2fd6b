import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special
from scipy.stats import norm

from trimmedpd.densities import (
    GrDensity,
    GrFamily,
    ascending_factorial,
    beta_density,
    d_min,
    depen_check,
    first_pick_bin_probs,
    g_bin_probs,
    g_density,
    g_density_mc,
    g_mean,
    g_variance,
    joint_T_density,
    joint_T_marginal,
    joint_T_mass,
    joint_U_T_cell_probs,
    joint_U_T_density,
    joint_U_T_mass,
    k_n,
    kn_integral_check,
    sb_joint_cell_probs,
    sb_joint_density,
    sb_joint_mass,
    theta,
    transition_density,
    transition_mass,
)
from trimmedpd.errors import DomainError, RangeError


def g_oracle(alpha, r, t):
    """De Hoog inversion of (1 + psi(s))^-r in multiprecision, psi via the incomplete gamma."""
    a = mp.mpf(alpha)
    F = lambda s: (1 + s**a * mp.gammainc(1 - a, 0, s) - (1 - mp.exp(-s))) ** (-r)
    with mp.workdps(30):
        return float(mp.invertlaplace(F, t, method="dehoog"))


def psi_oracle(alpha, lam):
    return lam**alpha * special.gammainc(1 - alpha, lam) * special.gamma(1 - alpha) + np.expm1(-lam)


def k_n_oracle(alpha, n):
    """E S^(-q) = int_0^inf lam^(q-1) exp(-Gamma(1-alpha) lam^alpha) dlam / Gamma(q), q = n alpha.

    Integrated numerically in y = lam^alpha, where the decay is exponential.
    """
    A = special.gamma(1 - alpha)
    f = lambda y: y ** (n - 1) * np.exp(-A * y) / alpha
    return integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12)[0] / special.gamma(n * alpha)


GRID = [(a, r) for a in (0.3, 0.5, 0.7) for r in (1, 2, 5)]


# elementary pieces -------------------------------------------------------------

def test_theta_examples():
    assert theta(0.5, 0.25) == 1.0
    assert theta(0.5, 2.0) == 0.0
    x = 1e-8
    assert theta(0.3, x) == pytest.approx(0.3 * x**-0.3)


def test_beta_examples():
    assert beta_density(1, 1, 0.37) == pytest.approx(1.0)
    assert beta_density(0.5, 0.5, 0.5) == pytest.approx(2 / np.pi, rel=1e-12)
    with pytest.raises(DomainError):
        beta_density(0, 1, 0.5)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (1, 3), (2.5, 0.7), (0.3, 4)])
def test_beta_normalised(a, b):
    val = integrate.quad(lambda x: beta_density(a, b, x), 0, 1, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    assert val == pytest.approx(1.0, abs=1e-8)


def test_ascending_factorial():
    assert ascending_factorial(3, 0) == 1
    assert ascending_factorial(2, 3) == pytest.approx(24)
    assert ascending_factorial(0.5, 2) == pytest.approx(0.75)


def test_k_n_examples():
    assert k_n(0.5, 1) == pytest.approx(2 / np.pi, rel=1e-12)
    assert k_n(0.5, 2) == pytest.approx(2 / np.pi, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("n", [1, 2, 5])
def test_k_n_moment_oracle(alpha, n):
    assert k_n(alpha, n) == pytest.approx(k_n_oracle(alpha, n), rel=1e-7)


@given(st.floats(0.05, 0.95), st.integers(1, 50))
def test_k_n_forms_agree(alpha, n):
    # k_n raises NumericalError when its two closed forms differ by more than 1e-10
    assert np.isfinite(k_n(alpha, n))


def test_d_min_examples():
    assert d_min([0.5, 0.5]) == pytest.approx(0.5)
    assert d_min([0.8]) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        d_min([0.5, 1.0])


# g_r ----------------------------------------------------------------------------

@pytest.mark.parametrize("alpha,r", [(0.5, 1), (0.3, 2), (0.7, 5)])
def test_g_pointwise_oracle(alpha, r):
    g = GrFamily(alpha)[r]
    for t in (0.3, 1.5, 2.5, 6.0):
        assert g(t) == pytest.approx(g_oracle(alpha, r, t), rel=1e-7)


@pytest.mark.parametrize("alpha,r", GRID)
def test_g_moments_and_laplace(alpha, r):
    g = GrFamily(alpha)[r]
    t, w = g.quadrature()
    assert w.sum() == pytest.approx(1.0, abs=1e-4)
    assert w @ t == pytest.approx(g_mean(alpha, r), rel=1e-3)
    m = g_mean(alpha, r)
    assert w @ (t - m) ** 2 == pytest.approx(g_variance(alpha, r), rel=1e-3)
    for lam in (0.5, 1.0, 2.0):
        assert g.laplace(lam) == pytest.approx((1 + psi_oracle(alpha, lam)) ** (-r), rel=1e-4)


def test_g_normalisation_by_adaptive_quadrature(fam05):
    g = fam05[1]
    pieces = [0, 1, 2, 3, 5, 10, g.t_max * (1 - 1e-9)]
    val = sum(integrate.quad(g, a, b, limit=200)[0] for a, b in zip(pieces[:-1], pieces[1:]))
    assert val == pytest.approx(1.0, abs=1e-4)


def test_g_refuses_outside_range(fam05):
    g = fam05[1]
    with pytest.raises(RangeError):
        g_density(g, g.t_max * 2)
    with pytest.raises(RangeError):
        g_density(g, -1.0)
    with pytest.raises(DomainError):
        GrDensity(0.5, 0.0)


def test_g_small_t_power_law(fam05):
    g = fam05[2]
    t = np.array([1e-6, 1e-3, 0.5])
    np.testing.assert_allclose(g(t), np.exp(g.log_c0) * t ** (2 * 0.5 - 1), rtol=1e-10)


def test_g_fast_table_close(fam05):
    g = fam05[1]
    t = np.linspace(0.05, g.t_max * 0.9, 400)
    np.testing.assert_allclose(g.fast(t), g(t), rtol=1e-3)


def test_g_histogram_matches_mc(fam05, rng):
    edges = np.array([0, 0.05, 0.2, 0.5, 1, 1.5, 2, 3, 5, np.inf])
    h = g_density_mc(0.5, 1, edges, 100_000, rng)
    p = g_bin_probs(fam05[1], np.minimum(edges, fam05[1].t_max))
    p[-1] += 1 - p.sum()
    z = (h.prob - p) / np.sqrt(p * (1 - p) / h.n_samples)
    assert np.abs(z).max() < norm.isf(norm.sf(3) / p.size)
    with pytest.raises(DomainError):
        g_density_mc(0.5, 1, edges, 10, rng)


# joint laws ---------------------------------------------------------------------

def test_joint_T_support(fam05):
    assert joint_T_density(0.5, 1, [2.5, 1.0], fam05).value == 0.0
    assert joint_T_density(0.5, 1, [1.0, 1.5], fam05).value == 0.0
    e = joint_T_density(0.5, 1, [1.5, 1.0], fam05)
    assert e.in_support and e.value > 0 and e.constraint_slack == pytest.approx(0.5)
    with pytest.raises(DomainError):
        joint_T_density(0.5, 1, [1.0], fam05)


@given(st.floats(0.05, 6.0), st.lists(st.floats(0.01, 0.99), min_size=1, max_size=3))
def test_joint_T_factorises(fam05, t0, gaps):
    t = t0 - np.concatenate([[0.0], np.cumsum(gaps)])
    if t[-1] <= 1e-3:
        return
    r = 1
    f = joint_T_density(0.5, r, t, fam05).value
    prod = fam05[r](t[0])
    for k in range(len(gaps)):
        prod *= transition_density(0.5, r, k, t[k], t[k + 1], fam05).value
    assert f == pytest.approx(prod, rel=1e-9)


@pytest.mark.parametrize("t0", [0.5, 1.0, 3.0])
def test_kernel_normalised_and_marginal(fam05, t0):
    assert transition_mass(0.5, 1, 0, t0, fam05) == pytest.approx(1.0, abs=1e-3)
    assert joint_T_marginal(0.5, 1, t0, fam05) == pytest.approx(fam05[1](t0), rel=1e-3)


@pytest.mark.parametrize("t0", [0.5, 3.0])
def test_kernel_mass_adaptive_oracle(fam05, t0):
    f = lambda s: transition_density(0.5, 1, 0, t0, s, fam05).value
    lo = max(0.0, t0 - 1)
    val = integrate.quad(f, lo, t0, limit=400, points=[x for x in (1.0, 2.0) if lo < x < t0])[0]
    assert val == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("alpha,r", [(0.3, 1), (0.5, 2), (0.7, 1)])
def test_appendix_masses(alpha, r):
    fam = GrFamily(alpha)
    assert joint_T_mass(alpha, r, fam) == pytest.approx(1.0, abs=1e-3)
    assert sb_joint_mass(alpha, r, fam) == pytest.approx(1.0, abs=1e-3)
    assert joint_U_T_mass(alpha, r, fam) == pytest.approx(1.0, abs=1e-3)


def test_joint_U_T_support(fam05):
    assert joint_U_T_density(0.5, 1, 5.0, [0.8], fam05).value == 0.0  # bound is 4
    assert not joint_U_T_density(0.5, 1, 1.0, [1.2], fam05).in_support
    e = joint_U_T_density(0.5, 1, 1.0, [0.8], fam05)
    assert e.in_support and e.constraint_slack == pytest.approx(3.0)


def test_sb_joint_support(fam05):
    with pytest.raises(DomainError):
        sb_joint_density(0.5, 1, [0.6, 0.5], 1.0, fam05)
    assert sb_joint_density(0.5, 1, [0.6], 2.0, fam05).value == 0.0  # v >= 1/t
    assert sb_joint_density(0.5, 1, [0.3], 2.0, fam05).value > 0


def test_cell_probabilities_sum_to_one(fam05):
    te = np.array([0, 0.5, 1, 2, np.inf])
    ue = np.array([0, 0.3, 0.7, 1])
    assert joint_U_T_cell_probs(0.5, 1, te, ue, fam05).sum() == pytest.approx(1.0, abs=1e-4)
    ve = np.array([0, 0.2, 0.5, 1])
    assert sb_joint_cell_probs(0.5, 1, ve, te, fam05).sum() == pytest.approx(1.0, abs=1e-4)
    assert first_pick_bin_probs(0.5, 1, np.linspace(0, 1, 11), fam05).sum() == pytest.approx(1.0, abs=1e-6)


# constants ----------------------------------------------------------------------

@pytest.mark.parametrize("alpha,r", GRID)
def test_kn_integral(alpha, r):
    for n in (1, 2, 3):
        assert kn_integral_check(alpha, r, n) < 1e-6


def test_depen_check(fam05, rng):
    for n in (1, 2):
        res = depen_check(0.5, 1, n, 50_000, rng, fam05)
        assert abs(res.z_score) < 3
    with pytest.raises(DomainError):
        depen_check(0.5, 1, 3, 100, rng, fam05)
