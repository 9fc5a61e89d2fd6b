"""Complex-argument transforms of the unit-truncated stable measure and
fixed-Talbot inversion.

Notation: A = Gamma(1 - alpha) and

    psi(lam) = int_0^1 (1 - exp(-lam x)) alpha x^(-alpha-1) dx
             = lam E(lam) - (1 - exp(-lam)),   E(lam) = int_0^1 exp(-lam x) x^(-alpha) dx

Extending the integral to (0, inf) and subtracting the part beyond 1 gives

    1 + psi(lam) = A lam^alpha + exp(-lam) G0(lam),
    G0(lam) = int_0^inf exp(-lam y) alpha (1 + y)^(-alpha-1) dy = 1 - lam Q(lam),
    Q(lam) = int_0^inf exp(-lam y) (1 + y)^(-alpha) dy.

G0 is evaluated by its asymptotic series for large |lam|, by a continued
fraction for Q when Re(lam) > 1, and from E otherwise.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre

# Beyond this modulus the asymptotic series of G0 is accurate to ~exp(-R).
_R_ASYM = 40.0
# Jacobi panel at the singular end, Legendre on the rest; scipy's Jacobi
# nodes lose accuracy for large orders, so a single high-order rule is avoided.
_JACOBI_NODES = 16
_LEGENDRE_NODES = 40
_SPLIT = 0.125


@lru_cache(maxsize=64)
def _jacobi_rule(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule for int_0^1 h(x) x^(-alpha) dx; weights include x^(-alpha)."""
    y, w = roots_jacobi(_JACOBI_NODES, 0.0, -alpha)
    x1, w1 = _SPLIT * (1.0 + y) / 2.0, w * (_SPLIT / 2.0) ** (1.0 - alpha)
    y, w = roots_legendre(_LEGENDRE_NODES)
    x2 = _SPLIT + (1.0 - _SPLIT) * (1.0 + y) / 2.0
    w2 = w * (1.0 - _SPLIT) / 2.0 * x2 ** (-alpha)
    return np.concatenate([x1, x2]), np.concatenate([w1, w2])


def _E(lam: np.ndarray, alpha: float) -> np.ndarray:
    x, w = _jacobi_rule(alpha)
    return np.exp(-np.multiply.outer(lam, x)) @ w


def _G0_asymptotic(lam: np.ndarray, alpha: float, kmax: int = 80) -> np.ndarray:
    # G0 ~ sum_{k>=1} (-1)^(k+1) (alpha)_k / lam^k, truncated at its smallest term
    out = np.zeros_like(lam)
    term = np.ones_like(lam)
    best = np.full(lam.shape, np.inf)
    done = np.zeros(lam.shape, dtype=bool)
    for k in range(1, kmax + 1):
        term = term * (-(alpha + k - 1)) / lam
        mag = np.abs(term)
        done |= mag > best
        out = np.where(done, out, out - term)
        best = np.minimum(best, mag)
        if done.all():
            break
    return out


def _Q_contfrac(lam: np.ndarray, alpha: float, itmax: int = 500) -> np.ndarray:
    # Q = 1/(lam+alpha - 1*alpha/(lam+alpha+2 - 2(1+alpha)/(lam+alpha+4 - ...)))
    tiny = 1e-300
    b = lam + alpha
    C = np.full_like(lam, 1.0 / tiny)
    D = 1.0 / b
    h = D.copy()
    for k in range(1, itmax):
        a = -k * (k - 1 + alpha)
        b = b + 2.0
        D = a * D + b
        D = np.where(np.abs(D) < tiny, tiny, D)
        D = 1.0 / D
        C = b + a / C
        C = np.where(np.abs(C) < tiny, tiny, C)
        delta = C * D
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h


def g0_transform(lam, alpha: float) -> np.ndarray:
    """Laplace transform of alpha (1 + y)^(-alpha-1) on y > 0."""
    lam = np.asarray(lam, dtype=complex)
    out = np.empty_like(lam)
    big = np.abs(lam) >= _R_ASYM
    cf = ~big & (lam.real > 1.0)
    near = ~(big | cf)
    if big.any():
        out[big] = _G0_asymptotic(lam[big], alpha)
    if cf.any():
        out[cf] = 1.0 - lam[cf] * _Q_contfrac(lam[cf], alpha)
    if near.any():
        ln = lam[near]
        out[near] = 1.0 - np.exp(ln) * (gamma(1.0 - alpha) * ln**alpha - ln * _E(ln, alpha))
    return out


def psi_tilde(lam, alpha: float) -> np.ndarray:
    """psi(lam) for complex lam (no domain check)."""
    lam = np.asarray(lam, dtype=complex)
    out = np.empty_like(lam)
    small = np.abs(lam) < _R_ASYM
    if small.any():
        ls = lam[small]
        out[small] = ls * _E(ls, alpha) + np.expm1(-ls)
    if (~small).any():
        lb = lam[~small]
        with np.errstate(over="ignore", invalid="ignore"):
            out[~small] = gamma(1.0 - alpha) * lb**alpha - 1.0 + np.exp(-lb) * g0_transform(lb, alpha)
    return out


def log_one_plus_psi(lam, alpha: float) -> np.ndarray:
    """Principal log(1 + psi(lam)), overflow-safe for very negative Re(lam)."""
    lam = np.asarray(lam, dtype=complex)
    out = np.empty_like(lam)
    far_left = lam.real < -30.0
    ok = ~far_left
    if ok.any():
        out[ok] = np.log1p(psi_tilde(lam[ok], alpha))
    if far_left.any():
        lf = lam[far_left]
        g0 = g0_transform(lf, alpha)
        out[far_left] = -lf + np.log(g0 + np.exp(lf) * gamma(1.0 - alpha) * lf**alpha)
    return out


@lru_cache(maxsize=8)
def talbot_nodes(M: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Nodes delta_k and weights for the fixed-Talbot rule (Abate-Valko).

    f(t) ~ (1/t) Re sum_k w_k F(delta_k / t), with the k = 0 term real.
    """
    rT = 2.0 * M / 5.0
    theta = np.arange(1, M) * np.pi / M
    cot = 1.0 / np.tan(theta)
    delta = np.concatenate([[rT], rT * theta * (cot + 1j)])
    sigma = theta + (theta * cot - 1.0) * cot
    w = np.concatenate([[0.5 * np.exp(rT)], np.exp(delta[1:]) * (1.0 + 1j * sigma)])
    return delta, w * (rT / M), rT


def talbot_invert(logF, t, M: int = 32) -> np.ndarray:
    """Invert a transform given through its logarithm at points t > 0.

    ``logF`` maps a complex array to log F on that array.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    delta, w, _ = talbot_nodes(M)
    lam = np.multiply.outer(1.0 / t, delta)
    vals = np.exp(logF(lam)) * w
    return vals.real.sum(axis=-1) / t
