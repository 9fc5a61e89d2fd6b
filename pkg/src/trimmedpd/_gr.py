"""Inversion engine for g_r, the density whose Laplace transform is (1 + psi)^(-r).

Two exact representations are combined.

Delay series (all r > 0).  Writing 1 + psi = A lam^alpha + exp(-lam) G0 and
expanding in the delayed term gives the finite sum

    g_r(t) = sum_{k <= t} f_k(t - k),   L f_k = binom(-r, k) G0^k (A lam^alpha)^(-r-k),

with f_k(s) = s^(p_k) phi_k(s), p_k = alpha (r + k) + k - 1 and phi_k entire.
Each f_k is recovered by fixed-Talbot inversion.  On [j, j+1) with u = t - j
the density is u^(p_j) phi_j(u) + R_j(u), where R_j collects the smooth terms
k < j; both are stored as Chebyshev interpolants.  The alternating terms cancel
more and more as t grows, so this route is used only on an initial range.

Residue series (integer r).  psi is entire, so (1 + psi)^(-r) is meromorphic
with poles of order r at the zeros of 1 + psi: one real zero -mu and complex
conjugate pairs drifting left logarithmically.  Summing residues gives
g_r(t) = Re sum_z exp(z t) P_z(t), which converges fast away from t = 0.
The zero set is certified by an argument-principle count.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq
from scipy.special import gamma, gammaln, roots_jacobi, roots_legendre

from ._laplace import _E, g0_transform, psi_tilde, talbot_nodes
from .errors import NumericalError

CHEB_NODES = 28
# Conservative relative accuracy of one double-precision Talbot inversion.
_TALBOT_EPS = 1e-10
# Delay-series error budgets: hand-over to residues, and hard stop.
_SWITCH_REL_ERR = 1e-5
_MAX_REL_ERR = 1e-4
# Range ends once the estimated mass beyond it is below this.
_TAIL_MASS = 1e-14
_MAX_INTERVALS = 400
_N_ZEROS = 60
_OVERLAP_TOL = 1e-7


def _h(lam, alpha):
    return 1.0 + psi_tilde(lam, alpha)


def _dh(lam, alpha):
    """d/dlam (1 + psi) = alpha E(lam)."""
    lam = np.asarray(lam, dtype=complex)
    out = np.empty_like(lam)
    big = np.abs(lam) >= 40.0
    if (~big).any():
        out[~big] = alpha * _E(lam[~big], alpha)
    if big.any():
        lb = lam[big]
        q = (1.0 - g0_transform(lb, alpha)) / lb
        out[big] = alpha * (gamma(1.0 - alpha) * lb ** (alpha - 1.0) - np.exp(-lb) * q)
    return out


@lru_cache(maxsize=64)
def decay_rate(alpha: float) -> float:
    """Root mu > 0 of 1 + psi(-mu) = 0; g_r(t) decays like t^(r-1) exp(-mu t)."""

    def h(mu):
        return _h(np.array([-mu + 0j]), alpha)[0].real

    hi = 1.0
    while h(hi) > 0:
        hi *= 2.0
    return brentq(h, 0.0, hi, xtol=1e-15, rtol=1e-15)


def _newton(z: complex, alpha: float, maxit: int = 80) -> complex | None:
    for _ in range(maxit):
        arr = np.array([z])
        step = _h(arr, alpha)[0] / _dh(arr, alpha)[0]
        z = z - step
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            return z
    return None


def _winding(alpha: float, x_left: float, y_top: float) -> int:
    """Zeros of 1 + psi in the rectangle [-x_left, 1] x [-y_top, y_top]."""
    corners = [1 - 1j * y_top, 1 + 1j * y_top, -x_left + 1j * y_top, -x_left - 1j * y_top]
    total = 0.0
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        n = 256
        while True:
            pts = np.linspace(a, b, n)
            ph = np.angle(_h(pts, alpha))
            d = np.diff(ph)
            d = (d + np.pi) % (2 * np.pi) - np.pi
            if np.abs(d).max() < 0.5 or n > 1 << 18:
                break
            n *= 4
        total += d.sum()
    return int(round(total / (2 * np.pi)))


@lru_cache(maxsize=64)
def stable_zeros(alpha: float, count: int = _N_ZEROS) -> tuple[complex, ...]:
    """Real zero -mu followed by the first ``count`` zeros in the upper half plane.

    Starting points solve exp(-lam) = -(A/alpha) lam^(1+alpha), the balance of
    A lam^alpha against the leading term alpha/lam of G0.
    """
    A = gamma(1.0 - alpha)
    found: list[complex] = []
    k = 1
    while len(found) < count and k < 4 * count:
        k += 1
        lam = complex(-1.0, (2 * k - 1) * np.pi)
        for _ in range(60):
            lam = -(np.log(A / alpha) + (1 + alpha) * np.log(lam)) + 1j * (2 * k - 1) * np.pi
        z = _newton(complex(lam), alpha)
        if z is None or z.imag <= 1e-8:
            continue
        if all(abs(z - w) > 1e-6 for w in found):
            found.append(z)
    found.sort(key=lambda z: z.imag)
    zeros = (complex(-decay_rate(alpha)),) + tuple(found[:count])
    # certify that no zero was skipped below the highest one kept
    top = zeros[-1]
    y_top = top.imag - 0.5 * (top.imag - zeros[-2].imag)
    x_left = -min(z.real for z in zeros[1:-1]) + 1.0
    expected = 1 + 2 * sum(1 for z in zeros[1:] if z.imag < y_top and z.real > -x_left)
    got = _winding(alpha, x_left, y_top)
    if got != expected:
        raise NumericalError(
            f"zero search for alpha={alpha} found {expected} zeros but the argument "
            f"principle counts {got}"
        )
    return zeros


def _laurent(z0: complex, alpha: float, r: int, rho: float, n: int = 128):
    """Principal-part coefficients b_{-1}, ..., b_{-r} of (1 + psi)^(-r) at z0.

    Also returns the largest integrand modulus, which sets the roundoff level.
    """
    th = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * th)
    v = _h(z0 + rho * e, alpha) ** (-float(r))
    b = np.array([np.mean(v * (rho * e) ** m) for m in range(1, r + 1)])
    return b, float(np.abs(v).max())


class _ResidueLate(NumericalError):
    """Delay series degraded before the residue series converged."""


def build_engine(alpha: float, r: float, nodes: int = 32) -> "GrEngine":
    """Build an engine, enlarging the zero set if the hand-over fails."""
    for count in (_N_ZEROS, 4 * _N_ZEROS, 16 * _N_ZEROS):
        try:
            return GrEngine(alpha, r, nodes, count)
        except _ResidueLate as exc:
            last = exc
    raise NumericalError(str(last))


class GrEngine:
    """Cached evaluator of g_r on (0, t_max)."""

    def __init__(self, alpha: float, r: float, nodes: int = 32, n_zeros: int = _N_ZEROS):
        self.alpha = float(alpha)
        self.r = float(r)
        self.nodes = int(nodes)
        self.n_zeros = int(n_zeros)
        a, rr = self.alpha, self.r
        self.A = gamma(1.0 - a)
        # g_r(t) = c0 t^(r alpha - 1) on (0, 1)
        self.log_c0 = -rr * np.log(self.A) - gammaln(rr * a)
        self.mu = decay_rate(a)
        self.integer_r = abs(rr - round(rr)) < 1e-12 and rr >= 1

        x = np.cos(np.pi * (np.arange(CHEB_NODES) + 0.5) / CHEB_NODES)
        self._u = (x + 1.0) / 2.0
        self._phi: list[np.ndarray] = [np.zeros(1)]
        self._rem: list[np.ndarray] = [np.zeros(1)]
        self._node_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.delay_rel_err = 0.0
        self.overlap_err = 0.0
        if self.integer_r:
            self._setup_residues()
        self._build()
        del self._node_cache

    # delay series -------------------------------------------------------

    def _p(self, k: int) -> float:
        return self.alpha * (self.r + k) + k - 1.0

    def _log_coef(self, k: int) -> float:
        return gammaln(self.r + k) - gammaln(self.r) - gammaln(k + 1.0)

    def _log_g0(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """log G0 and log(A lam^alpha) at the Talbot nodes for s = u + m."""
        if m not in self._node_cache:
            delta, _, _ = talbot_nodes(self.nodes)
            lam = np.multiply.outer(1.0 / (self._u + m), delta)
            self._node_cache[m] = (
                np.log(g0_transform(lam, self.alpha)),
                np.log(self.A) + self.alpha * np.log(lam),
            )
        return self._node_cache[m]

    def _scaled_term(self, k: int, m: int) -> np.ndarray:
        """f_k(s) / s^(p_k) at s = u + m, computed in log space."""
        _, w, _ = talbot_nodes(self.nodes)
        log_g0, log_base = self._log_g0(m)
        s = self._u + m
        logF = self._log_coef(k) + k * log_g0 - (self.r + k) * log_base
        logF -= (self._p(k) + 1.0) * np.log(s)[:, None]
        return (-1) ** k * (np.exp(logF) * w).real.sum(axis=-1)

    def _delay_interval(self, j: int) -> tuple[np.ndarray, np.ndarray, float]:
        u = self._u
        with np.errstate(over="raise", invalid="raise"):
            parts = np.array([
                self._scaled_term(k, j - k) * (u + j - k) ** self._p(k) for k in range(j)
            ])
        phi_vals = self._scaled_term(j, 0)
        rem_vals = parts.sum(axis=0)
        total = rem_vals + u ** self._p(j) * phi_vals
        scale = np.abs(parts).sum(axis=0)
        err = float(_TALBOT_EPS * (scale / np.maximum(np.abs(total), 1e-300)).max())
        return phi_vals, rem_vals, err

    def _build(self) -> None:
        u = self._u
        mean = self.r * self.alpha / (1.0 - self.alpha)
        budget = _SWITCH_REL_ERR if self.integer_r else _MAX_REL_ERR
        self.t_switch = np.inf
        j = 0
        while True:
            j += 1
            try:
                phi_vals, rem_vals, err = self._delay_interval(j)
            except FloatingPointError:
                err = np.inf
            if self.integer_r and self._residue_ok(float(j)):
                self.t_switch = float(j)
                if err <= budget:
                    self._check_overlap(j, phi_vals, rem_vals, err)
                j -= 1
                break
            if err > budget:
                if self.integer_r:
                    raise _ResidueLate(
                        f"g_r inversion for alpha={self.alpha}, r={self.r}: delay series "
                        f"degraded (rel. err {err:.1e}) before residues converged at t={j}"
                    )
                j -= 1
                break
            self._phi.append(C.chebfit(2 * u - 1, phi_vals, CHEB_NODES - 1))
            self._rem.append(C.chebfit(2 * u - 1, rem_vals, CHEB_NODES - 1))
            self.delay_rel_err = max(self.delay_rel_err, err)
            g_end = float(self._eval_piece(j, np.array([1.0]))[0])
            if (j > mean and abs(g_end) / self.mu < _TAIL_MASS) or j >= _MAX_INTERVALS:
                break
        self.n_delay = j
        self.t_max = self._residue_range() if np.isfinite(self.t_switch) else float(j + 1)

    def _eval_piece(self, j: int, u: np.ndarray) -> np.ndarray:
        if j == 0:
            with np.errstate(divide="ignore"):
                return np.exp(self.log_c0) * u ** (self.r * self.alpha - 1.0)
        x = 2.0 * u - 1.0
        return u ** self._p(j) * C.chebval(x, self._phi[j]) + C.chebval(x, self._rem[j])

    # residue series -----------------------------------------------------

    def _setup_residues(self) -> None:
        zeros = stable_zeros(self.alpha, self.n_zeros)
        r = int(round(self.r))
        self._zeros = np.array(zeros)
        coefs, self._rho, self._vmax = [], [], []
        for i, z in enumerate(zeros):
            others = np.delete(self._zeros, i)
            others = np.concatenate([others, np.conj(others), [np.conj(z)]])
            gap = np.abs(others - z)
            gap = gap[gap > 0].min()
            rho = 0.3 * gap
            b, vmax = _laurent(z, self.alpha, r, rho)
            self._rho.append(rho)
            self._vmax.append(vmax)
            # P_z(t) = sum_m b_{-(m+1)} t^m / m!
            coefs.append(b / np.array([float(factorial(m)) for m in range(r)]))
        self._res_coef = np.array(coefs)
        self._mult = np.where(np.abs(self._zeros.imag) > 0, 2.0, 1.0)
        self._rho = np.array(self._rho)
        self._vmax = np.array(self._vmax)

    def _residue_terms(self, t: np.ndarray) -> np.ndarray:
        """Per-zero contributions, shape (n_zeros, len(t))."""
        t = np.asarray(t, dtype=float)
        powers = t[None, :] ** np.arange(self._res_coef.shape[1])[:, None]
        P = self._res_coef @ powers
        return self._mult[:, None] * (np.exp(np.multiply.outer(self._zeros, t)) * P).real

    def _residue_eval(self, t: np.ndarray) -> np.ndarray:
        return self._residue_terms(t).sum(axis=0)

    def _residue_ok(self, t: float) -> bool:
        terms = self._residue_terms(np.array([t]))[:, 0]
        g = terms.sum()
        # zeros drift left only logarithmically: bound the omitted tail by the last few
        tail = np.abs(terms[-4:]).max() * 10.0
        # roundoff in each b_m is ~eps * vmax * rho^m; propagate through P(t)
        spread = self._vmax * self._rho * np.exp((self._zeros.real + self._rho) * t) * self._mult
        cancel = 1e-14 * spread.sum()
        return g > 0 and tail < 1e-10 * g and cancel < 1e-9 * g

    def _check_overlap(self, j: int, phi_vals: np.ndarray, rem_vals: np.ndarray, err: float) -> None:
        """Compare both routes on [j, j+1], just past the hand-over point."""
        u = self._u
        d = rem_vals + u ** self._p(j) * phi_vals
        r = self._residue_eval(j + u)
        self.overlap_err = float(np.max(np.abs(d - r) / np.abs(r)))
        if self.overlap_err > max(_OVERLAP_TOL, 10.0 * err):
            raise NumericalError(
                f"g_r routes disagree for alpha={self.alpha}, r={self.r}: "
                f"relative gap {self.overlap_err:.1e} on [{j}, {j + 1}]"
            )

    def _residue_range(self) -> float:
        mean = self.r * self.alpha / (1.0 - self.alpha)
        t = self.t_switch
        while True:
            t += 1.0
            g = self._residue_eval(np.array([t]))[0]
            if (t > mean and g / self.mu < _TAIL_MASS) or t > 1e5:
                return t

    # public -------------------------------------------------------------

    def __call__(self, t) -> np.ndarray:
        """Evaluate on (0, t_max); points outside return nan."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.full(flat.shape, np.nan)
        ok = (flat > 0) & (flat < self.t_max)
        late = ok & (flat >= self.t_switch)
        if late.any():
            out[late] = self._residue_eval(flat[late])
        early = ok & ~late
        j = np.floor(flat).astype(np.int64)
        for jj in np.unique(j[early]):
            sel = early & (j == jj)
            out[sel] = self._eval_piece(int(jj), flat[sel] - jj)
        return out.reshape(t.shape)

    def quadrature(self, n: int = 40, include_origin: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Nodes t_i and weights w_i with sum w_i f(t_i) ~ int_0^t_max f(t) g_r(t) dt.

        Smooth f only; the weights absorb g_r including its power singularities.
        With ``include_origin`` false the first unit interval is left out.
        """
        ts, ws = [], []
        b0 = self.r * self.alpha - 1.0
        if include_origin:
            x, w = roots_jacobi(n, 0.0, b0)
            ts.append((1 + x) / 2)
            ws.append(np.exp(self.log_c0) * w / 2.0 ** (b0 + 1.0))
        xl, wl = roots_legendre(n)
        ul, wl = (1 + xl) / 2, wl / 2
        last_delay = self.n_delay
        for j in range(1, last_delay + 1):
            p = self._p(j)
            xj, wj = roots_jacobi(n, 0.0, p)
            uj = (1 + xj) / 2
            ts.append(j + uj)
            ws.append(C.chebval(xj, self._phi[j]) * wj / 2.0 ** (p + 1.0))
            ts.append(j + ul)
            ws.append(C.chebval(2 * ul - 1, self._rem[j]) * wl)
        start = float(last_delay + 1)
        if np.isfinite(self.t_switch):
            edges = np.arange(start, self.t_max + 1.0)
            for a in edges[:-1]:
                tt = a + ul
                ts.append(tt)
                ws.append(self._residue_eval(tt) * wl)
        return np.concatenate(ts), np.concatenate(ws)

    # cumulative integrals -------------------------------------------------

    def _smooth_coefs(self, j: int, power: float) -> np.ndarray:
        """Chebyshev coefficients (in u) of the smooth part of s^power g_r(s) on [j, j+1]."""
        u = self._u
        if j <= self.n_delay:
            vals = C.chebval(2 * u - 1, self._rem[j])
        else:
            vals = self._residue_eval(j + u)
        return C.chebint(C.chebfit(2 * u - 1, vals * (j + u) ** power, CHEB_NODES - 1), lbnd=-1)

    def _piece_integral(self, j: int, w: np.ndarray, power: float, n: int = 40) -> np.ndarray:
        """int_j^(j+w) s^power g_r(s) ds for w in [0, 1]."""
        key = (j, power)
        if key not in self._int_cache:
            self._int_cache[key] = self._smooth_coefs(j, power)
        out = C.chebval(2 * w - 1, self._int_cache[key]) / 2.0
        if j <= self.n_delay:
            # singular part u^p phi(u): scale Gauss-Jacobi nodes onto [0, w]
            p = self._p(j)
            x, wt = roots_jacobi(n, 0.0, p)
            v = (1 + x) / 2
            uu = np.multiply.outer(w, v)
            f = C.chebval(2 * uu - 1, self._phi[j]) * (j + uu) ** power
            out = out + w ** (p + 1.0) * (f @ wt) / 2.0 ** (p + 1.0)
        return out

    def integral(self, t, power: float = 0.0) -> np.ndarray:
        """int_0^t s^power g_r(s) ds, with t clipped to (0, t_max]."""
        if not hasattr(self, "_int_cache"):
            self._int_cache: dict = {}
            self._cum_cache: dict = {}
        b = self.r * self.alpha + power
        if b <= 0:
            raise ValueError("s^power g_r(s) is not integrable at 0")
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.t_max)
        n_int = int(round(self.t_max))
        if power not in self._cum_cache:
            full = [np.exp(self.log_c0) / b]
            full += [float(self._piece_integral(j, np.array([1.0]), power)[0]) for j in range(1, n_int)]
            self._cum_cache[power] = np.concatenate([[0.0], np.cumsum(full)])
        cum = self._cum_cache[power]
        flat = t.ravel()
        j = np.minimum(np.floor(flat).astype(np.int64), n_int - 1)
        w = flat - j
        out = cum[j].copy()
        first = j == 0
        out[first] += np.exp(self.log_c0) * w[first] ** b / b
        for jj in np.unique(j[~first]):
            sel = j == jj
            out[sel] += self._piece_integral(int(jj), w[sel], power)
        return out.reshape(t.shape)
