"""Densities and constants of the trimmed Poisson-Dirichlet family.

g_r is the density of the total mass of BN(r, Lambda~), with Laplace transform
(1 + psi(lam))^(-r).  Joint laws of the residual totals, residual fractions
and size-biased picks are products of g_{r+n} with elementary factors.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln, hyp2f1, roots_jacobi

from ._gr import build_engine
from ._laplace import psi_tilde
from ._quadrature import composite, integer_cuts, rule
from .errors import DomainError, NumericalError, RangeError
from .levy import check_alpha
from .nbproc import NBParams, default_epsilon, nb_totals

NORM_TOL = 1e-4
LAPLACE_TOL = 1e-4
CLIP_TOL = 1e-10
VALIDATION_LAMBDAS = (0.5, 1.0, 2.0)
# Per-interval layout of the fast lookup table: u_k = (k / K)^2 clusters
# nodes at the integer kinks of g_r.
_TABLE_K = 64


# elementary pieces ---------------------------------------------------------

def theta(alpha: float, x):
    """alpha x^(-alpha) on (0, 1), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    out = np.zeros_like(x)
    out[inside] = alpha * x[inside] ** (-alpha)
    return out.item() if out.ndim == 0 else out


def beta_density(a: float, b: float, x):
    if not (a > 0 and b > 0):
        raise DomainError(f"Beta parameters must be positive, got ({a}, {b})")
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.exp((a - 1) * np.log(xi) + (b - 1) * np.log1p(-xi) - betaln(a, b))
    return out.item() if out.ndim == 0 else out


def ascending_factorial(r: float, n: int) -> float:
    """r (r+1) ... (r+n-1)."""
    if n < 0 or int(n) != n:
        raise DomainError("n must be a nonnegative integer")
    return float(np.exp(gammaln(r + n) - gammaln(r)))


def log_k_n(alpha: float, n: int) -> float:
    return gammaln(n + 1.0) - n * gammaln(1.0 - alpha) - gammaln(n * alpha + 1.0)


def _log_k_n_product(alpha: float, n: int) -> float:
    i = np.arange(n)
    return (
        gammaln(1.0 + i * alpha).sum()
        - n * np.log(alpha)
        - n * gammaln(1.0 - alpha)
        - gammaln((i + 1) * alpha).sum()
    )


def k_n(alpha: float, n: int) -> float:
    """K_n = E S_1^(-n alpha) for c = 1, from the short closed form.

    The product form is evaluated too and must agree to 1e-10.
    """
    alpha = check_alpha(alpha)
    if n < 1 or int(n) != n:
        raise DomainError("n must be a positive integer")
    a, b = log_k_n(alpha, n), _log_k_n_product(alpha, n)
    if abs(np.expm1(a - b)) > 1e-10:
        raise NumericalError(f"K_n closed forms disagree at alpha={alpha}, n={n}: {a} vs {b}")
    return float(np.exp(a))


def d_min(u) -> float:
    """min over i of prod_{j >= i} u_j / (1 - u_i)."""
    u = np.asarray(u, dtype=float)
    if u.size == 0 or np.any((u <= 0) | (u >= 1)):
        raise DomainError("fractions must lie in (0, 1)")
    tail_prod = np.cumprod(u[::-1])[::-1]
    return float((tail_prod / (1.0 - u)).min())


@dataclass(frozen=True)
class JointEval:
    value: float
    in_support: bool
    constraint_slack: float

    def __post_init__(self):
        if not self.in_support and self.value != 0.0:
            raise ValueError("value must vanish outside the support")


# g_r ----------------------------------------------------------------------

class GrDensity:
    """Self-validating evaluator of g_r on (t_min, t_max).

    Construction inverts the transform, then checks normalization and the
    Laplace transform at three points; failure raises NumericalError.
    """

    def __init__(self, alpha: float, r: float, inversion_nodes: int = 32):
        self.alpha = check_alpha(alpha)
        if not r > 0:
            raise DomainError(f"r must be positive, got {r}")
        self.r = float(r)
        self.inversion_nodes = int(inversion_nodes)
        self._engine = build_engine(self.alpha, self.r, self.inversion_nodes)
        self.t_min = 0.0
        self.t_max = float(self._engine.t_max)
        self.mu = self._engine.mu
        self._lock = threading.Lock()
        self._quad_cache: dict = {}
        self.checks = self._validate()
        self.cache = self._build_table()

    def _validate(self) -> dict[str, float]:
        eng = self._engine
        t, w = self.quadrature()
        vals = eng(t)
        checks = {
            "normalization": float(eng.integral(self.t_max)),
            "min_value": float(vals.min()),
            "mean": float(w @ t),
            "variance": float(w @ t**2 - (w @ t) ** 2),
            "delay_rel_err": eng.delay_rel_err,
            "overlap_err": eng.overlap_err,
        }
        problems = []
        if abs(checks["normalization"] - 1.0) > NORM_TOL:
            problems.append(f"normalization {checks['normalization']:.8f}")
        for lam in VALIDATION_LAMBDAS:
            exact = float((1.0 + psi_tilde(np.array([lam + 0j]), self.alpha)[0].real) ** (-self.r))
            rel = abs(w @ np.exp(-lam * t) / exact - 1.0)
            checks[f"laplace_rel_err_{lam:g}"] = float(rel)
            if rel > LAPLACE_TOL:
                problems.append(f"Laplace transform at {lam:g} off by {rel:.1e}")
        if checks["min_value"] < -CLIP_TOL:
            problems.append(f"negative value {checks['min_value']:.1e}")
        if problems:
            raise NumericalError(
                f"g_r inversion failed validation for alpha={self.alpha}, r={self.r}: "
                + "; ".join(problems)
            )
        return checks

    def _build_table(self) -> tuple[np.ndarray, np.ndarray]:
        n_int = int(round(self.t_max)) - 1
        u = (np.arange(_TABLE_K) / _TABLE_K) ** 2
        grid = (np.arange(1, n_int + 1)[:, None] + u[None, :]).ravel()
        grid = np.append(grid, self.t_max - 1e-9)
        vals = self._engine(grid)
        logv = np.log(np.maximum(vals, 1e-300))
        grid.setflags(write=False)
        logv.setflags(write=False)
        return grid, logv

    def __call__(self, t):
        """g_r(t); raises RangeError outside (t_min, t_max)."""
        arr = np.asarray(t, dtype=float)
        if np.any(~((arr > self.t_min) & (arr < self.t_max))):
            raise RangeError(
                f"g_r for alpha={self.alpha}, r={self.r} is validated on "
                f"({self.t_min}, {self.t_max}); got values outside"
            )
        out = np.asarray(self._engine(arr))
        if np.any(out < -CLIP_TOL):
            raise NumericalError(f"g_r returned {out.min():.3e} < 0")
        out = np.where(out < 1e-300, 0.0, out)
        return out.item() if out.ndim == 0 else out

    def fast(self, t) -> np.ndarray:
        """Table lookup of g_r for sampling; exact below 1, log-linear above.

        Beyond t_max the tail is continued as t^(r-1) exp(-mu t), the decay of
        the leading pole.
        """
        t = np.asarray(t, dtype=float)
        grid, logv = self.cache
        out = np.zeros(t.shape)
        low = (t > 0) & (t < 1)
        out[low] = np.exp(self._engine.log_c0 + (self.r * self.alpha - 1.0) * np.log(t[low]))
        mid = (t >= 1) & (t < grid[-1])
        out[mid] = np.exp(np.interp(t[mid], grid, logv))
        hi = t >= grid[-1]
        th = t[hi]
        out[hi] = np.exp(logv[-1] + (self.r - 1.0) * np.log(th / grid[-1]) - self.mu * (th - grid[-1]))
        return out

    def cdf(self, t, power: float = 0.0):
        """int_0^t s^power g_r(s) ds; constant beyond t_max."""
        arr = np.asarray(t, dtype=float)
        if power <= -self.r * self.alpha:
            raise DomainError("s^power g_r(s) is not integrable at 0")
        with self._lock:
            out = self._engine.integral(arr, float(power))
        return out.item() if out.ndim == 0 else out

    @property
    def smooth_from(self) -> float:
        """Beyond this point g_r is analytic (residue region)."""
        return float(self._engine.t_switch)

    def quadrature(self, n: int = 40, include_origin: bool = True):
        key = (n, include_origin)
        with self._lock:
            if key not in self._quad_cache:
                t, w = self._engine.quadrature(n, include_origin)
                t.setflags(write=False)
                w.setflags(write=False)
                self._quad_cache[key] = (t, w)
            return self._quad_cache[key]

    def laplace(self, lam: float) -> float:
        t, w = self.quadrature()
        return float(w @ np.exp(-lam * t))

    @property
    def log_c0(self) -> float:
        """g_r(t) = exp(log_c0) t^(r alpha - 1) on (0, 1)."""
        return self._engine.log_c0


@lru_cache(maxsize=256)
def gr_density(alpha: float, r: float, inversion_nodes: int = 32) -> GrDensity:
    """Shared, cached GrDensity instances."""
    return GrDensity(alpha, r, inversion_nodes)


@dataclass(frozen=True)
class GrFamily:
    """The densities g_r, g_{r+1}, ... for one alpha, built on first use."""

    alpha: float
    inversion_nodes: int = 32

    def __getitem__(self, r: float) -> GrDensity:
        return gr_density(float(self.alpha), float(r), self.inversion_nodes)

    get = __getitem__


def g_density(gr: GrDensity, t):
    return gr(t)


def g_mean(alpha: float, r: float) -> float:
    return r * alpha / (1.0 - alpha)


def g_variance(alpha: float, r: float) -> float:
    return r * (alpha / (2.0 - alpha) + (alpha / (1.0 - alpha)) ** 2)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    prob: np.ndarray
    se: np.ndarray
    tail_mass: float
    mean: float
    mean_se: float
    n_samples: int = 0
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0))


def histogram_from(samples: np.ndarray, edges) -> Histogram:
    edges = np.asarray(edges, dtype=float)
    n = samples.size
    counts = np.histogram(samples, bins=edges)[0].astype(float)
    p = counts / n
    return Histogram(
        edges, p, np.sqrt(p * (1 - p) / n), float(1.0 - p.sum()),
        float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n)), n, counts,
    )


def g_density_mc(alpha: float, r: float, grid, n_samples: int, rng: np.random.Generator,
                 epsilon: float | None = None) -> Histogram:
    """Histogram of total_mass over BN(r, Lambda~) draws; bin probabilities with SEs."""
    if n_samples < 1000:
        raise DomainError("g_density_mc needs at least 1000 samples")
    eps = default_epsilon(alpha) if epsilon is None else epsilon
    return histogram_from(nb_totals(NBParams(alpha, r), eps, n_samples, rng), grid)


# joint laws ---------------------------------------------------------------

def _g_values(gr: GrDensity, t: np.ndarray) -> np.ndarray:
    """g evaluated strictly inside the range, zero at t <= 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = gr(t[pos])
    return out


def joint_T_values(alpha, r, t0, t1, family: GrFamily):
    """Vectorised n = 1 density f(t0, t1) = r Theta(t0 - t1) g_{r+1}(t1) / t0."""
    t0, t1 = np.broadcast_arrays(np.asarray(t0, float), np.asarray(t1, float))
    gap = t0 - t1
    ok = (gap > 0) & (gap < 1) & (t1 > 0)
    out = np.zeros(t0.shape)
    out[ok] = r * theta(alpha, gap[ok]) / t0[ok] * _g_values(family[r + 1], t1[ok])
    return out


def joint_T_density(alpha: float, r: float, totals, family: GrFamily) -> JointEval:
    """Density of (T_0, ..., T_n) at strictly decreasing totals."""
    t = np.asarray(totals, dtype=float)
    n = t.size - 1
    if n < 1:
        raise DomainError("need at least two totals")
    gaps = t[:-1] - t[1:]
    slack = float(min(np.min(np.minimum(gaps, 1.0 - gaps)), t[-1]))
    if slack <= 0:
        return JointEval(0.0, False, slack)
    val = ascending_factorial(r, n) * float(_g_values(family[r + n], t[-1]))
    val *= float(np.prod(theta(alpha, gaps) / t[:-1]))
    return JointEval(val, True, slack)


def transition_values(alpha, r, n, t_n, t_next, family: GrFamily):
    """Vectorised kernel (r+n) Theta(t_n - t_next) / t_n g_{r+n+1}(t_next) / g_{r+n}(t_n)."""
    t_n, t_next = np.broadcast_arrays(np.asarray(t_n, float), np.asarray(t_next, float))
    denom = _g_values(family[r + n], t_n)
    if np.any(denom < 1e-300):
        raise NumericalError("cannot condition on a state where g_{r+n} is below 1e-300")
    gap = t_n - t_next
    ok = (gap > 0) & (gap < 1) & (t_next > 0)
    out = np.zeros(t_n.shape)
    out[ok] = ((r + n) * theta(alpha, gap[ok]) / t_n[ok]
               * _g_values(family[r + n + 1], t_next[ok]) / denom[ok])
    return out


def transition_density(alpha: float, r: float, n: int, t_n: float, t_next: float,
                       family: GrFamily) -> JointEval:
    if not t_n > 0:
        raise DomainError("t_n must be positive")
    gap = t_n - t_next
    slack = float(min(gap, 1.0 - gap, t_next))
    val = float(transition_values(alpha, r, n, t_n, t_next, family))
    if slack <= 0:
        return JointEval(0.0, False, slack)
    return JointEval(val, True, slack)


def _log_fraction_const(alpha: float, r: float, n: int) -> float:
    i = np.arange(1, n + 1)
    per = gammaln(i * alpha + 1 - alpha) - gammaln(i * alpha) - gammaln(1 - alpha)
    return np.log(ascending_factorial(r, n)) - log_k_n(alpha, n) + per.sum()


def fraction_factor(alpha: float, r: float, u) -> np.ndarray:
    """The u-dependent factor of the (T_n, U) density, constants included; u has shape (..., n)."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    uc = np.clip(u, 1e-300, 1 - 1e-16)
    return np.exp(_log_fraction_const(alpha, r, n)
                  + ((i * alpha - 1) * np.log(uc) - alpha * np.log1p(-uc)).sum(axis=-1))


def joint_U_T_values(alpha, r, t_n, u, family: GrFamily):
    """Vectorised joint density of (T_n, U_1..U_n); u has shape (..., n)."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    t_n = np.asarray(t_n, dtype=float)
    inside = np.all((u > 0) & (u < 1), axis=-1) & (t_n > 0)
    uc = np.clip(u, 1e-300, 1 - 1e-16)
    bound = (np.cumprod(uc[..., ::-1], axis=-1)[..., ::-1] / (1.0 - uc)).min(axis=-1)
    inside &= t_n < bound
    out = np.zeros(np.broadcast_shapes(t_n.shape, inside.shape))
    sel = np.broadcast_to(inside, out.shape)
    fac = np.broadcast_to(fraction_factor(alpha, r, u), out.shape)
    tt = np.broadcast_to(t_n, out.shape)[sel]
    out[sel] = fac[sel] * tt ** (-n * alpha) * _g_values(family[r + n], tt)
    return out


def joint_U_T_density(alpha: float, r: float, t_n: float, u, family: GrFamily) -> JointEval:
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)) or not t_n > 0:
        return JointEval(0.0, False, float(min(u.min(), (1 - u).min(), t_n)))
    slack = d_min(u) - t_n
    if slack <= 0:
        return JointEval(0.0, False, float(slack))
    return JointEval(float(joint_U_T_values(alpha, r, t_n, u, family)), True, float(slack))


def sb_joint_values(alpha, r, v, t, family: GrFamily):
    """Vectorised density of (V~_1..V~_n, T); v has shape (..., n)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    t = np.asarray(t, dtype=float)
    vbar = 1.0 - np.cumsum(v, axis=-1)
    prev = np.concatenate([np.ones(v.shape[:-1] + (1,)), vbar[..., :-1]], axis=-1)
    inside = np.all((v > 0) & (v * t[..., None] < 1), axis=-1) & (vbar[..., -1] > 0) & (t > 0)
    vc = np.clip(v, 1e-300, None)
    logw = (np.log(ascending_factorial(r, n)) + n * np.log(alpha)
            + (-alpha * np.log(vc) - np.log(np.clip(prev, 1e-300, None))).sum(axis=-1))
    out = np.zeros(inside.shape)
    s = (t * vbar[..., -1])[inside]
    out[inside] = np.exp(logw[inside]) * t[inside] ** (-n * alpha) * _g_values(family[r + n], s)
    return out


def sb_joint_density(alpha: float, r: float, v, t: float, family: GrFamily) -> JointEval:
    v = np.asarray(v, dtype=float)
    if v.sum() >= 1:
        raise DomainError("fractions must sum to less than 1")
    slack = float(min(v.min(), (1.0 / t - v).min(), 1.0 - v.sum(), t))
    if slack <= 0:
        return JointEval(0.0, False, slack)
    return JointEval(float(sb_joint_values(alpha, r, v, t, family)), True, slack)


def _near_kernel(b: float, x: np.ndarray) -> np.ndarray:
    """int_0^1 t^(b-1) / (t + x) dt for x in (0, 1].

    Steps b down with I_b = 1/(b-1) - x I_{b-1} to b in (0, 1], where
    I_b = pi/sin(pi b) x^(b-1) - 2F1(1, 1-b; 2-b; -x)/(1-b)  (b < 1)
    and I_1 = log(1 + 1/x).
    """
    x = np.asarray(x, dtype=float)
    k = int(np.ceil(b - 1e-12)) - 1
    b0 = b - k
    if abs(b0 - 1.0) < 1e-9:
        val = np.log1p(1.0 / x)
    else:
        val = np.pi / np.sin(np.pi * b0) * x ** (b0 - 1.0) - hyp2f1(1.0, 1.0 - b0, 2.0 - b0, -x) / (1.0 - b0)
    for j in range(1, k + 1):
        val = 1.0 / (b0 + j - 1.0) - x * val
    return val


def first_pick_kernel(alpha: float, r: float, x, family: GrFamily) -> np.ndarray:
    """K(x) = int_0^inf g_{r+1}(t) / (t + x) dt for x in (0, 1].

    The first unit interval uses the closed form of int_0^1 t^(b-1)/(t+x) dt.
    """
    gr = family[r + 1]
    x = np.asarray(x, dtype=float)
    b = (r + 1) * alpha
    near = np.exp(gr.log_c0) * _near_kernel(b, x)
    t, w = gr.quadrature(include_origin=False)
    far = (w[None, :] / (t[None, :] + x.ravel()[:, None])).sum(axis=1).reshape(x.shape)
    return near + far


def first_pick_density(alpha: float, r: float, x, family: GrFamily) -> np.ndarray:
    """Marginal density r alpha x^(-alpha) K(x) of the first size-biased pick."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    ok = (x > 0) & (x < 1)
    out[ok] = r * alpha * x[ok] ** (-alpha) * first_pick_kernel(alpha, r, x[ok], family)
    return out


def first_pick_bin_probs(alpha: float, r: float, edges, family: GrFamily, nodes: int = 48) -> np.ndarray:
    """Probabilities of the bins [e_k, e_{k+1}] under the first-pick marginal.

    In z = x^(1-alpha) the density becomes r alpha K(x) / (1 - alpha), which is
    smooth apart from a mild singularity at x = 0, handled by refining the first bin.
    """
    from scipy.special import roots_legendre

    edges = np.asarray(edges, dtype=float)
    z = edges ** (1.0 - alpha)
    xl, wl = roots_legendre(nodes)
    out = np.empty(edges.size - 1)
    for k in range(edges.size - 1):
        lo, hi = z[k], z[k + 1]
        if lo == 0.0:
            # geometric panels towards the origin
            cuts = np.concatenate([[0.0], hi * 2.0 ** -np.arange(40, -1, -1.0)])
        else:
            cuts = np.array([lo, hi])
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            zz = a + (b - a) * (xl + 1) / 2
            kv = first_pick_kernel(alpha, r, zz ** (1.0 / (1.0 - alpha)), family)
            total += (b - a) / 2 * (wl @ kv)
        out[k] = r * alpha / (1.0 - alpha) * total
    return out


# constant checks ----------------------------------------------------------

def kn_integral_check(alpha: float, r: float, n: int, nodes: int = 64) -> float:
    """Relative deviation of the integral form of K_n / r^(n) from k_n(alpha, n) / r^(n).

    The integral int_0^inf t^(n alpha - 1) (1 + A t^alpha)^(-r-n) dt / Gamma(n alpha)
    is mapped to (0, 1) by t = (y / (1 - y))^(1/alpha) and done by Gauss-Jacobi.
    """
    alpha = check_alpha(alpha)
    A = np.exp(gammaln(1.0 - alpha))

    def value(m: int) -> float:
        x, w = roots_jacobi(m, r - 1.0, n - 1.0)
        y = (1 + x) / 2
        f = (1.0 - y + A * y) ** (-r - n)
        integral = (w @ f) / 2.0 ** (r + n - 1.0) / alpha
        return integral / np.exp(gammaln(n * alpha))

    target = k_n(alpha, n) / ascending_factorial(r, n)
    v1, v2 = value(nodes), value(2 * nodes)
    if abs(v1 - v2) > 1e-8 * abs(v2):
        raise NumericalError("K_n integral did not converge under node doubling")
    return float(abs(v2 / target - 1.0))


@dataclass(frozen=True)
class DepenResult:
    estimate: float
    stderr: float
    expected: float
    rel_dev: float
    z_score: float


def depen_check(alpha: float, r: float, n: int, n_samples: int, rng: np.random.Generator,
                family: GrFamily | None = None, alpha_model: float | None = None) -> DepenResult:
    """MC over independent Beta(i alpha, 1 - alpha) fractions of
    r^(n) int_0^{d(U)} t^(-n alpha) g_{r+n}(t) dt, compared with K_n.

    ``alpha_model`` moves the closed-form side only (negative controls).
    """
    if n not in (1, 2):
        raise DomainError("depen_check supports n in {1, 2}")
    family = family or GrFamily(alpha)
    i = np.arange(1, n + 1)
    u = rng.beta(i * alpha, 1.0 - alpha, size=(n_samples, n))
    u = np.clip(u, 1e-300, 1 - 1e-16)
    d = (np.cumprod(u[:, ::-1], axis=1)[:, ::-1] / (1.0 - u)).min(axis=1)
    vals = ascending_factorial(r, n) * family[r + n].cdf(d, power=-n * alpha)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_samples))
    expected = k_n(alpha if alpha_model is None else alpha_model, n)
    return DepenResult(est, se, expected, abs(est / expected - 1.0), (est - expected) / se)


# normalization quadratures ------------------------------------------------
# Composite Gauss rules graded towards the power singularities and towards the
# integer kinks of g_r; see _quadrature.


def transition_rule(alpha: float, r: float, n: int, t_n: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights over the support (max(0, t_n - 1), t_n) of the kernel."""
    lo = max(0.0, t_n - 1.0)
    left = {0.0: (r + n + 1) * alpha - 1.0} if lo == 0.0 else {lo: 0.0}
    return composite(integer_cuts(lo, t_n), left, right_power=-alpha)


def transition_mass(alpha: float, r: float, n: int, t_n: float, family: GrFamily) -> float:
    """int kappa(t_n -> s) ds over its support."""
    s, w = transition_rule(alpha, r, n, t_n)
    return float(w @ transition_values(alpha, r, n, t_n, s, family))


def joint_T_marginal(alpha: float, r: float, t0: float, family: GrFamily) -> float:
    """int f(t0, t1) dt1, which should equal g_r(t0)."""
    lo = max(0.0, t0 - 1.0)
    left = {0.0: (r + 1) * alpha - 1.0} if lo == 0.0 else {lo: 0.0}
    s, w = composite(integer_cuts(lo, t0), left, right_power=-alpha)
    return float(w @ joint_T_values(alpha, r, t0, s, family))


def joint_T_mass(alpha: float, r: float, family: GrFamily) -> float:
    """Double integral of f(t0, t1) over t1 > 0, t1 < t0 < t1 + 1.

    Outer variable t1; inner x = t0 - t1 in (0, 1), graded at x = 0 where the
    factor x^(-alpha) / (t1 + x) sits.
    """
    t_top = family[r + 1].t_max * (1 - 1e-12)
    t1, w1 = composite(integer_cuts(0.0, t_top), {0.0: r * alpha - 1.0},
                       smooth_after=family[r + 1].smooth_from)
    x, wx = rule(0.0, 1.0, -alpha, None, levels=50, n=8)
    total = 0.0
    for lo in range(0, t1.size, 256):
        sl = slice(lo, lo + 256)
        f = joint_T_values(alpha, r, t1[sl, None] + x[None, :], t1[sl, None], family)
        total += w1[sl] @ (f @ wx)
    return float(total)


def sb_joint_mass(alpha: float, r: float, family: GrFamily) -> float:
    """Double integral of the (V~_1, T) density over 0 < v < 1, 0 < t < 1/v."""
    t_top = family[r + 1].t_max * (1 - 1e-12)
    v, wv = rule(0.0, 1.0, -alpha, (r + 1) * alpha - 1.0, levels=30, n=8)
    total = 0.0
    for vi, wi in zip(v, wv):
        # g_{r+1} is evaluated at t (1 - v): kinks where that crosses an integer
        upper = min(1.0 / vi, t_top / (1.0 - vi))
        cuts = [c / (1.0 - vi) for c in integer_cuts(0.0, upper * (1.0 - vi))]
        cuts[-1] = upper
        t, wt = composite(cuts, {0.0: r * alpha - 1.0}, n=8,
                          smooth_after=family[r + 1].smooth_from / (1.0 - vi))
        total += wi * (wt @ sb_joint_values(alpha, r, np.full((t.size, 1), vi), t, family))
    return float(total)


def joint_U_T_mass(alpha: float, r: float, family: GrFamily) -> float:
    """Double integral of the (T_1, U_1) density."""
    t_top = family[r + 1].t_max * (1 - 1e-12)
    u, wu = rule(0.0, 1.0, alpha - 1.0, -alpha, levels=30, n=8)
    total = 0.0
    for ui, wi in zip(u, wu):
        upper = min(ui / (1.0 - ui), t_top)
        t, wt = composite(integer_cuts(0.0, upper), {0.0: r * alpha - 1.0}, n=8,
                          smooth_after=family[r + 1].smooth_from)
        total += wi * (wt @ joint_U_T_values(alpha, r, t, np.full((t.size, 1), ui), family))
    return float(total)


# bin probabilities for histogram checks ------------------------------------

def g_bin_probs(gr: GrDensity, edges) -> np.ndarray:
    return np.diff(gr.cdf(np.asarray(edges, dtype=float)))


def _split_rule(c: float, d: float, left: float | None, right: float | None, kinks, n: int = 16):
    """Rule on [c, d] with power-graded ends and extra breaks at ``kinks``."""
    inner = sorted(k for k in kinks if c < k < d)
    cuts = [c] + inner + [d]
    xs, ws = [], []
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        lp = left if i == 0 else None
        rp = right if i == len(cuts) - 2 else None
        x, w = rule(a, b, lp, rp, levels=40, n=n)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def joint_U_T_cell_probs(alpha: float, r: float, t_edges, u_edges, family: GrFamily) -> np.ndarray:
    """P(T_1 in t-bin, U_1 in u-bin), shape (len(t_edges)-1, len(u_edges)-1).

    The density factors as F(u) t^(-alpha) g_{r+1}(t) on t < u / (1 - u); the
    t-integral is the weighted CDF of g_{r+1}, the u-integral a graded Gauss rule.
    """
    gr = family[r + 1]
    te = np.asarray(t_edges, dtype=float)
    ue = np.asarray(u_edges, dtype=float)
    out = np.zeros((te.size - 1, ue.size - 1))
    kinks = [e / (1.0 + e) for e in te if np.isfinite(e)]
    G_edges = gr.cdf(te, power=-alpha)
    for k in range(ue.size - 1):
        c, d = ue[k], ue[k + 1]
        u, w = _split_rule(c, d, alpha - 1.0 if c == 0 else None, -alpha if d == 1 else None, kinks)
        with np.errstate(divide="ignore"):
            bound = u / (1.0 - u)  # nodes may round onto u = 1
        G = gr.cdf(np.minimum(te[None, :], bound[:, None]), power=-alpha)
        G = np.minimum(G, G_edges[None, :])
        cells = np.diff(G, axis=1)
        out[:, k] = (w * fraction_factor(alpha, r, u[:, None])) @ cells
    return out


def sb_joint_cell_probs(alpha: float, r: float, v_edges, t_edges, family: GrFamily) -> np.ndarray:
    """P(V~_1 in v-bin, T in t-bin) for n = 1, shape (len(v_edges)-1, len(t_edges)-1).

    With s = t (1 - v) the t-integral of t^(-alpha) g_{r+1}(t (1 - v)) becomes
    (1 - v)^(alpha - 1) times a weighted CDF of g_{r+1}.
    """
    gr = family[r + 1]
    ve = np.asarray(v_edges, dtype=float)
    te = np.asarray(t_edges, dtype=float)
    out = np.zeros((ve.size - 1, te.size - 1))
    kinks = [1.0 / b for b in te if b > 0]
    for k in range(ve.size - 1):
        c, d = ve[k], ve[k + 1]
        v, w = _split_rule(c, d, -alpha if c == 0 else None,
                           (r + 1) * alpha - 1.0 if d == 1 else None, kinks)
        vb = 1.0 - v
        # nodes rounding onto v = 1 carry no mass: the integrand vanishes there
        live = vb > 0
        v, w, vb = v[live], w[live], vb[live]
        upper = np.minimum(te[None, :], 1.0 / v[:, None]) * vb[:, None]
        G = gr.cdf(upper, power=-alpha)
        cells = np.diff(G, axis=1)
        fac = r * alpha * v ** (-alpha) * vb ** (alpha - 1.0)
        out[k, :] = (w * fac) @ cells
    return out
