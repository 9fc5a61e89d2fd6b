"""Size-biased permutation and stick-breaking, with the Markov chain sampler for residual totals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import GrFamily
from .errors import DomainError, InsufficientEnumerationError, NumericalError
from .levy import SAMPLER_ALPHA_BOUNDS, check_alpha, required_points, tail_mean, StableParams
from .nbproc import (
    default_epsilon,
    NBParams,
    PointBatch,
    PointMeasure,
    nb_totals,
    sample_nb,
    total_mass,
)

KERNEL_GRID = 2048
KERNEL_TOL = 1e-3
_KERNEL_CHUNK = 512


@dataclass(frozen=True)
class SizeBiasedDraw:
    picks: np.ndarray
    totals: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.totals, dtype=float)
        if t.size != len(self.picks) + 1 or not (np.all(t > 0) and np.all(np.diff(t) < 0)):
            raise DomainError("totals must be positive and strictly decreasing, one longer than picks")


def _small_pick(alpha: float, epsilon: float, v):
    """Size-biased pick among points below epsilon: density proportional to x^(-alpha)."""
    return epsilon * np.asarray(v) ** (1.0 / (1.0 - alpha))


def size_biased_permutation(M: PointMeasure, n: int, rng: np.random.Generator) -> SizeBiasedDraw:
    """First n size-biased picks without replacement.

    Each pick is proportional to size among the remaining mass.  The
    unenumerated mass below epsilon takes part: a draw landing there returns
    a point from the x^(-alpha) law on (0, epsilon) and depletes that mass.
    When M carries no alpha the small mass only enlarges the denominator.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    if n > len(M):
        raise InsufficientEnumerationError(
            f"n={n} exceeds the {len(M)} enumerated points", required=n
        )
    pts = M.points.copy()
    alive = np.ones(pts.size, dtype=bool)
    small = M.small_point_mean
    T = total_mass(M)
    if not T > 0:
        raise DomainError("total mass must be positive")
    picks = np.empty(n)
    totals = np.empty(n + 1)
    totals[0] = T
    for k in range(n):
        live = np.where(alive, pts, 0.0)
        cums = np.cumsum(live)
        u = rng.random() * (cums[-1] + small)
        idx = int(np.searchsorted(cums, u, side="right"))
        if idx < pts.size:
            # equal magnitudes resolve to the lower index
            picks[k] = pts[idx]
            alive[idx] = False
        elif M.alpha is not None and small > 0:
            x = min(float(_small_pick(M.alpha, M.epsilon, rng.random())), small)
            picks[k] = x
            small -= x
        else:
            idx = int(np.flatnonzero(alive)[-1])
            picks[k] = pts[idx]
            alive[idx] = False
        totals[k + 1] = totals[k] - picks[k]
    if not totals[-1] > 0:
        # the last residual can vanish in floating point when all mass is picked
        totals[-1] = max(totals[-1], np.nextafter(0.0, 1.0))
    return SizeBiasedDraw(picks, totals, totals[1:] / totals[:-1])


def residual_fractions(draw: SizeBiasedDraw) -> np.ndarray:
    """U_k = T_k / T_{k-1}."""
    t = np.asarray(draw.totals)
    return t[1:] / t[:-1]


def stick_reconstruct(fractions) -> np.ndarray:
    """V~_n = (1 - U_n) prod_{i<n} U_i."""
    u = np.asarray(fractions, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("fractions must lie in (0, 1)")
    prev = np.concatenate([[1.0], np.cumprod(u)[:-1]])
    return (1.0 - u) * prev


def first_pick_batch(batch: PointBatch, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Total mass T_0 and first size-biased pick J~_1 for every measure in a batch."""
    m = len(batch)
    T0 = batch.totals()
    u = rng.random(m) * T0
    v = rng.random(m)
    cums = np.cumsum(batch.points)
    start, end = batch.offsets[:-1], batch.offsets[1:]
    base = np.where(start > 0, cums[np.maximum(start - 1, 0)], 0.0)
    idx = np.searchsorted(cums, base + u, side="right")
    hit = idx < end
    picks = np.empty(m)
    picks[hit] = batch.points[idx[hit]]
    picks[~hit] = np.minimum(_small_pick(batch.alpha, batch.epsilon, v[~hit]),
                             batch.small_point_mean[~hit])
    return T0, picks


def ratio_first_pick(alpha: float, r: int, n_samples: int, rng: np.random.Generator,
                     n_points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(T_0, J~_1) from the jump-ratio construction, vectorised."""
    alpha = check_alpha(alpha, SAMPLER_ALPHA_BOUNDS)
    if r < 1:
        raise DomainError("the ratio construction needs r >= 1")
    n = required_points(alpha, r, tol=1e-3) if n_points is None else int(n_points)
    chunk = max(1, 2_000_000 // n)
    T0 = np.empty(n_samples)
    J1 = np.empty(n_samples)
    params = StableParams(alpha)
    for lo in range(0, n_samples, chunk):
        m = min(chunk, n_samples - lo)
        gam = np.cumsum(rng.standard_exponential((m, n)), axis=1)
        jumps = gam ** (-1.0 / alpha)
        top = jumps[:, r - 1]
        pts = jumps[:, r:] / top[:, None]
        small = tail_mean(params, jumps[:, -1]) / top
        eps = pts[:, -1]
        cums = np.cumsum(pts, axis=1)
        T = cums[:, -1] + small
        u = rng.random(m) * T
        v = rng.random(m)
        idx = (cums <= u[:, None]).sum(axis=1)
        hit = idx < pts.shape[1]
        pick = np.empty(m)
        pick[hit] = pts[hit, idx[hit]]
        pick[~hit] = np.minimum(_small_pick(alpha, eps[~hit], v[~hit]), small[~hit])
        T0[lo : lo + m], J1[lo : lo + m] = T, pick
    return T0, J1


# Markov chain of residual totals -----------------------------------------------

def kernel_step(alpha: float, shape: float, t: np.ndarray, family: GrFamily,
                rng: np.random.Generator, grid: int = KERNEL_GRID) -> np.ndarray:
    """Draw T_{k+1} given T_k = t from the transition kernel of shape r + k.

    The kernel shape*Theta(t - s)/t * g_{shape+1}(s)/g_shape(t) is tabulated in
    v on (0, 1) through x = t - s = L u^(1/(1-alpha)), u = 1 - (1-v)^m with
    L = min(1, t).  This removes x^(-alpha) at x = 0 and flattens the power
    behaviour of g_{shape+1} at s -> 0; the CDF is then inverted linearly.
    """
    t = np.asarray(t, dtype=float)
    g_next, g_here = family[shape + 1], family[shape]
    beta = (shape + 1.0) * alpha
    m = max(1.0, np.ceil(2.0 / beta))
    v = np.linspace(0.0, 1.0, grid)
    u = 1.0 - (1.0 - v) ** m
    du = m * (1.0 - v) ** (m - 1.0)
    xi = u ** (1.0 / (1.0 - alpha))
    out = np.empty_like(t)
    w = rng.random(t.size)
    for lo in range(0, t.size, _KERNEL_CHUNK):
        tt = t[lo : lo + _KERNEL_CHUNK]
        L = np.minimum(1.0, tt)
        x = L[:, None] * xi[None, :]
        s = tt[:, None] - x
        dens = g_next.fast(np.maximum(s, 0.0)) * du[None, :]
        dens *= (shape * alpha / (1.0 - alpha) * L ** (1.0 - alpha) / tt / g_here.fast(tt))[:, None]
        cdf = np.concatenate(
            [np.zeros((tt.size, 1)), np.cumsum(0.5 * (dens[:, 1:] + dens[:, :-1]) * np.diff(v), axis=1)],
            axis=1,
        )
        Z = cdf[:, -1]
        checked = tt < g_here.t_max
        bad = checked & (np.abs(Z - 1.0) > KERNEL_TOL)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise NumericalError(
                f"transition kernel (alpha={alpha}, shape={shape}) at state t={tt[i]:.6g} "
                f"integrates to {Z[i]:.6g}; tolerance {KERNEL_TOL}"
            )
        target = w[lo : lo + _KERNEL_CHUNK] * Z
        k = np.clip((cdf < target[:, None]).sum(axis=1) - 1, 0, grid - 2)
        rows = np.arange(tt.size)
        c0, c1 = cdf[rows, k], cdf[rows, k + 1]
        frac = np.where(c1 > c0, (target - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.5)
        vv = v[k] + frac * (v[k + 1] - v[k])
        uu = 1.0 - (1.0 - vv) ** m
        gap = L * uu ** (1.0 / (1.0 - alpha))
        # keep the draw strictly inside the support
        gap = np.clip(gap, np.nextafter(0.0, 1.0) + 1e-300, np.nextafter(L, 0.0))
        gap = np.minimum(gap, np.nextafter(tt, 0.0))
        out[lo : lo + _KERNEL_CHUNK] = tt - gap
    return out


def markov_chain_sampler(alpha: float, r: float, n: int, g: GrFamily, rng: np.random.Generator,
                         epsilon: float | None = None) -> np.ndarray:
    """Totals T_0 > T_1 > ... > T_n.

    T_0 is the total mass of a BN(r) draw; later totals follow the kernel.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    totals = np.empty(n + 1)
    eps = default_epsilon(alpha) if epsilon is None else epsilon
    totals[0] = total_mass(sample_nb(NBParams(alpha, r), eps, rng))
    for k in range(n):
        totals[k + 1] = kernel_step(alpha, r + k, totals[k : k + 1], g, rng)[0]
    return totals


def chain_batch(alpha: float, r: float, n: int, n_samples: int, g: GrFamily,
                rng: np.random.Generator, epsilon: float | None = None) -> np.ndarray:
    """Vectorised markov_chain_sampler; rows are samples, columns T_0..T_n."""
    out = np.empty((n_samples, n + 1))
    eps = default_epsilon(alpha) if epsilon is None else epsilon
    out[:, 0] = nb_totals(NBParams(alpha, r), eps, n_samples, rng)
    for k in range(n):
        out[:, k + 1] = kernel_step(alpha, r + k, out[:, k], g, rng)
    return out
