"""Negative binomial point process BN(r, Lambda~) on (0, 1).

Lambda~(dx) = alpha x^(-alpha-1) dx on (0, 1).  BN(r, Lambda~) is a Poisson
process whose intensity is Lambda~ scaled by an independent Gamma(r, 1) level.
Points below a threshold epsilon are not enumerated; their expected sum is
carried as ``small_point_mean``.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientEnumerationError
from .levy import SAMPLER_ALPHA_BOUNDS, OrderedJumpSet, check_alpha

DEFAULT_EPSILON = 1e-4
# Auto thresholds keep at least this many expected points per unit Gamma level.
MIN_POINTS_PER_LEVEL = 1000.0
# Points held in memory at once by the batch sampler.
_CHUNK_POINTS = 4_000_000


@dataclass(frozen=True)
class NBParams:
    alpha: float
    r: float

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")


@dataclass(frozen=True)
class PointMeasure:
    """Finite multiset of points in [epsilon, 1) plus the mean mass below epsilon.

    ``alpha`` records the intensity shape below epsilon; size-biased sampling
    uses it to draw picks that land in the unenumerated mass.
    """

    points: np.ndarray
    epsilon: float = 0.0
    small_point_mean: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size and (pts.min() < self.epsilon or pts.max() >= 1.0 or pts.min() <= 0):
            raise DomainError("points must lie in [epsilon, 1) and be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError("epsilon must lie in [0, 1)")
        if self.small_point_mean < 0:
            raise DomainError("small_point_mean must be nonnegative")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class PointBatch:
    """Many point measures stored flat: sample i owns points[offsets[i]:offsets[i+1]]."""

    points: np.ndarray
    offsets: np.ndarray
    small_point_mean: np.ndarray
    epsilon: float
    alpha: float

    def __len__(self) -> int:
        return self.offsets.size - 1

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def owner(self) -> np.ndarray:
        """Sample index of each point."""
        return np.repeat(np.arange(len(self)), self.counts)

    def sum_over(self, values: np.ndarray) -> np.ndarray:
        """Per-sample sums of a per-point array."""
        return np.bincount(self.owner, weights=values, minlength=len(self))

    def totals(self) -> np.ndarray:
        return self.sum_over(self.points) + self.small_point_mean

    def measure(self, i: int) -> PointMeasure:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return PointMeasure(self.points[lo:hi], self.epsilon, float(self.small_point_mean[i]), self.alpha)


def default_epsilon(alpha: float) -> float:
    """Enumeration threshold for ``alpha``: 1e-4, lowered so epsilon^(-alpha) >= 1000.

    With a fixed threshold, small alpha leaves so few enumerated points that
    the law of small totals is visibly distorted.
    """
    return min(DEFAULT_EPSILON, MIN_POINTS_PER_LEVEL ** (-1.0 / alpha))


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    return epsilon


def _draw_points(alpha: float, epsilon: float, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the density proportional to x^(-alpha-1) on (epsilon, 1)."""
    span = epsilon ** (-alpha) - 1.0
    x = (1.0 + u * span) ** (-1.0 / alpha)
    # guard the open endpoints against rounding
    return np.clip(x, epsilon, np.nextafter(1.0, 0.0))


def _small_mean(alpha: float, epsilon: float, level):
    return level * alpha * epsilon ** (1.0 - alpha) / (1.0 - alpha)


def ratios_from_jumps(jumps: OrderedJumpSet, r: int) -> PointMeasure:
    """Jumps r+1, r+2, ... divided by the r-th largest jump."""
    if int(r) != r or r < 1:
        raise DomainError("ratios_from_jumps needs an integer r >= 1 (undefined at r = 0)")
    r = int(r)
    if r >= len(jumps):
        raise InsufficientEnumerationError(
            f"r={r} needs more than {len(jumps)} enumerated jumps", required=r + 1
        )
    top = jumps.jumps[r - 1]
    return PointMeasure(
        jumps.jumps[r:] / top,
        epsilon=float(jumps.tail_cutoff / top),
        small_point_mean=float(jumps.tail_mean / top),
        alpha=jumps.params.alpha,
    )


def sample_nb(
    params: NBParams,
    epsilon: float,
    rng: np.random.Generator,
    alpha_bounds: tuple[float, float] | None = SAMPLER_ALPHA_BOUNDS,
) -> PointMeasure:
    """One draw of BN(r, Lambda~) enumerated down to ``epsilon``."""
    epsilon = _check_epsilon(epsilon)
    a = check_alpha(params.alpha, alpha_bounds)
    level = rng.gamma(params.r)
    count = rng.poisson(level * (epsilon ** (-a) - 1.0))
    pts = _draw_points(a, epsilon, rng.random(count))
    return PointMeasure(pts, epsilon, float(_small_mean(a, epsilon, level)), a)


def sample_nb_batches(
    params: NBParams,
    epsilon: float,
    n_samples: int,
    rng: np.random.Generator,
    alpha_bounds: tuple[float, float] | None = SAMPLER_ALPHA_BOUNDS,
) -> Iterator[PointBatch]:
    """Vectorised sample_nb, yielded in memory-bounded chunks.

    Same law as repeated sample_nb calls; the variates are drawn in a
    different order, so individual draws differ.
    """
    epsilon = _check_epsilon(epsilon)
    a = check_alpha(params.alpha, alpha_bounds)
    rate = epsilon ** (-a) - 1.0
    chunk = int(max(1, min(n_samples, _CHUNK_POINTS // max(1.0, params.r * rate))))
    for lo in range(0, n_samples, chunk):
        m = min(chunk, n_samples - lo)
        level = rng.gamma(params.r, size=m)
        counts = rng.poisson(level * rate)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        pts = _draw_points(a, epsilon, rng.random(int(offsets[-1])))
        yield PointBatch(pts, offsets, _small_mean(a, epsilon, level), epsilon, a)


def nb_totals(params: NBParams, epsilon: float, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """total_mass of ``n_samples`` independent BN(r, Lambda~) draws."""
    return np.concatenate([b.totals() for b in sample_nb_batches(params, epsilon, n_samples, rng)])


def total_mass(M: PointMeasure) -> float:
    """Sum of the points plus the compensating small-point mean."""
    return float(M.points.sum() + M.small_point_mean)


def palm_augment(params: NBParams, x: float, epsilon: float, rng: np.random.Generator) -> PointMeasure:
    """A draw from the Palm law at x: BN(r+1, Lambda~) with x adjoined."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"Palm location must lie in (0, 1), got {x}")
    base = sample_nb(NBParams(params.alpha, params.r + 1), epsilon, rng)
    if x < base.epsilon:
        raise DomainError("Palm location lies below the enumeration threshold")
    return PointMeasure(np.append(base.points, x), base.epsilon, base.small_point_mean, base.alpha)


def mean_measure(params: NBParams, a: float, b: float) -> float:
    """E BN(r)((a, b)) = r Lambda~((a, b)) = r (a^(-alpha) - b^(-alpha))."""
    if not 0.0 < a < b <= 1.0:
        raise DomainError(f"interval ({a}, {b}) must satisfy 0 < a < b <= 1")
    al = params.alpha
    return params.r * (a ** (-al) - b ** (-al))


def laplace_functional(params: NBParams, integral: float) -> float:
    """(1 + int (1 - e^(-f)) dLambda~)^(-r), given that integral."""
    return (1.0 + integral) ** (-params.r)


def empirical_laplace_functional(
    samples: Sequence[PointMeasure] | PointBatch,
    f: Callable[[np.ndarray], np.ndarray],
    f_prime_at_zero: float | None = None,
) -> tuple[float, float]:
    """Mean and standard error of exp(-sum_x f(x)).

    When f is differentiable at 0, pass f'(0+) to account for the
    unenumerated points through their mean mass.
    """
    if len(samples) == 0:
        raise DomainError("need at least one sample")
    if isinstance(samples, PointBatch):
        fx = np.broadcast_to(np.asarray(f(samples.points), dtype=float), samples.points.shape)
        s = samples.sum_over(fx)
        small = samples.small_point_mean
    else:
        s = np.array([float(np.sum(f(m.points))) if len(m) else 0.0 for m in samples])
        small = np.array([m.small_point_mean for m in samples])
    if f_prime_at_zero is not None:
        s = s + f_prime_at_zero * small
    vals = np.exp(-s)
    n = vals.size
    se = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(vals.mean()), se
