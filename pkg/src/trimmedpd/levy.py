"""Stable subordinator primitives: Levy tail, Laplace exponents, ordered jumps, trimming."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._laplace import psi_tilde
from .errors import DomainError, InsufficientEnumerationError

# Samplers refuse indices this close to 0 or 1 unless told otherwise.
SAMPLER_ALPHA_BOUNDS = (0.02, 0.98)
DEFAULT_TAIL_TOL = 1e-4


def check_alpha(alpha: float, bounds: tuple[float, float] | None = None) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if bounds is not None and not bounds[0] < alpha < bounds[1]:
        raise DomainError(
            f"alpha={alpha} is outside the sampler envelope {bounds}; pass alpha_bounds to override"
        )
    return alpha


@dataclass(frozen=True)
class StableParams:
    """Index alpha and scale c of the Levy measure c alpha x^(-alpha-1) dx."""

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")


@dataclass(frozen=True)
class OrderedJumpSet:
    """Largest N jumps on [0, t] in decreasing order, plus the mean of the rest."""

    t: float
    jumps: np.ndarray
    tail_cutoff: float
    tail_mean: float
    params: StableParams = field(default_factory=lambda: StableParams(0.5))

    def __post_init__(self):
        j = np.array(self.jumps, dtype=float)
        if j.ndim != 1 or j.size == 0:
            raise DomainError("jumps must be a nonempty 1-d sequence")
        if not (j[-1] > 0 and np.all(j[:-1] > j[1:])):
            raise DomainError("jumps must be positive and strictly decreasing")
        if self.tail_cutoff > j[-1]:
            raise DomainError("tail_cutoff exceeds the smallest enumerated jump")
        if self.tail_mean < 0:
            raise DomainError("tail_mean must be nonnegative")
        j.setflags(write=False)
        object.__setattr__(self, "jumps", j)

    def __len__(self) -> int:
        return self.jumps.size


@dataclass(frozen=True)
class PdSample:
    """First ``depth`` coordinates of a PD_alpha^(r) vector."""

    r: int
    values: np.ndarray
    tail_fraction: float


def levy_tail(params: StableParams, x: float) -> float:
    """c x^(-alpha), the mass of (x, inf) under the Levy measure."""
    if not x > 0:
        raise DomainError(f"levy_tail needs x > 0, got {x}")
    return params.c * x ** (-params.alpha)


def levy_tail_inverse(params: StableParams, y):
    """c^(1/alpha) y^(-1/alpha); accepts arrays."""
    y = np.asarray(y, dtype=float)
    if not np.all(y > 0):
        raise DomainError("levy_tail_inverse needs y > 0")
    out = params.c ** (1.0 / params.alpha) * y ** (-1.0 / params.alpha)
    return float(out) if out.ndim == 0 else out


def normalized_exponent(alpha: float, lam):
    """psi(lam) = int_0^1 (1 - exp(-lam x)) alpha x^(-alpha-1) dx for Re lam >= 0.

    Real input gives a real result; complex input a complex one.
    """
    alpha = check_alpha(alpha)
    arr = np.asarray(lam)
    is_complex = np.iscomplexobj(arr)
    arr = arr.astype(complex)
    if np.any(arr.real < 0):
        raise DomainError("normalized_exponent needs Re(lambda) >= 0")
    out = psi_tilde(arr, alpha)
    if not is_complex:
        out = out.real
    return out.item() if out.ndim == 0 else out


def laplace_exponent(params: StableParams, lam):
    """Psi(lam) for the Levy measure restricted to (0, 1): c psi(lam)."""
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0):
        raise DomainError("laplace_exponent needs lambda >= 0")
    out = params.c * np.asarray(normalized_exponent(params.alpha, arr))
    return out.item() if out.ndim == 0 else out


def tail_mean(params: StableParams, cutoff, t: float = 1.0):
    """Expected sum of the jumps below ``cutoff`` on [0, t]."""
    a = params.alpha
    return params.c * a * np.asarray(cutoff) ** (1.0 - a) * t / (1.0 - a)


def _remainder_sd(alpha: float, c: float, cutoff, t: float = 1.0):
    """Standard deviation of the sum of the jumps below ``cutoff``."""
    return np.sqrt(c * alpha * np.asarray(cutoff) ** (2.0 - alpha) * t / (2.0 - alpha))


def required_points(alpha: float, r: int = 0, depth: int = 1, tol: float = DEFAULT_TAIL_TOL) -> int:
    """Jump count N so the unenumerated remainder is below ``tol`` of the trimmed sum.

    Uses Gamma_i ~ i.  The remainder is replaced by its mean, so the relevant
    error is its standard deviation rather than its mean.
    """
    alpha = check_alpha(alpha)
    rr = max(r, 1)
    scale = rr ** (-1.0 / alpha) * (1.0 + rr * alpha / (1.0 - alpha))
    v = (tol * scale / np.sqrt(alpha / (2.0 - alpha))) ** (1.0 / (1.0 - alpha / 2.0))
    n = int(np.ceil(v ** (-alpha)))
    return max(n, r + depth + 1, 16)


def _jumps_from_arrivals(params: StableParams, t: float, gam: np.ndarray) -> OrderedJumpSet:
    jumps = levy_tail_inverse(params, gam / t)
    jumps = np.atleast_1d(jumps)
    cutoff = float(jumps[-1])
    return OrderedJumpSet(t, jumps, cutoff, float(tail_mean(params, cutoff, t)), params)


def sample_ordered_jumps(
    params: StableParams,
    t: float,
    n_points: int,
    rng: np.random.Generator,
    alpha_bounds: tuple[float, float] | None = SAMPLER_ALPHA_BOUNDS,
) -> OrderedJumpSet:
    """The N largest jumps of the subordinator on [0, t] as Lambda-bar^{-1}(Gamma_i / t)."""
    check_alpha(params.alpha, alpha_bounds)
    if int(n_points) < 1:
        raise DomainError("n_points must be at least 1")
    if not t > 0:
        raise DomainError("t must be positive")
    gam = np.cumsum(rng.standard_exponential(int(n_points)))
    return _jumps_from_arrivals(params, t, gam)


def sample_ordered_jumps_adaptive(
    params: StableParams,
    t: float,
    rng: np.random.Generator,
    r: int = 0,
    tol: float = DEFAULT_TAIL_TOL,
    alpha_bounds: tuple[float, float] | None = SAMPLER_ALPHA_BOUNDS,
) -> OrderedJumpSet:
    """Keep enumerating (doubling N) until the remainder's spread is below ``tol``."""
    check_alpha(params.alpha, alpha_bounds)
    n = required_points(params.alpha, r, tol=tol)
    gam = np.cumsum(rng.standard_exponential(n))
    while True:
        js = _jumps_from_arrivals(params, t, gam)
        sd = _remainder_sd(params.alpha, params.c, js.tail_cutoff, t)
        if sd <= tol * trimmed_sum(js, r):
            return js
        more = np.cumsum(rng.standard_exponential(gam.size)) + gam[-1]
        gam = np.concatenate([gam, more])


def trimmed_sum(jumps: OrderedJumpSet, r: int) -> float:
    """Sum of all but the r largest jumps, with the unenumerated remainder at its mean."""
    r = int(r)
    if r < 0:
        raise DomainError("r must be nonnegative")
    if r >= len(jumps):
        raise InsufficientEnumerationError(
            f"trimming r={r} needs more than {len(jumps)} enumerated jumps", required=r + 1
        )
    return float(jumps.jumps[r:].sum() + jumps.tail_mean)


def pd_sample(jumps: OrderedJumpSet, r: int, depth: int) -> PdSample:
    """Jumps r+1..r+depth divided by the trimmed sum."""
    r, depth = int(r), int(depth)
    if depth < 1:
        raise DomainError("depth must be positive")
    if r + depth > len(jumps):
        raise InsufficientEnumerationError(
            f"r={r}, depth={depth} needs n_points >= {r + depth}, got {len(jumps)}",
            required=r + depth,
        )
    values = jumps.jumps[r : r + depth] / trimmed_sum(jumps, r)
    return PdSample(r, values, float(max(0.0, 1.0 - values.sum())))


def ratio_totals(
    alpha: float,
    r: int,
    n_samples: int,
    rng: np.random.Generator,
    n_points: int | None = None,
    chunk: int | None = None,
) -> np.ndarray:
    """Vectorised trimmed_sum(J, r) / J[r] for c = 1, t = 1.

    Draws exactly the variates that ``n_samples`` consecutive calls of
    ``sample_ordered_jumps`` would, so it reproduces the scalar pathway.
    """
    alpha = check_alpha(alpha, SAMPLER_ALPHA_BOUNDS)
    if r < 1:
        raise DomainError("the ratio construction needs r >= 1")
    n = required_points(alpha, r, tol=1e-3) if n_points is None else int(n_points)
    if n <= r:
        raise InsufficientEnumerationError(f"need n_points > r={r}", required=r + 1)
    chunk = chunk or max(1, 2_000_000 // n)
    out = np.empty(n_samples)
    params = StableParams(alpha)
    for lo in range(0, n_samples, chunk):
        m = min(chunk, n_samples - lo)
        gam = np.cumsum(rng.standard_exponential((m, n)), axis=1)
        jumps = gam ** (-1.0 / alpha)
        tm = tail_mean(params, jumps[:, -1])
        out[lo : lo + m] = (jumps[:, r:].sum(axis=1) + tm) / jumps[:, r - 1]
    return out
