"""Heuristic (alpha, r) fitting for ranked weights.

Log weight is regressed on log rank over a window below the trimmed ranks;
alpha is read off the slope -1/alpha.  r is chosen by a penalised residual
scan.  Ranks are always the original ones, so trimming only drops points.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FitError
from .levy import SAMPLER_ALPHA_BOUNDS, StableParams, pd_sample, sample_ordered_jumps
from .streams import stream

ALPHA_CLIP = SAMPLER_ALPHA_BOUNDS
DEFAULT_WINDOW = 500
MIN_WINDOW = 3
PENALTY_FRACTION = 0.05
EXACT_TOL = 1e-24


@dataclass(frozen=True)
class RankedData:
    weights: np.ndarray
    label: str = "data"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("weights must be finite and strictly positive")
        if np.any(np.diff(w) > 0):
            raise DomainError("weights must be sorted nonincreasing")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unsorted(cls, values, label: str = "data") -> "RankedData":
        return cls(np.sort(np.asarray(values, dtype=float))[::-1], label)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class FitResult:
    r_hat: int
    alpha_hat: float
    residual: float
    per_r_profile: tuple = field(default_factory=tuple)  # (r, alpha, residual); nan where the fit failed
    penalty: float = 0.0
    window: int | None = None
    label: str = "data"

    def to_dict(self) -> dict:
        def num(x):
            return None if not np.isfinite(x) else float(x)

        return {
            "label": self.label,
            "r_hat": int(self.r_hat),
            "alpha_hat": float(self.alpha_hat),
            "residual": float(self.residual),
            "penalty": float(self.penalty),
            "window": self.window,
            "per_r_profile": [{"r": int(r), "alpha": num(a), "residual": num(s)} for r, a, s in self.per_r_profile],
        }


def _window_slice(n: int, r: int, window: int | None) -> slice:
    w = DEFAULT_WINDOW if window is None else int(window)
    if w < MIN_WINDOW:
        raise DomainError(f"rank window must be at least {MIN_WINDOW}, got {w}")
    if r < 0:
        raise DomainError("r must be nonnegative")
    if r + MIN_WINDOW > n:
        raise DomainError(f"r={r} leaves fewer than {MIN_WINDOW} ranks out of {n}")
    return slice(r, min(n, r + w))


def fit_alpha_given_r(data: RankedData, r: int, window: int | None = None) -> tuple[float, float]:
    """(alpha_hat, residual) from least squares of log weight on log rank.

    Uses ranks r+1 .. min(n, r+window).  residual is the mean squared
    deviation from the fitted line.
    """
    sl = _window_slice(len(data), int(r), window)
    y = np.log(data.weights[sl])
    x = np.log(np.arange(sl.start + 1, sl.stop + 1, dtype=float))
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    if not slope < 0:
        raise FitError(f"log-log slope {slope:.4g} is not negative; data are not heavy-tailed")
    resid = (y - y.mean()) - slope * xc
    alpha = float(np.clip(-1.0 / slope, *ALPHA_CLIP))
    mse = float(resid @ resid / resid.size)
    # rounding noise of an exact power law should not drive the r scan
    if mse <= EXACT_TOL * max(1.0, float(np.var(y))):
        mse = 0.0
    return alpha, mse


def select_r(data: RankedData, r_max: int = 10, penalty: float | None = None,
             window: int | None = None) -> FitResult:
    """Scan r = 0..r_max and minimise residual + penalty * r.

    The default penalty is PENALTY_FRACTION times the residual scale, taken as
    the residual of the untrimmed fit (or the smallest successful one).
    Ties go to the smaller r.
    """
    r_max = int(r_max)
    if r_max < 0:
        raise DomainError("r_max must be nonnegative")
    if r_max + MIN_WINDOW > len(data):
        raise DomainError(f"r_max={r_max} needs at least {r_max + MIN_WINDOW} weights, got {len(data)}")
    profile = []
    for r in range(r_max + 1):
        try:
            a, s = fit_alpha_given_r(data, r, window)
        except FitError:
            a, s = np.nan, np.nan
        profile.append((r, a, s))
    ok = [p for p in profile if np.isfinite(p[2])]
    if not ok:
        raise FitError("no trimming level produced a heavy-tailed fit")
    if penalty is None:
        penalty = PENALTY_FRACTION * ok[0][2]
    if penalty < 0:
        raise DomainError("penalty must be nonnegative")
    best = min(ok, key=lambda p: (p[2] + penalty * p[0], p[0]))
    return FitResult(best[0], best[1], best[2], tuple(profile), float(penalty), window, data.label)


# bootstrap -------------------------------------------------------------------

@dataclass(frozen=True)
class GoodnessReport:
    ranks: np.ndarray
    observed: np.ndarray
    fitted: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    coverage: float
    n_boot: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "log_rank", "observed", "fitted", "lower", "median", "upper"])
        for row in zip(self.ranks, np.log(self.ranks), self.observed, self.fitted,
                       self.lower, self.median, self.upper):
            w.writerow([int(row[0])] + [format(float(v), ".17g") for v in row[1:]])
        return buf.getvalue()


def _log_curve(weights: np.ndarray) -> np.ndarray:
    return np.log(weights) - np.log(weights.sum())


def goodness_report(data: RankedData, fit: FitResult, n_boot: int = 200, seed: int = 0,
                    level: float = 0.95) -> GoodnessReport:
    """Parametric bootstrap envelope of the log-log curve over the fit window.

    Curves are log weights normalised by their sum over the window, so the
    comparison is scale free.  Replicate b draws PD(alpha_hat, r_hat)
    values from its own stream.
    """
    if n_boot < 1:
        raise DomainError("n_boot must be positive")
    sl = _window_slice(len(data), fit.r_hat, fit.window)
    depth = sl.stop - sl.start
    ranks = np.arange(sl.start + 1, sl.stop + 1)
    obs = _log_curve(data.weights[sl])
    params = StableParams(fit.alpha_hat)
    sims = np.empty((n_boot, depth))
    for b in range(n_boot):
        rng = stream(seed, "goodness", b)
        jumps = sample_ordered_jumps(params, 1.0, fit.r_hat + depth, rng)
        sims[b] = _log_curve(pd_sample(jumps, fit.r_hat, depth).values)
    q = (1.0 - level) / 2.0
    lower, median, upper = np.quantile(sims, [q, 0.5, 1.0 - q], axis=0)
    slope = -1.0 / fit.alpha_hat
    x = np.log(ranks)
    line = slope * x
    fitted = line + (obs - line).mean()
    coverage = float(np.mean((obs >= lower) & (obs <= upper)))
    return GoodnessReport(ranks, obs, fitted, lower, median, upper, coverage, int(n_boot))


def simulate_ranked(alpha: float, n: int, rng: np.random.Generator, outliers: int = 0,
                    factor: float = 10.0, label: str = "synthetic") -> RankedData:
    """Normalised PD(alpha) weights with the top ``outliers`` multiplied by ``factor``."""
    jumps = sample_ordered_jumps(StableParams(alpha), 1.0, n, rng)
    w = pd_sample(jumps, 0, n).values.copy()
    w[:outliers] *= factor
    return RankedData(w, label)


def read_ranked_csv(text: str, label: str = "data") -> RankedData:
    """One positive weight per line; a non-numeric first line is a header."""
    rows = [ln.split(",")[0].strip() for ln in text.splitlines() if ln.strip()]
    if rows:
        try:
            float(rows[0])
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise DomainError("no weights found")
    try:
        vals = np.array([float(v) for v in rows])
    except ValueError as exc:
        raise DomainError(f"malformed weight: {exc}") from None
    return RankedData.from_unsorted(vals, label)
