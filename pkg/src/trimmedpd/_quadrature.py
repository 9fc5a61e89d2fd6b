"""Composite Gauss rules for integrands with power-type endpoint behaviour.

An end marked with a power p is refined dyadically: panels shrink by halves
towards it and the last, tiny panel uses Gauss-Jacobi with weight |x - end|^p.
Ends marked None are treated as smooth.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

LEVELS = 40
NODES = 10


@lru_cache(maxsize=64)
def _legendre(n: int):
    x, w = roots_legendre(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=256)
def _jacobi01(n: int, p: float):
    """Nodes/weights on (0, 1) for int_0^1 s^p f(s) ds; weights include s^p."""
    x, w = roots_jacobi(n, 0.0, p)
    return (x + 1) / 2, w / 2.0 ** (p + 1.0)


@lru_cache(maxsize=256)
def _graded_unit(p: float, levels: int, n: int):
    """Rule on (0, 1) refined towards 0 for integrands behaving like s^p there."""
    xl, wl = _legendre(n)
    xs, ws = [], []
    for k in range(levels):
        lo, hi = 2.0 ** -(k + 1), 2.0 ** -k
        xs.append(lo + (hi - lo) * xl)
        ws.append((hi - lo) * wl)
    eps = 2.0 ** -levels
    xj, wj = _jacobi01(n, float(p))
    s = eps * xj
    xs.append(s)
    # the Jacobi weights contain (s/eps)^p; divide it back out
    ws.append(eps * wj / xj**p)
    return np.concatenate(xs), np.concatenate(ws)


def _graded(a: float, h: float, p: float, levels: int, n: int):
    """Rule on the segment from a to a + h (h may be negative), refined towards a."""
    s, w = _graded_unit(float(p), levels, n)
    return a + h * s, abs(h) * w


def rule(a: float, b: float, left: float | None = None, right: float | None = None,
         levels: int = LEVELS, n: int = NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for int_a^b f(x) dx."""
    if not b > a:
        return np.zeros(0), np.zeros(0)
    if left is None and right is None:
        xl, wl = _legendre(n)
        return a + (b - a) * xl, (b - a) * wl
    if right is None:
        return _graded(a, b - a, left, levels, n)
    if left is None:
        return _graded(b, a - b, right, levels, n)
    m = 0.5 * (a + b)
    x1, w1 = _graded(a, m - a, left, levels, n)
    x2, w2 = _graded(b, m - b, right, levels, n)
    return np.concatenate([x1, x2]), np.concatenate([w1, w2])


def composite(cuts, left_powers: dict | None = None, right_power: float | None = None,
              levels: int = LEVELS, n: int = NODES, kink_levels: int = 14,
              smooth_after: float = np.inf):
    """Rule over consecutive panels, each graded towards its left end.

    ``left_powers`` maps a cut to the integrand's power just right of it
    (default 0, a kink); ``right_power`` applies at the last cut.  Panels
    starting at or beyond ``smooth_after`` get a plain Gauss-Legendre rule.
    """
    left_powers = left_powers or {}
    cuts = list(cuts)
    xs, ws = [], []
    last = len(cuts) - 2
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        if not b > a:
            continue
        left = left_powers.get(a, None if a >= smooth_after else 0.0)
        right = right_power if i == last else None
        lv = levels if (a in left_powers or right is not None) else kink_levels
        if left is None and right is None:
            lv = 0
        x, w = rule(a, b, left, right, lv, n)
        xs.append(x)
        ws.append(w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def integer_cuts(lo: float, hi: float) -> list[float]:
    """lo, the integers strictly between, hi."""
    inner = np.arange(np.floor(lo) + 1, np.ceil(hi))
    return [float(lo)] + [float(x) for x in inner] + [float(hi)]
