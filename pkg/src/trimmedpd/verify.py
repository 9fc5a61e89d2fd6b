"""Identity-verification harness.

Every check yields VerificationReport records.  Monte-Carlo checks compare a
simulated statistic with its closed form in standard-error units, with a
Bonferroni-adjusted threshold across the family's grid.  Quadrature checks
compare against a tolerance; for them z_score = (statistic - expected) / tol
and the threshold is 1.  Two-sample KS checks use z = D / sqrt(1/n1 + 1/n2)
against the Kolmogorov critical value at family level 0.1%, split the
same way across the grid.

Negative controls rerun a Monte-Carlo family with the closed-form side at
alpha + 0.2; such a report passes when every perturbed check is rejected.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import kstwobign, norm

from . import densities as D
from ._laplace import psi_tilde
from .levy import ratio_totals
from .nbproc import NBParams, default_epsilon, nb_totals, sample_nb_batches
from .sizebias import chain_batch, first_pick_batch, ratio_first_pick
from .streams import stream

BASE_Z = 3.0
KS_LEVEL = 1e-3
NEGATIVE_SHIFT = 0.2
WORKERS_ENV = "TRIMMEDPD_WORKERS"
MEAN_MEASURE_INTERVALS = ((0.001, 0.01), (0.01, 0.1), (0.1, 0.25), (0.25, 0.5), (0.5, 1.0))
KN_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass(frozen=True)
class VerificationReport:
    check_name: str
    params: dict
    statistic: float
    expected: float
    stderr: float
    z_score: float
    passed: bool
    runtime_ms: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for k in ("statistic", "expected", "stderr", "z_score"):
            d[k] = _json_float(d[k])
        d["params"] = {k: _json_float(v) if isinstance(v, float) else v for k, v in d["params"].items()}
        return {k: d[k] for k in ("check_name", "params", "statistic", "expected", "stderr",
                                  "z_score", "pass", "runtime_ms")}


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def reports_to_json(reports: list[VerificationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=False) + "\n"


def bonferroni_threshold(m: int, base: float = BASE_Z) -> float:
    """Two-sided z threshold keeping the family error at that of |z| <= base."""
    return float(norm.isf(norm.sf(base) / max(1, m)))


# report builders ------------------------------------------------------------

def _mc(name, params, stat, expected, se, threshold):
    se = float(se)
    z = (stat - expected) / se if se > 0 else (0.0 if stat == expected else math.inf)
    params = dict(params, threshold=threshold, policy="mc: |z| <= threshold")
    return VerificationReport(name, params, float(stat), float(expected), se, float(z),
                              bool(abs(z) <= threshold))


def _quad(name, params, stat, expected, tol):
    z = (stat - expected) / tol
    params = dict(params, threshold=1.0, tolerance=tol, policy="quadrature: |stat - expected| <= tolerance")
    return VerificationReport(name, params, float(stat), float(expected), 0.0, float(z), bool(abs(z) <= 1.0))


def ks_threshold(grid_size: int = 1) -> float:
    """Critical value of sqrt(n_e) D at family level KS_LEVEL split over the grid."""
    return float(kstwobign.isf(KS_LEVEL / max(1, grid_size)))


def _ks(name, params, a, b, grid_size=1):
    from scipy.stats import ks_2samp

    d = float(ks_2samp(a, b).statistic)
    se = math.sqrt(1.0 / a.size + 1.0 / b.size)
    thr = ks_threshold(grid_size)
    params = dict(params, threshold=thr, level=KS_LEVEL / max(1, grid_size),
                  policy="ks: sqrt(n_e) D <= critical value at the Bonferroni-split level")
    return VerificationReport(name, params, d, 0.0, se, d / se, bool(d / se <= thr))


def _hist(name, params, counts, probs, threshold):
    """Per-bin binomial z scores; z_score is the worst bin, statistic the chi-square."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = params["n_samples"]
    occupied = (counts > 0) | (probs > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (counts - n * probs) / np.sqrt(n * probs * (1.0 - probs))
    z = np.where(occupied & (probs <= 0), np.inf, z)[occupied]
    worst = float(z[np.argmax(np.abs(z))]) if z.size else 0.0
    chi2 = float(np.sum(z**2))
    params = dict(params, threshold=threshold, bins=int(occupied.sum()),
                  policy="histogram: worst per-bin |z| <= threshold; statistic is chi-square")
    return VerificationReport(name, params, chi2, float(z.size), math.sqrt(2.0 * z.size), worst,
                              bool(abs(worst) <= threshold))


def _model(alpha, alpha_model):
    return alpha if alpha_model is None else alpha_model


def _tag(params, alpha_model):
    if alpha_model is not None:
        params = dict(params, alpha_model=alpha_model)
    return params


# checks ---------------------------------------------------------------------

def verify_laplace_ratio(alpha, r, lambdas, n_samples, rng, grid_size=1, alpha_model=None):
    """E exp(-lam T) for T = trimmed sum / r-th jump against (1 + psi(lam))^(-r)."""
    T = ratio_totals(alpha, r, n_samples, rng)
    thr = bonferroni_threshold(grid_size)
    out = []
    for lam in lambdas:
        p = _tag({"alpha": alpha, "r": r, "lambda": float(lam), "n_samples": n_samples,
                  "grid_size": grid_size}, alpha_model)
        if lam == 0:
            out.append(_mc("laplace_ratio", p, 1.0, 1.0, 0.0, thr))
            continue
        v = np.exp(-lam * T)
        psi = float(psi_tilde(np.array([lam + 0j]), _model(alpha, alpha_model))[0].real)
        out.append(_mc("laplace_ratio", p, v.mean(), (1 + psi) ** (-r),
                       v.std(ddof=1) / math.sqrt(n_samples), thr))
    return out


def first_pick_edges(alpha: float, bins: int = 20) -> np.ndarray:
    return (np.arange(bins + 1) / bins) ** (1.0 / (1.0 - alpha))


def verify_first_pick(alpha, r, n_samples, rng, grid_size=1, bins=20, alpha_model=None):
    """Histogram of the first size-biased pick against its marginal density."""
    am = _model(alpha, alpha_model)
    _, J1 = ratio_first_pick(alpha, r, n_samples, rng)
    edges = first_pick_edges(alpha, bins)
    counts = np.histogram(J1, bins=edges)[0]
    probs = D.first_pick_bin_probs(am, r, edges, D.GrFamily(am))
    p = _tag({"alpha": alpha, "r": r, "n_samples": n_samples, "grid_size": grid_size}, alpha_model)
    outside = int(np.sum((J1 <= 0) | (J1 >= 1)))
    p["outside_support"] = outside
    rep = _hist("first_pick", p, counts, probs, bonferroni_threshold(grid_size * bins))
    if outside:
        rep = replace(rep, passed=False)
    return [rep]


def verify_appendix(alpha, r, tol=1e-3):
    fam = D.GrFamily(alpha)
    p = {"alpha": alpha, "r": r}
    return [
        _quad("appendix_joint_T", p, D.joint_T_mass(alpha, r, fam), 1.0, tol),
        _quad("appendix_sb_joint", p, D.sb_joint_mass(alpha, r, fam), 1.0, tol),
    ]


def verify_equivalence(alpha, r, n_samples, rng, alpha_nb=None, grid_size=1):
    """KS between total masses from the jump-ratio and Gamma-mixed Poisson samplers.

    The two pathways always get independent child streams.
    """
    ra, rb = rng.spawn(2)
    a = ratio_totals(alpha, r, n_samples, ra)
    am = _model(alpha, alpha_nb)
    b = nb_totals(NBParams(am, r), default_epsilon(am), n_samples, rb)
    p = _tag({"alpha": alpha, "r": r, "n_samples": n_samples}, alpha_nb)
    return [_ks("equivalence", p, a, b, grid_size)]


def _nb_pass(alpha, r, n_samples, rng):
    """One sweep over BN(r) draws collecting everything the nbproc checks need."""
    eps = default_epsilon(alpha)
    counts = np.zeros((n_samples, len(MEAN_MEASURE_INTERVALS)))
    lin = np.empty(n_samples)
    ind = np.empty(n_samples)
    totals = np.empty(n_samples)
    pos = 0
    for b in sample_nb_batches(NBParams(alpha, r), eps, n_samples, rng):
        m = len(b)
        sl = slice(pos, pos + m)
        for k, (lo, hi) in enumerate(MEAN_MEASURE_INTERVALS):
            counts[sl, k] = b.sum_over(((b.points > lo) & (b.points < hi)).astype(float))
        t = b.totals()
        totals[sl] = t
        lin[sl] = np.exp(-t)  # f(u) = u with f'(0) = 1 covers the small points
        ind[sl] = np.exp(-b.sum_over((b.points > 0.25).astype(float)))
        pos += m
    return counts, lin, ind, totals


def g_hist_edges(alpha: float, r: float, bins: int = 30) -> np.ndarray:
    """Equal-probability edges under g_r, open last bin."""
    gr = D.GrFamily(alpha)[r]
    t = np.linspace(0.0, gr.t_max, 20001)
    c = gr.cdf(t)
    q = np.interp(np.arange(1, bins) / bins, c, t)
    return np.concatenate([[0.0], q, [np.inf]])


def verify_nbproc(alpha, r, n_samples, rng, grid_size=1, alpha_model=None):
    """Mean measure, Laplace functionals, construction equivalence and g_r histogram."""
    am = _model(alpha, alpha_model)
    r_nb, r_eq = rng.spawn(2)
    counts, lin, ind, totals = _nb_pass(alpha, r, n_samples, r_nb)
    out = []
    base = _tag({"alpha": alpha, "r": r, "n_samples": n_samples, "grid_size": grid_size}, alpha_model)
    thr_mm = bonferroni_threshold(grid_size * len(MEAN_MEASURE_INTERVALS))
    for k, (lo, hi) in enumerate(MEAN_MEASURE_INTERVALS):
        c = counts[:, k]
        out.append(_mc("mean_measure", dict(base, a=lo, b=hi), c.mean(),
                       r * (lo ** (-am) - hi ** (-am)), c.std(ddof=1) / math.sqrt(n_samples), thr_mm))
    thr_lf = bonferroni_threshold(2 * grid_size)
    psi1 = float(psi_tilde(np.array([1.0 + 0j]), am)[0].real)
    out.append(_mc("laplace_functional_linear", dict(base, f="u"), lin.mean(), (1 + psi1) ** (-r),
                   lin.std(ddof=1) / math.sqrt(n_samples), thr_lf))
    mass = (1 - math.exp(-1.0)) * (0.25 ** (-am) - 1.0)
    out.append(_mc("laplace_functional_indicator", dict(base, f="1{u>0.25}"), ind.mean(),
                   (1 + mass) ** (-r), ind.std(ddof=1) / math.sqrt(n_samples), thr_lf))
    # construction equivalence against the jump-ratio pathway
    a = ratio_totals(alpha if alpha_model is None else am, r, n_samples, r_eq)
    out.append(_ks("equivalence", base, a, totals, grid_size))
    # g_r histogram, bins fixed by the true alpha
    edges = g_hist_edges(alpha, r)
    probs = D.g_bin_probs(D.GrFamily(am)[r], edges)
    hc = np.histogram(totals, bins=edges)[0]
    out.append(_hist("g_histogram", base, hc, probs, bonferroni_threshold(grid_size * (edges.size - 1))))
    out.append(_mc("g_mc_mean", base, totals.mean(), D.g_mean(am, r),
                   totals.std(ddof=1) / math.sqrt(n_samples), bonferroni_threshold(grid_size)))
    return out


def verify_palm(alpha, r, n_samples, rng, grid_size=1, alpha_model=None):
    """Mecke identity for phi(x, M) = x exp(-T(M)), both sides by simulation.

    Left: E[T e^-T] under BN(r).  Right: r alpha/(1-alpha) E[e^-(x + T(xi))]
    with x ~ (1-alpha) x^-alpha on (0, 1) and xi ~ BN(r+1), i.e. the Palm draw xi + delta_x.
    """
    am = _model(alpha, alpha_model)
    rl, rr = rng.spawn(2)
    T = nb_totals(NBParams(alpha, r), default_epsilon(alpha), n_samples, rl)
    lhs = T * np.exp(-T)
    x = rr.beta(1.0 - am, 1.0, size=n_samples)
    Tp = nb_totals(NBParams(am, r + 1), default_epsilon(am), n_samples, rr) + x
    rhs = r * am / (1.0 - am) * np.exp(-Tp)
    se = math.sqrt(lhs.var(ddof=1) / n_samples + rhs.var(ddof=1) / n_samples)
    p = _tag({"alpha": alpha, "r": r, "n_samples": n_samples, "grid_size": grid_size}, alpha_model)
    rep = _mc("palm_mecke", p, lhs.mean(), rhs.mean(), se, bonferroni_threshold(grid_size))
    return [replace(rep, params=dict(rep.params, rhs_stderr=float(rhs.std(ddof=1) / math.sqrt(n_samples))))]


def verify_density(alpha, r, states=(0.5, 1.0, 3.0), n_factor_points=20, seed=0):
    """Quadrature checks of g_r and of the joint densities built on it."""
    fam = D.GrFamily(alpha)
    gr = fam[r]
    p = {"alpha": alpha, "r": r}
    out = [
        _quad("g_normalization", p, gr.checks["normalization"], 1.0, 1e-4),
        _quad("g_mean", p, gr.checks["mean"] / D.g_mean(alpha, r), 1.0, 1e-3),
        _quad("g_variance", p, gr.checks["variance"] / D.g_variance(alpha, r), 1.0, 1e-3),
    ]
    for lam in (0.5, 1.0, 2.0):
        exact = (1 + float(psi_tilde(np.array([lam + 0j]), alpha)[0].real)) ** (-r)
        out.append(_quad("g_laplace", dict(p, **{"lambda": lam}), gr.laplace(lam) / exact, 1.0, 1e-4))
    out.append(_quad("joint_U_T_normalization", p, D.joint_U_T_mass(alpha, r, fam), 1.0, 1e-3))
    for t0 in states:
        q = dict(p, t0=t0)
        out.append(_quad("transition_normalization", q, D.transition_mass(alpha, r, 0, t0, fam), 1.0, 1e-3))
        out.append(_quad("joint_T_marginal", q, D.joint_T_marginal(alpha, r, t0, fam) / gr(t0), 1.0, 1e-3))
    # f(t0, t1, t2) = g_r(t0) k(t0 -> t1) k(t1 -> t2) at random support points
    rng = stream(seed, "factorization", f"{alpha}", f"{r}")
    worst = 0.0
    for _ in range(n_factor_points):
        t0 = rng.uniform(0.3, 4.0)
        t1 = t0 - rng.uniform(0.01, min(0.99, t0 - 0.02))
        t2 = t1 - rng.uniform(0.005, min(0.99, t1 - 0.01))
        f = D.joint_T_density(alpha, r, [t0, t1, t2], fam).value
        k0 = D.transition_density(alpha, r, 0, t0, t1, fam).value
        k1 = D.transition_density(alpha, r, 1, t1, t2, fam).value
        worst = max(worst, abs(gr(t0) * k0 * k1 / f - 1.0))
    out.append(_quad("joint_T_factorization", dict(p, points=n_factor_points), worst, 0.0, 1e-9))
    return out


def verify_kn_forms():
    """Dual closed forms of K_n (k_n raises if they disagree beyond 1e-10)."""
    out = []
    for a in KN_ALPHAS:
        worst = max(abs(math.expm1(D.log_k_n(a, n) - D._log_k_n_product(a, n))) for n in range(1, 11))
        D.k_n(a, 10)
        out.append(_quad("kn_dual_forms", {"alpha": a, "n_max": 10}, worst, 0.0, 1e-10))
    return out


def verify_kn_integral(alpha, r, n):
    return [_quad("kn_integral", {"alpha": alpha, "r": r, "n": n},
                  D.kn_integral_check(alpha, r, n), 0.0, 1e-6)]


def verify_depen(alpha, r, n, n_samples, rng, grid_size=1, alpha_model=None):
    res = D.depen_check(alpha, r, n, n_samples, rng, D.GrFamily(alpha), alpha_model)
    p = _tag({"alpha": alpha, "r": r, "n": n, "n_samples": n_samples, "grid_size": grid_size}, alpha_model)
    return [_mc("depen", p, res.estimate, res.expected, res.stderr, bonferroni_threshold(grid_size))]


def _quantile_edges(x: np.ndarray, bins: int, lo: float, hi: float) -> np.ndarray:
    q = np.quantile(x, np.arange(1, bins) / bins)
    return np.concatenate([[lo], q, [hi]])


def verify_stick(alpha, r, n_samples, rng, grid_size=1, bins=6, alpha_model=None):
    """Markov-kernel pathway against direct size-biased sampling.

    KS on V~_1 (chain vs jump ratios) and on T_1 (chain vs BN(r) draws), plus
    2-D histograms of (T_1, U_1) and (V~_1, T_0) against their densities.
    """
    am = _model(alpha, alpha_model)
    r_chain, r_dir, r_nb, r_pick, r_pilot = rng.spawn(5)
    base = _tag({"alpha": alpha, "r": r, "n_samples": n_samples, "grid_size": grid_size}, alpha_model)
    out = []
    fam_m = D.GrFamily(am)
    chain = chain_batch(am, r, 1, n_samples, fam_m, r_chain)
    T0, J1 = ratio_first_pick(alpha, r, n_samples, r_dir)
    v_chain = 1.0 - chain[:, 1] / chain[:, 0]
    out.append(_ks("stick_v1_ks", base, v_chain, J1 / T0, grid_size))
    T0n, J1n = [], []
    for b in sample_nb_batches(NBParams(alpha, r), default_epsilon(alpha), n_samples, r_nb):
        t, j = first_pick_batch(b, r_pick)
        T0n.append(t)
        J1n.append(j)
    T1n = np.concatenate(T0n) - np.concatenate(J1n)
    out.append(_ks("chain_t1_ks", base, chain[:, 1], T1n, grid_size))
    # bins from an independent pilot so the data do not choose their own bins
    pT0, pJ1 = ratio_first_pick(alpha, r, max(2000, n_samples // 10), r_pilot)
    pT1 = pT0 - pJ1
    thr = bonferroni_threshold(grid_size * bins * bins)
    T1 = T0 - J1
    U1 = T1 / T0
    te = _quantile_edges(pT1, bins, 0.0, np.inf)
    ue = _quantile_edges(pT1 / pT0, bins, 0.0, 1.0)
    counts = np.histogram2d(T1, U1, bins=[te, ue])[0]
    probs = D.joint_U_T_cell_probs(am, r, te, ue, fam_m)
    out.append(_hist("joint_U_T_histogram", base, counts.ravel(), probs.ravel(), thr))
    ve = _quantile_edges(pJ1 / pT0, bins, 0.0, 1.0)
    te0 = _quantile_edges(pT0, bins, 0.0, np.inf)
    counts = np.histogram2d(J1 / T0, T0, bins=[ve, te0])[0]
    probs = D.sb_joint_cell_probs(am, r, ve, te0, fam_m)
    out.append(_hist("sb_joint_histogram", base, counts.ravel(), probs.ravel(), thr))
    return out


# orchestration ----------------------------------------------------------------

ALL_SUITES = ("laplace", "first_pick", "appendix", "nbproc", "palm", "density", "kn", "stick", "negative")
SUITE_ALIASES = {
    "equivalence": "nbproc", "mean_measure": "nbproc", "laplace_functional": "nbproc",
    "g_histogram": "nbproc", "depen": "kn", "kernel": "density",
}


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class VerifyConfig:
    seed: int = 0
    budget: int = 100_000
    alphas: tuple = (0.3, 0.5, 0.7)
    rs: tuple = (1, 2, 5)
    lambdas: tuple = (0.5, 1.0, 2.0)
    suites: tuple = ALL_SUITES
    negative_alpha: float = 0.5
    negative_r: int = 2
    timings: bool = False
    workers: int = field(default_factory=default_workers)


def _small_rs(rs):
    small = tuple(r for r in rs if r <= 2)
    return small or tuple(rs[:1])


def _tasks(cfg: VerifyConfig) -> list[tuple[str, str, dict]]:
    """(name, function, kwargs) triples; each gets its own named stream."""
    n = cfg.budget
    grid = [(a, r) for a in cfg.alphas for r in cfg.rs]
    small = [(a, r) for a in cfg.alphas for r in _small_rs(cfg.rs)]
    t: list[tuple[str, str, dict]] = []
    suites = set(cfg.suites)
    if "laplace" in suites:
        for a, r in grid:
            t.append(("laplace", "verify_laplace_ratio", dict(alpha=a, r=r, lambdas=cfg.lambdas, n_samples=n,
                                                            grid_size=len(grid) * len(cfg.lambdas))))
    if "first_pick" in suites:
        for a, r in grid:
            t.append(("first_pick", "verify_first_pick", dict(alpha=a, r=r, n_samples=n, grid_size=len(grid))))
    if "appendix" in suites:
        for a, r in small:
            t.append(("appendix", "verify_appendix", dict(alpha=a, r=r)))
    if "nbproc" in suites:
        for a, r in grid:
            t.append(("nbproc", "verify_nbproc", dict(alpha=a, r=r, n_samples=n, grid_size=len(grid))))
    if "palm" in suites:
        for a, r in grid:
            t.append(("palm", "verify_palm", dict(alpha=a, r=r, n_samples=n, grid_size=len(grid))))
    if "density" in suites:
        for a, r in grid:
            t.append(("density", "verify_density", dict(alpha=a, r=r, seed=cfg.seed)))
    if "kn" in suites:
        t.append(("kn", "verify_kn_forms", {}))
        for a, r, k in [(0.5, 1, 1), (0.3, 2, 2)] + [(a, r, k) for a in cfg.alphas for r in (1, 2) for k in (1, 2)]:
            t.append(("kn", "verify_kn_integral", dict(alpha=a, r=r, n=k)))
        dep = [(a, k, k) for a in cfg.alphas for k in (1, 2)]
        for a, r, k in dep:
            t.append(("kn", "verify_depen", dict(alpha=a, r=r, n=k, n_samples=n, grid_size=len(dep))))
    if "stick" in suites:
        for a, r in small:
            t.append(("stick", "verify_stick", dict(alpha=a, r=r, n_samples=n, grid_size=len(small))))
    if "negative" in suites:
        a, r = cfg.negative_alpha, cfg.negative_r
        am = round(a + NEGATIVE_SHIFT, 10)
        neg = dict(alpha_model=am)
        t += [
            ("negative", "verify_laplace_ratio", dict(alpha=a, r=r, lambdas=cfg.lambdas, n_samples=n,
                                                      grid_size=len(grid) * len(cfg.lambdas), **neg)),
            ("negative", "verify_first_pick", dict(alpha=a, r=r, n_samples=n, grid_size=len(grid), **neg)),
            ("negative", "verify_nbproc", dict(alpha=a, r=r, n_samples=n, grid_size=len(grid), **neg)),
            ("negative", "verify_palm", dict(alpha=a, r=r, n_samples=n, grid_size=len(grid), **neg)),
            ("negative", "verify_depen", dict(alpha=a, r=r, n=2 if r >= 2 else 1, n_samples=n,
                                              grid_size=2 * len(cfg.alphas), **neg)),
            ("negative", "verify_stick", dict(alpha=a, r=1, n_samples=n, grid_size=len(small), **neg)),
        ]
    return t


def _stream_key(name: str, fn: str, kwargs: dict) -> str:
    return json.dumps([name, fn, kwargs], sort_keys=True, default=str)


def _run_task(seed: int, task: tuple[str, str, dict], timings: bool) -> list[VerificationReport]:
    name, fn, kwargs = task
    func = globals()[fn]
    kw = dict(kwargs)
    if "n_samples" in kw:
        kw["rng"] = stream(seed, _stream_key(name, fn, kwargs))
    start = time.perf_counter()
    try:
        reps = func(**kw)
    except Exception as exc:  # reported, not raised
        p = {k: v for k, v in kwargs.items() if isinstance(v, (int, float, str))}
        p["error"] = f"{type(exc).__name__}: {exc}"
        reps = [VerificationReport(f"{fn}_error", p, math.nan, math.nan, math.nan, math.nan, False)]
    ms = int(round(1000 * (time.perf_counter() - start))) if timings else 0
    reps = [replace(r, params=dict(r.params, seed=seed, budget=kwargs.get("n_samples", 0)), runtime_ms=ms)
            for r in reps]
    if name == "negative":
        reps = _negate(reps)
    return reps


def _negate(reps: list[VerificationReport]) -> list[VerificationReport]:
    """One report per perturbed family: passes when every check in it was rejected."""
    groups: dict[str, list[VerificationReport]] = {}
    for r in reps:
        groups.setdefault(r.check_name, []).append(r)
    out = []
    for name, rs in groups.items():
        worst = max(rs, key=lambda r: abs(r.z_score) / r.params.get("threshold", 1.0)
                    if math.isfinite(r.z_score) else math.inf)
        rejected = sum(not r.passed for r in rs)
        p = dict(worst.params, inner_reports=len(rs), inner_rejected=rejected,
                 policy="negative control: passes when every perturbed check fails")
        out.append(VerificationReport(f"negative_control/{name}", p, worst.statistic, worst.expected,
                                      worst.stderr, worst.z_score, rejected == len(rs),
                                      worst.runtime_ms))
    return out


def _sort_key(r: VerificationReport):
    return (r.check_name, json.dumps(r.params, sort_keys=True, default=str))


def verify_all(cfg: VerifyConfig | None = None) -> list[VerificationReport]:
    cfg = cfg or VerifyConfig()
    tasks = _tasks(cfg)
    reports: list[VerificationReport] = []
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            for reps in ex.map(_run_task, [cfg.seed] * len(tasks), tasks, [cfg.timings] * len(tasks)):
                reports.extend(reps)
    else:
        for task in tasks:
            reports.extend(_run_task(cfg.seed, task, cfg.timings))
    return sorted(reports, key=_sort_key)
