"""Command line: sample, density, verify and fit.

Exit codes: 0 success (and all checks passed), 1 verification failures,
2 usage, 3 numeric range, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import densities as D
from . import fit as F
from . import verify as V
from .errors import DomainError, FitError, InsufficientEnumerationError, NumericalError, RangeError
from .levy import StableParams, pd_sample, required_points, sample_ordered_jumps, sample_ordered_jumps_adaptive
from .nbproc import ratios_from_jumps
from .sizebias import markov_chain_sampler, residual_fractions, size_biased_permutation, stick_reconstruct
from .streams import DEFAULT_SEED, stream

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RANGE, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def fmt(x) -> str:
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:count`` with inclusive ends; a ``log:`` prefix spaces points geometrically."""
    log = spec.startswith("log:")
    parts = (spec[4:] if log else spec).split(":")
    if len(parts) != 3:
        raise UsageError(f"malformed grid {spec!r}; expected lo:hi:count or log:lo:hi:count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"malformed grid {spec!r}") from None
    if count < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo or (count > 1 and hi == lo):
        raise UsageError(f"grid {spec!r} needs finite lo < hi and count >= 1")
    if log:
        if lo <= 0:
            raise UsageError("log grids need lo > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def _rows_csv(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _positive_int(name, value):
    if value is None or value < 1:
        raise UsageError(f"--{name} must be a positive integer")
    return value


# sample ----------------------------------------------------------------------

def cmd_sample(args) -> int:
    n = _positive_int("n", args.n)
    rng = stream(args.seed, "sample", args.kind)
    if args.kind == "pd":
        depth = _positive_int("depth", args.depth)
        if args.r < 0:
            raise UsageError("--r must be nonnegative")
        params = StableParams(args.alpha, args.c)
        rows = []
        n_points = max(required_points(args.alpha, args.r, depth), args.r + depth)
        for i in range(n):
            s = pd_sample(sample_ordered_jumps(params, 1.0, n_points, rng), args.r, depth)
            rows.append([i] + [float(v) for v in s.values] + [s.tail_fraction])
        header = ["sample_id"] + [f"v{k}" for k in range(1, depth + 1)] + ["tail_fraction"]
    elif args.kind == "sizebiased":
        depth = _positive_int("depth", args.depth)
        if args.r < 1:
            raise UsageError("sizebiased sampling needs --r >= 1: the jump-ratio point process "
                             "is not defined at r = 0 (there is no r-th largest jump to divide by)")
        rows = []
        family = D.GrFamily(args.alpha) if args.method == "chain" else None
        for i in range(n):
            if args.method == "direct":
                js = sample_ordered_jumps_adaptive(StableParams(args.alpha), 1.0, rng, r=args.r)
                M = ratios_from_jumps(js, args.r)
                draw = size_biased_permutation(M, depth, rng)
                u = residual_fractions(draw)
                t0 = draw.totals[0]
            else:
                totals = markov_chain_sampler(args.alpha, args.r, depth, family, rng)
                u = totals[1:] / totals[:-1]
                t0 = totals[0]
            v = stick_reconstruct(u)
            rows.append([i] + [float(x) for x in v] + [float(x) for x in u] + [float(t0)])
        header = (["sample_id"] + [f"vtilde{k}" for k in range(1, depth + 1)]
                  + [f"u{k}" for k in range(1, depth + 1)] + ["t0"])
    else:
        n_points = _positive_int("n-points", args.n_points)
        params = StableParams(args.alpha, args.c)
        rows = []
        for i in range(n):
            js = sample_ordered_jumps(params, args.t, n_points, rng)
            rows.append([i] + [float(x) for x in js.jumps] + [float(js.tail_cutoff), float(js.tail_mean)])
        header = ["sample_id"] + [f"j{k}" for k in range(1, n_points + 1)] + ["tail_cutoff", "tail_mean"]
    _emit(_rows_csv(header, rows), args.out)
    return EXIT_OK


# density ---------------------------------------------------------------------

def _trapezoid(x, y) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x))) if x.size > 1 else 0.0


def cmd_density(args) -> int:
    family = D.GrFamily(args.alpha)
    kind = args.kind
    if kind == "g":
        gr = family[args.r]
        t = parse_grid(args.t)
        ok = (t > gr.t_min) & (t < gr.t_max)
        vals = np.full(t.shape, np.nan)
        if ok.any():
            vals[ok] = gr(t[ok])
        lo, hi = float(t[0]), float(t[-1])
        below = float(gr.cdf(max(lo, 0.0))) if lo > 0 else 0.0
        above = 1.0 - float(gr.cdf(min(hi, gr.t_max)))
        trap = _trapezoid(t[ok], vals[ok])
        comments = [
            f"g_r alpha={fmt(args.alpha)} r={fmt(args.r)} validated on ({fmt(gr.t_min)}, {fmt(gr.t_max)})",
            f"normalization={fmt(gr.checks['normalization'])} "
            + " ".join(f"{k}={fmt(v)}" for k, v in gr.checks.items() if k.startswith("laplace")),
            f"trapezoid={fmt(trap)} mass_below_grid={fmt(below)} mass_above_grid={fmt(above)} "
            f"trapezoid_plus_outside={fmt(trap + below + above)}",
        ]
        rows = [[float(a), float(b), "" if k else "out_of_range"] for a, b, k in zip(t, vals, ok)]
        _emit(_rows_csv(["t", "value", "flag"], rows, comments), args.out)
        return EXIT_RANGE if not ok.any() else EXIT_OK
    if kind == "transit":
        if args.t0 is None or not args.t0 > 0:
            raise UsageError("density transit needs --t0 > 0")
        gr = family[args.r + args.n]
        if not (gr.t_min < args.t0 < gr.t_max):
            raise RangeError(f"t0={args.t0} lies outside the validated range of g_(r+n)")
        s, w = D.transition_rule(args.alpha, args.r, args.n, args.t0)
        vals = D.transition_values(args.alpha, args.r, args.n, args.t0, s, family)
        mass = w * vals
        comments = [f"transition kernel alpha={fmt(args.alpha)} r={fmt(args.r)} n={args.n} t0={fmt(args.t0)}",
                    f"quadrature_mass={fmt(mass.sum())}"]
        rows = [[float(a), float(b), float(c), float(d)] for a, b, c, d in zip(s, vals, w, mass)]
        _emit(_rows_csv(["t_next", "value", "weight", "mass"], rows, comments), args.out)
        return EXIT_OK
    # two-dimensional n = 1 grids
    xs, ys = parse_grid(args.x), parse_grid(args.y)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    # fractions carry a trailing axis of length n = 1
    if kind == "joint-t":
        names, fn = ("t0", "t1"), D.joint_T_values
    elif kind == "joint-ut":
        names = ("t1", "u1")
        fn = lambda a, r, t, u, fam: D.joint_U_T_values(a, r, t, np.asarray(u)[..., None], fam)
    else:
        names = ("v1", "t")
        fn = lambda a, r, v, t, fam: D.sb_joint_values(a, r, np.asarray(v)[..., None], t, fam)
    try:
        vals = fn(args.alpha, args.r, X, Y, family)
    except RangeError:
        vals = np.full(X.shape, np.nan)
        for idx in np.ndindex(X.shape):
            try:
                vals[idx] = fn(args.alpha, args.r, X[idx], Y[idx], family)
            except RangeError:
                pass
    flagged = ~np.isfinite(vals)
    rows = [[float(a), float(b), float(c), "out_of_range" if f else ""]
            for a, b, c, f in zip(X.ravel(), Y.ravel(), np.asarray(vals).ravel(), flagged.ravel())]
    comments = [f"{kind} density, n = 1, alpha={fmt(args.alpha)} r={fmt(args.r)}"]
    _emit(_rows_csv([*names, "value", "flag"], rows, comments), args.out)
    return EXIT_RANGE if flagged.all() else EXIT_OK


# verify ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    suite = args.suite
    if suite == "all":
        suites = V.ALL_SUITES
    else:
        name = V.SUITE_ALIASES.get(suite, suite)
        if name not in V.ALL_SUITES:
            raise UsageError(f"unknown suite {suite!r}; choose from all, "
                             + ", ".join(sorted(set(V.ALL_SUITES) | set(V.SUITE_ALIASES))))
        suites = (name,)
    cfg = V.VerifyConfig(seed=args.seed, budget=_positive_int("budget", args.budget), suites=suites,
                         timings=args.timings)
    if args.alpha:
        cfg.alphas = tuple(args.alpha)
    if args.r:
        cfg.rs = tuple(args.r)
    if args.workers:
        cfg.workers = args.workers
    reports = V.verify_all(cfg)
    _emit(V.reports_to_json(reports), args.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# fit -------------------------------------------------------------------------

def cmd_fit(args) -> int:
    try:
        with open(args.input, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    try:
        data = F.read_ranked_csv(text, label=args.input)
    except DomainError as exc:
        raise OSError(f"{args.input}: {exc}") from None
    result = F.select_r(data, args.r_max, args.penalty, args.window)
    report = F.goodness_report(data, result, args.n_boot, args.seed)
    payload = dict(result.to_dict(), coverage=report.coverage, n_boot=report.n_boot, seed=args.seed)
    text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        _emit(text, args.out + ".json")
        _emit(report.to_csv(), args.out + ".csv")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# parser ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trimmedpd", description="Samplers and densities for trimmed Poisson-Dirichlet laws, with identity checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw samples as CSV")
    s.add_argument("kind", choices=["pd", "sizebiased", "jumps"])
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--r", type=int, default=0)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--depth", type=int, default=10)
    s.add_argument("--n", type=int, default=1000, help="number of samples")
    s.add_argument("--n-points", type=int, default=1000, help="jumps per sample (jumps)")
    s.add_argument("--t", type=float, default=1.0, help="time horizon (jumps)")
    s.add_argument("--method", choices=["direct", "chain"], default="direct")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    d = sub.add_parser("density", help="evaluate densities on grids")
    d.add_argument("kind", choices=["g", "transit", "joint-t", "joint-ut", "sb-joint"])
    d.add_argument("--alpha", type=float, required=True)
    d.add_argument("--r", type=float, default=1.0)
    d.add_argument("--n", type=int, default=0, help="step index for transit")
    d.add_argument("--t", default="0.1:10:200", help="grid for g")
    d.add_argument("--t0", type=float)
    d.add_argument("--x", default="0.05:3:40", help="first-coordinate grid for 2-d densities")
    d.add_argument("--y", default="0.05:0.95:40", help="second-coordinate grid for 2-d densities")
    d.add_argument("--out")
    d.set_defaults(func=cmd_density)

    v = sub.add_parser("verify", help="run identity checks and emit JSON reports")
    v.add_argument("suite")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--budget", type=int, default=100_000)
    v.add_argument("--alpha", type=float, action="append")
    v.add_argument("--r", type=int, action="append")
    v.add_argument("--workers", type=int)
    v.add_argument("--timings", action="store_true", help="record runtime_ms (breaks byte-identity)")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fit", help="fit (alpha, r) to ranked weights")
    f.add_argument("--input", required=True)
    f.add_argument("--r-max", type=int, default=10)
    f.add_argument("--penalty", type=float)
    f.add_argument("--window", type=int)
    f.add_argument("--n-boot", type=int, default=200)
    f.add_argument("--seed", type=int, default=DEFAULT_SEED)
    f.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.csv")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed", 0) < 0:
            raise UsageError("--seed must be a nonnegative integer")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RangeError, NumericalError) as exc:
        print(f"numeric range error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, InsufficientEnumerationError, FitError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
