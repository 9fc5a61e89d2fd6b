import json
import math

import numpy as np
import pytest
from scipy.stats import kstwobign

from trimmedpd.streams import stream
from trimmedpd.verify import (
    VerificationReport,
    VerifyConfig,
    _negate,
    _run_task,
    bonferroni_threshold,
    first_pick_edges,
    ks_threshold,
    reports_to_json,
    verify_all,
    verify_appendix,
    verify_density,
    verify_depen,
    verify_equivalence,
    verify_kn_forms,
    verify_kn_integral,
    verify_laplace_ratio,
    verify_palm,
)

KEYS = ["check_name", "params", "statistic", "expected", "stderr", "z_score", "pass", "runtime_ms"]
SMALL = dict(budget=4000, alphas=(0.5,), rs=(1,), lambdas=(1.0,))


def test_report_json_shape():
    r = VerificationReport("x", {"alpha": 0.5, "bad": math.nan}, 1.0, math.nan, 0.1, math.inf, True)
    d = r.to_dict()
    assert list(d) == KEYS
    assert d["pass"] is True and d["expected"] is None and d["z_score"] is None
    assert d["params"]["bad"] is None
    assert json.loads(reports_to_json([r]))[0] == d


def test_thresholds():
    assert bonferroni_threshold(1) == pytest.approx(3.0)
    assert bonferroni_threshold(27) > bonferroni_threshold(9) > 3.0
    assert ks_threshold(1) == pytest.approx(kstwobign.isf(1e-3))
    assert ks_threshold(9) > ks_threshold(1)


def test_first_pick_edges_equal_mass_in_z():
    e = first_pick_edges(0.5, 4)
    np.testing.assert_allclose(e ** 0.5, [0, 0.25, 0.5, 0.75, 1.0])


def test_laplace_at_zero_is_exact():
    (rep,) = verify_laplace_ratio(0.5, 1, [0.0], 100, stream(0, "z"))
    assert rep.statistic == 1.0 and rep.expected == 1.0 and rep.z_score == 0.0 and rep.passed


def test_laplace_ratio_passes_and_detects_shift():
    good = verify_laplace_ratio(0.5, 2, [0.5, 1.0, 2.0], 20_000, stream(0, "lap"))
    assert all(r.passed for r in good)
    bad = verify_laplace_ratio(0.5, 2, [0.5, 1.0, 2.0], 20_000, stream(0, "lap"), alpha_model=0.7)
    assert not any(r.passed for r in bad)
    assert all(r.params["alpha_model"] == 0.7 for r in bad)


def test_quadrature_checks():
    assert all(r.passed for r in verify_appendix(0.5, 1))
    assert all(r.passed for r in verify_kn_forms())
    assert all(r.passed for r in verify_kn_integral(0.3, 2, 2))
    reps = verify_density(0.5, 1)
    assert all(r.passed for r in reps), [r for r in reps if not r.passed]
    assert {r.check_name for r in reps} >= {"g_normalization", "g_laplace", "transition_normalization",
                                            "joint_T_marginal", "joint_T_factorization"}


def test_mc_checks_small_budget():
    assert verify_equivalence(0.5, 2, 20_000, stream(0, "eq"))[0].passed
    assert verify_palm(0.5, 1, 20_000, stream(0, "palm"))[0].passed
    assert verify_depen(0.5, 1, 1, 20_000, stream(0, "dep"))[0].passed
    assert not verify_palm(0.5, 1, 20_000, stream(0, "palm"), alpha_model=0.7)[0].passed


def test_negate_inverts_family_verdict():
    def rep(name, passed, z):
        return VerificationReport(name, {"threshold": 3.0}, 0.0, 0.0, 1.0, z, passed)

    out = _negate([rep("a", False, 9.0), rep("a", False, 5.0), rep("b", False, 7.0), rep("b", True, 0.5)])
    by = {r.check_name: r for r in out}
    assert by["negative_control/a"].passed and by["negative_control/a"].z_score == 9.0
    # one surviving check is enough to fail the control
    assert not by["negative_control/b"].passed
    assert by["negative_control/b"].params["inner_rejected"] == 1
    assert by["negative_control/a"].params["inner_reports"] == 2


def test_task_errors_become_reports():
    reps = _run_task(0, ("laplace", "verify_laplace_ratio",
                         dict(alpha=1.5, r=1, lambdas=(1.0,), n_samples=10)), False)
    assert len(reps) == 1 and reps[0].check_name == "verify_laplace_ratio_error"
    assert not reps[0].passed and "DomainError" in reps[0].params["error"]


def test_verify_all_reproducible_and_order_free():
    cfg = VerifyConfig(seed=3, suites=("laplace", "palm", "kn"), **SMALL)
    a = reports_to_json(verify_all(cfg))
    b = reports_to_json(verify_all(cfg))
    assert a == b
    c = reports_to_json(verify_all(VerifyConfig(seed=3, suites=("kn", "palm", "laplace"), workers=2, **SMALL)))
    assert a == c
    d = reports_to_json(verify_all(VerifyConfig(seed=4, suites=("laplace", "palm", "kn"), **SMALL)))
    assert a != d


def test_verify_all_sorted_and_tagged():
    reps = verify_all(VerifyConfig(seed=1, suites=("laplace", "kn"), **SMALL))
    keys = [(r.check_name, json.dumps(r.params, sort_keys=True)) for r in reps]
    assert keys == sorted(keys)
    assert all(r.params["seed"] == 1 for r in reps)
    assert all(r.runtime_ms == 0 for r in reps)
    timed = verify_all(VerifyConfig(seed=1, suites=("kn",), timings=True, **SMALL))
    assert any(r.runtime_ms > 0 for r in timed)
