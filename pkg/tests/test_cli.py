import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from trimmedpd.cli import EXIT_IO, EXIT_OK, EXIT_RANGE, EXIT_USAGE, UsageError, main, parse_grid
from trimmedpd.densities import joint_U_T_density, sb_joint_density

DATA = Path(__file__).parent / "data"


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def comments(path):
    out = {}
    for ln in path.read_text().splitlines():
        if ln.startswith("#"):
            for tok in ln[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    out[k] = v
    return out


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_allclose(parse_grid("log:1:100:3"), [1, 10, 100])
    for bad in ("0:1", "a:1:3", "1:0:3", "0:1:0", "log:0:1:3", "0:inf:3"):
        with pytest.raises(UsageError):
            parse_grid(bad)


def test_sample_pd(tmp_path):
    out = tmp_path / "pd.csv"
    args = ["sample", "pd", "--alpha", "0.5", "--r", "2", "--depth", "10", "--n", "1000", "--seed", "42"]
    assert main(args + ["--out", str(out)]) == EXIT_OK
    header, rows = read_csv(out)
    assert len(rows) == 1000
    v = np.array([[float(x) for x in row[1:11]] for row in rows])
    assert np.all(np.diff(v, axis=1) <= 0) and np.all(v < 1)
    again = tmp_path / "pd2.csv"
    main(args + ["--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


@pytest.mark.parametrize("method", ["direct", "chain"])
def test_sample_sizebiased(tmp_path, method):
    out = tmp_path / "sb.csv"
    assert main(["sample", "sizebiased", "--alpha", "0.5", "--r", "1", "--depth", "3", "--n", "20",
                 "--method", method, "--out", str(out)]) == EXIT_OK
    header, rows = read_csv(out)
    assert header == ["sample_id", "vtilde1", "vtilde2", "vtilde3", "u1", "u2", "u3", "t0"]
    v = np.array([[float(x) for x in row[1:4]] for row in rows])
    assert np.all(v > 0) and np.all(v.sum(axis=1) < 1)


def test_sample_sizebiased_r0_is_usage_error(capsys):
    assert main(["sample", "sizebiased", "--alpha", "0.5", "--r", "0", "--method", "direct"]) == EXIT_USAGE
    assert "r = 0" in capsys.readouterr().err


def test_sample_jumps(tmp_path):
    out = tmp_path / "j.csv"
    assert main(["sample", "jumps", "--alpha", "0.5", "--n-points", "5", "--n", "3", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header[-2:] == ["tail_cutoff", "tail_mean"] and len(rows) == 3


def test_density_g(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["density", "g", "--alpha", "0.5", "--r", "1", "--t", "0.1:10:200", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["t", "value", "flag"] and len(rows) == 200
    c = comments(out)
    assert float(c["trapezoid_plus_outside"]) == pytest.approx(1.0, abs=2e-3)
    assert float(c["normalization"]) == pytest.approx(1.0, abs=1e-4)


def test_density_g_flags_out_of_range(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["density", "g", "--alpha", "0.5", "--r", "1", "--t", "1e6:2e6:3", "--out", str(out)]) == EXIT_RANGE
    _, rows = read_csv(out)
    assert all(r[2] == "out_of_range" for r in rows)
    part = tmp_path / "p.csv"
    assert main(["density", "g", "--alpha", "0.5", "--r", "1", "--t", "1:1e6:3", "--out", str(part)]) == EXIT_OK


def test_density_transit(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["density", "transit", "--alpha", "0.5", "--r", "1", "--t0", "1.5", "--out", str(out)]) == 0
    assert float(comments(out)["quadrature_mass"]) == pytest.approx(1.0, abs=1e-3)
    assert main(["density", "transit", "--alpha", "0.5", "--r", "1"]) == EXIT_USAGE


@pytest.mark.parametrize("kind", ["joint-t", "joint-ut", "sb-joint"])
def test_density_2d(tmp_path, kind):
    out = tmp_path / "d.csv"
    assert main(["density", kind, "--alpha", "0.5", "--r", "1", "--x", "0.1:2:4", "--y", "0.1:0.9:3",
                 "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 12


def test_density_malformed_grid():
    assert main(["density", "g", "--alpha", "0.5", "--t", "0.1:10"]) == EXIT_USAGE


def test_verify_single_family(tmp_path):
    out = tmp_path / "v.json"
    code = main(["verify", "laplace", "--alpha", "0.5", "--r", "1", "--budget", "5000", "--out", str(out)])
    reps = json.loads(out.read_text())
    assert {r["check_name"] for r in reps} == {"laplace_ratio"}
    assert len(reps) == 3
    assert code == (EXIT_OK if all(r["pass"] for r in reps) else 1)


def test_verify_alias_and_unknown(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "depen", "--alpha", "0.5", "--budget", "2000", "--out", str(out)]) in (0, 1)
    assert any(r["check_name"] == "depen" for r in json.loads(out.read_text()))
    assert main(["verify", "nonsense"]) == EXIT_USAGE
    assert main(["verify", "kn", "--budget", "0"]) == EXIT_USAGE


def _write(path, values):
    path.write_text("weight\n" + "\n".join(repr(float(v)) for v in values) + "\n")


def test_fit_power_law(tmp_path):
    inp = tmp_path / "w.csv"
    _write(inp, np.arange(1, 1001, dtype=float) ** -2)
    prefix = tmp_path / "fit"
    assert main(["fit", "--input", str(inp), "--n-boot", "20", "--out", str(prefix)]) == 0
    res = json.loads((tmp_path / "fit.json").read_text())
    assert res["alpha_hat"] == 0.5 and res["r_hat"] == 0
    assert (tmp_path / "fit.csv").read_text().startswith("rank,")


def test_fit_io_errors(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "missing.csv")]) == EXIT_IO
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["fit", "--input", str(empty)]) == EXIT_IO


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["sample", "pd"]) == EXIT_USAGE
    assert main(["sample", "pd", "--alpha", "0.5", "--seed", "-1"]) == EXIT_USAGE
    assert main(["sample", "pd", "--alpha", "1.5", "--n", "2"]) == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "trimmedpd", "density", "g", "--alpha", "0.5",
                           "--t", "1:2:2"], capture_output=True, text=True)
    assert proc.returncode == 0 and "t,value,flag" in proc.stdout


def test_density_2d_matches_pointwise(tmp_path, fam05):
    out = tmp_path / "d.csv"
    main(["density", "sb-joint", "--alpha", "0.5", "--x", "0.1:0.5:2", "--y", "0.5:1.5:2", "--out", str(out)])
    for v, t, val, _ in read_csv(out)[1]:
        assert float(val) == pytest.approx(sb_joint_density(0.5, 1, [float(v)], float(t), fam05).value, rel=1e-12)
    main(["density", "joint-ut", "--alpha", "0.5", "--x", "0.1:2:2", "--y", "0.3:0.9:2", "--out", str(out)])
    for t, u, val, _ in read_csv(out)[1]:
        assert float(val) == pytest.approx(joint_U_T_density(0.5, 1, float(t), [float(u)], fam05).value, rel=1e-12)


def test_fit_outlier_fixture(tmp_path):
    sys.path.insert(0, str(DATA))
    try:
        import make_fixtures
    finally:
        sys.path.remove(str(DATA))
    fixture = DATA / "outliers_seed42.csv"
    bundled = np.loadtxt(fixture, skiprows=1)
    np.testing.assert_array_equal(bundled, make_fixtures.outlier_weights())
    prefix = tmp_path / "o"
    assert main(["fit", "--input", str(fixture), "--n-boot", "20", "--out", str(prefix)]) == 0
    assert json.loads((tmp_path / "o.json").read_text())["r_hat"] == 2
    assert main(["fit", "--input", str(DATA / "power_law.csv"), "--n-boot", "5", "--out", str(prefix)]) == 0
    res = json.loads((tmp_path / "o.json").read_text())
    assert res["alpha_hat"] == 0.5 and res["r_hat"] == 0
