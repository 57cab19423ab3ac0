import json
import subprocess
import sys

import pytest

from cheegerlab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_equivariance_passes(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "equivariance", "--samples", "1000", "--seed", "7")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    for c in rep["checks"]:
        if c["expect"] == "<=":
            assert c["residual"] <= 1e-9, c["id"]
    ids = [c["id"] for c in rep["checks"]]
    assert ids == sorted(ids)
    for mid in ("hopf", "f8", "b", "f10-I", "f10-II", "eta-L", "eta-R", "j-tau(6)", "j-tau-c(3)", "t(-3,3)"):
        assert f"map-equivariance:{mid}" in ids


def test_verify_injected_broken_map(capsys):
    code, out, err = run(capsys, "verify", "--suite", "cocycles", "--samples", "100", "--inject-broken")
    rep = json.loads(out)
    assert code == 1
    assert rep["failures"] == ["cocycle-equivariance:injected-right-i"]
    assert "injected-right-i" in err


def test_negative_controls_are_reported(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "hat-composition", "--samples", "200")
    rep = json.loads(out)
    ctl = [c for c in rep["checks"] if c["id"].startswith("control:")]
    assert code == 0 and ctl and all(c["residual"] > 0.1 and c["passed"] for c in ctl)


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--suite", "cocycles", "--samples", "0"],
        ["verify", "--suite", "no-such-suite"],
        ["verify"],
        ["verify", "--suite", "oneill", "--tol", "oneill"],
        ["verify", "--suite", "oneill", "--tol", "bogus=1"],
        ["verify", "--suite", "oneill", "--seed", "-1"],
        ["scan", "--action", "no-such-action"],
        ["scan", "--metric", "no-such-metric", "--points", "2"],
        ["scan", "--space", "S4", "--points", "2"],
        ["curvature", "--space", "S4", "--metric", "inflated"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "usage error" in err


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as e:
        cli.main(["nonsense"])
    assert e.value.code == 2


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"suite": "fiber-shrink", "samples": 50, "seed": 3, "tolerances": {"fiber-shrink": 1e-8}}))
    code, out, _ = run(capsys, "verify", "--config", str(cfg), "--samples", "40")
    rep = json.loads(out)
    assert code == 0
    assert rep["config"]["samples"] == 40 and rep["config"]["seed"] == 3
    assert all(c["tolerance"] == 1e-8 for c in rep["checks"])


def test_config_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"suite": "oneill", "colour": "red"}))
    code, _, _ = run(capsys, "verify", "--config", str(cfg))
    assert code == 2


def test_verify_deterministic(capsys, tmp_path):
    outs = []
    path = tmp_path / "r.json"
    for _ in range(2):
        code, out, _ = run(capsys, "verify", "--suite", "involutions", "--samples", "300", "--seed", "5", "--out", str(path))
        assert code == 0
        assert path.read_text() == out
        outs.append(out)
    assert outs[0] == outs[1]


def test_scan_round_certifies_smallest_t(capsys, tmp_path):
    path = tmp_path / "round.csv"
    code, out, _ = run(capsys, "scan", "--points", "4", "--t-grid", "0.25,1,4", "--seed", "2", "--out", str(path))
    cert = json.loads(out)
    assert code == 0 and cert["status"] == "certified" and cert["t_star"] == 0.25
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,point-id,min_ricci,min_sec,ricH_min" and len(lines) == 13
    # 17 significant digits round-trip
    value = lines[1].split(",")[2]
    assert float(f"{float(value):.17g}") == float(value)
    assert json.loads((tmp_path / "round.csv.json").read_text()) == cert


def test_scan_inflated_finite_certificate(capsys):
    code, out, _ = run(capsys, "scan", "--metric", "inflated", "--points", "8", "--t-grid", "2^-3..2^2", "--seed", "0")
    cert = json.loads(out)
    assert code == 0 and cert["status"] == "certified"
    assert cert["t_star"] is not None and cert["min_ricci_at_t_star"] > 0


def test_scan_torus_hypothesis_failure(capsys):
    code, out, err = run(capsys, "scan", "--action", "t2-circle", "--points", "3", "--t-grid", "1,10")
    assert code == 3 and json.loads(out)["status"] == "hypothesis-failed" and "hypothesis" in err


def test_scan_none_found_is_failure(capsys):
    # a grid that stops before the certificate time of the inflated metric
    code, out, _ = run(capsys, "scan", "--metric", "inflated", "--points", "8", "--t-grid", "0.01", "--seed", "0")
    assert code == 1 and json.loads(out)["status"] == "none-found"


def test_parse_t_grid():
    assert cli.parse_t_grid("2^-3..2^8") == [2.0**k for k in range(-3, 9)]
    assert cli.parse_t_grid("1,2.5") == [1.0, 2.5]
    with pytest.raises(cli.UsageError):
        cli.parse_t_grid("1,x")


def test_catalog_listing(capsys):
    code, out, _ = run(capsys, "catalog")
    cat = json.loads(out)
    assert code == 0
    assert "hopf" in [b["id"] for b in cat["bundles"]] and "hopf" in [m["id"] for m in cat["maps"]]
    assert "milnor(m,n)" in [b["id"] for b in cat["bundles"]]
    assert "hopf-principal-s7" in [a["id"] for a in cat["actions"]]
    assert "S(n)" in cat["spaces"]


def test_catalog_self_test(capsys):
    code, out, _ = run(capsys, "catalog", "--self-test", "--samples", "50")
    st = json.loads(out)["self_test"]
    assert code == 0 and all(v["passed"] for v in st.values())


def test_curvature_round(capsys):
    code, out, _ = run(capsys, "curvature", "--space", "S4", "--samples", "5", "--seed", "1")
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "point-id,plane-id,K,method,h1,h2" and len(lines) == 6
    assert all(abs(float(ln.split(",")[2]) - 1) <= 1e-3 for ln in lines[1:])


def test_curvature_deformed(capsys):
    code, out, _ = run(capsys, "curvature", "--action", "hopf-principal-s7", "--t-grid", "0,1", "--samples", "3")
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "t,point-id,plane-id,K,method,h1,h2" and len(lines) == 7
    # t = 0 rows are the round metric
    assert all(abs(float(ln.split(",")[3]) - 1) <= 1e-3 for ln in lines[1:4])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cheegerlab.cli", "verify", "--suite", "nope"], capture_output=True, text=True)
    assert r.returncode == 2
