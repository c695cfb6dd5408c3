"""Command-line interface: exit codes, report shape, determinism."""

import hashlib
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from wiretapnet.cli import main

from conftest import FIXTURES

NET = str(FIXTURES / "butterfly.json")
SINGLE = str(FIXTURES / "single_edge.json")
PARALLEL = str(FIXTURES / "parallel_pair.json")


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_outer_butterfly(capsys):
    code, out, err = run_cli(capsys, "outer", "--network", NET)
    assert code == 0
    report = json.loads(out)
    assert report["schema"] == "wiretapnet/outer/v1"
    assert report["status"] == "optimal"
    assert report["value"] == "1"
    assert report["mode"] == "zero_error"
    assert report["weights"] == {"s": "1"}
    manifest = report["manifest"]
    assert manifest["command"] == "outer"
    want = hashlib.sha256(open(NET, "rb").read()).hexdigest()
    assert manifest["inputs"]["network"]["sha256"] == want
    # Timing goes to stderr only; the report bytes must not carry it.
    assert "wall_time_s=" in err
    assert "wall_time" not in out


def test_outer_witness_and_weights(capsys):
    code, out, _ = run_cli(
        capsys, "outer", "--network", NET, "--weights", "2", "--witness")
    assert code == 0
    report = json.loads(out)
    assert report["value"] == "2"
    assert report["witness"]["{m:s}"] == "1"


def test_outer_deterministic_bytes(capsys, tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["outer", "--network", NET, "--out", str(a)]) == 0
    assert main(["outer", "--network", NET, "--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()

    # --jobs is accepted, recorded, and changes nothing about the result.
    c = tmp_path / "c.json"
    assert main(["outer", "--network", NET, "--jobs", "2", "--out", str(c)]) == 0
    capsys.readouterr()
    doc_a, doc_c = json.loads(a.read_text()), json.loads(c.read_text())
    assert doc_c["manifest"]["params"]["jobs"] == 2
    assert doc_a["value"] == doc_c["value"]


def test_outer_validation_errors(capsys):
    code, _, err = run_cli(capsys, "outer", "--network", NET, "--weights", "1,2")
    assert code == 2
    assert "--weights lists 2 values for 1 sources" in err

    code, _, err = run_cli(capsys, "outer", "--network", NET, "--relax", "0,1/4")
    assert code == 2
    assert "asymptotic" in err

    code, _, err = run_cli(capsys, "outer", "--network", str(FIXTURES / "none.json"))
    assert code == 2


def test_outer_asymptotic_relax(capsys):
    code, out, _ = run_cli(
        capsys, "outer", "--network", SINGLE, "--mode", "asymptotic",
        "--relax", "0,1/4")
    assert code == 0
    report = json.loads(out)
    assert report["value"] == "1/4"
    assert report["relax"] == {"decode": "0", "secrecy": "1/4"}


def test_outer_size_cap_exit(capsys, monkeypatch):
    monkeypatch.setenv("WIRETAP_MAX_N", "4")
    code, _, err = run_cli(capsys, "outer", "--network", NET)
    assert code == 3
    assert "size cap" in err


def test_check_code_sandwich(capsys, tmp_path):
    cached = tmp_path / "outer.json"
    assert main(["outer", "--network", NET, "--out", str(cached)]) == 0
    capsys.readouterr()
    code, out, _ = run_cli(
        capsys, "check-code", "--network", NET,
        "--code", str(FIXTURES / "butterfly_code.json"),
        "--scale", "1/2", "--outer", str(cached))
    assert code == 0
    report = json.loads(out)
    cert = report["certificate"]
    assert cert["ok"] is True
    assert cert["rate_point"] == {"s": "1"}
    sandwich = report["sandwich"]
    assert sandwich == {
        "outer_value": "1", "inner_value": "1", "gap": "0", "certified": True}


def test_check_code_reports_violations(capsys):
    code, out, _ = run_cli(
        capsys, "check-code", "--network", SINGLE,
        "--code", str(FIXTURES / "nokey_code.json"))
    assert code == 0  # a failed certificate is still a computed result
    report = json.loads(out)
    cert = report["certificate"]
    assert cert["ok"] is False
    tags = [v["tag"] for v in cert["memberships"]["family6"]["violations"]]
    assert tags == ["secrecy:e1"]
    assert report["evaluation"]["leakage"]["e1"] == "1"
    assert report["sandwich"] is None


def test_check_code_wrong_network(capsys):
    code, _, err = run_cli(
        capsys, "check-code", "--network", PARALLEL,
        "--code", str(FIXTURES / "nokey_code.json"))
    assert code == 2
    assert "missing edge" in err


def test_simulate_zero_error(capsys):
    code, out, _ = run_cli(
        capsys, "simulate", "--rv", str(FIXTURES / "otp_rv.json"),
        "--nt", "4", "--eps", "1/10")
    assert code == 0
    report = json.loads(out)
    body = report["report"]
    assert body["n"] == 8
    assert body["delta"] == "13/15"
    assert body["errors"] == {"t:s": "0"}
    assert body["p_atypical"]["e2"] == "1/3"
    leak = {e["wiretap"]: e for e in body["leakage"]}["e2"]
    assert leak["total_bits"]["approx"] is True
    assert leak["total_bits"]["value"] == pytest.approx(0.3899750004807707)
    assert leak["within_bound"] is True


def test_simulate_asymptotic(capsys):
    code, out, _ = run_cli(
        capsys, "simulate", "--rv", str(FIXTURES / "otp_rv.json"),
        "--mode", "asymptotic", "--nt", "4", "--eps", "1/2")
    assert code == 0
    body = json.loads(out)["report"]
    assert body["n"] == 20
    assert body["errors"] == {"t:s": "79/98"}
    assert body["sentinel_rate"] == {"e1": "43/49", "e2": "43/49"}
    assert all(c["ok"] and c["kind"] == "alphabet" for c in body["alphabet_checks"])


def test_simulate_asymptotic_rejects_full_eps(capsys):
    # The default --eps 1 equals the unit edge capacity; the fixed-length
    # slack formula needs eps < c_e.
    code, _, err = run_cli(
        capsys, "simulate", "--rv", str(FIXTURES / "otp_rv.json"),
        "--mode", "asymptotic", "--nt", "4")
    assert code == 2
    assert "eps < c_e" in err


def test_simulate_trials_need_seed(capsys):
    code, _, err = run_cli(
        capsys, "simulate", "--rv", str(FIXTURES / "otp_rv.json"),
        "--nt", "4", "--eps", "1/10", "--trials", "50")
    assert code == 2
    assert "--trials needs --seed" in err


def test_simulate_montecarlo_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["simulate", "--rv", str(FIXTURES / "otp_rv.json"), "--nt", "4",
            "--eps", "1/10", "--trials", "64", "--seed", "9"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["manifest"]["seeds"] == {"seed": 9}


def test_amplify_exhaustive(capsys):
    code, out, _ = run_cli(
        capsys, "amplify", "--weak", str(FIXTURES / "weak_toy.json"),
        "--L", "4", "--delta1", "1/8", "--delta2", "1/8",
        "--eps2", "1/4", "--lam", "1", "--seed", "1")
    assert code == 0
    report = json.loads(out)
    inst = report["instance"]
    plan = inst["plans"]["s"]
    assert (plan["n3"], plan["n2"]) == (3, 10)
    assert plan["eps3"] == "33/80"
    ev = report["evaluation"]
    assert ev["leakage"]["e"]["value"] == pytest.approx(0.0028196011057364245)
    assert ev["dtv"]["s"] == "0"
    assert ev["event_b_bound_holds"] is True


def test_amplify_sizing_failure(capsys):
    code, _, err = run_cli(
        capsys, "amplify", "--weak", str(FIXTURES / "weak_toy.json"),
        "--L", "1", "--delta1", "1/8", "--delta2", "1/8",
        "--eps2", "1/4", "--lam", "1")
    assert code == 2
    assert "n3 = floor((1 - eps3 - delta2) * L*n*r)" in err


def test_amplify_montecarlo_needs_trials_and_seed(capsys):
    base = ["amplify", "--weak", str(FIXTURES / "weak_toy.json"),
            "--L", "4", "--delta1", "1/8", "--delta2", "1/8",
            "--eps2", "1/4", "--lam", "1", "--mode", "montecarlo"]
    code, _, err = run_cli(capsys, *base)
    assert code == 2
    code, _, err = run_cli(capsys, *base, "--trials", "100")
    assert code == 2


def test_amplify_seed_average(capsys):
    code, out, _ = run_cli(
        capsys, "amplify", "--weak", str(FIXTURES / "weak_otp.json"),
        "--L", "1", "--delta1", "1/8", "--delta2", "1/16",
        "--eps2", "1/8", "--lam", "1/2", "--seed", "0",
        "--seed-mode", "average")
    assert code == 0
    report = json.loads(out)
    assert report["evaluation"]["seed_mode"] == "average"


def test_version_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "wiretapnet.cli", "--version"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.1.0" in proc.stdout
