import json

import numpy as np
import pytest

from segbumps import cli
from segbumps import verify as vf


def _run(*argv):
    return cli.main(list(argv))


def test_groundstate_artifacts(tmp_path):
    out = tmp_path / "gs"
    assert _run("groundstate", "--out", str(out)) == 0
    header = json.loads((out / "groundstate.json").read_text())
    assert header["center_value"] == pytest.approx(2.2062008646511053,
                                                   rel=1e-6)
    assert header["max_residual"] < 1e-10
    data = np.loadtxt(out / "groundstate.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 2 and data[0, 1] == header["center_value"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "groundstate"
    assert str(out / "groundstate.csv") in manifest["artifacts"]
    assert manifest["configuration"]["ell"] == 8


def test_certify_report(tmp_path):
    out = tmp_path / "cert"
    assert _run("certify", "--out", str(out)) == 0
    report = json.loads((out / "certify.json").read_text())
    assert report["conditions"]["axis_annihilation"]["pass"]
    assert "smoothing" in report


def test_construct_and_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[grid]\nh = 0.3\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert _run("construct", "--ell", "8", "--config", str(cfg),
                    "--out", str(out)) == 0
    assert (out1 / "solution.csv").read_bytes() == \
        (out2 / "solution.csv").read_bytes()
    summary = json.loads((out1 / "construct.json").read_text())
    assert summary["converged"]
    assert summary["configuration"]["ell"] == 8
    log = json.loads((out1 / "fixed_point.json").read_text())
    assert log[-1]["d"] < 1e-10
    data = np.loadtxt(out1 / "solution.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 4
    assert np.min(data[:, 2:]) > -1e-10


def test_energy_scan_artifacts(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[energy]\nh = 0.3\nn_line = 6\nn_points = 2\n")
    out = tmp_path / "scan"
    assert _run("energy-scan", "--ell", "8", "--config", str(cfg),
                "--out", str(out)) == 0
    report = json.loads((out / "expansion.json").read_text())
    assert report["fit"]["ell"] == 8
    assert report["analytic"]["A"] == pytest.approx(17.55, rel=1e-2)
    samples = np.loadtxt(out / "samples.csv", delimiter=",", skiprows=1)
    assert samples.shape == (12, 3)
    surface = np.loadtxt(out / "surface.csv", delimiter=",", skiprows=1)
    assert surface.shape[1] == 4


def test_deadcore_artifacts(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[grid]\nh = 0.3\n")
    out = tmp_path / "dc"
    assert _run("deadcore", "--ell", "12", "--config", str(cfg),
                "--out", str(out)) == 0
    report = json.loads((out / "deadcore.json").read_text())
    assert report["c_tau"] == pytest.approx(7.276e-12, rel=0.05)
    assert report["core_radius"] >= report["a_target"]
    assert report["supersolution_certificate"]
    radial = np.loadtxt(out / "radial_deadcore.csv", delimiter=",",
                        skiprows=1)
    assert radial[-1, 1] == pytest.approx(report["c_tau"], rel=1e-10)


def test_config_error_exit_status(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[model]\nbeta = 1.0\n")
    assert _run("construct", "--config", str(cfg),
                "--out", str(tmp_path / "x")) == 2
    assert "beta" in capsys.readouterr().err


def test_verify_all_table_and_exit(tmp_path, monkeypatch):
    results = [vf.CriterionResult(1, "alpha", True, "fine"),
               vf.CriterionResult(2, "beta", False, "off by two")]
    monkeypatch.setattr(vf, "run_all", lambda quick: results)
    out = tmp_path / "acc"
    assert _run("verify-all", "--quick", "--out", str(out)) == 1
    table = (out / "acceptance.txt").read_text()
    assert "1  PASS  alpha" in table
    assert "2  FAIL  beta" in table
    assert "1/2 criteria passed" in table
    rows = json.loads((out / "acceptance.json").read_text())
    assert [r["passed"] for r in rows] == [True, False]


def test_format_table_all_pass():
    rows = [vf.CriterionResult(i, f"c{i}", True, "") for i in (1, 2)]
    assert "2/2 criteria passed" in vf.format_table(rows)
