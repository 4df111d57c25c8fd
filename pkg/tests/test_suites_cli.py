import csv
import json

import numpy as np
import pytest

from mfb.errors import ValidationError
from mfb.harness.cli import main
from mfb.harness.scenarios import builtin
from mfb.harness.suites import CALIBRATION, applicable, run_suite


def strip_time(text):
    data = json.loads(text)
    data["metadata"].pop("timestamp", None)
    return json.dumps(data, sort_keys=True)


def test_curvature_suite_deterministic_and_referenced():
    a = run_suite(builtin("minkowski5"), "curvature", seed=3)
    b = run_suite(builtin("minkowski5"), "curvature", seed=3)
    assert a.passed
    assert strip_time(a.to_json()) == strip_time(b.to_json())
    assert all(e.reference for e in a.entries)
    meta = a.metadata
    assert meta["seed"] == 3 and meta["calibration"] == CALIBRATION and "version" in meta and "timestamp" in meta


def test_suite_errors():
    sc = builtin("round_s3")
    with pytest.raises(ValidationError):
        run_suite(sc, "nonsense")
    assert not applicable(sc, "kaluza")
    with pytest.raises(ValidationError):
        run_suite(sc, "kaluza")


def test_failures_are_recorded_not_raised():
    rep = run_suite(builtin("round_s3"), "curvature", {"calibration": 0.0, "riemann_symmetry": 0.0})
    assert not rep.passed
    assert any(e.name.startswith("Ric") for e in rep.failures())


def test_all_runs_every_applicable_suite():
    rep = run_suite(builtin("round_s2"), "all")
    assert rep.metadata["suites"] == ["curvature", "bianchi", "atlas"]
    assert all(":" in e.name for e in rep.entries)
    assert rep.passed, rep.summary()


def test_cli_verify_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "minkowski5", "--suite", "curvature", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["passed"] and data["metadata"]["seed"] == 0
    assert main(["verify", "round_s3", "--suite", "curvature", "--tol", "calibration=0"]) == 1
    assert main(["verify", "round_s3", "--tol", "bogus=1"]) == 2
    assert main(["verify", "round_s3", "--tol", "calibration"]) == 2
    assert main(["verify", "no_such_file.json"]) == 2
    with pytest.raises(SystemExit) as err:
        main(["verify", "minkowski5", "--suite", "nope"])
    assert err.value.code == 2


def test_cli_integrate_spectrum_average(tmp_path, capsys):
    path = tmp_path / "t.csv"
    code = main(["integrate", "minkowski5", "--start", "0,0,0,0,0", "--velocity", "1,0.5,0,0,0",
                 "--tend", "1", "--step", "0.1", "--out", str(path)])
    assert code == 0
    rows = list(csv.reader(open(path)))
    assert rows[0][:3] == ["t", "chart", "t"] and len(rows) == 12
    assert abs(float(rows[-1][3]) - 0.5) < 1e-12
    capsys.readouterr()
    assert main(["spectrum", "warped_kk", "--fiber", "s1", "--at", "0,1.5707963267948966,0,0,0,0",
                 "--resolution", "64", "--levels", "2"]) == 0
    spec = json.loads(capsys.readouterr().out)
    assert spec["multiplicities"] == [1, 2] and abs(spec["eigenvalues"][1] - 1) < 1e-2
    assert main(["average", "u_periodic", "--at", "0,0.2,0,0,1", "--nodes", "64"]) == 0
    avg = json.loads(capsys.readouterr().out)
    assert abs(avg["averaged_metric"][1][1] - 1) < 1e-9
    assert main(["spectrum", "warped_kk", "--fiber", "s1", "--at", "0,0"]) == 2
    assert main(["integrate", "minkowski5", "--start", "0,0", "--tend", "1", "--step", "0.1", "--out", str(path)]) == 2


def test_cli_error_exit_codes(capsys):
    assert main(["spectrum", "round_s3", "--fiber", "s1", "--at", "0,0,0"]) == 2
    assert main(["spectrum", "warped_kk", "--fiber", "s3", "--at", "0,0,0,0,0,0"]) == 2
    # the only circle of minkowski5 is timelike, so its Laplacian is refused
    assert main(["spectrum", "minkowski5", "--fiber", "s1", "--at", "0,0,0,0,0"]) == 1
    assert "FiberMetricNotPositive" in capsys.readouterr().err
