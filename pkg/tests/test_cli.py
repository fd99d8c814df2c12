import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pharmonic.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, main
from pharmonic.serialize import read_profile_csv


def write_cfg(path, text):
    path.write_text(text)
    return path


HYP = "n = 3\np = 3\nsource = hyperbolic\ntarget = hyperbolic\nr_max = 30\n"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_euclidean_linear(tmp_path, capsys):
    out = tmp_path / "lin"
    code = main(["solve", "--n", "3", "--p", "3", "--source", "euclidean", "--target", "euclidean",
                 "--alpha0", "0.5", "--rmax", "20", "--out", str(out)])
    assert code == EXIT_OK
    r, a, ap, th = read_profile_csv(out / "profile.csv")
    assert np.max(np.abs(a - 0.5 * r)) < 1e-10
    assert (out / "profile.csv").read_text().startswith("r,alpha,alpha_prime,theta\n")
    report = json.loads((out / "report.json").read_text())
    assert report["regime"] == "LinearGrowth" and report["prediction"]["consistent"]
    assert "ReachedRMax" in capsys.readouterr().out


def test_solve_hyperbolic_identity(tmp_path):
    cfg = write_cfg(tmp_path / "id.cfg", HYP + "alpha0 = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "id")]) == EXIT_OK
    sol = json.loads((tmp_path / "id" / "solution.json").read_text())
    rep = json.loads((tmp_path / "id" / "report.json").read_text())
    assert rep["regime"] == "AsymptoticIdentity"
    assert sol["residual_summary"]["fd_residual_max"] < 1e-6
    assert sol["alpha_pp0"] == 0.0 and sol["termination"]["kind"] == "ReachedRMax"


def test_solve_blowup_is_not_a_failure(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "b.cfg", HYP + "alpha0 = 2\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert "stopped early" in capsys.readouterr().out


def test_flags_override_file(tmp_path):
    cfg = write_cfg(tmp_path / "o.cfg", HYP + "alpha0 = 2\n")
    assert main(["solve", "--config", str(cfg), "--alpha0", "0.5", "--out", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "report.json").read_text())["regime"] == "Bounded"


def test_missing_p_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "bad.cfg", HYP.replace("p = 3\n", "") + "alpha0 = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "'p'" in capsys.readouterr().err


def test_empty_sweep_axis_is_config_error(tmp_path):
    cfg = write_cfg(tmp_path / "e.cfg", HYP + "sweep.alpha0 =\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_hyperbolic_sweep_rows_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path / "s.cfg", HYP + "sweep.alpha0 = 2, 0.5, 1\n")
    for jobs in ("1", "3"):
        assert main(["sweep", "--config", str(cfg), "--jobs", jobs, "--out", str(tmp_path / f"j{jobs}")]) == EXIT_OK
    got = rows(tmp_path / "j1" / "phase.csv")
    assert [r["alpha0"] for r in got] == ["0.5", "1", "2"]
    assert [r["regime"] for r in got] == ["Bounded", "AsymptoticIdentity", "SuperIdentity"]
    assert list(got[0]) == ["n", "p", "alpha0", "regime", "exponent", "termination", "note"]
    for name in ("phase.csv", "points/0000/profile.csv", "points/0002/profile.csv", "points/0001/report.json"):
        assert (tmp_path / "j1" / name).read_bytes() == (tmp_path / "j3" / name).read_bytes()


def test_power_sweep_bounded_flag(tmp_path):
    text = ("n = 3\np = 4\nsource = power\nsource.m = 1\ntarget = euclidean\nr_max = 200\n"
            "start.r = 1\nstart.alpha = 0.5\nstart.alpha_prime = 0.5\nsweep.source.m = 1, 2\n")
    cfg = write_cfg(tmp_path / "pw.cfg", text)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "pw")]) == EXIT_OK
    got = rows(tmp_path / "pw" / "phase.csv")
    assert [r["source.m"] for r in got] == ["1", "2"]
    n, q = 3, 2.0
    for r in got:
        delta = float(r["source.m"])
        assert (r["regime"] == "Bounded") == ((n - 1) * delta > 2 * q - 1)
        assert r["regime"] != "Undetermined"


def test_sweep_records_point_failures(tmp_path):
    # alpha0 needs the startup solver, which a power source cannot use; the row records why
    text = "n = 3\np = 3\nsource = power\nsource.m = 2\ntarget = euclidean\nr_max = 10\nsweep.alpha0 = 1\n"
    cfg = write_cfg(tmp_path / "f.cfg", text)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "f")]) == EXIT_OK
    row = rows(tmp_path / "f" / "phase.csv")[0]
    assert row["regime"] == "Undetermined" and "StartupNotAdmissible" in row["note"]


def _stored_run(tmp_path):
    run = tmp_path / "run"
    assert main(["solve", "--n", "3", "--p", "4", "--source", "euclidean", "--target", "euclidean",
                 "--alpha0", "1", "--rmax", "20", "--out", str(run)]) == EXIT_OK
    return run


def test_verify_stored_profile(tmp_path):
    run = _stored_run(tmp_path)
    cfg = write_cfg(tmp_path / "v.cfg", "profile = run\nverify.cone = false\nverify.cone_separation = false\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v")]) == EXIT_OK
    doc = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert doc["passed"]


def test_verify_corrupted_profile_reports_location(tmp_path, capsys):
    run = _stored_run(tmp_path)
    lines = (run / "profile.csv").read_text().splitlines()
    cells = lines[40].split(",")
    cells[2] = "-0.25"
    lines[40] = ",".join(cells)
    (run / "profile.csv").write_text("\n".join(lines) + "\n")
    cfg = write_cfg(tmp_path / "v.cfg", "profile = run\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v")]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert f"FAIL run: monotonicity first violation at r = {float(cells[0]):.6g}" in out.replace(str(run), "run")


def test_verify_cone_on_hyperbolic_is_skipped(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.cfg", HYP + "alpha0 = 0.5\nverify.cone_c = 0.5\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "c")]) == EXIT_OK
    checks = json.loads((tmp_path / "c" / "verify.json").read_text())["checks"]
    cone = [c for c in checks if c["check"] == "cone_bound"][0]
    assert cone["skipped"] and cone["note"]
    assert "SKIP inline: cone_bound" in capsys.readouterr().out


def test_verify_missing_profile(tmp_path):
    cfg = write_cfg(tmp_path / "m.cfg", "profile = nowhere\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "m")]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pharmonic", "solve", "--n", "2", "--p", "3", "--source", "euclidean",
                           "--target", "euclidean", "--alpha0", "1", "--rmax", "5", "--out", str(tmp_path / "m")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "profile.csv").exists()
    proc = subprocess.run([sys.executable, "-m", "pharmonic", "solve", "--n", "2"], capture_output=True, text=True)
    assert proc.returncode == 2
