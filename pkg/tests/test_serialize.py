import json

import numpy as np
import pytest

from pharmonic import analysis as an
from pharmonic.integrate import solve
from pharmonic.ode import ProblemSpec
from pharmonic.serialize import (
    fmt,
    load_profile,
    read_profile_csv,
    solution_document,
    spec_from_dict,
    write_json,
    write_profile_csv,
)
from pharmonic.warp import parse_warp


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    s = ProblemSpec(3, 3, parse_warp("hyperbolic"), parse_warp("exp:a=0.5"))
    prof = solve(s, 1.5, 20.0)
    d = tmp_path_factory.mktemp("run")
    write_profile_csv(d / "profile.csv", prof)
    write_json(d / "solution.json", solution_document(prof, 1.5))
    return prof, d


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, 1e-300, 123456789.123456789, -2.5e17):
        assert float(fmt(x)) == x


def test_csv_round_trip_is_exact(run_dir):
    prof, d = run_dir
    r, a, ap, th = read_profile_csv(d / "profile.csv")
    for got, want in ((r, prof.r), (a, prof.alpha), (ap, prof.alpha_prime), (th, prof.theta)):
        assert np.array_equal(got, want)


def test_csv_header_checked(tmp_path):
    (tmp_path / "bad.csv").write_text("r,a\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_profile_csv(tmp_path / "bad.csv")


def test_solution_document_contents(run_dir):
    prof, d = run_dir
    doc = json.loads((d / "solution.json").read_text())
    assert doc["spec"]["g"] == {"kind": "exp", "params": {"a": 0.5}}
    assert doc["alpha0"] == 1.5 and doc["trivial"] is False
    assert doc["termination"]["kind"] == prof.termination.kind.value
    assert doc["alpha_pp0"] == pytest.approx(prof.startup.alpha_pp0)
    assert doc["residual_summary"]["fd_residual_max"] < 1e-3
    assert spec_from_dict(doc["spec"]) == prof.spec


def test_reload_gives_identical_report(run_dir):
    prof, d = run_dir
    again = load_profile(d)
    assert again.termination == prof.termination and again.handoff_r == prof.handoff_r
    assert an.classify_regime(again).to_dict() == an.classify_regime(prof).to_dict()


def test_json_maps_nonfinite_to_null(tmp_path):
    write_json(tmp_path / "x.json", {"a": float("inf"), "b": [np.float64("nan"), 1.0], "c": np.int64(3)})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": None, "b": [None, 1.0], "c": 3}


def test_load_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_profile(tmp_path)
