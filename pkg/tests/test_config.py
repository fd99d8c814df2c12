from pathlib import Path

import pytest

from pharmonic import config as cfgmod
from pharmonic.errors import ConfigError

BASE = """
n = 3
p = 3
source = hyperbolic
target = hyperbolic
r_max = 30
alpha0 = 1.0
"""


def build(text):
    return cfgmod.build(cfgmod.parse_text(text))


def error_key(text):
    with pytest.raises(ConfigError) as info:
        build(text)
    return info.value.key, str(info.value)


def test_parse_comments_and_alias():
    raw = cfgmod.parse_text("# comment\nn = 3   # trailing\n\nrmax = 10\n")
    assert raw == {"n": "3", "r_max": "10"}


def test_parse_errors():
    with pytest.raises(ConfigError, match="duplicate key 'n'"):
        cfgmod.parse_text("n = 3\nn = 4\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        cfgmod.parse_text("n 3\n")


def test_build_defaults():
    cfg = build(BASE)
    assert cfg.tol == 1e-10 and cfg.jobs == 1 and cfg.out == Path("out") and cfg.start is None
    s = cfg.spec()
    assert s.n == 3 and s.p == 3.0 and s.f.kind.value == "hyperbolic"


@pytest.mark.parametrize(
    "edit,key",
    [
        (lambda t: t.replace("p = 3\n", ""), "p"),
        (lambda t: t.replace("r_max = 30", "r_max = -1"), "r_max"),
        (lambda t: t + "tol = 0.5\n", "tol"),
        (lambda t: t + "tol = 1e-16\n", "tol"),
        (lambda t: t + "colour = blue\n", "colour"),
        (lambda t: t + "sweep.p = \n", "sweep.p"),
        (lambda t: t + "sweep.q = 1, 2\n", "sweep.q"),
        (lambda t: t.replace("alpha0 = 1.0", ""), "alpha0"),
        (lambda t: t + "start.r = 1\nstart.alpha = 1\nstart.alpha_prime = 1\n", "alpha0"),
        (lambda t: t + "jobs = 0\n", "jobs"),
        (lambda t: t.replace("p = 3", "p = 1.5"), "p"),
        (lambda t: t.replace("n = 3", "n = 1"), "n"),
        (lambda t: t.replace("source = hyperbolic", "source = spherical"), "source"),
        (lambda t: t + "source.m = 2\n", "source.m"),
        (lambda t: t.replace("p = 3", "p = three"), "p"),
        (lambda t: t + "verify.lower = q\n", "verify.lower"),
    ],
)
def test_errors_name_the_key(edit, key):
    got, msg = error_key(edit(BASE))
    assert got == key and key in msg


def test_sweep_points_order():
    cfg = build(BASE.replace("alpha0 = 1.0", "") + "sweep.alpha0 = 2, 0.5, 1\nsweep.p = 3, 2.5\n")
    pts = cfg.points()
    assert [(pt.p, pt.alpha0) for pt in pts] == [(2.5, 0.5), (2.5, 1.0), (2.5, 2.0), (3.0, 0.5), (3.0, 1.0), (3.0, 2.0)]
    assert all(not pt.sweep for pt in pts)


def test_warp_param_sweep_columns():
    text = BASE.replace("hyperbolic\ntarget", "power\nsource.m = 2\ntarget").replace("target = hyperbolic", "target = euclidean")
    text = text.replace("alpha0 = 1.0", "start.r = 1\nstart.alpha = 0.5\nstart.alpha_prime = 0.5") + "sweep.source.m = 1.5, 2\n"
    cfg = build(text)
    assert cfg.warp_param_columns() == ["source.m"]
    assert [pt.warp_param_values() for pt in cfg.points()] == [[1.5], [2.0]]


def test_verify_section():
    cfg = build(BASE + "verify.cone = false\nverify.window = 1, 10\nverify.a = 5\nverify.lower = min\n")
    assert not cfg.check_enabled("cone") and cfg.check_enabled("barrier")
    assert cfg.verify_params == {"window": (1.0, 10.0), "a": 5.0, "lower": "min"}


def test_stored_verify_rejects_spec_keys(tmp_path):
    sv = cfgmod.build_stored({"profile": "run1", "verify.monotonicity": "true"}, tmp_path)
    assert sv.profile == tmp_path / "run1"
    with pytest.raises(ConfigError) as info:
        cfgmod.build_stored({"profile": "run1", "n": "3"}, tmp_path)
    assert info.value.key == "n"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        cfgmod.load(tmp_path / "nope.cfg")
    assert info.value.key == "config"
