import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pharmonic.warp import (
    WarpKind,
    check_exp_growth,
    check_log_derivative_bound,
    make_profile,
    parse_warp,
    richardson_c2,
    validate,
)

SAMPLES = np.geomspace(1e-8, 1e2, 41)


def test_euclidean_values():
    w = make_profile("euclidean")
    assert w(1.0) == 1.0 and w.deriv(1.0) == 1.0
    assert w.taylor_c2 == 0.0 and w.startup_admissible


def test_hyperbolic_values():
    w = make_profile(WarpKind.HYPERBOLIC)
    assert w(1.0) == pytest.approx(math.sinh(1.0), rel=1e-15)
    assert w.deriv(1.0) == pytest.approx(math.cosh(1.0), rel=1e-15)
    assert w.taylor_c2 == 0.0


def test_power_not_startup_admissible():
    w = make_profile("power", m=2)
    assert not w.startup_admissible
    assert math.isnan(w.taylor_c2)
    assert w(3.0) == 9.0 and w.deriv(3.0) == 6.0


def test_power_one_is_admissible():
    w = make_profile("power", m=1)
    assert w.startup_admissible and w.taylor_c2 == 0.0


def test_exp_growth_profile():
    w = make_profile("exp", a=0.5)
    assert w(2.0) == pytest.approx(math.sinh(1.0) / 0.5, rel=1e-15)
    assert w.deriv(0.0) == 1.0


@pytest.mark.parametrize("kw,msg", [({"m": 0.5}, "m"), ({"q": 1}, "q")])
def test_power_rejects_bad_params(kw, msg):
    with pytest.raises(ValueError, match=msg):
        make_profile("power", **kw)


def test_exp_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        make_profile("exp", a=0.0)


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown warp kind"):
        make_profile("spherical")


def test_parse_warp_round_trip():
    w = parse_warp("power:m=2.5")
    assert w.kind is WarpKind.POWER and w.param("m") == 2.5
    assert parse_warp(w.label).params == w.params
    assert parse_warp("hyperbolic").kind is WarpKind.HYPERBOLIC


@pytest.mark.parametrize("spec", ["euclidean", "hyperbolic", "exp:a=2", "perturbed:c2=1", "perturbed:c2=-0.5", "power:m=2"])
def test_validate_builtins(spec):
    rep = validate(parse_warp(spec), SAMPLES)
    assert rep.passed, rep.checks


def test_validate_euclidean_derivative_error_tiny():
    # finite-difference oracle for f'
    rep = validate(make_profile("euclidean"), SAMPLES)
    assert rep["derivative"].worst_error < 1e-10


def test_perturbed_taylor_coefficient_by_richardson():
    for c2 in (1.0, -0.5, 0.25):
        assert richardson_c2(make_profile("perturbed", c2=c2)) == pytest.approx(c2, abs=1e-8)


def test_perturbed_is_linear_beyond_blend():
    w = make_profile("perturbed", c2=1.0)
    r = np.array([2.0, 5.0, 50.0])
    assert np.array_equal(w(r), r) and np.all(w.deriv(r) == 1.0)


def test_perturbed_blend_is_c1():
    w = make_profile("perturbed", c2=1.0)
    for knot in (1.0, 2.0):
        h = 1e-7
        assert abs(w.deriv(knot + h) - w.deriv(knot - h)) < 1e-5


def test_validate_rejects_bad_samples():
    with pytest.raises(ValueError):
        validate(make_profile("euclidean"), [0.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1e-3, 30.0))
def test_exp_profile_derivative_consistent(a, r):
    w = make_profile("exp", a=a)
    h = 1e-6 * max(r, 1.0)
    fd = (w(r + h) - w(r - h)) / (2 * h)
    assert fd == pytest.approx(w.deriv(r), rel=1e-6)


def test_exp_growth_condition_for_sinh():
    # e^r/C <= sinh r, cosh r <= C e^r on r >= 1 holds with C = 3, not with C = 2
    r = np.linspace(1.0, 50.0, 500)
    w = make_profile("hyperbolic")
    assert check_exp_growth(w, 1.0, 3.0, r)[0]
    assert not check_exp_growth(w, 1.0, 2.0, r)[0]


def test_log_derivative_bound():
    y = np.geomspace(1.0, 100.0, 300)
    assert check_log_derivative_bound(make_profile("hyperbolic"), 1.0 / math.tanh(1.0), y)[0]
    assert not check_log_derivative_bound(make_profile("hyperbolic"), 1.0, y)[0]
