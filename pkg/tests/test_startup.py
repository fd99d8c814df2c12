import math

import numpy as np
import pytest
import sympy as sp

from pharmonic.errors import NonContractionError, StartupNotAdmissibleError
from pharmonic.ode import ProblemSpec
from pharmonic.startup import alt_initial_curvature, initial_curvature, phi, picard_solve
from pharmonic.warp import make_profile, parse_warp


def spec(n, p, f="euclidean", g="euclidean"):
    return ProblemSpec(n, p, parse_warp(f), parse_warp(g))


def warp_with_c2(c2):
    return make_profile("euclidean") if c2 == 0 else make_profile("perturbed", c2=c2)


def taylor_alpha_pp0(n, p, f1, g1, a0):
    """alpha''(0) from a power-series solution of the divergence-form equation.

    Substitutes alpha = a0 r + c r^2 into (f^{n-1} Theta alpha')' = (n-1) f^{n-3} Theta g g'
    with f = r + f1 r^2, g = y + g1 y^2 and solves the lowest nontrivial order for c.
    """
    r, c = sp.symbols("r c")
    q = sp.Rational(p) / 2
    f = r + f1 * r**2
    al = a0 * r + c * r**2
    g = al + g1 * al**2
    dg = 1 + 2 * g1 * al
    ap = sp.diff(al, r)
    theta = ap**2 + (n - 1) * g**2 / f**2
    Th = theta ** (q - 1)
    lhs = sp.diff(f ** (n - 1) * Th * ap, r) - (n - 1) * f ** (n - 3) * Th * g * dg
    ser = sp.series(lhs, r, 0, n).removeO()
    coeff = sp.expand(ser).coeff(r, n - 1)
    sol = sp.solve(coeff, c)
    assert len(sol) == 1
    return float(2 * sol[0])


# phi ----------------------------------------------------------------------

def test_phi_flat_case_vanishes():
    s = spec(3, 4)
    for z in (0.3, 1.0, 2.0):
        assert phi(s, 0.0, 0.0, z) == 0.0


def test_phi_limit_worked_value():
    # limit at s = 0 for f1 = 1, g1 = 0, n = 3, p = 4, v = 0, z = 1
    s = spec(3, 4, "perturbed:c2=1")
    assert phi(s, 0.0, 0.0, 1.0) == pytest.approx(-7.0 / 5.0, rel=1e-15)
    # small-s evaluation of the full formula
    assert phi(s, 1e-6, 0.0, 1.0) == pytest.approx(-7.0 / 5.0, abs=1e-5)


@pytest.mark.xfail(strict=True, reason="3/5 follows from taking +f1 as the limit of (1/s - f'/f); "
                                       "that limit is -f1, giving -7/5 (checked against small s)")
def test_phi_limit_plus_f1_variant():
    s = spec(3, 4, "perturbed:c2=1")
    assert phi(s, 0.0, 0.0, 1.0) == pytest.approx(3.0 / 5.0, rel=1e-12)


WARPS = ["euclidean", "hyperbolic", "perturbed:c2=1", "perturbed:c2=-0.5", "exp:a=2"]


@pytest.mark.parametrize("fw,gw", [(f, g) for f in WARPS for g in WARPS[:3]])
@pytest.mark.parametrize("n,p", [(2, 4), (3, 4), (3, 2.5), (5, 3)])
def test_phi_continuity_at_origin(fw, gw, n, p):
    # at v = 0 the correction is O(s); for v != 0 it is O(sqrt(s)), tested below
    s = spec(n, p, fw, gw)
    for z in (0.25, 0.5, 1.0, 1.5, 2.0):
        assert abs(phi(s, 1e-8, 0.0, z) - phi(s, 0.0, 0.0, z)) < 1e-4


@pytest.mark.parametrize("fw,gw", [("perturbed:c2=1", "euclidean"), ("perturbed:c2=-0.5", "perturbed:c2=1"),
                                   ("euclidean", "perturbed:c2=1"), ("hyperbolic", "hyperbolic")])
def test_phi_converges_like_sqrt_s(fw, gw):
    # with v != 0 the leading correction is O(sqrt(s)); shrinking s by 100 shrinks it by 10
    s = spec(3, 4, fw, gw)
    for v in (-1.0, -0.5, 0.5, 1.0):
        d1 = abs(phi(s, 1e-6, v, 1.0) - phi(s, 0.0, v, 1.0))
        d2 = abs(phi(s, 1e-8, v, 1.0) - phi(s, 0.0, v, 1.0))
        assert 8.0 < d1 / d2 < 12.0


def test_phi_vectorized_and_domain():
    s = spec(3, 3, "hyperbolic", "hyperbolic")
    out = phi(s, np.array([0.0, 1e-3, 1e-2]), np.zeros(3), np.ones(3))
    assert out.shape == (3,)
    with pytest.raises(ValueError):
        phi(s, 0.1, 0.0, 0.0)


# initial curvature --------------------------------------------------------

def test_initial_curvature_flat_warps():
    for w in ("euclidean", "hyperbolic"):
        for n, p, a0 in [(2, 3, 0.5), (3, 4, 1.0), (5, 2.5, 2.0)]:
            assert initial_curvature(spec(n, p, w, w), a0) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("n,p", [(2, 4), (3, 4), (3, 3), (4, 2), (5, 6)])
@pytest.mark.parametrize("f1,g1,a0", [(1, 0, 1), (0, 1, 0.5), (-0.5, 1, 1), (1, 1, 0.5), (0.5, -0.25, 2)])
def test_initial_curvature_matches_series_oracle(n, p, f1, g1, a0):
    s = ProblemSpec(n, p, warp_with_c2(f1), warp_with_c2(g1))
    phi0, zp0, app0 = initial_curvature(s, a0)
    assert app0 == pytest.approx(taylor_alpha_pp0(n, p, sp.Rational(f1), sp.Rational(g1), sp.Rational(a0)), abs=1e-13)
    assert zp0 == pytest.approx((n - 1) / (n + 1) * phi0, rel=1e-15)
    assert app0 == 2 * zp0


def test_initial_curvature_vanishes_on_identity_with_curvature():
    # f = g with f1 = g1 != 0 and alpha0 = 1 is the identity map
    s = spec(3, 4, "perturbed:c2=1", "perturbed:c2=1")
    assert initial_curvature(s, 1.0)[2] == 0.0
    assert alt_initial_curvature(s, 1.0)[2] != 0.0


@pytest.mark.xfail(strict=True, reason="alternative closed form disagrees with the series solution")
def test_alt_initial_curvature_worked_case():
    s = spec(3, 4, "perturbed:c2=1")
    assert alt_initial_curvature(s, 1.0) == pytest.approx((0.2, 0.1, 0.2))
    assert initial_curvature(s, 1.0)[2] == pytest.approx(0.2, rel=1e-4)


def test_initial_curvature_requires_admissible():
    with pytest.raises(StartupNotAdmissibleError):
        initial_curvature(spec(3, 4, "power:m=2"), 1.0)


# picard solve -------------------------------------------------------------

def test_picard_linear_solution_in_one_iteration():
    for n, p in [(2, 2), (3, 4), (4, 3)]:
        loc = picard_solve(spec(n, p), 0.7)
        assert loc.converged and loc.iterations == 1
        # exact up to the rounding of g(s z)/f(s)
        assert np.max(np.abs(loc.z_values - 0.7)) <= 1e-15 and np.max(np.abs(loc.v_values)) < 1e-12
        assert loc.handoff()[1] == pytest.approx(0.7 * loc.epsilon, rel=1e-15)


def test_picard_hyperbolic_identity():
    loc = picard_solve(spec(3, 4, "hyperbolic", "hyperbolic"), 1.0)
    r = loc.epsilon / 2
    assert abs(loc.alpha_at(r)[0] - r) < 1e-14
    _, res = loc.fixed_point_residuals()
    assert np.max(np.abs(res)) < 1e-8


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("f1", [0.0, 1.0, -0.5])
@pytest.mark.parametrize("g1", [0.0, 1.0])
@pytest.mark.parametrize("a0", [0.5, 1.0])
def test_picard_fd_curvature_and_residual(n, f1, g1, a0):
    s = ProblemSpec(n, 4.0, warp_with_c2(f1), warp_with_c2(g1))
    loc = picard_solve(s, a0)
    expected = initial_curvature(s, a0)[2]
    assert abs(loc.fd_alpha_pp0() - expected) / max(abs(expected), 1.0) < 1e-4
    _, res = loc.fixed_point_residuals()
    assert np.max(np.abs(res)) < 1e-7


def test_picard_positivity_and_limits():
    loc = picard_solve(spec(3, 3, "perturbed:c2=1", "hyperbolic"), 1.5)
    assert loc.grid[0] == 0.0 and loc.z_values[0] == 1.5 and loc.v_values[0] == 0.0
    assert np.all(loc.alpha[1:] > 0) and np.all(loc.alpha_prime > 0)
    z, _ = loc.zv(loc.grid[1])
    assert abs(z[0] - 1.5) < 1e-6


def test_picard_uniqueness_from_different_iterates():
    s = spec(3, 4, "perturbed:c2=1", "perturbed:c2=0.5")
    a = picard_solve(s, 1.0)
    b = picard_solve(s, 1.0, initial=(lambda x: 1.0 + 0.3 * np.sin(40 * x), lambda x: 0.5 * np.cos(x)))
    assert a.epsilon == b.epsilon
    assert np.max(np.abs(a.z_values - b.z_values)) < 1e-10
    assert np.max(np.abs(a.v_values - b.v_values)) < 1e-10


def test_picard_epsilon_respects_contraction_bound():
    loc = picard_solve(spec(3, 4, "hyperbolic", "hyperbolic"), 0.3, epsilon_hint=1.0)
    assert loc.epsilon <= 0.3**2 / 8


def test_picard_non_contraction_reported():
    with pytest.raises(NonContractionError) as info:
        picard_solve(spec(3, 4, "perturbed:c2=1"), 1.0, max_iter=2, eps_min=1e-3)
    assert math.isfinite(info.value.last_change) and info.value.last_change > 0


def test_picard_rejects_power_warp():
    with pytest.raises(StartupNotAdmissibleError):
        picard_solve(spec(3, 4, "power:m=2"), 1.0)


def test_picard_rejects_nonpositive_slope():
    with pytest.raises(ValueError):
        picard_solve(spec(3, 4), 0.0)
