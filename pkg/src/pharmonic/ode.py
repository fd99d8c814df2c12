"""Pointwise mathematics of the rotationally symmetric p-harmonic map equation.

For a map ``(r, theta) -> (alpha(r), theta)`` between model manifolds with warps
f and g, the energy density is

    theta = alpha'^2 + (n-1) g(alpha)^2 / f(r)^2

and the Euler-Lagrange equation reads

    (f^{n-1} theta^{q-1} alpha')' = (n-1) f^{n-3} theta^{q-1} g(alpha) g'(alpha),   q = p/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DegenerateStateError, RangeError
from .warp import WarpProfile

THETA_MIN = 1e-300


@dataclass(frozen=True)
class ProblemSpec:
    """One ODE instance: dimension n, exponent p and the warps f (source), g (target)."""

    n: int
    p: float
    f: WarpProfile
    g: WarpProfile
    theta_min: float = THETA_MIN

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        p = float(self.p)
        if not math.isfinite(p) or p < 2.0:
            raise ValueError(f"p must be finite and >= 2, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def q(self) -> float:
        return self.p / 2.0

    @property
    def harmonic(self) -> bool:
        return self.p == 2.0

    @property
    def startup_admissible(self) -> bool:
        return self.f.startup_admissible and self.g.startup_admissible

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q, "f": self.f.to_dict(), "g": self.g.to_dict()}


@dataclass(frozen=True)
class StatePoint:
    r: float
    alpha: float
    alpha_prime: float

    def __post_init__(self):
        for name in ("r", "alpha", "alpha_prime"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.r <= 0.0:
            raise ValueError(f"r must be positive, got {self.r}")


def _parts(spec: ProblemSpec, r, alpha, alpha_prime):
    fr = spec.f.eval(r)
    if np.any(np.asarray(fr) == 0.0):
        raise ZeroDivisionError("f(r) = 0; the equation is singular at r = 0")
    ratio = spec.g.eval(alpha) / fr
    theta = alpha_prime * alpha_prime + (spec.n - 1) * ratio * ratio
    return fr, spec.f.deriv(r), ratio, spec.g.deriv(alpha), theta


def _check_theta(spec, theta):
    if np.any(np.asarray(theta) <= spec.theta_min):
        raise DegenerateStateError(f"energy density {np.min(theta):.3g} at or below floor {spec.theta_min:g}")


def density(spec: ProblemSpec, r, alpha, alpha_prime):
    """Vectorized energy density."""
    ratio = spec.g.eval(alpha) / spec.f.eval(r)
    return alpha_prime * alpha_prime + (spec.n - 1) * ratio * ratio


def accel(spec: ProblemSpec, r, alpha, alpha_prime):
    """Vectorized alpha'' solved from the Euler-Lagrange equation.

    The (theta^{q-1})' term is expanded by the chain rule and the resulting
    alpha'' coefficient divided out. The bracket ``ratio*g' - f'*alpha'`` vanishes
    exactly on identity maps and homotheties, so those stay exact in floating point.
    """
    n, q = spec.n, spec.q
    fr, dfr, ratio, dg, theta = _parts(spec, r, alpha, alpha_prime)
    _check_theta(spec, theta)
    cross = ratio * dg - dfr * alpha_prime
    # (g(alpha)^2/f^2)' along the curve
    dG = 2.0 * ratio * (dg * alpha_prime - dfr * ratio) / fr
    denom = (spec.p - 1.0) * alpha_prime * alpha_prime + (n - 1) * ratio * ratio
    return (n - 1) * (theta * cross / fr - (q - 1.0) * dG * alpha_prime) / denom


def energy_density(spec: ProblemSpec, s: StatePoint) -> float:
    if s.r <= 0.0:
        raise ZeroDivisionError("energy density needs r > 0")
    return float(density(spec, s.r, s.alpha, s.alpha_prime))


def second_derivative(spec: ProblemSpec, s: StatePoint) -> float:
    return float(accel(spec, s.r, s.alpha, s.alpha_prime))


def euler_lagrange_residual(spec: ProblemSpec, r, alpha, alpha_prime, alpha_pp):
    """Vectorized left side of the Euler-Lagrange equation in non-divergence form.

    Theta a'' + [(n-1) Theta f'/f + Theta'] a' - (n-1) Theta g g'/f^2,
    with Theta = theta^{q-1} and Theta' from the chain rule.
    """
    n, q = spec.n, spec.q
    fr, dfr, ratio, dg, theta = _parts(spec, r, alpha, alpha_prime)
    _check_theta(spec, theta)
    dG = 2.0 * ratio * (dg * alpha_prime - dfr * ratio) / fr
    Theta = theta ** (q - 1.0)
    dTheta = (q - 1.0) * theta ** (q - 2.0) * (2.0 * alpha_prime * alpha_pp + (n - 1) * dG)
    return Theta * (alpha_pp + (n - 1) * (dfr * alpha_prime - ratio * dg) / fr) + dTheta * alpha_prime


def residual(spec: ProblemSpec, s: StatePoint, alpha_pp: float) -> float:
    return float(euler_lagrange_residual(spec, s.r, s.alpha, s.alpha_prime, alpha_pp))


def residual_scale(spec: ProblemSpec, s: StatePoint, alpha_pp: float) -> float:
    """Sum of magnitudes of the individual residual terms, for relative tolerances."""
    n, q = spec.n, spec.q
    fr, dfr, ratio, dg, theta = _parts(spec, s.r, s.alpha, s.alpha_prime)
    dG = 2.0 * ratio * (dg * s.alpha_prime - dfr * ratio) / fr
    Theta = theta ** (q - 1.0)
    dTheta_parts = abs(q - 1.0) * theta ** (q - 2.0) * (abs(2 * s.alpha_prime * alpha_pp) + (n - 1) * abs(dG))
    return float(
        Theta * (abs(alpha_pp) + (n - 1) * (abs(dfr * s.alpha_prime) + abs(ratio * dg)) / fr)
        + dTheta_parts * abs(s.alpha_prime)
    )


_GL_LOW = leggauss(7)
_GL_HIGH = leggauss(15)


def _hermite(t, h, y0, y1, d0, d1):
    # cubic Hermite on [0, h] evaluated at t
    s = t / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def p_energy(spec: ProblemSpec, profile, r0: float, r1: float, rtol: float = 1e-12) -> float:
    """p-energy of the stored profile over [r0, r1].

    The profile is reconstructed per grid cell by cubic Hermite interpolation of
    alpha (from alpha, alpha') and of alpha' (from alpha', alpha''), with alpha''
    taken from the equation. Each cell is integrated by adaptive Gauss-Legendre
    bisection comparing a 7- and a 15-point rule.
    """
    r = np.asarray(profile.r)
    if r0 > r1:
        raise RangeError("need r0 <= r1")
    if r0 <= 0 or r0 < r[0] * (1 - 1e-15) or r1 > r[-1] * (1 + 1e-15):
        raise RangeError(f"[{r0}, {r1}] is not inside the grid [{r[0]}, {r[-1]}]")
    if r0 == r1:
        return 0.0
    a = np.asarray(profile.alpha)
    ap = np.asarray(profile.alpha_prime)
    app = accel(spec, r, a, ap)
    half_p, m = spec.p / 2.0, spec.n - 1

    def integrand(k, x):
        h = r[k + 1] - r[k]
        t = x - r[k]
        al = _hermite(t, h, a[k], a[k + 1], ap[k], ap[k + 1])
        alp = _hermite(t, h, ap[k], ap[k + 1], app[k], app[k + 1])
        th = density(spec, x, al, alp)
        return th**half_p * np.asarray(spec.f.eval(x)) ** m

    def gl(k, lo, hi, rule):
        x, w = rule
        mid, rad = 0.5 * (hi + lo), 0.5 * (hi - lo)
        return rad * float(np.dot(w, integrand(k, mid + rad * x)))

    def adaptive(k, lo, hi, depth):
        coarse, fine = gl(k, lo, hi, _GL_LOW), gl(k, lo, hi, _GL_HIGH)
        if abs(fine - coarse) <= rtol * max(abs(fine), 1e-300) or depth >= 30:
            return fine
        mid = 0.5 * (lo + hi)
        return adaptive(k, lo, mid, depth + 1) + adaptive(k, mid, hi, depth + 1)

    k0 = max(int(np.searchsorted(r, r0, side="right")) - 1, 0)
    k1 = min(int(np.searchsorted(r, r1, side="left")), len(r) - 1)
    total = 0.0
    for k in range(k0, k1):
        lo, hi = max(r[k], r0), min(r[k + 1], r1)
        if hi > lo:
            total += adaptive(k, lo, hi, 0)
    return total
