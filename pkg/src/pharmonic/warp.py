"""Warp functions of rotationally symmetric model manifolds.

A model manifold is ``[0, inf) x S^{n-1}`` with metric ``dr^2 + f(r)^2 dtheta^2``.
Each built-in warp carries its analytic first derivative and the quadratic
Taylor coefficient ``f(r) = r + c2 r^2 + o(r^2)`` used by the startup solver.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class WarpKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"
    POWER = "power"
    EXP = "exp"
    PERTURBED = "perturbed"


# Parameter names accepted by each kind, with defaults.
KIND_PARAMS: dict[WarpKind, dict[str, float]] = {
    WarpKind.EUCLIDEAN: {},
    WarpKind.HYPERBOLIC: {},
    WarpKind.POWER: {"m": 2.0},
    WarpKind.EXP: {"a": 1.0},
    WarpKind.PERTURBED: {"c2": 1.0},
}


@dataclass(frozen=True)
class WarpProfile:
    """An immutable warp function with its analytic derivative."""

    kind: WarpKind
    params: tuple[tuple[str, float], ...]
    _f: Callable = field(repr=False, compare=False)
    _df: Callable = field(repr=False, compare=False)
    taylor_c2: float
    startup_admissible: bool

    def eval(self, r):
        return self._f(r)

    def deriv(self, r):
        return self._df(r)

    __call__ = eval

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind.value
        inner = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind.value}:{inner}"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params)}


def _smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _dsmoothstep5(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _perturbed(c2: float):
    # r + c2 r^2 w(r), w = 1 on [0, 1], 0 beyond 2, quintic smoothstep between.
    def f(r):
        w = 1.0 - _smoothstep5(np.asarray(r) - 1.0)
        return r + c2 * r * r * w

    def df(r):
        r_arr = np.asarray(r)
        w = 1.0 - _smoothstep5(r_arr - 1.0)
        dw = -_dsmoothstep5(r_arr - 1.0)
        return 1.0 + c2 * (2.0 * r * w + r * r * dw)

    return f, df


def _scalar_or_array(fn):
    def wrapped(r):
        out = fn(r)
        if np.ndim(out) == 0:
            return float(out)
        return out

    return wrapped


def make_profile(kind: WarpKind | str, **params: float) -> WarpProfile:
    """Build a built-in warp profile.

    Parameters
    ----------
    kind : WarpKind or str
        One of ``euclidean``, ``hyperbolic``, ``power`` (``m >= 1``),
        ``exp`` (``a > 0``, ``f = sinh(a r)/a``) or ``perturbed`` (``c2``).
    **params
        Kind parameters; missing ones take the defaults in ``KIND_PARAMS``.

    Returns
    -------
    WarpProfile
    """
    try:
        kind = WarpKind(kind)
    except ValueError:
        raise ValueError(f"unknown warp kind {kind!r}") from None
    allowed = KIND_PARAMS[kind]
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValueError(f"warp kind {kind.value!r} does not take parameter(s) {sorted(unknown)}")
    values = {**allowed, **{k: float(v) for k, v in params.items()}}
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"warp parameter {name} must be finite, got {v}")

    if kind is WarpKind.EUCLIDEAN:
        f, df = (lambda r: r * 1.0), (lambda r: np.ones_like(r, dtype=float))
        c2, admissible = 0.0, True
    elif kind is WarpKind.HYPERBOLIC:
        f, df = np.sinh, np.cosh
        c2, admissible = 0.0, True
    elif kind is WarpKind.POWER:
        m = values["m"]
        if m < 1.0:
            raise ValueError(f"power warp needs m >= 1, got m={m}")
        if m == 1.0:
            f, df = (lambda r: r * 1.0), (lambda r: np.ones_like(r, dtype=float))
            c2, admissible = 0.0, True
        else:
            f = lambda r: np.power(r, m)  # noqa: E731
            df = lambda r: m * np.power(r, m - 1.0)  # noqa: E731
            # f'(0) = 0 here, so there is no expansion r + c2 r^2.
            c2, admissible = math.nan, False
    elif kind is WarpKind.EXP:
        a = values["a"]
        if a <= 0.0:
            raise ValueError(f"exp warp needs a > 0, got a={a}")
        f = lambda r: np.sinh(a * r) / a  # noqa: E731
        df = lambda r: np.cosh(a * r)  # noqa: E731
        c2, admissible = 0.0, True
    else:
        c2 = values["c2"]
        f, df = _perturbed(c2)
        admissible = True

    return WarpProfile(
        kind=kind,
        params=tuple(sorted(values.items())),
        _f=_scalar_or_array(f),
        _df=_scalar_or_array(df),
        taylor_c2=c2,
        startup_admissible=admissible,
    )


def parse_warp(text: str) -> WarpProfile:
    """Parse ``kind`` or ``kind:key=value,key=value`` into a profile."""
    kind, _, rest = text.strip().partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"bad warp parameter {item!r}; expected key=value")
        params[key.strip()] = float(value)
    return make_profile(kind.strip().lower(), **params)


@dataclass
class InvariantCheck:
    name: str
    passed: bool
    worst_error: float
    note: str = ""


@dataclass
class ValidationReport:
    profile: str
    checks: list[InvariantCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> InvariantCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate(profile: WarpProfile, r_samples: Sequence[float], rel_tol: float = 1e-6) -> ValidationReport:
    """Check origin values, positivity, derivative consistency and the Taylor coefficient."""
    r = np.asarray(r_samples, dtype=float)
    if r.size == 0 or not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise ValueError("r_samples must be finite and positive")
    checks = []

    if profile.startup_admissible:
        err = max(abs(profile.eval(0.0)), abs(profile.deriv(0.0) - 1.0))
        checks.append(InvariantCheck("origin", err <= 1e-15, err))
    else:
        checks.append(InvariantCheck("origin", True, 0.0, "not startup-admissible; f'(0) = 1 not required"))

    fr = np.asarray(profile.eval(r), dtype=float)
    worst = float(max(0.0, -fr.min())) if fr.size else 0.0
    checks.append(InvariantCheck("positivity", bool(np.all(fr > 0)), worst))

    # central difference; a power-of-two step keeps r +- h exact
    h = np.exp2(np.floor(np.log2(1e-5 * np.minimum(r, 1.0))))
    fd = (np.asarray(profile.eval(r + h)) - np.asarray(profile.eval(r - h))) / (2 * h)
    exact = np.asarray(profile.deriv(r), dtype=float)
    # scale by |f|/r too so stationary points of f do not divide by zero
    scale = np.maximum(np.abs(exact), np.abs(fr) / np.maximum(r, 1.0))
    rel = np.abs(fd - exact) / np.maximum(scale, 1e-300)
    worst = float(rel.max())
    checks.append(InvariantCheck("derivative", worst < rel_tol, worst))

    if profile.startup_admissible:
        est = richardson_c2(profile)
        err = abs(est - profile.taylor_c2)
        checks.append(InvariantCheck("taylor_c2", err < 1e-6 * max(1.0, abs(profile.taylor_c2)), err))
    return ValidationReport(profile.label, checks)


def richardson_c2(profile: WarpProfile, radii=(1e-2, 1e-3, 1e-4)) -> float:
    """Estimate lim (f(r) - r)/r^2 by Richardson extrapolation on decreasing radii."""
    r = np.asarray(radii, dtype=float)
    d = (np.asarray(profile.eval(r)) - r) / (r * r)
    # d(r) = c2 + c3 r + c4 r^2 + ...: cancel the linear term pairwise,
    # then the leftover r_i r_{i+1} term between the two pairs.
    e01 = (r[0] * d[1] - r[1] * d[0]) / (r[0] - r[1])
    e12 = (r[1] * d[2] - r[2] * d[1]) / (r[1] - r[2])
    k = (r[0] * r[1]) / (r[1] * r[2])
    return float((k * e12 - e01) / (k - 1.0))


def check_exp_growth(profile: WarpProfile, a: float, C: float, r_grid: Sequence[float]) -> tuple[bool, float]:
    """Two-sided exponential bound e^{ar}/C <= f(r) <= C e^{ar}, also applied to f'.

    Returns (holds, worst log-margin); a negative margin marks a violation.
    """
    r = np.asarray(r_grid, dtype=float)
    margins = []
    for vals in (np.asarray(profile.eval(r)), np.asarray(profile.deriv(r))):
        logratio = np.log(vals) - a * r
        margins.append(math.log(C) - np.abs(logratio))
    worst = float(min(m.min() for m in margins))
    return worst >= 0.0, worst


def check_log_derivative_bound(profile: WarpProfile, C2: float, y_grid: Sequence[float]) -> tuple[bool, float]:
    """g'(y) <= C2 g(y) on the grid; returns (holds, worst slack C2 g - g')."""
    y = np.asarray(y_grid, dtype=float)
    slack = C2 * np.asarray(profile.eval(y)) - np.asarray(profile.deriv(y))
    worst = float(slack.min())
    return worst >= 0.0, worst
