"""Batch verification: run property checks on profiles and the built-in suite."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import analysis as an
from .errors import HypothesisViolatedError, NotApplicableError, WindowTooShortError, WrongFamilyError
from .integrate import SolutionProfile, solve
from .ode import ProblemSpec, StatePoint
from .warp import parse_warp

_SKIP_ERRORS = (WrongFamilyError, NotApplicableError, WindowTooShortError)


def guarded(run: str, name: str, fn: Callable[[], an.CheckResult]) -> dict:
    """Run one check; family mismatches become skipped entries, violated hypotheses fail."""
    try:
        res = fn()
    except _SKIP_ERRORS as exc:
        res = an.CheckResult(name, True, skipped=True, note=f"{type(exc).__name__}: {exc}")
    except HypothesisViolatedError as exc:
        res = an.CheckResult(name, False, note=f"hypothesis violated: {exc}")
    d = res.to_dict()
    d["run"] = run
    return d


def _slope_params(profile: SolutionProfile, params: dict):
    lo, hi = params.get("window", (1.0, 10.0))
    hi = min(hi, profile.r_end)
    m = (profile.r >= lo) & (profile.r <= hi)
    if m.sum() < 3:
        raise WindowTooShortError(f"window [{lo:g}, {hi:g}] holds fewer than 3 nodes")
    spec = profile.spec
    # default bounds are the sampled sup of |f'| and |g'(alpha)| on the window
    a = params.get("a", float(np.max(np.abs(spec.f.deriv(profile.r[m])))))
    b = params.get("b", float(np.max(np.abs(spec.g.deriv(profile.alpha[m])))))
    return a, b, (lo, hi)


def _floor_params(profile: SolutionProfile, params: dict):
    C = params.get("C", 3.0)
    if "C2" in params:
        return params["C2"], C
    top = max(float(profile.alpha.max()), 1.0 + 1e-9)
    y = np.geomspace(1.0, top, 2000)
    g = profile.spec.g
    return float(np.max(np.asarray(g.deriv(y)) / np.asarray(g.eval(y)))), C


def run_checks(run: str, profile: SolutionProfile, enabled: Callable[[str], bool], params: Optional[dict] = None) -> list[dict]:
    """All toggled checks on one profile, in a fixed order."""
    params = params or {}
    out = []
    if enabled("monotonicity"):
        out.append(guarded(run, "monotonicity", lambda: an.check_monotonicity(profile)))
    if enabled("energy_slope"):
        def slope():
            a, b, w = _slope_params(profile, params)
            lower = params.get("lower", "p-1")
            return an.check_energy_slope_bounds(profile, a, b, w, lower=lower)
        out.append(guarded(run, "energy_slope", slope))
    if enabled("cone"):
        c = params.get("cone_c", 0.5)
        out.append(guarded(run, "cone_bound", lambda: an.check_cone_bound(profile, c)))
    if enabled("cone_separation"):
        c = params.get("cone_c", 0.5)
        out.append(guarded(run, "cone_separation", lambda: an.check_cone_separation(profile, c)))
    if enabled("energy_floor"):
        def floor():
            C2, C = _floor_params(profile, params)
            return an.check_energy_floor(profile, C2, C, params.get("rate"))
        out.append(guarded(run, "energy_floor", floor))
    if enabled("vanishing_order"):
        def vo():
            if profile.startup is None:
                raise NotApplicableError("profile has no startup segment")
            return an.check_vanishing_order(profile)
        out.append(guarded(run, "vanishing_order", vo))
    if enabled("barrier"):
        out.append(guarded(run, "barrier", lambda: an.check_barrier(profile)))
        out.append(guarded(run, "no_recrossing", lambda: an.check_no_recrossing(profile)))
    return out


@dataclass
class SuiteRun:
    label: str
    spec: ProblemSpec
    r_max: float
    alpha0: Optional[float] = None
    start: Optional[StatePoint] = None
    checks: tuple = ("monotonicity",)
    params: dict = field(default_factory=dict)

    def solve(self, tol: float = 1e-10) -> SolutionProfile:
        return solve(self.spec, self.alpha0, self.r_max, tol, start=self.start)


def _spec(n, p, f, g):
    return ProblemSpec(n, p, parse_warp(f), parse_warp(g))


def builtin_runs() -> list[SuiteRun]:
    """The default verification configurations."""
    runs: list[SuiteRun] = []
    base = ("monotonicity", "vanishing_order")
    for p in (2.5, 3.0, 4.0):
        runs.append(SuiteRun(f"identity hyperbolic p={p:g}", _spec(3, p, "hyperbolic", "hyperbolic"), 20.0, 1.0,
                             checks=base + ("barrier",)))
    for p in (3.0, 4.0):
        for c in (0.5, 1.0, 2.0):
            runs.append(SuiteRun(f"linear euclidean p={p:g} c={c:g}", _spec(3, p, "euclidean", "euclidean"), 20.0, c,
                                 checks=base + ("energy_slope",), params={"window": (1.0, 10.0), "a": 1.0, "b": 1.0}))
    for a0 in (0.5, 1.0, 2.0):
        runs.append(SuiteRun(f"hyperbolic trichotomy alpha0={a0:g}", _spec(3, 3.0, "hyperbolic", "hyperbolic"), 30.0, a0,
                             checks=base + ("barrier",)))
    for p in (2.5, 3.0, 4.0):
        for a0 in (0.5, 1.0, 2.0):
            runs.append(SuiteRun(f"hyperbolic to euclidean p={p:g} alpha0={a0:g}", _spec(3, p, "hyperbolic", "euclidean"),
                                 40.0, a0, checks=base + ("energy_slope",),
                                 params={"window": (1.0, 10.0), "a": math.cosh(10.0), "b": 1.0,
                                         "lower": "p-1" if p <= 3 else "min"}))
    for n in (3, 2):
        runs.append(SuiteRun(f"power source n={n}", _spec(n, 4.0, "power:m=2", "euclidean"), 200.0,
                             start=StatePoint(1.0, 0.5, 0.5)))
    for m in (1.0, 2.0):
        for c in (0.5, 1.0):
            runs.append(SuiteRun(f"cone m={m:g} c={c:g}", _spec(3, 4.0, f"power:m={m:g}", f"power:m={m:g}"), 100.0,
                                 start=StatePoint(1.0, 0.4 * c, 0.4 * c),
                                 checks=("monotonicity", "cone", "cone_separation"), params={"cone_c": c}))
    for c in (0.01, 0.1):
        runs.append(SuiteRun(f"cone separation m=2 c={c:g}", _spec(3, 4.0, "power:m=2", "power:m=2"), 100.0,
                             start=StatePoint(1.0, 0.4, 0.4), checks=("cone_separation",), params={"cone_c": c}))
    runs.append(SuiteRun("energy floor hyperbolic alpha0=2", _spec(3, 3.0, "hyperbolic", "hyperbolic"), 30.0, 2.0,
                         checks=base + ("energy_floor",), params={"C": 3.0, "C2": 1.0 / math.tanh(1.0)}))
    runs.append(SuiteRun("energy floor hyperbolic to exp alpha0=2", _spec(3, 3.0, "hyperbolic", "exp:a=0.5"), 30.0, 2.0,
                         checks=base + ("energy_floor",), params={"C": 3.0, "C2": 0.5 / math.tanh(0.5)}))
    return runs


def run_builtin(tol: float = 1e-10) -> list[dict]:
    results = []
    for run in builtin_runs():
        prof = run.solve(tol)
        enabled = set(run.checks)
        results.extend(run_checks(run.label, prof, enabled.__contains__, run.params))
    return results
