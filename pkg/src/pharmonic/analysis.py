"""Asymptotic regime classification, theory predictions and inequality checks."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import theilslopes

from .errors import (
    HypothesisViolatedError,
    NotApplicableError,
    UnsupportedFamilyError,
    WindowTooShortError,
    WrongFamilyError,
)
from .integrate import SolutionProfile, TerminationKind
from .ode import ProblemSpec
from .warp import WarpKind, WarpProfile, check_exp_growth, check_log_derivative_bound

LN3_HALF = math.log(3.0) / 2.0
SLACK = 1e-9
TOL_FLAT = 1e-4
TOL_PLATEAU = 1e-3
TOL_IDENTITY_SLOPE = 1e-2
LADDER = (1.0, 2.0, 4.0, 8.0)
EXPONENT_MARGIN = 0.05
MIN_TAIL_NODES = 50
MIN_FIT_NODES = 30


class RegimeKind(str, enum.Enum):
    TRIVIAL = "Trivial"
    BOUNDED = "Bounded"
    LINEAR_GROWTH = "LinearGrowth"
    ASYMPTOTIC_IDENTITY = "AsymptoticIdentity"
    SUPER_IDENTITY = "SuperIdentity"
    EXPONENTIAL_GROWTH = "ExponentialGrowth"
    POWER_SLOPE_DECAY = "PowerSlopeDecay"
    UNDETERMINED = "Undetermined"


_PARAM_NAME = {
    RegimeKind.LINEAR_GROWTH: "c_o",
    RegimeKind.EXPONENTIAL_GROWTH: "c",
    RegimeKind.POWER_SLOPE_DECAY: "exponent",
}


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    param: Optional[float] = None

    def __post_init__(self):
        needs = self.kind in _PARAM_NAME
        if needs and (self.param is None or not math.isfinite(self.param)):
            raise ValueError(f"{self.kind.value} needs a finite parameter")
        if not needs and self.param is not None:
            raise ValueError(f"{self.kind.value} takes no parameter")

    @property
    def bounded(self) -> Optional[bool]:
        """True or False for decisive regimes, None for Undetermined."""
        if self.kind is RegimeKind.UNDETERMINED:
            return None
        return self.kind in (RegimeKind.TRIVIAL, RegimeKind.BOUNDED)

    @property
    def params(self) -> dict:
        return {} if self.param is None else {_PARAM_NAME[self.kind]: self.param}

    def __str__(self):
        return self.kind.value if self.param is None else f"{self.kind.value}({self.param:.6g})"


@dataclass
class Evidence:
    check: str
    window: tuple[float, float]
    value: float
    threshold: float
    relation: str  # how value is compared with threshold
    passed: bool

    def to_dict(self):
        return {
            "check": self.check,
            "window": [self.window[0], self.window[1]],
            "value": self.value,
            "threshold": self.threshold,
            "relation": self.relation,
            "passed": self.passed,
        }

    @classmethod
    def make(cls, check, window, value, threshold, relation):
        ops = {
            "<": value < threshold,
            "<=": value <= threshold,
            ">": value > threshold,
            ">=": value >= threshold,
        }
        return cls(check, (float(window[0]), float(window[1])), float(value), float(threshold), relation, bool(ops[relation]))


@dataclass
class RegimeReport:
    regime: Regime
    evidence: list[Evidence] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    windows: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "regime": self.regime.kind.value,
            "params": self.regime.params,
            "evidence": [e.to_dict() for e in self.evidence],
            "windows": {k: [float(v[0]), float(v[1])] for k, v in self.windows.items()},
            "notes": list(self.notes),
        }


def _window_mask(r, window):
    lo, hi = window
    return (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))


def fit_asymptotic_exponent(profile: SolutionProfile, window: tuple[float, float]):
    """Least-squares power law alpha' ~ A r^e on the window.

    Returns
    -------
    exponent, amplitude, fit_residual : float
        Slope and exp(intercept) of the line through (log r, log alpha'),
        and the RMS of its residuals.
    """
    r = np.asarray(profile.r)
    m = _window_mask(r, window)
    if m.sum() < MIN_FIT_NODES:
        raise WindowTooShortError(f"window {window} holds {int(m.sum())} nodes; need {MIN_FIT_NODES}")
    ap = np.asarray(profile.alpha_prime)[m]
    if np.any(ap <= 0):
        raise ValueError("alpha' must be positive on the fit window")
    x, y = np.log(r[m]), np.log(ap)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(math.exp(intercept)), float(np.sqrt(np.mean(resid**2)))


def _value_at(profile, r0):
    return float(np.interp(r0, profile.r, profile.alpha))


def _is_hyperbolic_pair(spec: ProblemSpec) -> bool:
    return spec.f.kind is WarpKind.HYPERBOLIC and spec.g.kind is WarpKind.HYPERBOLIC


def _power_index(w: WarpProfile) -> Optional[float]:
    if w.kind is WarpKind.EUCLIDEAN:
        return 1.0
    if w.kind is WarpKind.POWER:
        return w.param("m")
    return None


def _exp_rate(w: WarpProfile) -> Optional[float]:
    if w.kind is WarpKind.HYPERBOLIC:
        return 1.0
    if w.kind is WarpKind.EXP:
        return w.param("a")
    return None


def _ladder(profile, start_r):
    r, d = profile.r, profile.alpha - profile.r
    radii = []
    for c in LADDER:
        hit = np.nonzero((r > start_r) & (d > c))[0]
        radii.append(float(r[hit[0]]) if hit.size else math.nan)
    return radii


def classify_regime(profile: SolutionProfile) -> RegimeReport:
    """Classify the asymptotic regime of a profile from its tail window.

    The tail window is [r_end/2, r_end], with r_end the last stored radius (the
    blow-up radius for profiles ending in a derivative blow-up). Every decisive
    regime cites at least two evidence entries; anything in between thresholds
    is reported as Undetermined.
    """
    if profile.trivial:
        w = (float(profile.r[0]), float(profile.r[-1]))
        return RegimeReport(
            Regime(RegimeKind.TRIVIAL),
            [Evidence.make("max_alpha", w, float(np.max(np.abs(profile.alpha))), 0.0, "<="),
             Evidence.make("max_alpha_prime", w, float(np.max(np.abs(profile.alpha_prime))), 0.0, "<=")],
            ["declared trivial solution"],
            {"profile": w},
        )
    kind = profile.termination.kind
    if kind not in (TerminationKind.REACHED_RMAX, TerminationKind.DERIVATIVE_BLOWUP):
        raise ValueError(f"cannot classify a profile that ended with {profile.termination}")
    r, a, ap = profile.r, profile.alpha, profile.alpha_prime
    r_end = float(r[-1])
    tail = (r_end / 2.0, r_end)
    tm = _window_mask(r, tail)
    if tm.sum() < MIN_TAIL_NODES:
        raise WindowTooShortError(f"tail window {tail} holds {int(tm.sum())} nodes; need {MIN_TAIL_NODES}")
    spec = profile.spec
    windows = {"tail": tail}
    blowup = kind is TerminationKind.DERIVATIVE_BLOWUP
    notes = []
    i_mid = int(np.argmax(tm))
    increase = float(a[-1] - a[i_mid])

    if not blowup:
        flat = Evidence.make("final_slope", tail, ap[-1], TOL_FLAT, "<")
        plateau = Evidence.make("tail_increase", tail, increase, TOL_PLATEAU, "<")
        if flat.passed and plateau.passed:
            return RegimeReport(Regime(RegimeKind.BOUNDED), [flat, plateau], notes, windows)

    if _is_hyperbolic_pair(spec):
        return _classify_hyperbolic(profile, tail, tm, blowup, windows)

    if blowup:
        notes.append(f"derivative blow-up at r = {r_end:.17g}; unbounded but outside the trichotomy family")
        return RegimeReport(Regime(RegimeKind.UNDETERMINED), [
            Evidence.make("final_slope", tail, ap[-1], 1e12, ">="),
        ], notes, windows)

    if np.any(ap[tm] <= 0):
        notes.append("alpha' not positive on the tail; no power-law fit")
        return RegimeReport(Regime(RegimeKind.UNDETERMINED), [], notes, windows)

    evidence = []
    rate, m_g = _exp_rate(spec.f), _power_index(spec.g)
    if rate is not None and m_g is not None and m_g > 1.0:
        c_probe = rate / (2.0 * (m_g - 1.0))
        windows["exp_probe"] = tail
        slope_log = float(np.polyfit(r[tm], np.log(a[tm]), 1)[0])
        e1 = Evidence.make("log_alpha_slope", tail, slope_log, c_probe, ">=")
        e2 = Evidence.make("log_alpha_excess", tail, math.log(a[-1]) - c_probe * r_end, 0.0, ">=")
        if e1.passed and e2.passed:
            notes.append(f"exponential probe rate c = a/(2(m-1)) = {c_probe:.6g}")
            return RegimeReport(Regime(RegimeKind.EXPONENTIAL_GROWTH, slope_log), [e1, e2], notes, windows)
        evidence.append(e1)

    exponent, amp, resid = fit_asymptotic_exponent(profile, tail)
    quarter = (r_end / 4.0, r_end / 2.0)
    inc_prev = _value_at(profile, r_end / 2.0) - _value_at(profile, r_end / 4.0)
    inc_ratio = increase / inc_prev if inc_prev > 0 else math.inf
    windows["previous"] = quarter

    if exponent < -1.0 - EXPONENT_MARGIN:
        ev = [Evidence.make("slope_exponent", tail, exponent, -1.0 - EXPONENT_MARGIN, "<"),
              Evidence.make("increment_ratio", (quarter[0], tail[1]), inc_ratio, 1.0, "<")]
        if ev[1].passed:
            notes.append("alpha' decays faster than 1/r, so alpha converges")
            return RegimeReport(Regime(RegimeKind.BOUNDED), ev, notes, windows)
        evidence += ev
    elif abs(exponent) <= EXPONENT_MARGIN:
        c_o = float(theilslopes(a[tm], r[tm])[0])
        spread = float((ap[tm].max() - ap[tm].min()) / ap[tm].mean())
        ev = [Evidence.make("slope_exponent_abs", tail, abs(exponent), EXPONENT_MARGIN, "<="),
              Evidence.make("slope_spread", tail, spread, 0.1, "<"),
              Evidence.make("linear_rate", tail, c_o, 0.0, ">")]
        if all(e.passed for e in ev):
            return RegimeReport(Regime(RegimeKind.LINEAR_GROWTH, c_o), ev, notes, windows)
        evidence += ev
    elif -1.0 + EXPONENT_MARGIN < exponent < -EXPONENT_MARGIN:
        ev = [Evidence.make("slope_exponent", tail, exponent, -1.0 + EXPONENT_MARGIN, ">"),
              Evidence.make("increment_ratio", (quarter[0], tail[1]), inc_ratio, 1.0, ">")]
        if ev[1].passed:
            notes.append("alpha' decays slower than 1/r, so alpha grows without bound")
            return RegimeReport(Regime(RegimeKind.POWER_SLOPE_DECAY, exponent), ev, notes, windows)
        evidence += ev
    else:
        evidence.append(Evidence.make("slope_exponent", tail, exponent, 0.0, "<"))
    notes.append(f"no rule was decisive (fitted exponent {exponent:.4g}, fit rms {resid:.2g})")
    return RegimeReport(Regime(RegimeKind.UNDETERMINED), evidence, notes, windows)


def _classify_hyperbolic(profile, tail, tm, blowup, windows):
    r, a, ap = profile.r, profile.alpha, profile.alpha_prime
    notes = []
    probe = (LN3_HALF, float(r[-1]))
    windows["probe"] = probe
    radii = _ladder(profile, LN3_HALF)
    cleared = sum(1 for x in radii if math.isfinite(x))
    increasing = cleared == len(LADDER) and all(x < y for x, y in zip(radii, radii[1:]))
    after = r > LN3_HALF
    if cleared:
        first = np.nonzero(after & (a - r > LADDER[0]))[0][0]
        min_slope = float(ap[first:].min())
    else:
        min_slope = float(ap[after].min()) if after.any() else math.nan
    e_ladder = Evidence.make("ladder_rungs_cleared", probe, cleared if increasing else 0, len(LADDER), ">=")
    e_slope = Evidence.make("min_slope_after_first_rung", probe, min_slope, 1.0, ">")
    if e_ladder.passed and e_slope.passed:
        notes.append("alpha - r exceeded " + ", ".join(f"{c:g} at r={x:.6g}" for c, x in zip(LADDER, radii)))
        if blowup:
            notes.append(f"derivative blow-up at r = {r[-1]:.17g}")
        return RegimeReport(Regime(RegimeKind.SUPER_IDENTITY), [e_ladder, e_slope], notes, windows)

    if not blowup:
        dev = np.abs(a[tm] - r[tm])
        trend = float(theilslopes(dev, r[tm])[0])
        e_slope = Evidence.make("max_abs_slope_minus_one", tail, float(np.max(np.abs(ap[tm] - 1.0))), TOL_IDENTITY_SLOPE, "<")
        e_trend = Evidence.make("abs_gap_trend", tail, trend, SLACK, "<=")
        if e_slope.passed and e_trend.passed:
            notes.append("trend-based: |alpha - r| is non-increasing on the tail and alpha' stays near 1")
            return RegimeReport(Regime(RegimeKind.ASYMPTOTIC_IDENTITY), [e_slope, e_trend], notes, windows)
        notes.append("between the bounded and identity thresholds")
        return RegimeReport(Regime(RegimeKind.UNDETERMINED), [e_ladder, e_slope, e_trend], notes, windows)
    notes.append("blow-up without clearing the ladder")
    return RegimeReport(Regime(RegimeKind.UNDETERMINED), [e_ladder, e_slope], notes, windows)


def is_unbounded(report: RegimeReport, profile: SolutionProfile) -> bool:
    if profile.termination.kind is TerminationKind.DERIVATIVE_BLOWUP:
        return True
    return report.regime.bounded is False


def _decisive_probe(r, a, ap, slack=SLACK):
    """First node beyond ln(3)/2 that sits strictly above or below the identity."""
    after = r > LN3_HALF
    tol_a = slack * (1.0 + np.abs(a))
    tol_s = slack * (1.0 + np.abs(ap))
    above = after & (a - r > tol_a) & (ap - 1.0 > tol_s)
    below = after & (r - a > tol_a) & (1.0 - ap > tol_s)
    exact = after & (np.abs(a - r) <= tol_a) & (np.abs(ap - 1.0) <= tol_s)
    idx = np.nonzero(above | below | exact)[0]
    if not idx.size:
        return None, None
    i = int(idx[0])
    side = "above" if above[i] else ("below" if below[i] else "identity")
    return i, side


def predict_regime(spec: ProblemSpec, alpha0: float, observed=None) -> Regime:
    """Regime predicted from the warp families alone, plus early-window data for hyperbolic pairs.

    ``observed`` may be a SolutionProfile or an iterable of (r, alpha, alpha')
    early-window samples; it is only used for hyperbolic-to-hyperbolic maps.
    """
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    n, q = spec.n, spec.q
    delta_f, delta_g = _power_index(spec.f), _power_index(spec.g)
    rate_f = _exp_rate(spec.f)
    bounded_slope_target = spec.g.kind in (WarpKind.EUCLIDEAN, WarpKind.PERTURBED) or delta_g == 1.0

    if delta_f is not None and delta_f == delta_g:
        # f = g = r^m: homotheties are exact when m = 1; otherwise only a cone bound is known
        if delta_f == 1.0:
            return Regime(RegimeKind.LINEAR_GROWTH, float(alpha0))
        return Regime(RegimeKind.UNDETERMINED)
    if delta_f is not None and bounded_slope_target:
        if spec.p <= 2.0:
            return Regime(RegimeKind.UNDETERMINED)
        if (n - 1) * delta_f <= 2 * q - 1:
            return Regime(RegimeKind.POWER_SLOPE_DECAY, -(n - 1) * delta_f / (2 * q - 1))
        if delta_f > 1.0:
            return Regime(RegimeKind.BOUNDED)
        return Regime(RegimeKind.UNDETERMINED)
    if rate_f is not None and bounded_slope_target:
        return Regime(RegimeKind.BOUNDED) if spec.p > 2.0 else Regime(RegimeKind.UNDETERMINED)
    if _is_hyperbolic_pair(spec):
        if observed is None:
            return Regime(RegimeKind.UNDETERMINED)
        if isinstance(observed, SolutionProfile):
            r, a, ap = observed.r, observed.alpha, observed.alpha_prime
        else:
            arr = np.asarray(list(observed), dtype=float).reshape(-1, 3)
            r, a, ap = arr[:, 0], arr[:, 1], arr[:, 2]
        i, side = _decisive_probe(np.asarray(r), np.asarray(a), np.asarray(ap))
        if side == "above":
            return Regime(RegimeKind.SUPER_IDENTITY)
        if side == "below":
            return Regime(RegimeKind.BOUNDED)
        if side == "identity":
            # alpha(r_o) = r_o, alpha'(r_o) = 1: the identity by uniqueness
            return Regime(RegimeKind.ASYMPTOTIC_IDENTITY)
        return Regime(RegimeKind.UNDETERMINED)
    raise UnsupportedFamilyError(f"no prediction for source {spec.f.label} and target {spec.g.label}")


def consistent(predicted: Regime, observed: Regime) -> bool:
    """Bounded versus not-bounded never contradict; trichotomy branches must match."""
    if predicted.bounded is None or observed.bounded is None:
        return True
    if predicted.bounded != observed.bounded:
        return False
    trichotomy = {RegimeKind.SUPER_IDENTITY, RegimeKind.ASYMPTOTIC_IDENTITY}
    if predicted.kind in trichotomy:
        return observed.kind is predicted.kind
    return True


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float = math.nan
    first_violation: Optional[float] = None
    skipped: bool = False
    note: str = ""

    def to_dict(self):
        return {
            "check": self.name,
            "passed": self.passed,
            "skipped": self.skipped,
            "margin": None if not math.isfinite(self.margin) else self.margin,
            "first_violation_r": self.first_violation,
            "note": self.note,
        }


def check_monotonicity(profile: SolutionProfile) -> CheckResult:
    if profile.trivial:
        return CheckResult("monotonicity", True, skipped=True, note="trivial solution; nothing to check")
    ap = np.asarray(profile.alpha_prime)
    bad = np.nonzero(~(ap > 0))[0]
    first = float(profile.r[bad[0]]) if bad.size else None
    note = f"alpha' = {ap[bad[0]]:.6g} at node {int(bad[0])}" if bad.size else ""
    return CheckResult("monotonicity", not bad.size, float(ap.min()), first, note=note)


def energy_slope_bounds(spec: ProblemSpec, a: float, b: float, fr, lower: str = "p-1"):
    """Lower and upper bounds on (theta^(q-1))'/theta^(q-1).

    ``lower="p-1"`` divides the lower bound by p - 1; ``"min"`` divides by
    min(p - 1, n - 1), which is what the estimate actually yields. They differ
    only when p > n, where the p-1 form can fail (hyperbolic to Euclidean,
    n=3, p=4 near r = 10 with a = cosh 10).
    """
    if lower not in ("p-1", "min"):
        raise ValueError("lower must be 'p-1' or 'min'")
    n, p = spec.n, spec.p
    k = (n - 1) * (p - 2) * (a + b)
    dmin = min(p - 1, n - 1)
    return -k / ((p - 1 if lower == "p-1" else dmin) * fr), k / (dmin * fr)


def check_energy_slope_bounds(profile: SolutionProfile, a: float, b: float, window, rel_slack: float = 1e-3,
                              lower: str = "p-1") -> CheckResult:
    """Two-sided bound on the log-derivative of theta^(q-1) on a window.

    Raises HypothesisViolatedError when |f'| <= a or |g'(alpha)| <= b fails there.
    """
    spec = profile.spec
    r, al = np.asarray(profile.r), np.asarray(profile.alpha)
    m = _window_mask(r, window)
    if m.sum() < 3:
        raise WindowTooShortError(f"window {window} holds fewer than 3 nodes")
    fp = np.abs(np.asarray(spec.f.deriv(r[m])))
    gp = np.abs(np.asarray(spec.g.deriv(al[m])))
    if np.any(fp > a * (1 + SLACK)):
        raise HypothesisViolatedError(f"|f'| reaches {fp.max():.6g} > a = {a:g} on {window}")
    if np.any(gp > b * (1 + SLACK)):
        raise HypothesisViolatedError(f"|g'(alpha)| reaches {gp.max():.6g} > b = {b:g} on {window}")
    logd = (spec.q - 1.0) * np.gradient(np.log(profile.theta), r)
    idx = np.nonzero(m)[0]
    idx = idx[(idx > 0) & (idx < len(r) - 1)]
    lo, hi = energy_slope_bounds(spec, a, b, np.asarray(spec.f.eval(r[idx])), lower)
    L = logd[idx]
    if spec.p == 2.0:
        margin = np.full(len(idx), math.inf)
    else:
        margin = np.minimum((L - lo) / np.abs(lo), (hi - L) / np.abs(hi))
    bad = np.nonzero(margin < -rel_slack)[0]
    first = float(r[idx[bad[0]]]) if bad.size else None
    worst = float(margin.min()) if len(margin) else math.nan
    return CheckResult("energy_slope", not bad.size, worst, first,
                       note=f"relative margin to the nearer bound (lower form {lower}); slack {rel_slack:g}")


def _require_power_pair(spec: ProblemSpec, strict=False):
    mf, mg = _power_index(spec.f), _power_index(spec.g)
    if mf is None or mf != mg or (strict and mf <= 1.0):
        raise WrongFamilyError(f"needs f = g = r^m; got {spec.f.label} and {spec.g.label}")
    return mf


def check_cone_bound(profile: SolutionProfile, c: float) -> CheckResult:
    if not (0 < c <= 1):
        raise ValueError("c must lie in (0, 1]")
    _require_power_pair(profile.spec)
    r, a = profile.r, profile.alpha
    limit = c * r * (1 + SLACK)
    bad = np.nonzero(a > limit)[0]
    margin = float(np.min((c * r - a) / (c * r)))
    first = float(r[bad[0]]) if bad.size else None
    return CheckResult("cone_bound", not bad.size, margin, first, note=f"alpha <= {c:g} r")


def check_cone_separation(profile: SolutionProfile, c: float) -> CheckResult:
    """alpha - c r changes sign at most once, so its sign is constant beyond
    some r_c (reported in the note)."""
    _require_power_pair(profile.spec)
    r, a = profile.r, profile.alpha
    d = a - c * r
    sgn = np.where(np.abs(d) <= SLACK * (1 + c * r), 0, np.sign(d))
    nz = np.nonzero(sgn)[0]
    if not nz.size:
        return CheckResult("cone_separation", True, 0.0, note=f"alpha = {c:g} r at every node")
    s = sgn[nz]
    flips = np.nonzero(s[1:] != s[:-1])[0]
    r_c = float(r[nz[flips[-1] + 1]]) if flips.size else float(r[nz[0]])
    ok = flips.size <= 1
    first = None if ok else float(r[nz[flips[1] + 1]])
    return CheckResult("cone_separation", bool(ok), float(1 - flips.size), first,
                       note=f"{flips.size} sign change(s) of alpha - {c:g} r; constant beyond r = {r_c:.6g}")


def energy_floor(n: int, C2: float, C: float) -> float:
    return (1.0 / (8.0 * (n - 1) * C2 * C * C)) ** 2


def check_energy_floor(profile: SolutionProfile, C2: float, C: float, a: Optional[float] = None) -> CheckResult:
    """theta >= (1/(8(n-1) C2 C^2))^2 beyond the first node where alpha >= 1.

    Verifies the two-sided exponential bound on f (and f') with rate ``a`` and
    constant C for r >= 1, and g' <= C2 g for y >= 1 over the profile's range.
    """
    spec = profile.spec
    if a is None:
        a = _exp_rate(spec.f)
        if a is None:
            raise WrongFamilyError(f"source {spec.f.label} has no exponential rate")
    report = classify_regime(profile)
    if not is_unbounded(report, profile):
        raise NotApplicableError(f"profile classified {report.regime}; the floor applies to unbounded solutions")
    r, al, th = profile.r, profile.alpha, profile.theta
    above = np.nonzero(al >= 1.0)[0]
    if not above.size:
        raise NotApplicableError("alpha never reaches 1")
    i0 = int(above[0])
    r_check = r[r >= 1.0]
    if r_check.size:
        ok, worst = check_exp_growth(spec.f, a, C, r_check)
        if not ok:
            raise HypothesisViolatedError(f"f violates the exponential bound with a={a:g}, C={C:g} (log margin {worst:.3g})")
    y = np.geomspace(1.0, max(float(al.max()), 1.0 + 1e-12), 400)
    ok, worst = check_log_derivative_bound(spec.g, C2, y)
    if not ok:
        raise HypothesisViolatedError(f"g' <= C2 g fails with C2={C2:g} (slack {worst:.3g})")
    delta = energy_floor(spec.n, C2, C)
    tail = th[i0:]
    bad = np.nonzero(tail < delta * (1 - SLACK))[0]
    first = float(r[i0 + bad[0]]) if bad.size else None
    return CheckResult("energy_floor", not bad.size, float(tail.min() / delta - 1.0), first,
                       note=f"floor {delta:.6g} from r = {r[i0]:.6g}")


@dataclass
class VanishingOrder:
    k: float
    threshold: int
    flagged: bool
    window: tuple[float, float]


def vanishing_order(profile: SolutionProfile, min_nodes: int = 5) -> VanishingOrder:
    """Slope of log alpha against log r over the smallest decade of the grid.

    ``flagged`` marks orders above 2n - 1, which only the trivial solution can have.
    """
    r, a = np.asarray(profile.r), np.asarray(profile.alpha)
    pos = (r > 0) & (a > 0)
    r0 = float(r[pos][0]) if pos.any() else math.nan
    window = (r0, 10.0 * r0)
    m = pos & _window_mask(r, window)
    if m.sum() < min_nodes:
        raise WindowTooShortError(f"smallest decade {window} holds {int(m.sum())} nodes; need {min_nodes}")
    k = float(np.polyfit(np.log(r[m]), np.log(a[m]), 1)[0])
    thr = 2 * profile.spec.n - 1
    return VanishingOrder(k, thr, k > thr, window)


def check_vanishing_order(profile: SolutionProfile, tol: float = 0.01) -> CheckResult:
    vo = vanishing_order(profile)
    ok = (not vo.flagged) and abs(vo.k - 1.0) < tol
    return CheckResult("vanishing_order", ok, tol - abs(vo.k - 1.0),
                       note=f"k = {vo.k:.6f} on {vo.window[0]:.3g}..{vo.window[1]:.3g}; limit 2n-1 = {vo.threshold}")


def check_barrier(profile: SolutionProfile) -> CheckResult:
    """Once alpha and alpha' both sit on one side of the identity beyond ln(3)/2,
    they stay there, with the gap never shrinking below its value at that node."""
    spec = profile.spec
    if not _is_hyperbolic_pair(spec):
        raise WrongFamilyError("barrier invariance applies to hyperbolic-to-hyperbolic maps")
    r, a, ap = profile.r, profile.alpha, profile.alpha_prime
    i, side = _decisive_probe(r, a, ap)
    if i is None or side == "identity":
        return CheckResult("barrier", True, skipped=i is None,
                           note="no decisive probe" if i is None else "profile follows the identity")
    gap0 = abs(a[i] - r[i])
    later = slice(i + 1, None)
    tol_a = SLACK * (1 + np.abs(a[later]))
    tol_s = SLACK * (1 + np.abs(ap[later]))
    if side == "above":
        m_gap = (a[later] - r[later]) - gap0 + tol_a
        m_slope = ap[later] - 1.0 + tol_s
    else:
        m_gap = (r[later] - a[later]) - gap0 + tol_a
        m_slope = 1.0 - ap[later] + tol_s
    margin = np.minimum(m_gap, m_slope)
    bad = np.nonzero(margin < 0)[0]
    first = float(r[i + 1 + bad[0]]) if bad.size else None
    return CheckResult("barrier", not bad.size, float(margin.min()) if margin.size else math.inf, first,
                       note=f"{side} the identity from r_o = {r[i]:.6g} with gap {gap0:.6g}")


def check_no_recrossing(profile: SolutionProfile) -> CheckResult:
    spec = profile.spec
    if not _is_hyperbolic_pair(spec):
        raise WrongFamilyError("no-recrossing applies to hyperbolic-to-hyperbolic maps")
    r, a, ap = profile.r, profile.alpha, profile.alpha_prime
    i, side = _decisive_probe(r, a, ap)
    if i is None:
        return CheckResult("no_recrossing", True, skipped=True, note="no decisive probe")
    d = a[i:] - r[i:]
    tol = SLACK * (1 + np.abs(a[i:]))
    s = np.where(np.abs(d) <= tol, 0, np.sign(d))
    nz = s[s != 0]
    ok = nz.size == 0 or np.all(nz == nz[0])
    first = None
    if not ok:
        j = int(np.nonzero(s != nz[0])[0][0])
        first = float(r[i + j])
    return CheckResult("no_recrossing", bool(ok), float(np.min(np.abs(d))) if side != "identity" else 0.0, first)
