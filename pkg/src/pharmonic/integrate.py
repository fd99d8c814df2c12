"""Continuation of solutions to large r with an embedded Dormand-Prince 5(4) pair."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import DegenerateStateError, MonotonicityError
from .ode import ProblemSpec, StatePoint, accel, density
from .startup import EPSILON_HINT, LocalSolution, picard_solve

# Dormand-Prince 5(4) tableau.
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_E = [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]


def _float_row_sum(row):
    s = 0.0
    for x in row:
        s = s + x
    return s


# Nodes are the floating-point row sums so that a stage built from constant
# slopes lands exactly on r + c_i h; the last weight is adjusted so the
# fifth-order weights sum to exactly 1.0 in the evaluation order used below.
_C = [_float_row_sum(row) for row in _A]
_B = list(_A[6])
_B[5] = 1.0 - _float_row_sum(_B[:5])
_A[6] = _B
_C[6] = _float_row_sum(_B)
assert _C[6] == 1.0


class TerminationKind(str, enum.Enum):
    REACHED_RMAX = "ReachedRMax"
    DERIVATIVE_BLOWUP = "DerivativeBlowUp"
    ENERGY_DEGENERATE = "EnergyDegenerate"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class TerminationEvent:
    kind: TerminationKind
    r: float

    def __str__(self):
        if self.kind is TerminationKind.REACHED_RMAX:
            return self.kind.value
        return f"{self.kind.value}({self.r:.17g})"

    def to_dict(self):
        return {"kind": self.kind.value, "r": self.r}

    @classmethod
    def from_dict(cls, d):
        return cls(TerminationKind(d["kind"]), float(d["r"]))


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    min_step: float = math.inf
    rhs_evals: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class StartupSummary:
    alpha0: float
    epsilon: float
    phi0: float
    alpha_pp0: float
    iterations: int
    local_nodes: int

    def to_dict(self):
        return asdict(self)


@dataclass
class SolutionProfile:
    """Solution trajectory on a grid with termination metadata."""

    spec: ProblemSpec
    handoff_r: float
    r: np.ndarray
    alpha: np.ndarray
    alpha_prime: np.ndarray
    theta: np.ndarray
    termination: TerminationEvent
    stats: StepStats = field(default_factory=StepStats)
    startup: Optional[StartupSummary] = None
    trivial: bool = False

    @property
    def r_grid(self) -> np.ndarray:
        return self.r

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    def __len__(self):
        return len(self.r)

    @classmethod
    def from_arrays(cls, spec, r, alpha, alpha_prime, termination=None, **kw):
        r = np.asarray(r, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        alpha_prime = np.asarray(alpha_prime, dtype=float)
        if termination is None:
            termination = TerminationEvent(TerminationKind.REACHED_RMAX, float(r[-1]))
        kw.setdefault("handoff_r", float(r[0]))
        return cls(
            spec=spec,
            r=r,
            alpha=alpha,
            alpha_prime=alpha_prime,
            theta=density(spec, r, alpha, alpha_prime),
            termination=termination,
            **kw,
        )

    @classmethod
    def declared_trivial(cls, spec, r_max, nodes=200):
        r = np.geomspace(r_max * 1e-6, r_max, nodes)
        z = np.zeros_like(r)
        return cls(spec, float(r[0]), r, z, z.copy(), z.copy(),
                   TerminationEvent(TerminationKind.REACHED_RMAX, float(r_max)), trivial=True)


def output_grid(r_lo: float, r_hi: float, per_decade: int) -> np.ndarray:
    """Reporting nodes 10**(k/per_decade) strictly inside (r_lo, r_hi], plus r_hi."""
    k_lo = math.floor(math.log10(r_lo) * per_decade) + 1
    k_hi = math.ceil(math.log10(r_hi) * per_decade)
    nodes = 10.0 ** (np.arange(k_lo, k_hi + 1) / per_decade)
    nodes = nodes[(nodes > r_lo) & (nodes < r_hi)]
    return np.append(nodes, r_hi)


def _initial_step(rhs, r, y, f0, tol, sc_fn):
    sc = sc_fn(y, y)
    d0 = float(np.max(np.abs(y) / sc))
    d1 = float(np.max(np.abs(f0) / sc))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, 0.01 * r)
    y1 = y + h0 * f0
    f1 = rhs(r + h0, y1)
    d2 = float(np.max(np.abs(f1 - f0) / sc)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, 0.05 * r)


def integrate(
    spec: ProblemSpec,
    start: StatePoint,
    r_max: float,
    tol: float = 1e-10,
    *,
    per_decade: int = 200,
    blowup_cap: float = 1e12,
    h_min_rel: float = 1e-14,
    check_monotone: bool = True,
    max_steps: int = 2_000_000,
) -> SolutionProfile:
    """Integrate (alpha, alpha')' = (alpha', alpha'') from ``start`` to ``r_max``.

    Every accepted step is stored, and steps are clipped to land exactly on a
    log-spaced reporting grid with ``per_decade`` nodes per decade. The local
    error is measured against tol*(1+|alpha|) for alpha and tol*|alpha'| for
    alpha', so decaying slopes are resolved in relative terms.

    Integration stops early, recording the event, when |alpha'| exceeds
    ``blowup_cap``, the energy density drops to the degenerate floor, or the step
    falls below ``h_min_rel * r``. An accepted step with alpha' <= 0 raises
    MonotonicityError when ``check_monotone`` is set.
    """
    if not (start.alpha > 0):
        raise ValueError("start.alpha must be positive")
    if not r_max > start.r:
        raise ValueError("r_max must exceed the start radius")
    if not (1e-14 < tol < 1e-2):
        raise ValueError("tol must lie in (1e-14, 1e-2)")
    if check_monotone and not start.alpha_prime > 0:
        raise ValueError("start.alpha_prime must be positive for a nontrivial solution")
    theta0 = float(density(spec, start.r, start.alpha, start.alpha_prime))
    if theta0 <= spec.theta_min:
        raise ValueError("start state has degenerate energy density")

    stats = StepStats()

    def rhs(r, y):
        stats.rhs_evals += 1
        return np.array([y[1], accel(spec, r, y[0], y[1])])

    def scale(y, y_new):
        return np.array([
            tol * (1.0 + max(abs(y[0]), abs(y_new[0]))),
            tol * max(abs(y[1]), abs(y_new[1])) + 1e-300,
        ])

    targets = output_grid(start.r, r_max, per_decade)
    ti = 0
    r = start.r
    y = np.array([start.alpha, start.alpha_prime])
    rs, als, aps = [r], [y[0]], [y[1]]
    termination = None

    try:
        k1 = rhs(r, y)
    except DegenerateStateError:
        raise ValueError("start state is degenerate") from None
    h = _initial_step(rhs, r, y, k1, tol, scale)

    while termination is None:
        if stats.accepted + stats.rejected >= max_steps:
            termination = TerminationEvent(TerminationKind.STEP_UNDERFLOW, r)
            break
        target = targets[ti]
        clipped = r + h >= target
        h_try = target - r if clipped else h
        if h_try < h_min_rel * r:
            termination = TerminationEvent(TerminationKind.STEP_UNDERFLOW, r)
            break
        try:
            ks = [k1]
            for i in range(1, 7):
                row = _A[i]
                incr = row[0] * ks[0]
                for j in range(1, i):
                    incr = incr + row[j] * ks[j]
                yi = y + h_try * incr
                ks.append(rhs(r + _C[i] * h_try, yi))
            y_new = yi
            err_vec = h_try * sum(e * k for e, k in zip(_E, ks))
            err = float(np.max(np.abs(err_vec) / scale(y, y_new)))
            if not np.all(np.isfinite(y_new)) or not math.isfinite(err):
                err = math.inf
        except DegenerateStateError:
            termination = TerminationEvent(TerminationKind.ENERGY_DEGENERATE, r)
            break
        except (FloatingPointError, OverflowError, ZeroDivisionError):
            err = math.inf

        if err <= 1.0:
            r_new = r + h_try
            if clipped:
                ti += 1
            stats.accepted += 1
            stats.min_step = min(stats.min_step, h_try)
            r, y, k1 = r_new, y_new, ks[6]
            rs.append(r)
            als.append(y[0])
            aps.append(y[1])
            if abs(y[1]) > blowup_cap:
                termination = TerminationEvent(TerminationKind.DERIVATIVE_BLOWUP, r)
            elif check_monotone and not y[1] > 0:
                raise MonotonicityError(f"alpha' = {y[1]:.3g} <= 0 at r = {r:.17g}; integration error", r)
            elif density(spec, r, y[0], y[1]) < spec.theta_min:
                termination = TerminationEvent(TerminationKind.ENERGY_DEGENERATE, r)
            elif ti >= len(targets):
                termination = TerminationEvent(TerminationKind.REACHED_RMAX, r)
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            # a step shortened only to hit an output node should not shrink the next one
            h = max(h, h_try * factor) if clipped else h_try * factor
        else:
            stats.rejected += 1
            factor = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            h = h_try * factor

    r_arr, a_arr, ap_arr = np.array(rs), np.array(als), np.array(aps)
    return SolutionProfile(
        spec=spec,
        handoff_r=float(start.r),
        r=r_arr,
        alpha=a_arr,
        alpha_prime=ap_arr,
        theta=density(spec, r_arr, a_arr, ap_arr),
        termination=termination,
        stats=stats,
    )


def solve(
    spec: ProblemSpec,
    alpha0: Optional[float] = None,
    r_max: float = 20.0,
    tol: float = 1e-10,
    *,
    start: Optional[StatePoint] = None,
    epsilon_hint: float = EPSILON_HINT,
    **kw,
) -> SolutionProfile:
    """Solve from r = 0 with alpha'(0) = alpha0, or from an interior ``start``.

    From r = 0 the startup solver runs first and its nodes in (0, epsilon) are
    prepended to the continued profile; ``handoff_r`` records epsilon.
    """
    if (alpha0 is None) == (start is None):
        raise ValueError("give exactly one of alpha0 or start")
    if start is not None:
        return integrate(spec, start, r_max, tol, **kw)
    if alpha0 == 0:
        return SolutionProfile.declared_trivial(spec, r_max)
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    local = picard_solve(spec, alpha0, epsilon_hint)
    eps, a_eps, ap_eps = local.handoff()
    if r_max <= eps:
        raise ValueError(f"r_max={r_max} does not exceed the startup radius {eps}")
    prof = integrate(spec, StatePoint(eps, a_eps, ap_eps), r_max, tol, **kw)
    return attach_startup(prof, local)


def attach_startup(prof: SolutionProfile, local: LocalSolution) -> SolutionProfile:
    inner = slice(1, -1)  # drop r = 0 and epsilon, which the continuation already holds
    r_loc = local.grid[inner]
    a_loc = local.alpha[inner]
    ap_loc = local.alpha_prime[inner]
    spec = prof.spec
    prof.r = np.concatenate((r_loc, prof.r))
    prof.alpha = np.concatenate((a_loc, prof.alpha))
    prof.alpha_prime = np.concatenate((ap_loc, prof.alpha_prime))
    prof.theta = np.concatenate((density(spec, r_loc, a_loc, ap_loc), prof.theta))
    prof.handoff_r = local.epsilon
    prof.startup = StartupSummary(
        alpha0=local.alpha0,
        epsilon=local.epsilon,
        phi0=local.phi0,
        alpha_pp0=local.alpha_pp0,
        iterations=local.iterations,
        local_nodes=len(r_loc),
    )
    return prof
