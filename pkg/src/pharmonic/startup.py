"""Startup solver for the singular initial value problem at r = 0.

With alpha = r z and v = sqrt(r) z', a solution with alpha'(0) = alpha0 satisfies
r z'' + (n+1) z' = (n-1) Phi(r, v, z). Integrating twice from 0 gives the fixed
point system

    z(r) = alpha0 + (n-1)/n * int_0^r (1 - s^n/r^n) Phi ds
    v(r) = (n-1) * int_0^r s^n / r^(n+1/2) Phi ds

which is solved by plain Picard iteration on a geometric grid clustered at 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NonContractionError, StartupNotAdmissibleError
from .ode import ProblemSpec, euler_lagrange_residual

GRID_RATIO = 1.2
GRID_DEPTH = 1e-6
TOL_FIX = 1e-12
MAX_ITER = 200
EPS_MIN = 1e-10
EPSILON_HINT = 0.05
STALL_RATIO = 0.5
STALL_ITERS = 3
STALL_CEILING = 1e-9


def _require_admissible(spec: ProblemSpec):
    for name, w in (("source", spec.f), ("target", spec.g)):
        if not w.startup_admissible:
            raise StartupNotAdmissibleError(
                f"{name} warp {w.label} has f'(0) != 1 and cannot start at r = 0; "
                "give an interior start instead"
            )


def _a_coefficient(spec: ProblemSpec, s, w, ratio, dg, fr, dfr):
    # (Theta'/Theta) with alpha'' eliminated, Theta = theta^(q-1)
    n, q = spec.n, spec.q
    num = (2.0 * ratio * dg * w - dfr * w * w - ratio * ratio * dfr) / fr
    den = (2.0 * q - 1.0) * w * w + (n - 1) * ratio * ratio
    return 2.0 * (q - 1.0) * (n - 1) * num / den


def _phi_limit(spec: ProblemSpec, v, z):
    n, q = spec.n, spec.q
    f1, g1 = spec.f.taylor_c2, spec.g.taylor_c2
    a0 = 2.0 * (q - 1.0) * (n - 1) * (-v * v + 4.0 * g1 * z**3 - 4.0 * f1 * z * z) / ((2.0 * q + n - 2.0) * z * z)
    return -f1 * z - a0 * z / (n - 1) + 3.0 * g1 * z * z - 2.0 * f1 * z


def phi(spec: ProblemSpec, s, v, z):
    """Integrand Phi(s, v, z) of the startup fixed-point system.

    Vectorized over numpy arrays. At s = 0 the removable singularities are
    replaced by their limits, which depend on the Taylor coefficients of f, g.
    """
    s, v, z = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s, v, z)))
    if np.any(z <= 0):
        raise ValueError("phi needs z > 0")
    if np.any(s < 0):
        raise ValueError("phi needs s >= 0")
    out = np.empty(s.shape)
    zero = s == 0.0
    if np.any(zero):
        _require_admissible(spec)
        out[zero] = _phi_limit(spec, v[zero], z[zero])
    pos = ~zero
    if np.any(pos):
        sp, vp, zp = s[pos], v[pos], z[pos]
        rs = np.sqrt(sp)
        w = rs * vp + zp
        fr = np.asarray(spec.f.eval(sp))
        dfr = np.asarray(spec.f.deriv(sp))
        ratio = np.asarray(spec.g.eval(sp * zp)) / fr
        dg = np.asarray(spec.g.deriv(sp * zp))
        # (1/s - f'/f) w + (g g'/f^2 - z/s), regrouped so that w - z = sqrt(s) v
        # is formed exactly and identity maps cancel inside the bracket
        bracket = (ratio * dg - dfr * w) / fr
        A = _a_coefficient(spec, sp, w, ratio, dg, fr, dfr)
        out[pos] = vp / rs + bracket - A * w / (spec.n - 1)
    return out if out.ndim else float(out)


def initial_curvature(spec: ProblemSpec, alpha0: float) -> tuple[float, float, float]:
    """Startup values (Phi0, z'(0), alpha''(0)) determined by the Taylor data.

    Matching the series alpha = alpha0 r + c r^2 + ... in the equation gives
    Phi0 = (3n - 2q + 2) alpha0 (g1 alpha0 - f1) / (2q + n - 2),
    z'(0) = (n-1)/(n+1) Phi0 and alpha''(0) = 2 z'(0).
    """
    _require_admissible(spec)
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    n, q = spec.n, spec.q
    f1, g1 = spec.f.taylor_c2, spec.g.taylor_c2
    phi0 = (3 * n - 2 * q + 2) * alpha0 * (g1 * alpha0 - f1) / (2 * q + n - 2)
    zp0 = (n - 1) / (n + 1) * phi0
    return phi0, zp0, 2.0 * zp0


def alt_initial_curvature(spec: ProblemSpec, alpha0: float) -> tuple[float, float, float]:
    """Alternative closed form with coefficients (n-1)(n-2q+2) on g1 and
    (4nq - 2n^2 - 2q - n + 2) on f1. It does not vanish on identity maps with
    f1 = g1 != 0 and disagrees with the converged startup solution; kept for comparison only.
    """
    n, q = spec.n, spec.q
    f1, g1 = spec.f.taylor_c2, spec.g.taylor_c2
    phi0 = ((n - 1) * (n - 2 * q + 2) * g1 * alpha0**2 + (4 * n * q - 2 * n * n - 2 * q - n + 2) * f1 * alpha0) / (
        2 * q + n - 2
    )
    zp0 = (n - 1) / (n + 1) * phi0
    return phi0, zp0, 2.0 * zp0


_GL4 = leggauss(4)
_GL_MOM = leggauss(16)


def _lagrange_basis(t, nodes):
    # L[k, i] = l_i(t_k)
    t = np.asarray(t)[..., None]
    out = np.ones(t.shape[:-1] + (len(nodes),))
    for i, ti in enumerate(nodes):
        for j, tj in enumerate(nodes):
            if i != j:
                out[..., i] *= (t[..., 0] - tj) / (ti - tj)
    return out


class _Quadrature:
    """Cumulative moment weights for piecewise-cubic Phi on a graded grid."""

    def __init__(self, epsilon: float, n: int):
        cells = int(math.ceil(math.log(1.0 / GRID_DEPTH) / math.log(GRID_RATIO)))
        self.nodes = np.concatenate(([0.0], epsilon * np.geomspace(GRID_DEPTH, 1.0, cells + 1)))
        self.nodes[-1] = epsilon
        self.n = n
        self.lo, self.hi = self.nodes[:-1], self.nodes[1:]
        self.width = self.hi - self.lo
        t4, _ = _GL4
        self.t4 = t4
        self.points = self.lo[:, None] + 0.5 * (t4[None, :] + 1.0) * self.width[:, None]
        self.full = self._partial(np.arange(len(self.lo)), np.ones(len(self.lo)))
        # partial moments from each cell start to each of its quadrature points
        cell_idx = np.repeat(np.arange(len(self.lo)), 4)
        tm = np.tile(t4, len(self.lo))
        part = self._partial(cell_idx, tm)
        self.part = {k: part[k].reshape(len(self.lo), 4, 4) for k in (0, n)}

    def _partial(self, cell, t_end):
        # int_{lo}^{s(t_end)} s^k l_i(s) ds for k in {0, n}; returns {k: (m, 4)}
        tg, wg = _GL_MOM
        cell = np.asarray(cell)
        t_end = np.asarray(t_end, dtype=float)
        scale = 0.5 * (t_end + 1.0)
        tt = -1.0 + (tg[None, :] + 1.0) * scale[:, None]  # reference coords, (m, 16)
        basis = _lagrange_basis(tt, self.t4)  # (m, 16, 4)
        s = self.lo[cell][:, None] + 0.5 * (tt + 1.0) * self.width[cell][:, None]
        jac = (scale * 0.5 * self.width[cell])[:, None]
        out = {}
        for k in (0, self.n):
            wk = wg[None, :] * s**k * jac
            out[k] = np.einsum("mg,mgi->mi", wk, basis)
        return out

    def cumulative(self, phi_q):
        """Moments I_0, I_n at all quadrature points (cells, 4) and at all nodes."""
        res_q, res_nodes = {}, {}
        for k in (0, self.n):
            per_cell = np.sum(self.full[k] * phi_q, axis=1)
            before = np.concatenate(([0.0], np.cumsum(per_cell)))
            res_nodes[k] = before
            res_q[k] = before[:-1, None] + np.einsum("cmi,ci->cm", self.part[k], phi_q)
        return res_q, res_nodes

    def moments_at(self, r, phi_q):
        """Moments I_0, I_n at arbitrary points r in (0, epsilon]."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        cell = np.clip(np.searchsorted(self.nodes, r, side="left") - 1, 0, len(self.lo) - 1)
        t = 2.0 * (r - self.lo[cell]) / self.width[cell] - 1.0
        part = self._partial(cell, t)
        out = {}
        for k in (0, self.n):
            per_cell = np.sum(self.full[k] * phi_q, axis=1)
            before = np.concatenate(([0.0], np.cumsum(per_cell)))
            out[k] = before[cell] + np.einsum("mi,mi->m", part[k], phi_q[cell])
        return out


def _apply_t(n, alpha0, s, moments):
    i0, i_n = moments[0], moments[n]
    z = alpha0 + (n - 1) / n * (i0 - i_n / s**n)
    v = (n - 1) * i_n / s ** (n + 0.5)
    return z, v


def _deviation(n, s, moments):
    # z - alpha0 without the rounding of alpha0
    return (n - 1) / n * (moments[0] - moments[n] / s**n)


@dataclass
class LocalSolution:
    """Converged startup solution on (0, epsilon]."""

    spec: ProblemSpec
    alpha0: float
    epsilon: float
    grid: np.ndarray
    z_values: np.ndarray
    v_values: np.ndarray
    phi0: float
    alpha_pp0: float
    iterations: int
    converged: bool
    last_change: float
    _quad: _Quadrature = field(repr=False)
    _phi_q: np.ndarray = field(repr=False)

    @property
    def z_prime0(self) -> float:
        return self.alpha_pp0 / 2.0

    @property
    def alpha(self) -> np.ndarray:
        return self.grid * self.z_values

    @property
    def alpha_prime(self) -> np.ndarray:
        return np.sqrt(self.grid) * self.v_values + self.z_values

    def zv(self, r):
        """Evaluate (z, v) anywhere in [0, epsilon] from the converged integrand."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or np.any(r > self.epsilon * (1 + 1e-14)):
            raise ValueError("startup solution is only defined on [0, epsilon]")
        z = np.full(r.shape, self.alpha0)
        v = np.zeros(r.shape)
        pos = r > 0
        if np.any(pos):
            mom = self._quad.moments_at(r[pos], self._phi_q)
            z[pos], v[pos] = _apply_t(self.spec.n, self.alpha0, r[pos], mom)
        return z, v

    def alpha_at(self, r):
        z, _ = self.zv(r)
        return np.asarray(r) * z

    def deviation_at(self, r):
        """alpha(r) - alpha0 r, computed without cancellation."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r <= 0) or np.any(r > self.epsilon * (1 + 1e-14)):
            raise ValueError("deviation is evaluated on (0, epsilon]")
        return r * _deviation(self.spec.n, r, self._quad.moments_at(r, self._phi_q))

    def alpha_prime_at(self, r):
        z, v = self.zv(r)
        return np.sqrt(np.asarray(r)) * v + z

    def handoff(self) -> tuple[float, float, float]:
        """(epsilon, alpha(epsilon), alpha'(epsilon))."""
        return self.epsilon, float(self.grid[-1] * self.z_values[-1]), float(self.alpha_prime[-1])

    def fd_alpha_pp0(self) -> float:
        """alpha''(0) by finite differences of alpha = r z with two Richardson steps."""
        h = self.epsilon / 8.0

        def d(hh):
            u1, u2 = self.deviation_at([hh, 2 * hh]) / np.array([hh, 2 * hh])
            return 2.0 * (u2 - u1) / hh

        r1 = [2 * d(hh / 2) - d(hh) for hh in (h, h / 2)]
        return (4 * r1[1] - r1[0]) / 3.0

    def fixed_point_residuals(self, lower_fraction: float = 0.1, rel_step: float = 0.005):
        """Residual of the equation at grid nodes in [lower_fraction*eps, eps],
        with alpha'' from a fourth-order finite difference of alpha = r z
        (centered 5-point, or one-sided 6-point next to epsilon).

        The difference is applied to alpha - alpha0 r, which has the same second
        derivative but carries no rounding from the linear part."""
        r = self.grid[self.grid >= lower_fraction * self.epsilon * (1 - 1e-12)]
        out = np.empty(len(r))
        for i, ri in enumerate(r):
            h = rel_step * ri
            offs = np.arange(-2, 3) if ri + 2 * h <= self.epsilon else np.arange(-5, 1)
            app = float(np.dot(_fd2_weights(offs), self.deviation_at(ri + offs * h))) / (h * h)
            a = float(self.alpha_at(ri)[0])
            ap = float(self.alpha_prime_at(ri)[0])
            out[i] = euler_lagrange_residual(self.spec, ri, a, ap, app)
        return r, out


def _fd2_weights(offsets):
    # weights w with sum w_k f(x + k h) = h^2 f''(x) + O(h^len)
    offs = np.asarray(offsets, dtype=float)
    m = len(offs)
    vander = np.vander(offs, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[2] = 2.0
    return np.linalg.solve(vander, rhs)


def _run(spec, alpha0, epsilon, initial, tol_fix, max_iter):
    quad = _Quadrature(epsilon, spec.n)
    s_q = quad.points
    if initial is None:
        z_q, v_q = np.full(s_q.shape, alpha0), np.zeros(s_q.shape)
    else:
        z0, v0 = initial
        z_q = np.broadcast_to(np.asarray(z0(s_q) if callable(z0) else z0, dtype=float), s_q.shape).copy()
        v_q = np.broadcast_to(np.asarray(v0(s_q) if callable(v0) else v0, dtype=float), s_q.shape).copy()
    change = math.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        if np.any(np.abs(z_q - alpha0) > alpha0 / 2) or np.any(np.abs(v_q) > 1.0) or np.any(z_q <= 0):
            return None, it - 1, change, "left S"
        phi_q = phi(spec, s_q, v_q, z_q)
        mom_q, _ = quad.cumulative(phi_q)
        z_new, v_new = _apply_t(spec.n, alpha0, s_q, mom_q)
        if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(v_new))):
            return None, it, change, "non-finite iterate"
        prev = change
        change = float(max(np.max(np.abs(z_new - z_q)), np.max(np.abs(v_new - v_q))))
        z_q, v_q = z_new, v_new
        # near s = 0, Phi carries rounding of order eps_mach/s, which puts a floor
        # under the change in v; stop once the iteration has stopped contracting there
        stalled = stalled + 1 if change > STALL_RATIO * prev else 0
        if change < tol_fix or (stalled >= STALL_ITERS and change < STALL_CEILING):
            phi_q = phi(spec, s_q, v_q, z_q)
            return (quad, phi_q), it, change, "converged"
    return None, max_iter, change, "max_iter"


def picard_solve(
    spec: ProblemSpec,
    alpha0: float,
    epsilon_hint: float = EPSILON_HINT,
    *,
    tol_fix: float = TOL_FIX,
    max_iter: int = MAX_ITER,
    eps_min: float = EPS_MIN,
    initial=None,
) -> LocalSolution:
    """Solve the startup fixed-point system on (0, epsilon].

    Parameters
    ----------
    spec : ProblemSpec
        Both warps must be startup-admissible.
    alpha0 : float
        Initial slope alpha'(0) > 0.
    epsilon_hint : float
        Upper bound for epsilon; the solver starts from min(epsilon_hint, alpha0^2/8)
        and halves epsilon whenever an iterate leaves the set
        |z - alpha0| <= alpha0/2, |v| <= 1 or the iteration stalls.
    initial : tuple, optional
        Initial iterate (z0, v0), each a constant or a callable of s.

    Raises
    ------
    NonContractionError
        If epsilon drops below ``eps_min`` without convergence.
    """
    _require_admissible(spec)
    if not (alpha0 > 0 and math.isfinite(alpha0)):
        raise ValueError(f"alpha0 must be positive and finite, got {alpha0}")
    if not epsilon_hint > 0:
        raise ValueError("epsilon_hint must be positive")
    epsilon = min(epsilon_hint, alpha0 * alpha0 / 8.0)
    last_change, reason = math.inf, ""
    while epsilon >= eps_min:
        result, iters, last_change, reason = _run(spec, alpha0, epsilon, initial, tol_fix, max_iter)
        if result is not None:
            quad, phi_q = result
            nodes = quad.nodes
            z_nodes, v_nodes = np.empty(len(nodes)), np.empty(len(nodes))
            z_nodes[0], v_nodes[0] = alpha0, 0.0
            mom = quad.cumulative(phi_q)[1]
            z_nodes[1:], v_nodes[1:] = _apply_t(spec.n, alpha0, nodes[1:], {k: m[1:] for k, m in mom.items()})
            phi0, _, app0 = initial_curvature(spec, alpha0)
            return LocalSolution(
                spec=spec,
                alpha0=float(alpha0),
                epsilon=float(epsilon),
                grid=nodes,
                z_values=z_nodes,
                v_values=v_nodes,
                phi0=phi0,
                alpha_pp0=app0,
                iterations=iters,
                converged=True,
                last_change=last_change,
                _quad=quad,
                _phi_q=phi_q,
            )
        epsilon /= 2.0
    raise NonContractionError(
        f"startup iteration did not converge ({reason}); last sup-norm change {last_change:.3g}",
        last_change=last_change,
        epsilon=epsilon,
    )

