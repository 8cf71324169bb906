"""Small dense solvers: a log-barrier interior-point method and power control.

The interior-point method handles problems of the form

    maximize    f(x)                       (f smooth and concave)
    subject to  A x <= b
                (c_i + d_i^T x)^2 <= e_i + f_i^T x

which covers every successive-convex-approximation subproblem built in
:mod:`fblbeam.algorithms`.  The power-control routines work on fixed
beamformers and rely on standard interference-function iterations.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .system import ChannelSet, duality_transfer, gain_matrix, mmse_beamformers, uplink_sinr
from .exceptions import InfeasibleError

__all__ = [
    "SmoothConvexProgram",
    "SolverReport",
    "solve_ipm",
    "FixedPointResult",
    "min_power_fixed_point",
    "maxmin_feasible",
    "bisect_maxmin",
]

log = logging.getLogger(__name__)


@dataclass
class SmoothConvexProgram:
    """Concave maximization with linear and convex quadratic inequalities.

    Parameters
    ----------
    dim : int
        Number of variables.
    objective : callable
        ``objective(x) -> (value, grad, hess)`` of the concave function to
        maximize.  ``hess`` may be a dense matrix or a 1-D diagonal.
    A, b : ndarray
        Linear rows ``A x <= b``.
    quad_c, quad_D, quad_e, quad_F : ndarray
        Quadratic rows ``(c + D x)^2 - (e + F x) <= 0``.
    lower, upper : ndarray, optional
        Box bounds, appended to the linear rows.
    layout : dict
        Free-form variable bookkeeping for callers.
    """

    dim: int
    objective: Callable
    A: np.ndarray = None
    b: np.ndarray = None
    quad_c: np.ndarray = None
    quad_D: np.ndarray = None
    quad_e: np.ndarray = None
    quad_F: np.ndarray = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    layout: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.dim
        A = np.zeros((0, n)) if self.A is None else np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        rows, rhs = [A], [b]
        eye = np.eye(n)
        if self.lower is not None:
            lo = np.asarray(self.lower, dtype=float)
            keep = np.isfinite(lo)
            rows.append(-eye[keep])
            rhs.append(-lo[keep])
        if self.upper is not None:
            up = np.asarray(self.upper, dtype=float)
            keep = np.isfinite(up)
            rows.append(eye[keep])
            rhs.append(up[keep])
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        # unit-norm rows keep barrier terms comparable
        norms = np.linalg.norm(A, axis=1)
        norms[norms == 0] = 1.0
        self._A = A / norms[:, None]
        self._b = b / norms
        if self.quad_c is None:
            self._qc = np.zeros(0)
            self._qD = np.zeros((0, n))
            self._qe = np.zeros(0)
            self._qF = np.zeros((0, n))
        else:
            self._qc = np.asarray(self.quad_c, dtype=float).reshape(-1)
            self._qD = np.atleast_2d(np.asarray(self.quad_D, dtype=float))
            self._qe = np.asarray(self.quad_e, dtype=float).reshape(-1)
            self._qF = np.atleast_2d(np.asarray(self.quad_F, dtype=float))
            # scale each row by the size of its affine right-hand side
            scale = np.maximum(np.abs(self._qe) + np.linalg.norm(self._qF, axis=1), 1e-300)
            self._qc = self._qc / np.sqrt(scale)
            self._qD = self._qD / np.sqrt(scale)[:, None]
            self._qe = self._qe / scale
            self._qF = self._qF / scale[:, None]

    @property
    def n_constraints(self) -> int:
        return self._A.shape[0] + self._qc.shape[0]

    def constraint_values(self, x) -> np.ndarray:
        """All constraint functions ``g_i(x)`` (feasible iff every entry <= 0)."""
        x = np.asarray(x, dtype=float)
        lin = self._A @ x - self._b
        u = self._qc + self._qD @ x
        quad = u * u - (self._qe + self._qF @ x)
        return np.concatenate([lin, quad])

    def max_violation(self, x) -> float:
        g = self.constraint_values(x)
        return float(g.max()) if g.size else -np.inf

    def _barrier_terms(self, x, slack_shift=0.0):
        # returns g (shifted), grad matrix rows, and quadratic curvature pieces
        lin = self._A @ x - self._b - slack_shift
        u = self._qc + self._qD @ x
        quad = u * u - (self._qe + self._qF @ x) - slack_shift
        return lin, u, quad


@dataclass
class SolverReport:
    x_star: np.ndarray
    obj: float
    iterations: int
    status: str
    gap: float = np.inf
    stage_objectives: list = field(default_factory=list)
    phase1_iterations: int = 0


def _as_hessian(h, n):
    h = np.asarray(h, dtype=float)
    return np.diag(h) if h.ndim == 1 else h


def _newton_direction(H, grad):
    try:
        cf = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(cf, -grad, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(H, -grad, rcond=None)[0]


def _barrier_newton(prog, x, t, objective, extra_slack=None, alpha=0.25, beta=0.5,
                    newton_tol=1e-10, max_newton=100, stop=None):
    """Centre ``t*(-f) - sum log(-g)`` starting from a strictly feasible x.

    ``extra_slack`` switches to the phase-I form where the last coordinate
    is the common slack ``s`` and constraints read ``g_i(x) <= s``.
    """
    A, qD, qF = prog._A, prog._qD, prog._qF
    n = prog.dim
    phase1 = extra_slack is not None

    def split(z):
        return (z[:n], z[n]) if phase1 else (z, 0.0)

    def value(z):
        xx, s = split(z)
        lin, u, quad = prog._barrier_terms(xx, s)
        if np.any(lin >= 0) or np.any(quad >= 0):
            return np.inf
        fval = s if phase1 else -objective(xx)[0]
        return t * fval - np.sum(np.log(-lin)) - np.sum(np.log(-quad))

    steps = 0
    for _ in range(max_newton):
        xx, s = split(x)
        lin, u, quad = prog._barrier_terms(xx, s)
        il = 1.0 / (-lin)
        iq = 1.0 / (-quad)
        gq = 2.0 * u[:, None] * qD - qF  # gradients of quadratic rows
        if phase1:
            grad_x = A.T @ il + gq.T @ iq
            H_x = (A.T * il ** 2) @ A + (gq.T * iq ** 2) @ gq + 2.0 * (qD.T * iq) @ qD
            # d/ds of -log(s - g) terms
            grad_s = t - np.sum(il) - np.sum(iq)
            cross = -(A.T @ il ** 2) - (gq.T @ iq ** 2)
            hss = np.sum(il ** 2) + np.sum(iq ** 2)
            grad = np.concatenate([grad_x, [grad_s]])
            H = np.empty((n + 1, n + 1))
            H[:n, :n] = H_x
            H[:n, n] = cross
            H[n, :n] = cross
            H[n, n] = hss
        else:
            fv, fg, fh = objective(xx)
            grad = -t * np.asarray(fg, dtype=float) + A.T @ il + gq.T @ iq
            H = (-t * _as_hessian(fh, n) + (A.T * il ** 2) @ A
                 + (gq.T * iq ** 2) @ gq + 2.0 * (qD.T * iq) @ qD)
        dx = _newton_direction(H, grad)
        dec = -grad @ dx
        if not np.isfinite(dec) or dec < 0:
            return x, steps, False
        f0 = value(x)
        # the barrier value carries roughly 1e-13 relative rounding noise
        floor = max(newton_tol, 1e-13 * abs(f0))
        if dec / 2.0 <= floor:
            return x, steps, True
        step = 1.0
        while True:
            cand = x + step * dx
            fc = value(cand)
            if fc <= f0 + alpha * step * (grad @ dx):
                break
            step *= beta
            if step < 1e-14:
                return x, steps, dec / 2.0 <= 1e3 * floor
        x = cand
        steps += 1
        if stop is not None and stop(x):
            return x, steps, True
    return x, steps, False


def _phase_one(prog, x0, margin, mu=10.0, max_stages=30):
    """Find a strictly feasible point by minimizing the common slack."""
    g0 = prog.max_violation(x0)
    z = np.concatenate([x0, [g0 + max(1.0, abs(g0))]])
    n = prog.dim
    iters = 0
    # start where the slack term already outweighs the barrier pull
    t = float(max(prog.n_constraints, 1))

    def done(zz):
        return zz[n] < -margin

    for _ in range(max_stages):
        z, k, ok = _barrier_newton(prog, z, t, None, extra_slack=True, stop=done)
        iters += k
        if done(z):
            return z[:n], iters, True
        if not ok:
            break
        if prog.n_constraints / t < 1e-12:
            break
        t *= mu
    x = z[:n]
    return x, iters, prog.max_violation(x) < 0.0


def solve_ipm(prog: SmoothConvexProgram, x0, t0: float = 1.0, mu: float = 10.0,
              gap_tol: float = 1e-9, alpha: float = 0.25, beta: float = 0.5,
              newton_tol: float = 1e-10, max_stages: int = 40,
              trace=None) -> SolverReport:
    """Log-barrier interior-point method.

    Starts from ``x0`` when it is strictly feasible; otherwise a phase-I
    problem looks for a strictly feasible point first.  Stages multiply the
    barrier weight by ``mu`` until ``m / t < gap_tol``.

    ``trace`` may be a writable text stream receiving one JSON object per
    barrier stage.
    """
    x = np.asarray(x0, dtype=float).copy()
    m = prog.n_constraints
    phase1 = 0
    if prog.max_violation(x) >= 0.0:
        x, phase1, ok = _phase_one(prog, x, margin=1e-9 * (1.0 + np.max(np.abs(x))))
        if not ok:
            return SolverReport(x_star=x, obj=float(prog.objective(x)[0]), iterations=phase1,
                                status="infeasible", phase1_iterations=phase1)
    t = t0
    total = phase1
    stage_obj = []
    status = "max-iter"
    for stage in range(max_stages):
        x, k, ok = _barrier_newton(prog, x, t, prog.objective, alpha=alpha, beta=beta,
                                   newton_tol=newton_tol)
        total += k
        fval = float(prog.objective(x)[0])
        stage_obj.append(fval)
        if trace is not None:
            trace.write(json.dumps({"stage": stage, "t": t, "newton": k,
                                    "objective": fval, "gap": m / t}) + "\n")
        if not ok:
            status = "max-iter"
            break
        if m / t < gap_tol:
            status = "optimal"
            break
        t *= mu
    return SolverReport(x_star=x, obj=float(prog.objective(x)[0]), iterations=total,
                        status=status, gap=m / t, stage_objectives=stage_obj,
                        phase1_iterations=phase1)


@dataclass
class FixedPointResult:
    """Outcome of an uplink power-control iteration."""

    w: np.ndarray
    q: np.ndarray
    feasible: bool
    iterations: int
    converged: bool = True

    @property
    def total_power(self) -> float:
        return float(np.sum(self.q))

    def __iter__(self):
        # allows ``w, q = min_power_fixed_point(...)``
        return iter((self.w, self.q))


def min_power_fixed_point(ch: ChannelSet, target: float, tol: float = 1e-10,
                          max_iter: int = 10_000, p_max: float = np.inf,
                          cap_factor: float = 1e6) -> FixedPointResult:
    """Minimal uplink powers meeting a common SINR target with MMSE receivers.

    Alternates MMSE receivers and the power update
    ``q_k <- target * (sum_{l != k} q_l G[l, k] + 1) / G[k, k]`` from ``q = 0``;
    the iterates increase monotonically to the minimal power vector.  The
    problem is declared infeasible when the total power exceeds
    ``cap_factor * p_max`` or the iteration does not settle.
    """
    if target <= 0:
        raise ValueError("SINR target must be positive")
    K = ch.k_users
    q = np.zeros(K)
    cap = cap_factor * p_max if np.isfinite(p_max) else np.inf
    w = mmse_beamformers(ch, q)
    for it in range(1, max_iter + 1):
        G = gain_matrix(ch, w)
        diag = np.diag(G)
        q_new = target * (q @ G - q * diag + 1.0) / diag
        change = np.max(np.abs(q_new - q) / q_new)
        q = q_new
        w = mmse_beamformers(ch, q)
        if not np.all(np.isfinite(q)) or q.sum() > cap:
            return FixedPointResult(w=w, q=q, feasible=False, iterations=it, converged=False)
        if change < tol:
            break
    else:
        return FixedPointResult(w=w, q=q, feasible=False, iterations=max_iter, converged=False)
    # exact powers for the final receivers
    try:
        q = duality_transfer(ch, w, np.full(K, target), direction="uplink")
    except InfeasibleError:
        return FixedPointResult(w=w, q=q, feasible=False, iterations=it, converged=False)
    return FixedPointResult(w=w, q=q, feasible=True, iterations=it)


def maxmin_feasible(ch: ChannelSet, w, mu: float, P: float, tol: float = 1e-13,
                    max_iter: int = 100_000, G=None):
    """Minimal uplink powers giving every stream SINR ``mu`` within budget ``P``.

    Returns the power vector, or ``None`` when the level is infeasible.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if G is None:
        G = gain_matrix(ch, w)
    diag = np.diag(G)
    off = G - np.diag(diag)
    q = np.zeros(ch.k_users)
    for _ in range(max_iter):
        q_new = mu * (q @ off + 1.0) / diag
        if q_new.sum() > P * (1.0 + 1e-12):
            return None
        converged = np.max(np.abs(q_new - q)) <= tol * np.max(q_new)
        q = q_new
        if converged:
            break
    else:
        return None
    # polish to the exact fixed point of the affine map
    M = -off.T.copy()
    M[np.diag_indices_from(M)] = diag / mu
    try:
        q_exact = np.linalg.solve(M, np.ones(ch.k_users))
    except np.linalg.LinAlgError:
        return q
    if np.all(q_exact > 0) and q_exact.sum() <= P * (1.0 + 1e-12):
        return q_exact
    return q


def bisect_maxmin(ch: ChannelSet, w, P: float, mu_lo: float, mu_hi: float,
                  tol: float = 1e-8):
    """Largest common uplink SINR reachable with beams ``w`` and budget ``P``.

    Returns ``(mu_star, q)``.

    Raises
    ------
    ValueError
        If ``mu_lo`` is not feasible.
    """
    G = gain_matrix(ch, w)
    q_lo = maxmin_feasible(ch, w, mu_lo, P, G=G)
    if q_lo is None:
        raise ValueError(f"lower bracket mu={mu_lo:g} is infeasible")
    if maxmin_feasible(ch, w, mu_hi, P, G=G) is not None:
        raise ValueError(f"upper bracket mu={mu_hi:g} is feasible")
    lo, hi = mu_lo, mu_hi
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        q = maxmin_feasible(ch, w, mid, P, G=G)
        if q is None:
            hi = mid
        else:
            lo, q_lo = mid, q
    return lo, q_lo
