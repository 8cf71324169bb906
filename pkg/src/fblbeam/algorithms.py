"""Beamforming optimizers for the finite-blocklength multiuser downlink.

Every optimizer designs the dual uplink (uplink powers ``q`` and MMSE
receivers) and converts the result to downlink powers at the end.  Three
objectives are covered:

* weighted sum rate, by successive convex approximation (SCA) of the
  power-allocation step alternated with MMSE beamformer updates;
* energy efficiency, by Dinkelbach iterations on top of the same SCA;
* max-min rate, by bisection over the common SINR level.

The SCA subproblem lifts the uplink SINRs into lower/upper surrogates
``phi <= sinr <= phi_hat``, a dispersion surrogate ``psi`` with its square
root bound ``theta``, and relaxes the bilinear products ``phi_k q_l`` and
``phi_hat_k q_l`` with McCormick envelopes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convex import SmoothConvexProgram, bisect_maxmin, min_power_fixed_point, solve_ipm
from .exceptions import InfeasibleError
from .rate import RateRegime, make_regime, rate
from .system import (
    BeamSolution,
    ChannelSet,
    PowerModel,
    downlink_sinr,
    duality_transfer,
    evaluate,
    gain_matrix,
    mmse_beamformers,
    uplink_sinr,
    zf_beamformers,
)

__all__ = [
    "SolveOptions",
    "InitResult",
    "ScaState",
    "initialize",
    "build_sca_subproblem",
    "interior_start",
    "srmax",
    "eemax",
    "maxmin",
    "zfbf_baseline",
    "shannon_baselines",
    "dispersion_surrogate",
]

log = logging.getLogger(__name__)


def dispersion_surrogate(x):
    """``1 - (1 + x)^-2``."""
    x = np.asarray(x, dtype=float)
    return 1.0 - 1.0 / (1.0 + x) ** 2


@dataclass
class SolveOptions:
    """Knobs shared by the optimizers.

    Parameters
    ----------
    alpha : array_like, optional
        Non-negative user weights; ``1/K`` each when omitted.  Ignored by
        :func:`maxmin`.
    eps_conv : float
        Relative tolerance of every convergence test.
    max_outer, max_inner, max_dinkelbach : int
        Iteration caps for beamformer updates, SCA linearizations and
        Dinkelbach parameter updates.
    shannon_mode : bool
        Solve with the infinite-blocklength rate instead.
    ipm_gap_tol : float
        Barrier gap at which each subproblem solve stops.
    trace_stream : file-like, optional
        Receives one JSON object per inner and outer iteration.
    """

    alpha: Optional[np.ndarray] = None
    eps_conv: float = 1e-4
    max_outer: int = 30
    max_inner: int = 50
    max_dinkelbach: int = 30
    shannon_mode: bool = False
    ipm_gap_tol: float = 1e-9
    trace_stream: object = None

    def weights(self, k_users: int) -> np.ndarray:
        if self.alpha is None:
            return np.full(k_users, 1.0 / k_users)
        a = np.asarray(self.alpha, dtype=float).reshape(-1)
        if a.shape[0] != k_users:
            raise ValueError(f"alpha must have length {k_users}, got {a.shape[0]}")
        if np.any(a < 0) or not np.any(a > 0):
            raise ValueError("alpha must be non-negative with at least one positive entry")
        return a


@dataclass
class InitResult:
    """Minimal-power starting point for the optimizers.

    Unpacks as ``w0, p0, q_tilde``.  When ``feasible`` is false the budget
    is too small; ``required_power`` is the minimal total power (``inf``
    when the SINR target cannot be met at any power).
    """

    w: np.ndarray
    p: np.ndarray
    q_tilde: np.ndarray
    feasible: bool
    required_power: float
    budget: float
    iterations: int = 0

    @property
    def deficit(self) -> float:
        return max(0.0, self.required_power - self.budget)

    def __iter__(self):
        return iter((self.w, self.p, self.q_tilde))


def initialize(ch: ChannelSet, regime: RateRegime, P: float) -> InitResult:
    """Beams and powers meeting every stream's minimum SINR with least power."""
    if P <= 0:
        raise ValueError("power budget must be positive")
    K = ch.k_users
    nu3 = regime.nu3
    fp = min_power_fixed_point(ch, nu3, p_max=P)
    if not fp.feasible:
        return InitResult(w=fp.w, p=np.full(K, np.nan), q_tilde=np.full(K, np.nan),
                          feasible=False, required_power=np.inf, budget=P,
                          iterations=fp.iterations)
    try:
        p0 = duality_transfer(ch, fp.w, np.full(K, nu3), direction="downlink")
    except InfeasibleError:
        return InitResult(w=fp.w, p=np.full(K, np.nan), q_tilde=fp.q, feasible=False,
                          required_power=np.inf, budget=P, iterations=fp.iterations)
    need = float(fp.q.sum())
    return InitResult(w=fp.w, p=p0, q_tilde=fp.q, feasible=need <= P * (1.0 + 1e-12),
                      required_power=need, budget=P, iterations=fp.iterations)


class _Layout:
    """Index bookkeeping for the stacked SCA variable vector."""

    def __init__(self, K: int):
        self.K = K
        n_pairs = K * (K - 1)
        self.q = slice(0, K)
        self.phi = slice(K, 2 * K)
        self.psi = slice(2 * K, 3 * K)
        self.phi_hat = slice(3 * K, 4 * K)
        self.theta = slice(4 * K, 5 * K)
        self.a = slice(5 * K, 5 * K + n_pairs)
        self.b = slice(5 * K + n_pairs, 5 * K + 2 * n_pairs)
        self.dim = 5 * K + 2 * n_pairs
        # pair index p <-> (k, l), l != k, row-major in k
        self.pairs = [(k, l) for k in range(K) for l in range(K) if l != k]


@dataclass
class ScaState:
    """Linearization point of the SCA subproblem.

    ``a`` and ``b`` are flattened over the off-diagonal pairs ``(k, l)``
    in row-major order.
    """

    q: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    phi_hat: np.ndarray
    theta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    gamma_tilde: np.ndarray
    q_tilde: np.ndarray

    @classmethod
    def from_powers(cls, ch: ChannelSet, w, q, P: float, q_tilde) -> "ScaState":
        """Tight surrogates for uplink powers ``q`` under receivers ``w``."""
        q = np.asarray(q, dtype=float)
        sinr = uplink_sinr(ch, w, q)
        psi = dispersion_surrogate(sinr)
        lay = _Layout(ch.k_users)
        k_idx = np.array([k for k, _ in lay.pairs], dtype=int)
        l_idx = np.array([l for _, l in lay.pairs], dtype=int)
        return cls(q=q.copy(), phi=sinr.copy(), psi=psi, phi_hat=sinr.copy(),
                   theta=np.sqrt(psi), a=sinr[k_idx] * q[l_idx], b=sinr[k_idx] * q[l_idx],
                   gamma_tilde=ch.gamma_tilde(P), q_tilde=np.asarray(q_tilde, dtype=float))

    @classmethod
    def unpack(cls, x, K: int, gamma_tilde, q_tilde) -> "ScaState":
        lay = _Layout(K)
        x = np.asarray(x, dtype=float)
        return cls(q=x[lay.q].copy(), phi=x[lay.phi].copy(), psi=x[lay.psi].copy(),
                   phi_hat=x[lay.phi_hat].copy(), theta=x[lay.theta].copy(),
                   a=x[lay.a].copy(), b=x[lay.b].copy(),
                   gamma_tilde=np.asarray(gamma_tilde), q_tilde=np.asarray(q_tilde))

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.phi, self.psi, self.phi_hat, self.theta,
                               self.a, self.b])

    def violations(self, nu3: float, P: float) -> dict:
        """Largest violation of each surrogate invariant (<= 0 means satisfied)."""
        vt = dispersion_surrogate
        return {
            "phi_lower": float(np.max(nu3 - self.phi)),
            "phi_order": float(np.max(self.phi - self.phi_hat)),
            "phi_hat_upper": float(np.max(self.phi_hat - self.gamma_tilde)),
            "psi_lower": float(np.max(vt(nu3) - self.psi)),
            "psi_upper": float(np.max(self.psi - vt(self.gamma_tilde))),
            "psi_dispersion": float(np.max(vt(self.phi_hat) - self.psi)),
            "theta": float(np.max(np.sqrt(self.psi) - self.theta)),
            "q_lower": float(np.max(self.q_tilde - self.q)),
            "budget": float(np.sum(self.q) - P),
        }


def build_sca_subproblem(ch: ChannelSet, w, state: ScaState, regime: RateRegime, P: float,
                         alpha, lambda_opt: Optional[float] = None,
                         power_model: Optional[PowerModel] = None,
                         exact_min_sinr: bool = True, G=None) -> SmoothConvexProgram:
    """Convex surrogate of the power-allocation step around ``state``.

    With ``lambda_opt`` the objective becomes the Dinkelbach subtractive
    form, charging ``lambda_opt`` per watt of consumed power.
    ``exact_min_sinr`` adds the linear constraints
    ``nu3 * (interference + 1) <= q_k G[k, k]``, which hold for every
    feasible point of the original problem.

    Raises
    ------
    ValueError
        If ``state.psi`` is outside its admissible box.
    """
    K = ch.k_users
    lay = _Layout(K)
    nu3 = regime.nu3
    vt = regime.vartheta
    alpha = np.asarray(alpha, dtype=float)
    gt = np.asarray(state.gamma_tilde, dtype=float)
    qt = np.asarray(state.q_tilde, dtype=float)
    if G is None:
        G = gain_matrix(ch, w)
    psi_lo = float(dispersion_surrogate(nu3))
    psi_hi = dispersion_surrogate(gt)
    psi_t = np.asarray(state.psi, dtype=float)
    tol = 1e-9
    if np.any(psi_t < psi_lo - tol) or np.any(psi_t > psi_hi + tol) or np.any(psi_t <= 0):
        raise ValueError("linearization point violates the dispersion-surrogate box")
    psi_t = np.clip(psi_t, psi_lo, psi_hi)
    sq = np.sqrt(psi_t)
    one_m = 1.0 - psi_t

    n = lay.dim
    rows, rhs = [], []

    def row():
        r = np.zeros(n)
        rows.append(r)
        return r

    iq = np.arange(K)
    for k in range(K):
        others = [l for l in range(K) if l != k]
        pk = [lay.pairs.index((k, l)) for l in others]
        # phi_k below the true SINR, via a_{k,l} = phi_k q_l
        r = row()
        r[lay.a.start + np.array(pk, dtype=int)] = G[others, k]
        r[lay.q.start + k] = -G[k, k]
        r[lay.phi.start + k] = 1.0
        rhs.append(0.0)
        # phi_hat_k above the true SINR, via b_{k,l} = phi_hat_k q_l
        r = row()
        r[lay.q.start + k] = G[k, k]
        r[lay.b.start + np.array(pk, dtype=int)] = -G[others, k]
        r[lay.phi_hat.start + k] = -1.0
        rhs.append(0.0)
        # theta_k above the tangent of sqrt(psi_k)
        r = row()
        r[lay.psi.start + k] = 0.5 / sq[k]
        r[lay.theta.start + k] = -1.0
        rhs.append(-0.5 * sq[k])
        if exact_min_sinr:
            r = row()
            r[lay.q.start + np.array(others, dtype=int)] = nu3 * G[others, k]
            r[lay.q.start + k] = -G[k, k]
            rhs.append(-nu3)
    r = row()
    r[lay.q] = 1.0
    rhs.append(P)
    # McCormick envelopes over [nu3, gt_k] x [qt_l, P]
    for p_idx, (k, l) in enumerate(lay.pairs):
        for prod, fac in ((lay.a, lay.phi), (lay.b, lay.phi_hat)):
            ip, ifa, iql = prod.start + p_idx, fac.start + k, lay.q.start + l
            r = row(); r[iql] = nu3; r[ifa] = qt[l]; r[ip] = -1.0; rhs.append(nu3 * qt[l])
            r = row(); r[iql] = gt[k]; r[ifa] = P; r[ip] = -1.0; rhs.append(P * gt[k])
            r = row(); r[ip] = 1.0; r[iql] = -gt[k]; r[ifa] = -qt[l]; rhs.append(-gt[k] * qt[l])
            r = row(); r[ip] = 1.0; r[ifa] = -P; r[iql] = -nu3; rhs.append(-P * nu3)

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[lay.q] = qt
    upper[lay.q] = P
    lower[lay.phi] = nu3
    upper[lay.phi] = gt
    lower[lay.phi_hat] = nu3
    upper[lay.phi_hat] = gt
    lower[lay.psi] = psi_lo
    upper[lay.psi] = psi_hi
    lower[lay.theta] = 0.0
    upper[lay.theta] = 0.5 * sq + psi_hi / (2.0 * sq) + 1.0

    # (1 + phi_hat)^2 <= tangent of 1/(1 - psi) at psi_t
    qc = np.ones(K)
    qD = np.zeros((K, n))
    qD[iq, lay.phi_hat.start + iq] = 1.0
    qe = (1.0 - 2.0 * psi_t) / one_m ** 2
    qF = np.zeros((K, n))
    qF[iq, lay.psi.start + iq] = 1.0 / one_m ** 2

    lam = 0.0 if lambda_opt is None else float(lambda_opt)
    pm = power_model or PowerModel()
    const_power = ch.n_tx * pm.p_c + pm.p_0

    def objective(x):
        phi = x[lay.phi]
        val = (np.sum(alpha * (np.log1p(phi) - vt * x[lay.theta]))
               - lam * (pm.eta * np.sum(x[lay.q]) + const_power))
        grad = np.zeros(n)
        grad[lay.phi] = alpha / (1.0 + phi)
        grad[lay.theta] = -alpha * vt
        grad[lay.q] = -lam * pm.eta
        hess = np.zeros(n)
        hess[lay.phi] = -alpha / (1.0 + phi) ** 2
        return val, grad, hess

    return SmoothConvexProgram(dim=n, objective=objective, A=np.array(rows), b=np.array(rhs),
                               quad_c=qc, quad_D=qD, quad_e=qe, quad_F=qF,
                               lower=lower, upper=upper,
                               layout={"layout": lay, "psi_t": psi_t})


def interior_start(ch: ChannelSet, w, state: ScaState, regime: RateRegime, P: float,
                   kappa: float = 1e-4, G=None) -> Optional[np.ndarray]:
    """Strictly feasible point of the subproblem built around ``state``.

    The SINR rows are linear in ``q`` for fixed receivers, so the power
    set is a polytope.  ``q`` moves a fraction ``kappa`` toward a scaled
    copy of ``q_tilde`` that leaves half the spare budget unused; every
    auxiliary variable is then placed a fraction ``kappa`` inside the band
    its rows allow.  Returns ``None`` when no such point exists, e.g. when
    ``q_tilde`` already spends the whole budget.
    """
    K = ch.k_users
    nu3 = regime.nu3
    if G is None:
        G = gain_matrix(ch, w)
    qt = np.asarray(state.q_tilde, dtype=float)
    gt = np.asarray(state.gamma_tilde, dtype=float)
    spare = P - qt.sum()
    if spare <= 0 or not np.all(qt > 0):
        return None
    q_c = qt * (1.0 + 0.5 * spare / qt.sum())
    q = (1.0 - kappa) * np.clip(state.q, qt, None) + kappa * q_c
    diag = np.diag(G)
    s = q * diag / (q @ G - q * diag + 1.0)
    if np.any(s <= nu3) or np.any(s >= gt) or q.sum() >= P:
        return None
    phi = s - kappa * (s - nu3)
    phi_hat = s + kappa * (gt - s)
    psi_t = np.clip(state.psi, float(dispersion_surrogate(nu3)), dispersion_surrogate(gt))
    psi_hi = dispersion_surrogate(gt)
    # smallest psi whose tangent row admits phi_hat
    psi_req = (1.0 + phi_hat) ** 2 * (1.0 - psi_t) ** 2 - 1.0 + 2.0 * psi_t
    if np.any(psi_req >= psi_hi):
        return None
    psi = psi_req + kappa * (psi_hi - psi_req)
    sq = np.sqrt(psi_t)
    t_lo = 0.5 * psi / sq + 0.5 * sq
    t_hi = 0.5 * sq + psi_hi / (2.0 * sq) + 1.0
    theta = t_lo + kappa * (t_hi - t_lo)
    lay = _Layout(K)
    k_idx = np.array([k for k, _ in lay.pairs], dtype=int)
    l_idx = np.array([l for _, l in lay.pairs], dtype=int)
    return ScaState(q=q, phi=phi, psi=psi, phi_hat=phi_hat, theta=theta,
                    a=phi[k_idx] * q[l_idx], b=phi_hat[k_idx] * q[l_idx],
                    gamma_tilde=gt, q_tilde=qt).pack()


def _weighted_rate(ch, w, q, regime, alpha):
    return float(np.sum(alpha * rate(uplink_sinr(ch, w, q), regime.vartheta)))


def _emit(opts: SolveOptions, trace: list, entry: dict):
    trace.append(entry)
    if opts.trace_stream is not None:
        opts.trace_stream.write(json.dumps(entry) + "\n")


def _sca_power_step(ch, w, q, regime, P, alpha, q_tilde, opts, trace, outer,
                    lambda_opt=None, power_model=None, score=None, scale=None):
    """Inner SCA loop for fixed receivers; returns (q, inner steps, newton steps).

    ``score(q)`` is the true objective being improved; a candidate from the
    subproblem is accepted only if it does not lower that value, halving the
    step toward it otherwise.
    """
    G = gain_matrix(ch, w)
    gt = ch.gamma_tilde(P)
    val = score(q)
    steps = newton = 0
    for t in range(1, opts.max_inner + 1):
        state = ScaState.from_powers(ch, w, q, P, q_tilde)
        prog = build_sca_subproblem(ch, w, state, regime, P, alpha, lambda_opt=lambda_opt,
                                    power_model=power_model, G=G)
        x0 = interior_start(ch, w, state, regime, P, G=G)
        if x0 is None or prog.max_violation(x0) >= 0.0:
            x0 = state.pack()  # phase-I takes over
        rep = solve_ipm(prog, x0, gap_tol=opts.ipm_gap_tol)
        newton += rep.iterations
        if rep.status == "infeasible":
            break
        lay = prog.layout["layout"]
        q_c = np.clip(rep.x_star[lay.q], q_tilde, None)
        step = 1.0
        new_q, new_val = q, val
        while step > 1e-3:
            q_try = q + step * (q_c - q)
            v = score(q_try)
            if v >= val and np.all(uplink_sinr(ch, w, q_try) >= regime.nu3 * (1 - 1e-12)):
                new_q, new_val = q_try, v
                break
            step *= 0.5
        steps += 1
        _emit(opts, trace, {"loop": "inner", "outer": outer, "inner": t,
                            "objective": new_val, "step": step, "ipm_status": rep.status})
        if new_val == val:
            break
        denom = abs(val) if scale is None else scale(q)
        done = abs(new_val - val) <= opts.eps_conv * max(denom, 1e-300)
        q, val = new_q, new_val
        if done:
            break
    return q, steps, newton


def _refresh_q_tilde(ch, w, nu3):
    return duality_transfer(ch, w, np.full(ch.k_users, nu3), direction="uplink")


def _finish(ch, w, q, regime, objective, status, iterations, trace, info, relu=False):
    gam_up = uplink_sinr(ch, w, q)
    p = duality_transfer(ch, w, gam_up, direction="downlink")
    sol = evaluate(ch, w, p, regime, relu_clamp=relu, objective=objective, status=status,
                   iterations=iterations, trace=trace, q=q, info=info)
    sol.info["duality_sinr_error"] = float(np.max(np.abs(sol.gamma - gam_up) / gam_up))
    return sol


def _infeasible_solution(ch, init: InitResult, regime, extra=None) -> BeamSolution:
    K = ch.k_users
    info = {"required_power": init.required_power, "budget": init.budget,
            "deficit": init.deficit}
    if extra:
        info.update(extra)
    return BeamSolution(w=init.w, p=np.asarray(init.p, dtype=float), gamma=np.full(K, np.nan),
                        rates=np.full(K, np.nan), objective=float("nan"), status="infeasible",
                        feasible=False, iterations={"init": init.iterations}, info=info)


def srmax(ch: ChannelSet, regime: RateRegime, P: float,
          opts: Optional[SolveOptions] = None) -> BeamSolution:
    """Weighted sum-rate maximization.

    Alternates the SCA power step (run until its relative improvement
    drops to ``eps_conv``) with MMSE receiver updates, then maps the uplink
    design to downlink powers.
    """
    opts = opts or SolveOptions()
    alpha = opts.weights(ch.k_users)
    init = initialize(ch, regime, P)
    if not init.feasible:
        return _infeasible_solution(ch, init, regime)
    w, q, q_tilde = init.w, init.q_tilde.copy(), init.q_tilde
    trace: list = []
    score = lambda qq: _weighted_rate(ch, w, qq, regime, alpha)  # noqa: E731
    xi = score(q)
    _emit(opts, trace, {"loop": "outer", "outer": 0, "objective": xi})
    n_inner = n_newton = 0
    status = "max-iter"
    for tau in range(1, opts.max_outer + 1):
        q, k_in, k_nt = _sca_power_step(ch, w, q, regime, P, alpha, q_tilde, opts, trace,
                                        tau, score=score)
        n_inner += k_in
        n_newton += k_nt
        w = mmse_beamformers(ch, q)
        q_tilde = _refresh_q_tilde(ch, w, regime.nu3)
        xi_new = score(q)
        _emit(opts, trace, {"loop": "outer", "outer": tau, "objective": xi_new})
        done = abs(xi_new - xi) <= opts.eps_conv * abs(xi)
        xi = xi_new
        if done:
            status = "optimal"
            break
    iters = {"outer": tau, "inner": n_inner, "newton": n_newton, "init": init.iterations}
    sol = _finish(ch, w, q, regime, xi, status, iters, trace, {"objective_kind": "srmax"})
    sol.objective = float(np.sum(alpha * sol.rates))
    return sol


def energy_efficiency(rates, alpha, tx_power, n_tx, power_model: PowerModel) -> float:
    return float(np.sum(alpha * rates) / power_model.total(tx_power, n_tx))


def eemax(ch: ChannelSet, regime: RateRegime, P: float,
          power_model: Optional[PowerModel] = None,
          opts: Optional[SolveOptions] = None) -> BeamSolution:
    """Energy-efficiency maximization by Dinkelbach iterations.

    Loop order: SCA on the subtractive objective for fixed ``lambda``,
    then the ``lambda`` update until the subtractive value is below
    ``eps_conv`` in magnitude, then an MMSE receiver update.
    """
    opts = opts or SolveOptions()
    pm = power_model or PowerModel()
    alpha = opts.weights(ch.k_users)
    init = initialize(ch, regime, P)
    if not init.feasible:
        return _infeasible_solution(ch, init, regime)
    w, q, q_tilde = init.w, init.q_tilde.copy(), init.q_tilde
    trace: list = []
    lam = 0.0
    lambdas = [lam]

    def numer(qq):
        return _weighted_rate(ch, w, qq, regime, alpha)

    def denom(qq):
        return pm.total(float(np.sum(qq)), ch.n_tx)

    xi = numer(q) / denom(q)
    _emit(opts, trace, {"loop": "outer", "outer": 0, "objective": xi, "lambda": lam})
    n_inner = n_newton = n_dink = 0
    status = "max-iter"
    for tau in range(1, opts.max_outer + 1):
        for _ in range(opts.max_dinkelbach):
            lam_now = lam
            score = lambda qq: numer(qq) - lam_now * denom(qq)  # noqa: E731
            q, k_in, k_nt = _sca_power_step(ch, w, q, regime, P, alpha, q_tilde, opts, trace,
                                            tau, lambda_opt=lam_now, power_model=pm,
                                            score=score, scale=numer)
            n_inner += k_in
            n_newton += k_nt
            n_dink += 1
            F = numer(q) - lam * denom(q)
            _emit(opts, trace, {"loop": "dinkelbach", "outer": tau, "lambda": lam, "F": F})
            if abs(F) < opts.eps_conv:
                break
            lam = max(lam, numer(q) / denom(q))
            lambdas.append(lam)
        w = mmse_beamformers(ch, q)
        q_tilde = _refresh_q_tilde(ch, w, regime.nu3)
        xi_new = numer(q) / denom(q)
        _emit(opts, trace, {"loop": "outer", "outer": tau, "objective": xi_new, "lambda": lam})
        done = abs(xi_new - xi) <= opts.eps_conv * abs(xi)
        xi = xi_new
        if done:
            status = "optimal"
            break
    iters = {"outer": tau, "inner": n_inner, "newton": n_newton, "dinkelbach": n_dink,
             "init": init.iterations}
    sol = _finish(ch, w, q, regime, xi, status, iters, trace,
                  {"objective_kind": "eemax", "lambdas": lambdas})
    sol.objective = energy_efficiency(sol.rates, alpha, sol.total_power, ch.n_tx, pm)
    return sol


def maxmin(ch: ChannelSet, regime: RateRegime, P: float,
           opts: Optional[SolveOptions] = None) -> BeamSolution:
    """Max-min rate: bisection on the common SINR alternated with MMSE updates.

    The reported objective is the rate at the common SINR level.
    """
    opts = opts or SolveOptions()
    init = initialize(ch, regime, P)
    if not init.feasible:
        return _infeasible_solution(ch, init, regime)
    w = init.w
    trace: list = []
    mu = regime.nu3
    xi = float(rate(mu, regime.vartheta))
    _emit(opts, trace, {"loop": "outer", "outer": 0, "objective": xi, "mu": mu})
    mu_hi = float(np.min(ch.gamma_tilde(P))) * (1.0 + 1e-6)
    status = "max-iter"
    q = init.q_tilde
    w_used = w
    for tau in range(1, opts.max_outer + 1):
        # previous level stays feasible after an MMSE update
        mu, q = bisect_maxmin(ch, w, P, max(regime.nu3, mu), mu_hi)
        w_used = w
        xi_new = float(rate(mu, regime.vartheta))
        _emit(opts, trace, {"loop": "outer", "outer": tau, "objective": xi_new, "mu": mu})
        done = abs(xi_new - xi) <= opts.eps_conv * abs(xi)
        xi = xi_new
        if done:
            status = "optimal"
            break
        w = mmse_beamformers(ch, q)
    iters = {"outer": tau, "init": init.iterations}
    sol = _finish(ch, w_used, q, regime, xi, status, iters, trace,
                  {"objective_kind": "maxmin", "mu": mu})
    sol.objective = sol.min_rate
    return sol


def zfbf_baseline(ch: ChannelSet, regime: RateRegime, P: float) -> BeamSolution:
    """Zero-forcing beams with equal power split; rates clamped at zero.

    ``feasible`` reports whether every user reaches the minimum SINR.

    Raises
    ------
    DegenerateChannelError
        If the channels are linearly dependent.
    """
    K = ch.k_users
    w = zf_beamformers(ch)
    p = np.full(K, P / K)
    sol = evaluate(ch, w, p, regime, relu_clamp=True, info={"objective_kind": "zfbf"})
    sol.feasible = bool(np.all(sol.gamma >= regime.nu3 * (1.0 - 1e-12)))
    sol.status = "optimal" if sol.feasible else "infeasible"
    sol.objective = float(np.mean(sol.rates))
    return sol


def shannon_baselines(ch: ChannelSet, P: float, n: int, d_bits: int = 256,
                      objective: str = "srmax", opts: Optional[SolveOptions] = None,
                      power_model: Optional[PowerModel] = None) -> BeamSolution:
    """Same optimizers with the infinite-blocklength rate ``ln(1 + sinr)``."""
    regime = make_regime(0.5, n, d_bits, shannon_mode=True)
    if objective == "srmax":
        return srmax(ch, regime, P, opts)
    if objective == "maxmin":
        return maxmin(ch, regime, P, opts)
    if objective == "eemax":
        return eemax(ch, regime, P, power_model, opts)
    raise ValueError(f"unknown objective {objective!r}")
