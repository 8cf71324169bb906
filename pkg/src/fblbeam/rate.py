"""Finite-blocklength achievable rate and its SINR thresholds.

The normal approximation of the achievable rate at SINR ``gamma`` is

    R(gamma) = ln(1 + gamma) - vartheta * sqrt(1 - (1 + gamma)**-2)

with ``vartheta = Qinv(epsilon) / sqrt(n)``.  Rates are in nats per channel
use.  Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "RateRegime",
    "q_func",
    "q_inv",
    "rate",
    "rate_derivs",
    "dispersion",
    "nu0",
    "bessel_poly",
    "gen_lambert_w",
    "solve_rate_eq_bisect",
    "solve_rate_eq_series",
    "nu4",
    "make_regime",
]

_SQRT2 = math.sqrt(2.0)

# Acklam's rational approximation of the standard normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


def q_func(x):
    """Gaussian tail probability Q(x) = P(N(0, 1) > x)."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / _SQRT2)
    from scipy.special import erfc

    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def _acklam_upper(p):
    # quantile of the *upper* tail: returns x with Q(x) = p
    lo = 0.02425
    if p < lo:
        r = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
        den = (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        return -num / den
    if p > 1.0 - lo:
        return -_acklam_upper(1.0 - p)
    u = p - 0.5
    r = u * u
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * u
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return -num / den


def q_inv(epsilon: float, newton_steps: int = 3) -> float:
    """Inverse of the Gaussian Q-function.

    A rational initial guess is refined with Newton steps on ``Q(x) - epsilon``.

    Raises
    ------
    ValueError
        If ``epsilon`` is not in the open interval (0, 1).
    """
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if epsilon == 0.5:
        return 0.0
    x = _acklam_upper(epsilon)
    for _ in range(newton_steps):
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf == 0.0:
            break
        # Q'(x) = -pdf(x); step in the relative residual for deep tails
        x += (q_func(x) - epsilon) / pdf
    return x


def dispersion(gamma):
    """Channel dispersion V(gamma) = 1 - (1 + gamma)^-2."""
    g = np.asarray(gamma, dtype=float)
    return 1.0 - 1.0 / (1.0 + g) ** 2


def rate(gamma, vartheta: float):
    """Achievable rate ``ln(1+gamma) - vartheta*sqrt(V(gamma))`` in nats.

    Accepts scalars or arrays; the result may be negative for small SINR.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("SINR must be non-negative")
    if vartheta < 0:
        raise ValueError("vartheta must be non-negative")
    out = np.log1p(g) - vartheta * np.sqrt(dispersion(g))
    return float(out) if out.ndim == 0 else out


def rate_derivs(gamma, vartheta: float):
    """First and second derivatives of :func:`rate`, and the curvature helper g.

    Returns
    -------
    d1, d2, g : float or ndarray
        ``R'(gamma)``, ``R''(gamma)`` and
        ``g(gamma) = (3(1+gamma)^2 - 2) / ((1+gamma)((1+gamma)^2 - 1)^1.5)``,
        so that ``R'' = -(1 - vartheta*g) / (1+gamma)^2``.
    """
    x = np.asarray(gamma, dtype=float)
    if np.any(x <= 0):
        raise ValueError("rate derivatives are only defined for gamma > 0")
    u = 1.0 + x
    s = x * (2.0 + x)  # (1+gamma)^2 - 1 without cancellation
    d1 = (1.0 - vartheta / (u * np.sqrt(s))) / u
    g = (3.0 * u * u - 2.0) / (u * s ** 1.5)
    d2 = -(1.0 - vartheta * g) / (u * u)
    if d1.ndim == 0:
        return float(d1), float(d2), float(g)
    return d1, d2, g


def nu0(vartheta: float) -> float:
    """SINR at which the rate is minimal (stationary point of R)."""
    if vartheta < 0:
        raise ValueError("vartheta must be non-negative")
    return math.sqrt((1.0 + math.sqrt(1.0 + 4.0 * vartheta * vartheta)) / 2.0) - 1.0


def bessel_poly(m: int, z: float) -> float:
    """Bessel polynomial ``sum_k (m+k)!/(k!(m-k)!) (z/2)^k`` for k = 0..m."""
    if m < 0:
        raise ValueError("m must be non-negative")
    coef = 1.0
    total = 1.0
    half = z / 2.0
    power = 1.0
    for k in range(1, m + 1):
        coef *= (m + k) * (m - k + 1) / k
        power *= half
        total += coef * power
    return total


def _log_abs_bessel_poly(m, z):
    # log|B_m(z)| for z > 0 (all terms positive), overflow-free
    logs = np.empty(m + 1)
    logs[0] = 0.0
    lc = 0.0
    lh = math.log(z / 2.0)
    for k in range(1, m + 1):
        lc += math.log((m + k) * (m - k + 1) / k)
        logs[k] = lc + k * lh
    top = logs.max()
    return top + math.log(np.exp(logs - top).sum())


def gen_lambert_w(iota1: float, iota2: float, mu: float, terms: int = 60,
                  scaled_argument: bool = True, rtol: float = 1e-16) -> float:
    """Partial sum of the Lagrange-inversion series for ``e^x (x-iota1)(x-iota2) = mu``.

    The series is expanded about ``iota1``::

        W = iota1 - sum_{m>=1} 1/(m m!) (mu m e^{-iota1}/(iota2-iota1))^m B_{m-1}(z_m)

    with ``z_m = -2/(m (iota2 - iota1))`` when ``scaled_argument`` is true and
    ``z_m = -2/(iota2 - iota1)`` otherwise.  Summation stops after ``terms``
    terms or once a term falls below ``rtol`` times the running correction.

    Raises
    ------
    FloatingPointError
        If a partial sum is not finite (divergent series).
    """
    if iota1 == iota2:
        raise ValueError("iota1 and iota2 must differ")
    diff = iota2 - iota1
    base = mu * math.exp(-iota1) / diff
    total = 0.0
    for m in range(1, terms + 1):
        x = base * m
        z = -2.0 / (m * diff) if scaled_argument else -2.0 / diff
        if x == 0.0:
            break
        lg = m * math.log(abs(x)) - math.log(m) - math.lgamma(m + 1)
        sign = 1.0 if (x > 0 or m % 2 == 0) else -1.0
        if z > 0:
            lg += _log_abs_bessel_poly(m - 1, z)
        else:
            b = bessel_poly(m - 1, z)
            if b == 0.0:
                continue
            sign *= math.copysign(1.0, b)
            lg += math.log(abs(b))
        if lg > 700.0:
            raise FloatingPointError(f"series term {m} overflows")
        term = sign * math.exp(lg)
        total += term
        if not math.isfinite(total):
            raise FloatingPointError(f"non-finite partial sum at term {m}")
        if abs(term) < rtol * abs(total):
            break
    return iota1 - total


def solve_rate_eq_series(alpha: float, vartheta: float, terms: int = 60,
                         scaled_argument: bool = True) -> float:
    """Series solution of ``R(gamma) = alpha`` (may be inaccurate for small vartheta)."""
    beta = math.exp(-alpha)
    kappa = gen_lambert_w(2.0 * vartheta, -2.0 * vartheta,
                          -4.0 * beta * beta * vartheta * vartheta,
                          terms=terms, scaled_argument=scaled_argument)
    return math.expm1(alpha + kappa / 2.0)


def solve_rate_eq_bisect(alpha: float, vartheta: float, tol: float = 1e-14) -> float:
    """Positive root of ``R(gamma) = alpha`` by bisection in the exponent.

    Solves ``e^k (k - 2v)(k + 2v) = -4 beta^2 v^2`` with ``beta = e^-alpha`` for
    ``k`` in (0, 2v] and returns ``gamma = e^{alpha + k/2} - 1``.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if vartheta <= 0:
        raise ValueError("vartheta must be positive")
    v2 = vartheta * vartheta
    rhs = 4.0 * math.exp(-2.0 * alpha) * v2

    def f(k):
        # e^k (k^2 - 4v^2) + 4 beta^2 v^2; negative left of the root
        return math.exp(k) * (k * k - 4.0 * v2) + rhs

    lo, hi = 0.0, 2.0 * vartheta
    if alpha == 0.0:
        # k = 0 is the trivial root; start right of it where f < 0
        lo = 1e-3 * min(4.0 * v2, 2.0 * vartheta)
        while f(lo) >= 0.0 and lo > 1e-300:
            lo *= 0.5
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    kappa = 0.5 * (lo + hi)
    return math.expm1(alpha + kappa / 2.0)


def nu4(vartheta: float, tol: float = 1e-12) -> float:
    """Inflection point of R: root of ``vartheta * g(gamma) = 1``."""
    if vartheta <= 0:
        raise ValueError("vartheta must be positive")

    def h(x):
        return vartheta * rate_derivs(x, vartheta)[2] - 1.0

    lo, hi = 1e-300, 1.0
    while h(hi) > 0.0:
        hi *= 2.0
    lo = hi / 2.0
    while h(lo) < 0.0:
        lo /= 2.0
    while hi - lo > tol * max(hi, 1e-300) and hi - lo > 1e-300:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RateRegime:
    """Reliability/latency operating point and its derived SINR thresholds.

    Attributes
    ----------
    epsilon : float
        Target decoding error probability.
    n : int
        Blocklength in channel uses.
    d_bits : int
        Payload in bits.
    vartheta : float
        Dispersion penalty ``Qinv(epsilon)/sqrt(n)``; zero in Shannon mode.
    r_min : float
        Required rate ``(d_bits/n) ln 2`` in nats per channel use.
    nu0, nu2, nu3, nu4 : float
        Rate minimiser, positive zero of R, minimum SINR meeting ``r_min``
        and inflection point.
    shannon_mode : bool
        Infinite-blocklength baseline (``vartheta = 0``, ``nu3 = 2^{D/n} - 1``).
    """

    epsilon: float
    n: int
    d_bits: int
    vartheta: float
    r_min: float
    nu0: float
    nu2: float
    nu3: float
    nu4: float
    shannon_mode: bool = False

    def rate(self, gamma):
        return rate(gamma, self.vartheta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nu1"] = 0.0
        return d


def make_regime(epsilon: float, n: int, d_bits: int = 256,
                shannon_mode: bool = False) -> RateRegime:
    """Build a :class:`RateRegime` with bisection-computed thresholds."""
    if int(n) != n or n <= 0:
        raise ValueError(f"blocklength must be a positive integer, got {n!r}")
    if int(d_bits) != d_bits or d_bits <= 0:
        raise ValueError(f"payload must be a positive integer, got {d_bits!r}")
    n, d_bits = int(n), int(d_bits)
    r_min = d_bits / n * math.log(2.0)
    if shannon_mode:
        return RateRegime(epsilon=float(epsilon), n=n, d_bits=d_bits, vartheta=0.0,
                          r_min=r_min, nu0=0.0, nu2=0.0,
                          nu3=2.0 ** (d_bits / n) - 1.0, nu4=0.0,
                          shannon_mode=True)
    if not 0.0 < epsilon < 0.5:
        raise ValueError(
            f"epsilon must lie in (0, 0.5) so that Qinv(epsilon) > 0, got {epsilon!r}")
    vt = q_inv(epsilon) / math.sqrt(n)
    return RateRegime(epsilon=float(epsilon), n=n, d_bits=d_bits, vartheta=vt,
                      r_min=r_min, nu0=nu0(vt),
                      nu2=solve_rate_eq_bisect(0.0, vt),
                      nu3=solve_rate_eq_bisect(r_min, vt),
                      nu4=nu4(vt), shannon_mode=False)
