"""Multiuser MISO downlink model: channels, SINRs, receivers and duality.

Conventions
-----------
Channels and beamformers are stored row-wise: ``h[k]`` is user k's channel
(length ``n_tx``) and ``w[k]`` its unit-norm beamformer.  The gain matrix
``G[l, k] = |h_bar[l]^H w[k]|^2`` is shared by both link directions:

* downlink user k sees interference ``sum_{l != k} p_l G[k, l]``;
* uplink stream k sees interference ``sum_{l != k} q_l G[l, k]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, DegenerateChannelError, InfeasibleError
from .rate import RateRegime, rate

__all__ = [
    "Geometry",
    "PowerModel",
    "ChannelSet",
    "BeamSolution",
    "pathloss",
    "sample_channels",
    "gain_matrix",
    "downlink_sinr",
    "uplink_sinr",
    "mmse_beamformers",
    "duality_transfer",
    "zf_beamformers",
    "fix_phase",
    "evaluate",
]


@dataclass(frozen=True)
class Geometry:
    """Single-cell layout: users uniform in distance on [d0, radius]."""

    d0: float = 50.0
    radius: float = 300.0
    exponent: float = 3.0


@dataclass(frozen=True)
class PowerModel:
    """Consumed power ``eta * sum(p) + n_tx * p_c + p_0`` (watts)."""

    eta: float = 1.0
    p_c: float = 1.0
    p_0: float = 10.0

    def __post_init__(self):
        if self.eta < 1.0:
            raise ConfigError(f"amplifier inefficiency eta must be >= 1, got {self.eta}")
        if self.p_c < 0 or self.p_0 < 0:
            raise ConfigError("circuit powers must be non-negative")

    def total(self, tx_power, n_tx):
        return self.eta * tx_power + n_tx * self.p_c + self.p_0


def _complex_to_pairs(a):
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1]


@dataclass(frozen=True)
class ChannelSet:
    """One random problem instance.

    Attributes
    ----------
    h : ndarray of complex, shape (k_users, n_tx)
    sigma2 : ndarray, shape (k_users,)
        Noise variances.
    d : ndarray, shape (k_users,)
        User distances in metres (NaN when not drawn from a geometry).
    rho : ndarray, shape (k_users,)
        Large-scale gains.
    """

    h: np.ndarray
    sigma2: np.ndarray
    d: np.ndarray = None
    rho: np.ndarray = None

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        k = h.shape[0]
        sigma2 = np.broadcast_to(np.asarray(self.sigma2, dtype=float), (k,)).copy()
        if np.any(sigma2 <= 0):
            raise ConfigError("noise variances must be positive")
        d = np.full(k, np.nan) if self.d is None else np.asarray(self.d, dtype=float)
        rho = np.ones(k) if self.rho is None else np.asarray(self.rho, dtype=float)
        for name, v in (("h", h), ("sigma2", sigma2), ("d", d), ("rho", rho)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if h.shape[0] > h.shape[1]:
            raise ConfigError(f"need k_users <= n_tx, got {h.shape[0]} > {h.shape[1]}")
        hb = h / np.sqrt(sigma2)[:, None]
        hb.setflags(write=False)
        object.__setattr__(self, "_h_bar", hb)

    @classmethod
    def from_normalized(cls, h_bar):
        """Wrap noise-normalized channels (unit noise variance)."""
        h_bar = np.atleast_2d(np.asarray(h_bar, dtype=complex))
        return cls(h=h_bar, sigma2=np.ones(h_bar.shape[0]))

    @property
    def k_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]

    @property
    def h_bar(self) -> np.ndarray:
        return self._h_bar

    def gamma_tilde(self, power: float) -> np.ndarray:
        """Interference-free full-power SINR caps ``P ||h_bar_k||^2``."""
        return power * np.sum(np.abs(self.h_bar) ** 2, axis=1)

    def to_dict(self) -> dict:
        return {
            "k_users": self.k_users,
            "n_tx": self.n_tx,
            "h": _complex_to_pairs(self.h),
            "sigma2": self.sigma2.tolist(),
            "d": [None if np.isnan(x) else float(x) for x in self.d],
            "rho": self.rho.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "ChannelSet":
        d = doc.get("d")
        if d is not None:
            d = [np.nan if x is None else x for x in d]
        return cls(h=_pairs_to_complex(doc["h"]), sigma2=doc["sigma2"], d=d,
                   rho=doc.get("rho"))

    @classmethod
    def from_json(cls, text: str) -> "ChannelSet":
        return cls.from_dict(json.loads(text))


@dataclass
class BeamSolution:
    """Beamformers, powers and the resulting per-user performance.

    ``w`` holds unit-norm beamformers row-wise; ``p`` the downlink powers.
    ``q`` keeps the dual uplink powers when the solution came from an
    uplink design.
    """

    w: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    rates: np.ndarray
    objective: float = float("nan")
    status: str = "optimal"
    feasible: bool = True
    iterations: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    q: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def min_rate(self) -> float:
        return float(np.min(self.rates))

    @property
    def total_power(self) -> float:
        return float(np.sum(self.p))

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {
            "status": self.status,
            "feasible": bool(self.feasible),
            "objective": float(self.objective),
            "w": _complex_to_pairs(self.w),
            "p": np.asarray(self.p, dtype=float).tolist(),
            "q": None if self.q is None else np.asarray(self.q, dtype=float).tolist(),
            "gamma": np.asarray(self.gamma, dtype=float).tolist(),
            "rates": np.asarray(self.rates, dtype=float).tolist(),
            "total_power": self.total_power,
            "iterations": {k: clean(v) for k, v in self.iterations.items()},
            "trace": [clean(t) for t in self.trace],
            "info": {k: clean(v) for k, v in self.info.items()},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "BeamSolution":
        q = doc.get("q")
        return cls(w=_pairs_to_complex(doc["w"]), p=np.asarray(doc["p"]),
                   gamma=np.asarray(doc["gamma"]), rates=np.asarray(doc["rates"]),
                   objective=doc["objective"], status=doc["status"],
                   feasible=doc.get("feasible", True),
                   iterations=doc.get("iterations", {}), trace=doc.get("trace", []),
                   q=None if q is None else np.asarray(q), info=doc.get("info", {}))


def pathloss(d, geometry: Geometry = Geometry()):
    """Large-scale gain ``1 / (1 + (d/d0)^exponent)``."""
    d = np.asarray(d, dtype=float)
    return 1.0 / (1.0 + (d / geometry.d0) ** geometry.exponent)


def sample_channels(geometry: Geometry, k_users: int, n_tx: int, rng=None,
                    sigma2: float = 1.0) -> ChannelSet:
    """Draw users uniformly in distance and i.i.d. Rayleigh small-scale fading.

    ``rng`` may be a seed or a :class:`numpy.random.Generator`.
    """
    if k_users > n_tx:
        raise ConfigError(f"need k_users <= n_tx, got {k_users} > {n_tx}")
    if not 0 < geometry.d0 < geometry.radius:
        raise ConfigError("geometry requires 0 < d0 < radius")
    rng = np.random.default_rng(rng)
    d = rng.uniform(geometry.d0, geometry.radius, size=k_users)
    rho = pathloss(d, geometry)
    h_tilde = (rng.standard_normal((k_users, n_tx))
               + 1j * rng.standard_normal((k_users, n_tx))) / np.sqrt(2.0)
    h = np.sqrt(rho)[:, None] * h_tilde
    return ChannelSet(h=h, sigma2=np.full(k_users, float(sigma2)), d=d, rho=rho)


def _check_beams(ch: ChannelSet, w, powers, name):
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    if w.shape != ch.h.shape:
        raise ValueError(f"beamformers must have shape {ch.h.shape}, got {w.shape}")
    if powers is None:
        return w, None
    powers = np.asarray(powers, dtype=float).reshape(-1)
    if powers.shape[0] != ch.k_users:
        raise ValueError(f"{name} must have length {ch.k_users}, got {powers.shape[0]}")
    return w, powers


def gain_matrix(ch: ChannelSet, w) -> np.ndarray:
    """``G[l, k] = |h_bar_l^H w_k|^2``."""
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    return np.abs(ch.h_bar.conj() @ w.T) ** 2


def downlink_sinr(ch: ChannelSet, w, p) -> np.ndarray:
    w, p = _check_beams(ch, w, p, "p")
    G = gain_matrix(ch, w)
    sig = p * np.diag(G)
    interf = G @ p - sig
    return sig / (interf + 1.0)


def uplink_sinr(ch: ChannelSet, w, q) -> np.ndarray:
    w, q = _check_beams(ch, w, q, "q")
    G = gain_matrix(ch, w)
    sig = q * np.diag(G)
    interf = q @ G - sig
    return sig / (interf + 1.0)


def fix_phase(ch: ChannelSet, w) -> np.ndarray:
    """Rotate each beam so that ``h_bar_k^H w_k`` is real and non-negative."""
    w = np.array(w, dtype=complex)
    inner = np.einsum("kn,kn->k", ch.h_bar.conj(), w)
    mag = np.abs(inner)
    rot = np.where(mag > 0, inner.conj() / np.where(mag > 0, mag, 1.0), 1.0)
    return w * rot[:, None]


def mmse_beamformers(ch: ChannelSet, q) -> np.ndarray:
    """Unit-norm MMSE receivers ``(I + sum_l q_l h_l h_l^H)^{-1} h_k``."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != ch.k_users:
        raise ValueError(f"q must have length {ch.k_users}")
    if np.any(q < 0):
        raise ValueError("uplink powers must be non-negative")
    hb = ch.h_bar
    # sum_l q_l h_l h_l^H with h_l as column vectors
    S = (hb.T * q) @ hb.conj()
    S[np.diag_indices_from(S)] += 1.0
    cf = scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    W = scipy.linalg.cho_solve(cf, hb.T, check_finite=False).T
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    return fix_phase(ch, W)


def duality_transfer(ch: ChannelSet, w, target_sinrs, direction: str = "downlink") -> np.ndarray:
    """Powers reaching ``target_sinrs`` exactly with fixed beams ``w``.

    Solves ``Psi p = 1`` with ``Psi[k, k] = G[k, k]/gamma_k`` and off-diagonal
    ``-G[k, l]`` (downlink) or ``-G[l, k]`` (uplink).

    Raises
    ------
    InfeasibleError
        When the system is singular or any resulting power is non-positive.
    """
    if direction not in ("downlink", "uplink"):
        raise ValueError("direction must be 'downlink' or 'uplink'")
    w, gam = _check_beams(ch, w, target_sinrs, "target_sinrs")
    if np.any(gam <= 0):
        raise InfeasibleError("target SINRs must be positive")
    G = gain_matrix(ch, w)
    M = -(G if direction == "downlink" else G.T).copy()
    M[np.diag_indices_from(M)] = np.diag(G) / gam
    try:
        p = np.linalg.solve(M, np.ones(ch.k_users))
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError("power-transfer matrix is singular") from exc
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise InfeasibleError("targets not achievable with these beamformers")
    return p


def zf_beamformers(ch: ChannelSet, rcond: float = 1e-10) -> np.ndarray:
    """Normalized columns of the pseudo-inverse of the stacked channels."""
    A = ch.h_bar.conj()  # rows h_bar_k^H
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= rcond * s[0]:
        raise DegenerateChannelError("channel matrix is rank deficient")
    W = np.linalg.pinv(A).T
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    return fix_phase(ch, W)


def evaluate(ch: ChannelSet, w, p, regime: RateRegime, relu_clamp: bool = False,
             **kwargs) -> BeamSolution:
    """Downlink SINRs and rates for fixed beams and powers."""
    w, p = _check_beams(ch, w, p, "p")
    gamma = downlink_sinr(ch, w, p)
    rates = rate(np.maximum(gamma, 0.0), regime.vartheta)
    rates = np.atleast_1d(rates)
    if relu_clamp:
        rates = np.maximum(rates, 0.0)
    return BeamSolution(w=w, p=p, gamma=gamma, rates=rates, **kwargs)
