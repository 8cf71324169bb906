"""scikit-learn style wrappers around the optimizers.

``fit`` takes one channel realization (a :class:`ChannelSet` or a complex
``(k_users, n_tx)`` matrix of noise-normalized channels) and stores the
designed beamformers and powers.  ``transform`` returns the power-scaled
precoders, ``predict`` the per-user rates those precoders give on a
(possibly different) channel, and ``score`` the design objective.

>>> est = SumRateBeamformer(epsilon=1e-5, n=128, snr_db=20).fit(H)  # doctest: +SKIP
>>> est.rates_  # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algorithms import SolveOptions, eemax, maxmin, shannon_baselines, srmax, zfbf_baseline
from .exceptions import ConfigError
from .rate import make_regime, rate
from .system import PowerModel, downlink_sinr
from .units import dbm_to_watts, snr_db_to_power
from .validation import as_channel_set, check_blocklength, check_positive

__all__ = [
    "SumRateBeamformer",
    "EnergyEfficiencyBeamformer",
    "MaxMinBeamformer",
    "ZeroForcingBeamformer",
]


class _BeamformerBase(BaseEstimator):
    """Shared parameters and plumbing.

    Parameters
    ----------
    epsilon : float
        Target decoding error probability.
    n : int
        Blocklength in channel uses.
    d_bits : int
        Payload per block.
    snr_db : float
        Transmit SNR; the budget is ``10**(snr_db/10)`` times the noise power.
    alpha : array_like, optional
        User weights (``1/K`` each by default).
    eps_conv : float
        Relative convergence tolerance.
    max_outer, max_inner : int
        Iteration caps.
    shannon : bool
        Use the infinite-blocklength rate.
    """

    _objective = "srmax"

    def __init__(self, epsilon=1e-5, n=128, d_bits=256, snr_db=20.0, alpha=None,
                 eps_conv=1e-4, max_outer=30, max_inner=50, shannon=False):
        self.epsilon = epsilon
        self.n = n
        self.d_bits = d_bits
        self.snr_db = snr_db
        self.alpha = alpha
        self.eps_conv = eps_conv
        self.max_outer = max_outer
        self.max_inner = max_inner
        self.shannon = shannon

    def _regime(self):
        check_blocklength(self.n)
        check_blocklength(self.d_bits)
        return make_regime(self.epsilon, self.n, self.d_bits, shannon_mode=self.shannon)

    def _options(self):
        check_positive("eps_conv", self.eps_conv)
        return SolveOptions(alpha=self.alpha, eps_conv=self.eps_conv,
                            max_outer=self.max_outer, max_inner=self.max_inner,
                            shannon_mode=self.shannon)

    def _solve(self, ch, regime, P):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Design beamformers and powers for channel ``X``."""
        ch = as_channel_set(X)
        regime = self._regime()
        P = snr_db_to_power(self.snr_db)
        sol = self._solve(ch, regime, P)
        self.regime_ = regime
        self.solution_ = sol
        self.w_ = sol.w
        self.p_ = sol.p
        self.sinr_ = sol.gamma
        self.rates_ = sol.rates
        self.objective_ = sol.objective
        self.status_ = sol.status
        self.feasible_ = sol.feasible
        self.n_features_in_ = ch.n_tx
        return self

    def transform(self, X=None):
        """Power-scaled precoders ``sqrt(p_k) w_k`` stacked row-wise."""
        check_is_fitted(self, "w_")
        return np.sqrt(np.maximum(self.p_, 0.0))[:, None] * self.w_

    def predict(self, X):
        """Per-user rates of the fitted precoders on channel ``X``."""
        check_is_fitted(self, "w_")
        ch = as_channel_set(X)
        if ch.h.shape != self.w_.shape:
            raise ValueError(f"expected channels of shape {self.w_.shape}, got {ch.h.shape}")
        gam = downlink_sinr(ch, self.w_, self.p_)
        return np.atleast_1d(rate(gam, self.regime_.vartheta))

    def score(self, X, y=None):
        """Design objective after refitting on ``X``."""
        return float(self.fit(X).objective_)


class SumRateBeamformer(_BeamformerBase):
    """Weighted sum-rate maximization under per-user minimum rates."""

    def _solve(self, ch, regime, P):
        if self.shannon:
            return shannon_baselines(ch, P, self.n, self.d_bits, "srmax", self._options())
        return srmax(ch, regime, P, self._options())


class EnergyEfficiencyBeamformer(_BeamformerBase):
    """Energy-efficiency maximization.

    Extra parameters ``eta``, ``p_c_dbm`` and ``p_0_dbm`` set the consumed
    power model (amplifier inefficiency, per-antenna and static circuit
    power).
    """

    def __init__(self, epsilon=1e-5, n=128, d_bits=256, snr_db=20.0, alpha=None,
                 eps_conv=1e-4, max_outer=30, max_inner=50, shannon=False,
                 eta=1.0, p_c_dbm=30.0, p_0_dbm=40.0):
        super().__init__(epsilon=epsilon, n=n, d_bits=d_bits, snr_db=snr_db, alpha=alpha,
                         eps_conv=eps_conv, max_outer=max_outer, max_inner=max_inner,
                         shannon=shannon)
        self.eta = eta
        self.p_c_dbm = p_c_dbm
        self.p_0_dbm = p_0_dbm

    def _solve(self, ch, regime, P):
        pm = PowerModel(eta=self.eta, p_c=dbm_to_watts(self.p_c_dbm),
                        p_0=dbm_to_watts(self.p_0_dbm))
        return eemax(ch, regime, P, pm, self._options())


class MaxMinBeamformer(_BeamformerBase):
    """Max-min rate fairness; ``alpha`` is ignored."""

    def _solve(self, ch, regime, P):
        if self.shannon:
            return shannon_baselines(ch, P, self.n, self.d_bits, "maxmin", self._options())
        return maxmin(ch, regime, P, self._options())


class ZeroForcingBeamformer(_BeamformerBase):
    """Zero-forcing beams with an equal power split (baseline)."""

    def _solve(self, ch, regime, P):
        if self.shannon:
            raise ConfigError("the zero-forcing baseline has no Shannon variant")
        return zfbf_baseline(ch, regime, P)
