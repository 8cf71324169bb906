"""Input checks shared by the estimators, harness and CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigError
from .system import ChannelSet

__all__ = [
    "check_channels",
    "check_positive",
    "check_probability",
    "check_blocklength",
    "as_channel_set",
]


def check_channels(H, allow_wide: bool = False) -> np.ndarray:
    """Return ``H`` as a finite complex ``(k_users, n_tx)`` array.

    Raises
    ------
    ValueError
        On wrong rank, non-finite entries, or more users than antennas.
    """
    H = np.asarray(H)
    if H.ndim == 1:
        H = H[None, :]
    if H.ndim != 2:
        raise ValueError(f"channel matrix must be 2-D, got shape {H.shape}")
    if H.size == 0:
        raise ValueError("channel matrix is empty")
    H = H.astype(complex, copy=False)
    if not np.all(np.isfinite(H)):
        raise ValueError("channel matrix contains NaN or inf")
    if not allow_wide and H.shape[0] > H.shape[1]:
        raise ValueError(f"need k_users <= n_tx, got {H.shape[0]} > {H.shape[1]}")
    return H


def as_channel_set(X, sigma2=1.0) -> ChannelSet:
    """Accept a :class:`ChannelSet` or a raw channel matrix."""
    if isinstance(X, ChannelSet):
        return X
    H = check_channels(X)
    return ChannelSet(h=H, sigma2=sigma2)


def check_positive(name: str, value, strict: bool = True) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ConfigError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value!r}")
    return float(value)


def check_probability(name: str, value, upper: float = 0.5) -> float:
    value = check_positive(name, value)
    if value >= upper:
        raise ConfigError(f"{name} must lie in (0, {upper}), got {value!r}")
    return value


def check_blocklength(n) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n <= 0:
        raise ConfigError(f"blocklength must be a positive integer, got {n!r}")
    return int(n)
