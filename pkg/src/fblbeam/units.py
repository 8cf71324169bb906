"""Unit conversions used by configs and the CLI."""

import numpy as np


def dbm_to_watts(dbm):
    """30 dBm is 1 W."""
    out = 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(watts):
    out = 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0
    return float(out) if out.ndim == 0 else out


def snr_db_to_power(snr_db, sigma2: float = 1.0):
    """Transmit power budget ``10**(snr_db/10) * sigma2``."""
    out = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0) * sigma2
    return float(out) if out.ndim == 0 else out
