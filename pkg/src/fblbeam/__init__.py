"""Beamforming for multiuser downlinks under finite-blocklength rates."""

from .algorithms import (
    InitResult,
    ScaState,
    SolveOptions,
    build_sca_subproblem,
    eemax,
    initialize,
    maxmin,
    shannon_baselines,
    srmax,
    zfbf_baseline,
)
from .convex import (
    SmoothConvexProgram,
    SolverReport,
    bisect_maxmin,
    maxmin_feasible,
    min_power_fixed_point,
    solve_ipm,
)
from .estimators import (
    EnergyEfficiencyBeamformer,
    MaxMinBeamformer,
    SumRateBeamformer,
    ZeroForcingBeamformer,
)
from .exceptions import ConfigError, DegenerateChannelError, InfeasibleError
from .harness import ExperimentConfig, run_monte_carlo, solve_one, sweep, table1_report
from .rate import (
    RateRegime,
    make_regime,
    q_inv,
    rate,
    solve_rate_eq_bisect,
    solve_rate_eq_series,
)
from .system import (
    BeamSolution,
    ChannelSet,
    Geometry,
    PowerModel,
    downlink_sinr,
    duality_transfer,
    evaluate,
    gain_matrix,
    mmse_beamformers,
    sample_channels,
    uplink_sinr,
    zf_beamformers,
)

__version__ = "0.1.0"
