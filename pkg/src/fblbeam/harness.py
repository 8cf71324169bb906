"""Monte Carlo experiment driver, parameter sweeps and report tables.

Randomness is keyed on ``(seed, trial)``: trial ``i`` always sees the same
channel draw no matter how many worker processes run or in which order they
finish, and every cell of a sweep reuses the same draws (common random
numbers).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .algorithms import (
    SolveOptions,
    eemax,
    initialize,
    maxmin,
    shannon_baselines,
    srmax,
    zfbf_baseline,
)
from .exceptions import ConfigError, DegenerateChannelError
from .rate import dispersion, make_regime, rate, solve_rate_eq_bisect, solve_rate_eq_series
from .system import Geometry, PowerModel, sample_channels
from .units import dbm_to_watts, snr_db_to_power

__all__ = [
    "OBJECTIVES",
    "ExperimentConfig",
    "TrialRecord",
    "MonteCarloResult",
    "trial_rng",
    "run_trial",
    "run_monte_carlo",
    "sweep",
    "solve_one",
    "table1_grid",
    "table1_report",
    "RECORD_COLUMNS",
    "SWEEP_COLUMNS",
    "TABLE1_COLUMNS",
]

OBJECTIVES = ("srmax", "eemax", "maxmin", "zfbf", "shannon-srmax", "shannon-maxmin",
              "feasibility")
AXES = ("k_users", "n", "snr_db", "epsilon")

# standard parameter ranges; ``force`` skips them
_RANGES = {
    "k_users": (1, 16),
    "snr_db": (15.0, 30.0),
    "epsilon": (1e-10, 1e-2),
}
_BLOCKLENGTHS = (32, 64, 128, 256, 512)

# config-file spellings following the simulation-parameter table
_ALIASES = {
    "K": "k_users",
    "N_t": "n_tx",
    "Nt": "n_tx",
    "D": "d_bits",
    "SNR_dB": "snr_db",
    "SNR": "snr_db",
    "M": "trials",
    "eps": "epsilon",
    "P_c_dBm": "p_c_dbm",
    "P_0_dBm": "p_0_dbm",
    "d_0": "d0",
    "cell_radius": "radius",
    "rho": "exponent",
}


@dataclass
class ExperimentConfig:
    """One experiment.  ``k_users``, ``n``, ``snr_db`` and ``epsilon`` may be lists."""

    k_users: object = 6
    n_tx: int = 32
    n: object = 128
    d_bits: int = 256
    epsilon: object = 1e-5
    snr_db: object = 20.0
    trials: int = 200
    seed: int = 0
    objective: str = "srmax"
    eta: float = 1.0
    p_c_dbm: float = 30.0
    p_0_dbm: float = 40.0
    d0: float = 50.0
    radius: float = 300.0
    exponent: float = 3.0
    alpha: Optional[list] = None
    eps_conv: float = 1e-4
    max_outer: int = 30
    max_inner: int = 50
    sigma2: float = 1.0
    force: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        kw, unknown = {}, []
        for key, val in doc.items():
            key = _ALIASES.get(key, key)
            if key in names:
                kw[key] = val
            else:
                unknown.append(key)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def axes(self) -> dict:
        """List-valued sweep axes in canonical order."""
        return {a: list(getattr(self, a)) for a in AXES
                if isinstance(getattr(self, a), (list, tuple))}

    def cells(self):
        """Scalar configs over the cross product of all list-valued axes."""
        ax = self.axes()
        names = list(ax)
        for combo in itertools.product(*(ax[a] for a in names)):
            yield replace(self, **dict(zip(names, combo)))

    def validate(self) -> "ExperimentConfig":
        """Raise :class:`ConfigError` naming every offending field."""
        errs = []
        if self.objective not in OBJECTIVES:
            errs.append(f"objective: must be one of {', '.join(OBJECTIVES)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            errs.append("trials: must be an integer >= 1")
        if self.seed is None or not isinstance(self.seed, int) or self.seed < 0:
            errs.append("seed: must be a non-negative integer")
        if not isinstance(self.n_tx, int) or self.n_tx < 1:
            errs.append("n_tx: must be a positive integer")
        if not isinstance(self.d_bits, int) or self.d_bits < 1:
            errs.append("d_bits: must be a positive integer")
        for name in AXES:
            vals = getattr(self, name)
            vals = list(vals) if isinstance(vals, (list, tuple)) else [vals]
            if not vals:
                errs.append(f"{name}: empty list")
            for v in vals:
                msg = self._check_axis_value(name, v)
                if msg:
                    errs.append(f"{name}: {msg}")
        if self.eta < 1.0:
            errs.append("eta: must be >= 1")
        if not 0 < self.d0 < self.radius:
            errs.append("d0/radius: need 0 < d0 < radius")
        if self.exponent <= 0:
            errs.append("exponent: must be positive")
        if self.eps_conv <= 0:
            errs.append("eps_conv: must be positive")
        if self.sigma2 <= 0:
            errs.append("sigma2: must be positive")
        if self.alpha is not None:
            a = np.asarray(self.alpha, dtype=float)
            if np.any(a < 0) or not np.any(a > 0):
                errs.append("alpha: weights must be >= 0 with one positive")
        if errs:
            raise ConfigError("invalid config: " + "; ".join(errs))
        return self

    def _check_axis_value(self, name, v):
        if name in ("k_users", "n"):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                return f"{v!r} is not a positive integer"
            if name == "k_users" and v > self.n_tx:
                return f"{v} users exceed {self.n_tx} antennas"
        elif not isinstance(v, (int, float)) or not math.isfinite(v):
            return f"{v!r} is not a finite number"
        if name == "epsilon" and not 0 < v < 0.5:
            return f"{v!r} outside (0, 0.5)"
        if self.force:
            return None
        if name in _RANGES:
            lo, hi = _RANGES[name]
            if not lo <= v <= hi:
                return f"{v!r} outside [{lo:g}, {hi:g}] (use force to override)"
        if name == "n" and v not in _BLOCKLENGTHS:
            return f"{v!r} not in {_BLOCKLENGTHS} (use force to override)"
        return None

    # helpers for scalar configs
    def power_budget(self) -> float:
        return snr_db_to_power(self.snr_db, self.sigma2)

    def power_model(self) -> PowerModel:
        return PowerModel(eta=self.eta, p_c=dbm_to_watts(self.p_c_dbm),
                          p_0=dbm_to_watts(self.p_0_dbm))

    def geometry(self) -> Geometry:
        return Geometry(d0=self.d0, radius=self.radius, exponent=self.exponent)

    def options(self) -> SolveOptions:
        return SolveOptions(alpha=self.alpha, eps_conv=self.eps_conv,
                            max_outer=self.max_outer, max_inner=self.max_inner)


@dataclass
class TrialRecord:
    """Outcome of one Monte Carlo trial; ``objective`` is ``None`` when infeasible."""

    trial: int
    seed: int
    feasible: bool
    status: str
    objective: Optional[float] = None
    sum_power: Optional[float] = None
    sum_rate: Optional[float] = None
    min_rate: Optional[float] = None
    min_sinr: Optional[float] = None
    required_power: Optional[float] = None
    rates: tuple = ()
    iterations: dict = field(default_factory=dict)
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)


RECORD_COLUMNS = ("trial", "seed", "feasible", "status", "objective", "sum_power", "sum_rate",
                  "min_rate", "min_sinr", "required_power", "outer_iterations",
                  "inner_iterations", "mr_alg3", "mr_error", "mr_trad", "rates")
SWEEP_COLUMNS = ("cell", "objective", "k_users", "n", "snr_db", "epsilon", "statistic",
                 "value")
TABLE1_COLUMNS = ("theta", "alpha", "series", "exact", "residual")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for trial ``trial`` of experiment ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _solve_for(cfg: ExperimentConfig, ch):
    """Run the configured objective; returns ``(solution, regime)``."""
    P = cfg.power_budget()
    obj = cfg.objective
    if obj.startswith("shannon-"):
        regime = make_regime(cfg.epsilon, cfg.n, cfg.d_bits, shannon_mode=True)
        return shannon_baselines(ch, P, cfg.n, cfg.d_bits, obj.split("-", 1)[1],
                                 cfg.options()), regime
    regime = make_regime(cfg.epsilon, cfg.n, cfg.d_bits)
    if obj == "srmax":
        return srmax(ch, regime, P, cfg.options()), regime
    if obj == "eemax":
        return eemax(ch, regime, P, cfg.power_model(), cfg.options()), regime
    if obj == "maxmin":
        return maxmin(ch, regime, P, cfg.options()), regime
    if obj == "zfbf":
        return zfbf_baseline(ch, regime, P), regime
    if obj == "feasibility":
        return initialize(ch, regime, P), regime
    raise ConfigError(f"unknown objective {obj!r}")


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialRecord:
    """One channel draw and one solve for a scalar config."""
    t0 = time.perf_counter()
    ch = sample_channels(cfg.geometry(), cfg.k_users, cfg.n_tx, trial_rng(cfg.seed, trial),
                         sigma2=cfg.sigma2)
    try:
        sol, regime = _solve_for(cfg, ch)
    except DegenerateChannelError:
        return TrialRecord(trial=trial, seed=cfg.seed, feasible=False, status="degenerate",
                           wall_time=time.perf_counter() - t0)
    if cfg.objective == "feasibility":
        rec = TrialRecord(trial=trial, seed=cfg.seed, feasible=bool(sol.feasible),
                          status="feasible" if sol.feasible else "infeasible",
                          required_power=sol.required_power,
                          iterations={"init": sol.iterations})
        if sol.feasible:
            rec.objective = rec.sum_power = sol.required_power
        rec.wall_time = time.perf_counter() - t0
        return rec
    rec = TrialRecord(trial=trial, seed=cfg.seed, feasible=bool(sol.feasible),
                      status=sol.status, iterations=dict(sol.iterations))
    if "required_power" in sol.info:
        rec.required_power = sol.info["required_power"]
    rates_ok = np.all(np.isfinite(sol.rates))
    if rates_ok:
        rec.rates = tuple(float(r) for r in sol.rates)
        rec.sum_rate = float(np.sum(sol.rates))
        rec.min_rate = float(np.min(sol.rates))
        rec.min_sinr = float(np.min(sol.gamma))
        rec.sum_power = float(np.sum(sol.p))
    if sol.feasible:
        rec.objective = float(sol.objective)
        if cfg.objective == "maxmin":
            gam = rec.min_sinr
            rec.extras["mr_alg3"] = float(rate(gam, regime.vartheta))
            rec.extras["mr_error"] = float(regime.vartheta * math.sqrt(dispersion(gam)))
            rec.extras["ln1p_gamma"] = math.log1p(gam)
            trad = shannon_baselines(ch, cfg.power_budget(), cfg.n, cfg.d_bits, "maxmin",
                                     cfg.options())
            if trad.feasible:
                rec.extras["mr_trad"] = math.log1p(float(np.min(trad.gamma)))
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_trial_packed(args):
    return run_trial(*args)


@dataclass
class MonteCarloResult:
    summary: dict
    records: list

    def records_csv(self, timing: bool = False) -> str:
        return records_to_csv(self.records, timing=timing)

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True)


def records_to_csv(records, timing: bool = False) -> str:
    """Serialize records; the output depends only on the records' contents.

    Wall-clock times are left out unless ``timing`` is set, so repeated runs
    produce identical bytes.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(RECORD_COLUMNS) + (["wall_time"] if timing else [])
    w.writerow(cols)
    for r in sorted(records, key=lambda r: r.trial):
        row = [_fmt(r.trial), _fmt(r.seed), _fmt(r.feasible), r.status, _fmt(r.objective),
               _fmt(r.sum_power), _fmt(r.sum_rate), _fmt(r.min_rate), _fmt(r.min_sinr),
               _fmt(r.required_power), _fmt(r.iterations.get("outer")),
               _fmt(r.iterations.get("inner")), _fmt(r.extras.get("mr_alg3")),
               _fmt(r.extras.get("mr_error")), _fmt(r.extras.get("mr_trad")),
               ";".join(_fmt(x) for x in r.rates)]
        if timing:
            row.append(_fmt(r.wall_time))
        w.writerow(row)
    return buf.getvalue()


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def summarize(records, cfg: Optional[ExperimentConfig] = None) -> dict:
    """Feasible probability plus feasible-conditioned statistics."""
    recs = sorted(records, key=lambda r: r.trial)
    feas = [r for r in recs if r.feasible]
    objs = [r.objective for r in feas if r.objective is not None]
    status = {}
    for r in recs:
        status[r.status] = status.get(r.status, 0) + 1
    out = {
        "trials": len(recs),
        "feasible_count": len(feas),
        "feasible_probability": len(feas) / len(recs) if recs else float("nan"),
        "objective_mean": float(np.mean(objs)) if objs else None,
        "objective_median": float(np.median(objs)) if objs else None,
        "sum_rate_mean": _mean(r.sum_rate for r in feas),
        "min_rate_mean": _mean(r.min_rate for r in feas),
        "sum_power_mean": _mean(r.sum_power for r in feas),
        "status_counts": dict(sorted(status.items())),
    }
    for key in ("mr_alg3", "mr_error", "mr_trad", "ln1p_gamma"):
        vals = [r.extras[key] for r in feas if key in r.extras]
        if vals:
            out[f"{key}_mean"] = float(np.mean(vals))
    if cfg is not None:
        out["config"] = cfg.to_dict()
    return out


def _map_trials(cfg: ExperimentConfig, workers: int):
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if workers <= 1:
        return [run_trial(c, i) for c, i in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_trial_packed, jobs, chunksize=chunk))


def run_monte_carlo(cfg: ExperimentConfig, workers: int = 1) -> MonteCarloResult:
    """Run ``cfg.trials`` independent trials of a scalar config."""
    cfg.validate()
    if cfg.axes():
        raise ConfigError("run_monte_carlo needs scalar axes; use sweep for lists")
    records = sorted(_map_trials(cfg, workers), key=lambda r: r.trial)
    return MonteCarloResult(summary=summarize(records, cfg), records=records)


_SWEEP_STATS = ("trials", "feasible_count", "feasible_probability", "objective_mean",
                "objective_median", "sum_rate_mean", "min_rate_mean", "sum_power_mean",
                "mr_alg3_mean", "mr_error_mean", "mr_trad_mean", "ln1p_gamma_mean")


def sweep(cfg: ExperimentConfig, workers: int = 1):
    """Monte Carlo over the cross product of one or two list-valued axes.

    Returns ``(rows, results)`` where ``rows`` are long-format dicts with
    :data:`SWEEP_COLUMNS` keys.  Besides plain feasible-conditioned
    statistics, each cell reports ``*_common`` statistics restricted to the
    trials feasible in every cell, so that all cells average over the same
    channel draws.
    """
    cfg.validate()
    ax = cfg.axes()
    if not 1 <= len(ax) <= 2:
        raise ConfigError(f"sweep needs one or two list-valued axes, got {len(ax)}")
    cells = list(cfg.cells())
    results = [run_monte_carlo(c, workers) for c in cells]
    common = set(range(cfg.trials))
    for res in results:
        common &= {r.trial for r in res.records if r.feasible}
    rows = []
    for idx, (c, res) in enumerate(zip(cells, results)):
        stats = {k: res.summary.get(k) for k in _SWEEP_STATS}
        sub = summarize([r for r in res.records if r.trial in common]) if common else None
        stats["common_count"] = len(common)
        for k in ("objective_mean", "sum_rate_mean", "min_rate_mean", "mr_alg3_mean",
                  "mr_error_mean", "mr_trad_mean", "ln1p_gamma_mean"):
            stats[f"{k}_common"] = None if sub is None else sub.get(k)
        for k, v in stats.items():
            if v is None:
                continue
            rows.append({"cell": idx, "objective": c.objective, "k_users": c.k_users,
                         "n": c.n, "snr_db": c.snr_db, "epsilon": c.epsilon,
                         "statistic": k, "value": v})
    return rows, results


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else _fmt(r[c]) for c in columns])
    return buf.getvalue()


def solve_one(cfg: ExperimentConfig, seed: Optional[int] = None, trial: int = 0) -> dict:
    """Solve a single sampled instance and return a JSON-ready document."""
    cfg.validate()
    if cfg.axes():
        raise ConfigError("solve needs scalar axes")
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    ch = sample_channels(cfg.geometry(), cfg.k_users, cfg.n_tx, trial_rng(cfg.seed, trial),
                         sigma2=cfg.sigma2)
    sol, regime = _solve_for(cfg, ch)
    doc = {"config": cfg.to_dict(), "regime": regime.to_dict(), "channels": ch.to_dict()}
    if cfg.objective == "feasibility":
        doc["solution"] = {
            "status": "feasible" if sol.feasible else "infeasible",
            "feasible": bool(sol.feasible),
            "required_power": sol.required_power,
            "deficit": sol.deficit,
        }
    else:
        doc["solution"] = sol.to_dict()
        if not sol.feasible and "deficit" in sol.info:
            doc["solution"]["deficit"] = sol.info["deficit"]
    return doc


def table1_grid():
    """``(theta, alpha)`` rows of the reference accuracy table."""
    col = ([0.001 + 0.005 * i for i in range(25)] + [0.126 + 0.005 * i for i in range(25)]
           + [0.251 + 0.005 * i for i in range(10)] + [0.30]
           + [0.31 + 0.01 * i for i in range(14)] + [0.45 + 0.01 * i for i in range(4)]
           + [0.50, 0.55] + [1.05 + 0.5 * i for i in range(18)] + [10.0])
    rows = [(round(t, 3), 0.0) for t in col]
    thetas = [0.01 + 0.05 * i for i in range(10)] + [0.5] + [1.0 + 0.5 * i for i in range(19)]
    for a in (0.5, 1.0, 1.5, 2.0, 4.0):
        rows += [(round(t, 3), a) for t in thetas]
    return rows


def table1_report(theta_grid=None, alpha_grid=None, terms: int = 60):
    """Series solution, bisection solution and series residual ``R(series) - alpha``.

    With both grids omitted the reference rows are used; otherwise the
    cross product of the two grids.
    """
    if theta_grid is None and alpha_grid is None:
        pairs = table1_grid()
    else:
        pairs = [(float(t), float(a)) for a in (alpha_grid or [0.0])
                 for t in (theta_grid or [])]
    rows = []
    for theta, alpha in pairs:
        exact = solve_rate_eq_bisect(alpha, theta)
        try:
            series = solve_rate_eq_series(alpha, theta, terms=terms)
            resid = float(rate(series, theta)) - alpha if series >= 0 else float("nan")
        except (FloatingPointError, ValueError):
            series, resid = float("nan"), float("nan")
        rows.append({"theta": theta, "alpha": alpha, "series": series, "exact": exact,
                     "residual": resid})
    return rows
