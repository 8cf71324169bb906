import io
import json

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import orthonormal_channels, random_channels as _random_channels
from fblbeam.algorithms import (
    ScaState,
    SolveOptions,
    build_sca_subproblem,
    eemax,
    energy_efficiency,
    initialize,
    interior_start,
    maxmin,
    shannon_baselines,
    srmax,
    zfbf_baseline,
)
from fblbeam.convex import solve_ipm
from fblbeam.rate import make_regime, rate
from fblbeam.system import PowerModel, downlink_sinr, uplink_sinr

P20 = 100.0  # 20 dB with unit noise


def random_channels(seed, k_users=4, n_tx=8):
    # 20 dB stronger than the cell-edge default so that every draw is feasible
    return _random_channels(seed, k_users, n_tx, sigma2=0.01)


def _orth_two_user_oracle(g, P, regime):
    """Best orthogonal-channel sum rate: 2-D grid at step P/2000, then a line polish."""
    v = regime.vartheta
    lo = regime.nu3 / g
    grid = np.arange(0.0, P + P / 4000, P / 2000)
    p1, p2 = np.meshgrid(grid, grid, indexing="ij")
    ok = (p1 >= lo[0]) & (p2 >= lo[1]) & (p1 + p2 <= P * (1 + 1e-12))
    total = np.where(ok, rate(np.maximum(p1 * g[0], 0), v) + rate(np.maximum(p2 * g[1], 0), v),
                     -np.inf)
    i = np.unravel_index(np.argmax(total), total.shape)
    best = total[i]
    # the optimum spends the whole budget; polish along p1 + p2 = P
    res = minimize_scalar(lambda x: -(rate(x * g[0], v) + rate((P - x) * g[1], v)),
                          bounds=(lo[0], P - lo[1]), method="bounded",
                          options={"xatol": 1e-12})
    return max(best, -res.fun), grid[i[0]]


def _inner_sequences(trace):
    seqs = {}
    for e in trace:
        if e["loop"] == "inner":
            seqs.setdefault(e["outer"], []).append(e["objective"])
    return seqs


def test_options_weights():
    assert np.allclose(SolveOptions().weights(4), 0.25)
    with pytest.raises(ValueError):
        SolveOptions(alpha=[1.0, 2.0]).weights(3)
    with pytest.raises(ValueError):
        SolveOptions(alpha=[0.0, 0.0]).weights(2)


def test_initialize_meets_threshold_with_minimum_power(regime):
    ch = random_channels(0, k_users=4, n_tx=8)
    init = initialize(ch, regime, P20)
    assert init.feasible
    np.testing.assert_allclose(downlink_sinr(ch, init.w, init.p), regime.nu3, rtol=1e-9)
    assert init.p.sum() == pytest.approx(init.q_tilde.sum(), rel=1e-9)
    assert init.deficit == 0.0
    w, p, qt = init
    assert qt is init.q_tilde


def test_initialize_reports_deficit(regime):
    ch = random_channels(0, k_users=4, n_tx=8)
    init = initialize(ch, regime, 1e-3)
    assert not init.feasible
    assert init.deficit == pytest.approx(init.required_power - 1e-3)
    with pytest.raises(ValueError):
        initialize(ch, regime, 0.0)


@pytest.mark.parametrize("K", [1, 2, 4])
def test_subproblem_dimensions_and_tightness(regime, K):
    ch = random_channels(K, k_users=K, n_tx=6)
    init = initialize(ch, regime, P20)
    q = init.q_tilde * 1.5 if K > 1 else init.q_tilde * 2
    state = ScaState.from_powers(ch, init.w, q, P20, init.q_tilde)
    alpha = np.full(K, 1.0 / K)
    prog = build_sca_subproblem(ch, init.w, state, regime, P20, alpha)
    assert prog.dim == 5 * K + 2 * K * (K - 1)
    x0 = state.pack()
    assert prog.max_violation(x0) <= 1e-9
    # surrogate equals the true weighted rate at the linearization point
    true = np.sum(alpha * rate(uplink_sinr(ch, init.w, q), regime.vartheta))
    assert prog.objective(x0)[0] == pytest.approx(true, rel=1e-12)
    viol = state.violations(regime.nu3, P20)
    assert max(viol.values()) <= 1e-9
    rep = solve_ipm(prog, x0)
    assert rep.obj >= true - 1e-9
    q_new = ScaState.unpack(rep.x_star, K, state.gamma_tilde, state.q_tilde).q
    # the new powers give a valid state once the surrogates are made tight again
    fresh = ScaState.from_powers(ch, init.w, q_new, P20, init.q_tilde)
    assert max(fresh.violations(regime.nu3, P20).values()) <= 1e-7


def test_interior_start_is_strictly_feasible(regime):
    # all SINRs sit exactly at nu3 here, a start phase-I used to stall on
    from fblbeam.harness import ExperimentConfig, trial_rng
    from fblbeam.system import sample_channels
    cfg = ExperimentConfig(k_users=6, seed=2024)
    ch = sample_channels(cfg.geometry(), 6, 32, trial_rng(cfg.seed, 56))
    init = initialize(ch, regime, P20)
    state = ScaState.from_powers(ch, init.w, init.q_tilde, P20, init.q_tilde)
    prog = build_sca_subproblem(ch, init.w, state, regime, P20, np.full(6, 1 / 6))
    x0 = interior_start(ch, init.w, state, regime, P20)
    assert prog.max_violation(x0) < 0
    assert solve_ipm(prog, x0).status == "optimal"
    sol = srmax(ch, regime, P20)
    assert sol.iterations["inner"] > 0 and sol.min_rate > regime.r_min + 1e-3


def test_interior_start_needs_spare_budget(regime):
    ch = random_channels(0, k_users=3, n_tx=6)
    init = initialize(ch, regime, P20)
    P = init.required_power
    state = ScaState.from_powers(ch, init.w, init.q_tilde, P, init.q_tilde)
    assert interior_start(ch, init.w, state, regime, P) is None


def test_subproblem_rejects_point_outside_box(regime):
    ch = random_channels(1, k_users=2, n_tx=4)
    init = initialize(ch, regime, P20)
    state = ScaState.from_powers(ch, init.w, init.q_tilde, P20, init.q_tilde)
    state.psi = state.psi * 0 + 2.0
    with pytest.raises(ValueError):
        build_sca_subproblem(ch, init.w, state, regime, P20, [0.5, 0.5])


def test_srmax_single_user_uses_full_power(regime):
    ch = random_channels(2, k_users=1, n_tx=4)
    sol = srmax(ch, regime, P20)
    g = np.sum(np.abs(ch.h_bar) ** 2)
    assert sol.total_power == pytest.approx(P20, rel=1e-6)
    assert sol.rates[0] == pytest.approx(rate(P20 * g, regime.vartheta), abs=1e-6)


@pytest.mark.parametrize("g", [(0.5, 2.0), (1.0, 1.0), (0.2, 5.0)])
def test_srmax_two_orthogonal_users_match_grid(regime, g):
    g = np.array(g)
    ch = orthonormal_channels(g, n_tx=4, seed=3)
    sol = srmax(ch, regime, P20, SolveOptions(eps_conv=1e-8))
    best, _ = _orth_two_user_oracle(g, P20, regime)
    assert sol.sum_rate == pytest.approx(best, abs=1e-3)
    assert sol.sum_rate <= best + 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_srmax_inner_objective_nondecreasing(regime, seed):
    ch = random_channels(seed, k_users=4, n_tx=8)
    sol = srmax(ch, regime, P20)
    assert sol.feasible
    for seq in _inner_sequences(sol.trace).values():
        assert np.all(np.diff(seq) >= -1e-9)
    outer = [e["objective"] for e in sol.trace if e["loop"] == "outer"]
    assert np.all(np.diff(outer) >= -1e-9)
    assert np.all(sol.gamma >= regime.nu3 * (1 - 1e-8))
    assert sol.total_power <= P20 * (1 + 1e-9)
    assert sol.info["duality_sinr_error"] < 1e-8
    assert sol.objective == pytest.approx(np.mean(sol.rates))


def test_srmax_beats_its_start(regime):
    ch = random_channels(9, k_users=3, n_tx=6)
    init = initialize(ch, regime, P20)
    start = np.mean(rate(downlink_sinr(ch, init.w, init.p), regime.vartheta))
    assert srmax(ch, regime, P20).objective > start


def test_srmax_trace_stream(regime):
    buf = io.StringIO()
    ch = random_channels(1, k_users=2, n_tx=4)
    sol = srmax(ch, regime, P20, SolveOptions(trace_stream=buf))
    lines = [json.loads(s) for s in buf.getvalue().splitlines()]
    assert lines == json.loads(json.dumps(sol.trace))


def test_infeasible_budget_is_reported(regime):
    ch = random_channels(0, k_users=4, n_tx=8)
    for solver in (srmax, maxmin):
        sol = solver(ch, regime, 1e-3)
        assert not sol.feasible and sol.status == "infeasible"
        assert sol.info["required_power"] > 1e-3
        assert np.isnan(sol.rates).all()


def _ee_grid_oracle(g, P, regime, pm, n_tx):
    lo = regime.nu3 / g

    def ee(p):
        return rate(p * g, regime.vartheta) / pm.total(p, n_tx)
    grid = np.linspace(lo, P, 20001)
    vals = ee(grid)
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda p: -ee(p), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    return max(vals[i], -res.fun)


@pytest.mark.parametrize("seed,snr", [(0, 20.0), (5, 25.0), (7, 12.0)])
def test_eemax_single_user_matches_grid(regime, seed, snr):
    ch = random_channels(seed, k_users=1, n_tx=4)
    P = 10 ** (snr / 10)
    pm = PowerModel(eta=1.0, p_c=1.0, p_0=10.0)
    sol = eemax(ch, regime, P, pm, SolveOptions(eps_conv=1e-9))
    ref = _ee_grid_oracle(float(np.sum(np.abs(ch.h_bar) ** 2)), P, regime, pm, 4)
    assert sol.objective == pytest.approx(ref, rel=1e-4)
    assert sol.objective <= ref * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_eemax_lambdas_nondecreasing_and_beats_srmax(regime, seed):
    ch = random_channels(seed, k_users=3, n_tx=6)
    pm = PowerModel()
    ee = eemax(ch, regime, P20, pm)
    lam = ee.info["lambdas"]
    assert np.all(np.diff(lam) >= 0)
    sr = srmax(ch, regime, P20)
    ee_sr = energy_efficiency(sr.rates, 1 / 3, sr.total_power, 6, pm)
    assert ee.objective >= ee_sr * (1 - 1e-6)
    assert np.all(ee.gamma >= regime.nu3 * (1 - 1e-8))


@pytest.mark.parametrize("seed", range(4))
def test_maxmin_equalizes_rates(regime, seed):
    ch = random_channels(seed, k_users=4, n_tx=8)
    sol = maxmin(ch, regime, P20)
    assert sol.feasible
    assert np.ptp(sol.rates) < 1e-4
    assert sol.objective == pytest.approx(rate(sol.info["mu"], regime.vartheta), rel=1e-6)
    assert sol.total_power == pytest.approx(P20, rel=1e-6)
    outer = [e["objective"] for e in sol.trace if e["loop"] == "outer"]
    assert np.all(np.diff(outer) >= -1e-12)


def test_maxmin_single_user_closed_form(regime):
    ch = random_channels(3, k_users=1, n_tx=4)
    sol = maxmin(ch, regime, P20)
    assert sol.info["mu"] == pytest.approx(P20 * np.sum(np.abs(ch.h_bar) ** 2), rel=1e-6)


def test_maxmin_min_rate_at_least_srmax(regime):
    ch = random_channels(12, k_users=3, n_tx=6)
    assert maxmin(ch, regime, P20).min_rate >= srmax(ch, regime, P20).min_rate - 1e-6


def test_zfbf_baseline(regime):
    ch = random_channels(0, k_users=4, n_tx=8)
    sol = zfbf_baseline(ch, regime, P20)
    np.testing.assert_allclose(sol.p, P20 / 4)
    assert np.all(sol.rates >= 0)
    assert sol.feasible == bool(np.all(sol.gamma >= regime.nu3 * (1 - 1e-12)))
    assert sol.objective == pytest.approx(np.mean(sol.rates))


def test_shannon_baselines_single_user():
    ch = random_channels(2, k_users=1, n_tx=4)
    g = np.sum(np.abs(ch.h_bar) ** 2)
    sol = shannon_baselines(ch, P20, 128, objective="srmax")
    assert sol.rates[0] == pytest.approx(np.log1p(P20 * g), abs=1e-6)
    mm = shannon_baselines(ch, P20, 128, objective="maxmin")
    assert mm.rates[0] == pytest.approx(np.log1p(P20 * g), abs=1e-6)
    with pytest.raises(ValueError):
        shannon_baselines(ch, P20, 128, objective="nope")


def test_shannon_rate_exceeds_finite_blocklength(regime):
    ch = random_channels(4, k_users=3, n_tx=6)
    fbl = srmax(ch, regime, P20)
    sh = shannon_baselines(ch, P20, 128)
    assert sh.sum_rate > fbl.sum_rate
    assert make_regime(1e-5, 128, 256, shannon_mode=True).vartheta == 0.0
