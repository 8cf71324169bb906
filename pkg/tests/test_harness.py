import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fblbeam.exceptions import ConfigError
from fblbeam.harness import (
    RECORD_COLUMNS,
    SWEEP_COLUMNS,
    TABLE1_COLUMNS,
    ExperimentConfig,
    rows_to_csv,
    run_monte_carlo,
    run_trial,
    solve_one,
    sweep,
    table1_grid,
    table1_report,
    trial_rng,
)
from fblbeam.rate import make_regime
from fblbeam.units import dbm_to_watts, snr_db_to_power, watts_to_dbm

SMALL = dict(k_users=2, n_tx=4, trials=6, seed=3)


def test_units():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(40.0) == pytest.approx(10.0)
    assert watts_to_dbm(0.001) == pytest.approx(0.0)
    assert snr_db_to_power(20.0, 2.0) == pytest.approx(200.0)
    assert isinstance(dbm_to_watts(30), float)
    np.testing.assert_allclose(dbm_to_watts([0.0, 30.0]), [1e-3, 1.0])


def test_config_aliases_and_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"K": 4, "N_t": 16, "SNR_dB": 25, "M": 10, "eps": 1e-4}))
    cfg = ExperimentConfig.from_json(path)
    assert (cfg.k_users, cfg.n_tx, cfg.snr_db, cfg.trials, cfg.epsilon) == (4, 16, 25, 10, 1e-4)
    assert cfg.validate() is cfg
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_defaults_power_model():
    cfg = ExperimentConfig()
    pm = cfg.power_model()
    assert pm.p_c == pytest.approx(1.0) and pm.p_0 == pytest.approx(10.0)
    assert cfg.power_budget() == pytest.approx(100.0)


def test_validation_lists_every_bad_field():
    cfg = ExperimentConfig(k_users=40, snr_db=50.0, n=100, trials=0, objective="nope")
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    msg = str(exc.value)
    for field in ("k_users", "snr_db", "n:", "trials", "objective"):
        assert field in msg


def test_force_lifts_range_checks_only():
    ExperimentConfig(snr_db=11.0, n=100, force=True).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(epsilon=0.6, force=True).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(k_users=33, n_tx=32, force=True).validate()


def test_cells_cross_product():
    cfg = ExperimentConfig(k_users=[2, 4], snr_db=[15.0, 20.0, 25.0])
    cells = list(cfg.cells())
    assert len(cells) == 6
    assert [(c.k_users, c.snr_db) for c in cells][:3] == [(2, 15.0), (2, 20.0), (2, 25.0)]
    assert list(cfg.axes()) == ["k_users", "snr_db"]


def test_trial_rng_is_counter_based():
    a = trial_rng(5, 3).standard_normal(4)
    b = trial_rng(5, 3).standard_normal(4)
    c = trial_rng(5, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


@pytest.mark.parametrize("objective", ["srmax", "maxmin", "zfbf", "feasibility",
                                       "shannon-srmax"])
def test_records_header_and_rows(objective):
    cfg = ExperimentConfig(objective=objective, **SMALL)
    res = run_monte_carlo(cfg)
    rows = list(csv.reader(io.StringIO(res.records_csv())))
    assert tuple(rows[0]) == RECORD_COLUMNS
    assert len(rows) == SMALL["trials"] + 1
    s = json.loads(res.summary_json())
    assert s["trials"] == SMALL["trials"]
    assert 0 <= s["feasible_probability"] <= 1


def test_timing_column_is_opt_in():
    res = run_monte_carlo(ExperimentConfig(objective="zfbf", **SMALL))
    assert res.records_csv().splitlines()[0].split(",")[-1] == "rates"
    assert res.records_csv(timing=True).splitlines()[0].split(",")[-1] == "wall_time"


def test_worker_count_does_not_change_records():
    cfg = ExperimentConfig(objective="maxmin", **SMALL)
    one = run_monte_carlo(cfg, workers=1).records_csv()
    two = run_monte_carlo(cfg, workers=2).records_csv()
    assert one == two


def test_maxmin_records_rate_split():
    cfg = ExperimentConfig(objective="maxmin", k_users=2, n_tx=8, trials=4, seed=1)
    regime = make_regime(cfg.epsilon, cfg.n, cfg.d_bits)
    for t in range(cfg.trials):
        rec = run_trial(cfg, t)
        if rec.feasible:
            ex = rec.extras
            assert ex["mr_alg3"] + ex["mr_error"] == pytest.approx(math.log1p(rec.min_sinr),
                                                                    abs=1e-12)
            assert ex["mr_trad"] >= ex["mr_alg3"]
            assert rec.min_rate >= regime.r_min - 1e-9


def test_sweep_rows_and_common_statistics():
    cfg = ExperimentConfig(objective="feasibility", k_users=[2, 4], n_tx=8, trials=8, seed=2)
    rows, results = sweep(cfg)
    assert len(results) == 2
    text = rows_to_csv(rows, SWEEP_COLUMNS)
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    stats = {(r["cell"], r["statistic"]) for r in rows}
    assert (0, "feasible_probability") in stats and (1, "common_count") in stats
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig(objective="zfbf", **SMALL))


def test_solve_one_documents():
    doc = solve_one(ExperimentConfig(objective="zfbf", k_users=2, n_tx=4))
    assert set(doc) == {"config", "regime", "channels", "solution"}
    assert doc["solution"]["status"] in ("optimal", "infeasible")
    bad = solve_one(ExperimentConfig(objective="srmax", k_users=8, n_tx=8, snr_db=15.0))
    assert bad["solution"]["feasible"] is False
    assert bad["solution"]["deficit"] > 0
    with pytest.raises(ConfigError):
        solve_one(ExperimentConfig(k_users=[2, 4]))


def test_table1_report_default_rows():
    assert len(table1_grid()) == 250
    rows = table1_report(theta_grid=[0.5, 2.0], alpha_grid=[0.0, 2.0])
    assert len(rows) == 4
    assert set(rows[0]) >= set(TABLE1_COLUMNS)


def _cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "fblbeam", *args], capture_output=True,
                          text=True, cwd=cwd)


def test_cli_thresholds_stdout():
    out = _cli("thresholds", "--epsilon", "1e-5", "--n", "128")
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    assert doc["nu3"] == pytest.approx(make_regime(1e-5, 128, 256).nu3)


def test_cli_writes_files(tmp_path):
    d = str(tmp_path)
    assert _cli("table1", "--theta", "0.5,1", "--alpha", "0", "--out", d).returncode == 0
    assert (tmp_path / "table1.csv").read_text().startswith(",".join(TABLE1_COLUMNS))
    assert _cli("solve", "--objective", "maxmin", "--k", "2", "--nt", "4", "--out",
                d).returncode == 0
    assert json.loads((tmp_path / "solution.json").read_text())["config"]["k_users"] == 2
    assert _cli("mc", "--objective", "zfbf", "--k", "2", "--nt", "4", "--trials", "3",
                "--out", d).returncode == 0
    assert (tmp_path / "records.csv").exists() and (tmp_path / "summary.json").exists()
    assert _cli("sweep", "--objective", "feasibility", "--k", "2,3", "--nt", "4",
                "--trials", "3", "--out", d).returncode == 0
    assert (tmp_path / "sweep.csv").read_text().startswith(",".join(SWEEP_COLUMNS))


def test_cli_config_error_exit_code():
    out = _cli("solve", "--snr", "50")
    assert out.returncode == 2
    assert "snr_db" in out.stderr
