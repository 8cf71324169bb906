"""Command-line entry point: ``fblbeam <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from .exceptions import ConfigError
from .harness import (
    OBJECTIVES,
    SWEEP_COLUMNS,
    TABLE1_COLUMNS,
    ExperimentConfig,
    rows_to_csv,
    run_monte_carlo,
    solve_one,
    sweep,
    table1_report,
)
from .rate import make_regime

log = logging.getLogger("fblbeam")


def _list_of(conv):
    def parse(text):
        vals = [conv(v) for v in text.split(",") if v.strip()]
        return vals[0] if len(vals) == 1 else vals
    return parse


def _int_list(text):
    return _list_of(int)(text)


def _float_list(text):
    return _list_of(float)(text)


def _add_common(p, axes=True):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="experiment seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="output directory (stdout when omitted)")
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--trials", type=int, help="Monte Carlo trials M")
    p.add_argument("--nt", type=int, dest="n_tx", help="transmit antennas")
    p.add_argument("--d-bits", type=int, dest="d_bits", help="payload bits per block")
    p.add_argument("--eta", type=float, help="amplifier inefficiency")
    p.add_argument("--force", action="store_true", default=None,
                   help="accept values outside the standard parameter ranges")
    if axes:
        p.add_argument("--snr", type=_float_list, dest="snr_db", help="SNR in dB (comma list)")
        p.add_argument("--k", type=_int_list, dest="k_users", help="users (comma list)")
        p.add_argument("--n", type=_int_list, help="blocklength (comma list)")
        p.add_argument("--epsilon", type=_float_list, help="error probability (comma list)")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    over = {k: getattr(args, k, None) for k in
            ("seed", "objective", "trials", "n_tx", "d_bits", "eta", "force", "snr_db",
             "k_users", "n", "epsilon")}
    return cfg.with_overrides(**over)


def _emit(args, name: str, text: str):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", path)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_thresholds(args):
    out = []
    eps = args.epsilon if isinstance(args.epsilon, list) else [args.epsilon]
    ns = args.n if isinstance(args.n, list) else [args.n]
    for e in eps:
        for n in ns:
            out.append(make_regime(e, n, args.d_bits, shannon_mode=args.shannon).to_dict())
    doc = out[0] if len(out) == 1 else out
    _emit(args, "thresholds.json", json.dumps(doc, indent=2))


def cmd_table1(args):
    thetas = args.theta if args.theta is None or isinstance(args.theta, list) else [args.theta]
    alphas = args.alpha if args.alpha is None or isinstance(args.alpha, list) else [args.alpha]
    t0 = time.perf_counter()
    rows = table1_report(thetas, alphas, terms=args.terms)
    log.info("table1: %d rows in %.3f s", len(rows), time.perf_counter() - t0)
    _emit(args, "table1.csv", rows_to_csv(rows, TABLE1_COLUMNS))


def cmd_solve(args):
    cfg = _config(args)
    doc = solve_one(cfg, trial=args.trial)
    _emit(args, "solution.json", json.dumps(doc, indent=2))


def cmd_mc(args):
    cfg = _config(args)
    res = run_monte_carlo(cfg, workers=args.workers)
    if args.out:
        _emit(args, "records.csv", res.records_csv(timing=args.timing))
        _emit(args, "summary.json", res.summary_json())
    else:
        _emit(args, "summary.json", res.summary_json())


def cmd_sweep(args):
    cfg = _config(args)
    rows, _ = sweep(cfg, workers=args.workers)
    _emit(args, "sweep.csv", rows_to_csv(rows, SWEEP_COLUMNS))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fblbeam",
                                 description="Finite-blocklength multiuser beamforming.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="SINR thresholds and minimum rate as JSON")
    p.add_argument("--epsilon", type=_float_list, default=1e-5)
    p.add_argument("--n", type=_int_list, default=128)
    p.add_argument("--d-bits", type=int, dest="d_bits", default=256)
    p.add_argument("--shannon", action="store_true")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("table1", help="series vs bisection accuracy table as CSV")
    p.add_argument("--theta", type=_float_list)
    p.add_argument("--alpha", type=_float_list)
    p.add_argument("--terms", type=int, default=60)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("solve", help="solve one sampled instance, JSON output")
    _add_common(p)
    p.add_argument("--trial", type=int, default=0, help="trial index of the channel draw")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mc", help="Monte Carlo run: records CSV and summary JSON")
    _add_common(p)
    p.add_argument("--timing", action="store_true", help="add wall-clock times to records")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="sweep one or two axes, long-format CSV")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
