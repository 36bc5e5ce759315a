"""Command-line entry point.

    obstack run   --config exp.yaml [--out DIR] [--trials N] [--seed S] [--suppress M]
    obstack sweep --config exp.yaml [...]
    obstack bcrp  trace.csv
    obstack check trace.csv

The config may also be given positionally. Exit status: 0 success,
1 invalid configuration or input file, 2 numeric failure (an aborted trial,
a failed stacker or sweep cell, or a failed check).
"""

import argparse
import json
import os
import sys

from ..errors import ConfigError, InvalidInputError
from .config import load_config
from .experiment import run_experiment, sweep_learning_rates
from .report import check_trace, read_trace, write_experiment, write_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _add_run_options(p):
    p.add_argument("config_path", nargs="?", help="experiment config (YAML or JSON)")
    p.add_argument("--config", dest="config_opt", help="experiment config (YAML or JSON)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--trials", type=int, help="number of trials; seeds become seed..seed+trials-1")
    p.add_argument("--seed", type=int, help="base seed (non-negative)")
    p.add_argument("--suppress", type=int, help="steps excluded from summary statistics (default 100)")


def build_parser():
    parser = argparse.ArgumentParser(prog="obstack", description="Online Bayesian stacking experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_options(sub.add_parser("run", help="run an experiment and write traces and summaries"))
    _add_run_options(sub.add_parser("sweep", help="learning-rate sweep over EG and ONS"))
    p = sub.add_parser("bcrp", help="solve for the best constant weights of a trace")
    p.add_argument("trace", help="trace.csv written by 'run'")
    p = sub.add_parser("check", help="re-run identity and invariant checks on a trace")
    p.add_argument("trace", help="trace.csv written by 'run'")
    return parser


def _load(args):
    path = args.config_opt or args.config_path
    if path is None:
        raise ConfigError("a config file is required (positional or --config)")
    if args.config_opt and args.config_path and args.config_opt != args.config_path:
        raise ConfigError("config given twice with different paths")
    if args.suppress is not None and args.suppress < 0:
        raise ConfigError("--suppress must be non-negative")
    return load_config(path).with_overrides(trials=args.trials, seed=args.seed,
                                            suppress=args.suppress, out_dir=args.out)


def cmd_run(args):
    config = _load(args)
    reports = run_experiment(config)
    path = write_experiment(reports, config, config.out_dir)
    status = EXIT_OK
    for r in reports:
        if not r.ok:
            print(f"trial {r.trial} (seed {r.seed}): ABORTED at step {r.error_step}: {r.error}")
            status = EXIT_NUMERIC
            continue
        parts = []
        for tr in r.traces:
            if tr.ok:
                pll = r.reported_pll(tr.name)
                parts.append(f"{tr.name}={'n/a' if pll is None else format(pll, '.4f')}")
            else:
                parts.append(f"{tr.name}=FAILED@{tr.error_step}")
                status = EXIT_NUMERIC
        print(f"trial {r.trial} (seed {r.seed}): " + " ".join(parts))
    print(f"wrote {path}")
    return status


def cmd_sweep(args):
    config = _load(args)
    rows = sweep_learning_rates(config)
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "sweep.csv")
    write_sweep(rows, path)
    status = EXIT_OK
    print(f"{'algorithm':<10} {'rate':>8} {'median PLL':>12} {'std':>10} failed valid")
    for r in rows:
        med = "nan" if r.median_pll is None else f"{r.median_pll:.4f}"
        std = "nan" if r.std_pll is None else f"{r.std_pll:.4f}"
        print(f"{r.algorithm:<10} {r.rate:>8g} {med:>12} {std:>10} {r.n_failed:>6} {int(r.weights_valid):>5}")
        if r.n_failed or not r.weights_valid:
            status = EXIT_NUMERIC
    print(f"wrote {path}")
    return status


def cmd_bcrp(args):
    from ..stackers import solve_bcrp_log

    table = read_trace(args.trace)
    if table.t.size == 0:
        raise InvalidInputError(f"{args.trace} has no rows")
    res = solve_bcrp_log(table.log_densities)
    print(json.dumps({"weights": res.weights.tolist(), "log_wealth": res.log_wealth,
                      "avg_log_wealth": res.log_wealth / table.t.size, "fw_gap": res.gap,
                      "iterations": res.iterations}, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_check(args):
    results = check_trace(args.trace)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bcrp": cmd_bcrp, "check": cmd_check}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
