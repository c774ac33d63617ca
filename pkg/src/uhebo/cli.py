"""Command-line entry point: ``uhebo run --config exp.json [overrides]``."""

import argparse
import json
import logging
import sys

from .errors import ConfigError
from .harness import ExperimentConfig, run_experiment

# CLI flag -> ExperimentConfig field
_OVERRIDES = {
    "objective": "objective",
    "strategy": "strategies",
    "budget": "budget",
    "repeats": "repeats",
    "seed": "seed",
    "init_points": "init_points",
    "mt_factor": "mt_factor",
    "ucb_mult": "ucb_multiplier",
    "noise_std": "noise_std",
    "mse_grid": "mse_grid",
    "out_dir": "out_dir",
    "threads": "threads",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="uhebo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment grid")
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--objective")
    run.add_argument("--strategy", action="append",
                     help="strategy name; repeat for several (replaces the config list)")
    run.add_argument("--budget", type=int)
    run.add_argument("--repeats", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--init-points", type=int)
    run.add_argument("--mt-factor", type=float)
    run.add_argument("--ucb-mult", type=float)
    run.add_argument("--noise-std", type=float)
    run.add_argument("--mse-grid", type=int)
    run.add_argument("--out-dir")
    run.add_argument("--threads", type=int)
    run.add_argument("--record-timing", action="store_true",
                     help="fill the wall_ms column (makes the CSV non-reproducible)")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args):
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    for flag, fieldname in _OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            raw[fieldname] = value
    if args.record_timing:
        raw["record_timing"] = True
    return ExperimentConfig.from_dict(raw)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        result = run_experiment(config)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name, entry in result.summary["strategies"].items():
        parts = [f"{name}: runs={entry['runs']}"]
        if entry.get("final_regret_mean") is not None:
            se = entry["final_regret_se"]
            parts.append(f"regret={entry['final_regret_mean']:.4g}"
                         + (f"±{se:.2g}" if se is not None else ""))
        if entry.get("mse_mean") is not None:
            parts.append(f"mse={entry['mse_mean']:.4g}")
        print(" ".join(parts))
    print(f"wrote {result.traces_path} and {result.summary_path}")
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
