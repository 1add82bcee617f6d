"""Command-line front end: ``mdimkit list`` and ``mdimkit run <experiment>``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import BudgetExceeded, ConfigError, PrecisionRefusal

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_PRECISION = 4
EXIT_UNKNOWN = 5

# summary keys carrying entropies or rates; everything else is dimensionless
RATE_KEYS = {"h_mu", "target", "final_gap", "lower_margin", "upper_margin", "growth",
             "threshold", "min_margin"}

# per-experiment flags; values stay strings and are parsed by the experiment
PARAM_FLAGS = {
    "--k": "k", "--K": "K", "--delta": "delta", "--p": "p", "--eps": "eps",
    "--n-max": "n_max", "--n": "n", "--L": "L", "--alphabet": "alphabet",
    "--grid": "grid", "--budget": "budget", "--grid-bits": "grid_bits",
    "--tolerance": "tolerance",
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdimkit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    ls = sub.add_parser("list", help="show registered experiments")
    ls.add_argument("--json", action="store_true", help="machine-readable output")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", nargs="?", help="registry name (or give --config)")
    run.add_argument("--config", type=Path, help="INI file with an [experiment] section")
    run.add_argument("--out", type=Path, help="output directory (default out/<experiment>)")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int, help="cap on worker threads")
    run.add_argument("--bits", action="store_true", help="print rates in bits")
    for flag, key in PARAM_FLAGS.items():
        run.add_argument(flag, dest=f"param_{key}", metavar=key.upper())
    return ap


def _print_summary(summary: dict, bits: bool) -> None:
    scale = 1 / math.log(2) if bits else 1.0
    unit = "bits" if bits else "nats"

    def show(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                show(f"{prefix}{k}.", v)
        elif isinstance(obj, float) and prefix[:-1].rsplit(".", 1)[-1] in RATE_KEYS:
            print(f"  {prefix[:-1]} = {obj * scale:.17g} ({unit})")
        else:
            print(f"  {prefix[:-1]} = {obj}")

    show("", summary)


def main(argv=None) -> int:
    from .experiments import REGISTRY, ExperimentConfig, UnknownExperiment, list_registry, \
        read_config, run_experiment

    args = _parser().parse_args(argv)
    if args.command == "list":
        rows = list_registry()
        if args.json:
            print(json.dumps(rows, indent=2))
        else:
            width = max(len(r["name"]) for r in rows)
            for r in rows:
                print(f"{r['name']:<{width}}  {r['anchor']}")
        return EXIT_OK

    try:
        cfg = read_config(args.config) if args.config else None
        if cfg is None:
            if not args.experiment:
                raise ConfigError("give an experiment name or --config")
            cfg = ExperimentConfig(args.experiment)
        elif args.experiment and args.experiment != cfg.experiment:
            raise ConfigError(f"config names {cfg.experiment!r}, command line {args.experiment!r}")
        if args.out is not None:
            cfg.out = args.out
        elif args.config is None or cfg.out == Path("out"):
            cfg.out = Path("out") / cfg.experiment
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.threads = args.threads
        cfg.bits = cfg.bits or args.bits
        for key in PARAM_FLAGS.values():
            value = getattr(args, f"param_{key}")
            if value is not None:
                cfg.params[key] = value
        if cfg.experiment not in REGISTRY:
            raise UnknownExperiment(f"unknown experiment {cfg.experiment!r}")
        manifest = run_experiment(cfg)
    except UnknownExperiment as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PrecisionRefusal as exc:
        print(f"precision refusal: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    print(f"{manifest.experiment}: wrote {len(manifest.files)} files to {cfg.out}")
    _print_summary(manifest.summary, cfg.bits)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
