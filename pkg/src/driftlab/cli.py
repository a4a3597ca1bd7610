"""Command-line entry point.

Subcommands: validate, simulate, estimate, diagnose:<kind>, rate-study,
report. All take --config PATH except report, which reads a finished run
directory via --out DIR.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import COMMANDS, RunError, emit_report, run_experiment


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="simulation and estimation experiments for scalar recurrent diffusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        if name != "report":
            p.add_argument("--config", required=True, help="TOML run configuration")
            p.add_argument("--out", default=None, help="output directory (overrides config)")
            p.add_argument("--seed", type=int, default=None, help="seed override")
            p.add_argument("--workers", type=int, default=None, help="worker processes")
            if name == "simulate":
                p.add_argument("--dump", action="store_true", help="also write binary path dumps")
        else:
            p.add_argument("--out", required=True, help="run directory to summarize")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            print(emit_report(args.out))
            return 0
        with open(args.config, "r") as fh:
            text = fh.read()
        cfg = load_config(args.config)
        if args.command == "validate":
            manifest = run_experiment(
                cfg, "validate", out_dir=args.out, seed=args.seed, workers=args.workers, config_text=text
            )
            print("configuration valid; resolved values:")
            for line in cfg.flat_lines():
                print("  " + line)
            print(f"digest = {manifest['config_digest']}")
            return 0
        manifest = run_experiment(
            cfg,
            args.command,
            out_dir=args.out,
            seed=args.seed,
            workers=args.workers,
            dump=getattr(args, "dump", False),
            config_text=text,
        )
        for key, value in manifest.items():
            print(f"{key} = {value}")
        return 0
    except (ConfigError, RunError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
