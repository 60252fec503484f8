"""Command-line entry point.

Subcommands: verify-duality, train-soft, train-hard, evaluate, oracle.
Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 runtime abort.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, EnvDesignError
from .harness import VerificationFailure, load_config, run_experiment

_SUBCOMMAND_TO_KIND = {
    "verify-duality": "verify-duality",
    "train-soft": "train-soft",
    "train-hard": "train-hard",
    "evaluate": "evaluate",
    "oracle": "brute-force-oracle",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envdesign",
        description="Adversarial environment design experiments (maze domain).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_TO_KIND:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="flat key=value config file")
        cmd.add_argument("--seed", type=int, default=None, help="master random seed")
        cmd.add_argument("--out", required=True, help="artifact output directory")
        cmd.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a single config key (repeatable)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            overrides[key.strip()] = value.strip()
        config = load_config(
            path=args.config,
            overrides=overrides,
            kind=_SUBCOMMAND_TO_KIND[args.command],
            seed=args.seed,
        )
        run_experiment(config, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1
    except (EnvDesignError, RuntimeError) as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
