"""Command line entry point: ``condlab run | list | verify``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .experiments import REGISTRY, ConfigError, ExperimentConfig, _format_value, run_to_file
from .operators import LanczosError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _overrides(extra: List[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        elif i + 1 < len(extra):
            val = extra[i + 1]
            i += 2
        else:
            raise ConfigError(f"missing value for {tok}")
        out[key] = val
    return out


def _load_config(target: str, extra: List[str]) -> ExperimentConfig:
    overrides = _overrides(extra)
    path = Path(target)
    if path.is_file():
        return ExperimentConfig.from_text(path.read_text(), overrides)
    if target in REGISTRY:
        return ExperimentConfig.build(target, overrides)
    raise ConfigError(f"{target!r} is neither a config file nor a registered experiment")


def _cmd_run(args, extra) -> int:
    cfg = _load_config(args.config, extra)
    res = run_to_file(cfg)
    if not cfg["output"]:
        sys.stdout.write(res.to_csv())
    else:
        print(f"wrote {len(res.rows)} rows to {cfg['output']}", file=sys.stderr)
        print(res.summary_text(), file=sys.stderr)
    return EXIT_OK


def _cmd_list(args, extra) -> int:
    for name in sorted(REGISTRY):
        exp = REGISTRY[name]
        keys = " ".join(f"{k}={_format_value(v)}" for k, (_, v) in exp.schema.items())
        print(f"{name}: {keys}")
    return EXIT_OK


def _cmd_verify(args, extra) -> int:
    from .acceptance import run_criteria

    which = [int(c) for c in args.criteria.split(",")] if args.criteria else None
    results = run_criteria(which, stream=sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="condlab", description="Random conductance model experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a config file or registry name")
    p_run.add_argument("config", help="key=value config file, or an experiment name")
    p_run.set_defaults(func=_cmd_run)
    p_list = sub.add_parser("list", help="list registered experiments and their defaults")
    p_list.set_defaults(func=_cmd_list)
    p_verify = sub.add_parser("verify", help="run the acceptance criteria")
    p_verify.add_argument("--criteria", default="", help="comma-separated criterion numbers (default: all)")
    p_verify.set_defaults(func=_cmd_verify)

    args, extra = parser.parse_known_args(argv)
    if extra and args.command != "run":
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return args.func(args, extra)
    except ConfigError as exc:
        print(f"condlab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (LanczosError, FloatingPointError, ArithmeticError) as exc:
        print(f"condlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
