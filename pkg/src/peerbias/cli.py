"""Command line front end: run a registered scenario to CSV, list the
registry, or print a scenario's full configuration.

Exit codes: 0 success, 2 usage error (unknown flag/scenario, bad --set), 1
runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace

from .harness import SCENARIOS, ScenarioConfig, run_scenario, write_csv

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _apply_override(cfg: ScenarioConfig, key: str, value) -> ScenarioConfig:
    if key.startswith("params."):
        params = dict(cfg.params)
        params[key[len("params."):]] = value
        return replace(cfg, params=params)
    if key in ("iterations", "seed"):
        return replace(cfg, **{key: int(value)})
    if key == "sweep_grid":
        return replace(cfg, sweep_grid=tuple(value))
    if key in ("sweep_name", "family"):
        return replace(cfg, **{key: str(value)})
    if key == "tests":
        return replace(cfg, tests=tuple(value))
    raise KeyError(f"unknown config field {key!r}")


def _build_config(args) -> ScenarioConfig:
    spec = SCENARIOS[args.scenario]
    cfg = spec.default_config(profile=args.profile)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            for key, value in json.load(fh).items():
                cfg = _apply_override(cfg, key, value)
    if args.iters is not None:
        cfg = replace(cfg, iterations=args.iters)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    for item in args.set or []:
        if "=" not in item:
            raise KeyError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        cfg = _apply_override(cfg, key.strip(), _parse_value(raw.strip()))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peerbias",
        description="Monte Carlo studies of bias tests for single- vs double-blind review")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write CSV")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--iters", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None, help="CSV path (default: stdout)")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config field by dotted key, e.g. params.n=200")
    sim.add_argument("--config", default=None, help="JSON file of overrides")
    sim.add_argument("--profile", choices=("full", "ci"), default="full",
                     help="ci: 1000 iterations and halved paper counts")
    sim.add_argument("--workers", type=int, default=None,
                     help="worker processes (default: PEERBIAS_THREADS or cpu count)")

    sub.add_parser("list-scenarios", help="print registered scenario ids")

    desc = sub.add_parser("describe", help="print a scenario's configuration")
    desc.add_argument("--scenario", required=True)
    desc.add_argument("--profile", choices=("full", "ci"), default="full")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "list-scenarios":
        for name in SCENARIOS:
            print(name)
        return 0

    if args.scenario not in SCENARIOS:
        print(f"error: unknown scenario {args.scenario!r}; "
              "run `peerbias list-scenarios`", file=sys.stderr)
        return USAGE_ERROR

    if args.command == "describe":
        spec = SCENARIOS[args.scenario]
        cfg = spec.default_config(profile=args.profile)
        print(json.dumps({"description": spec.description, **asdict(cfg)},
                         indent=2, default=str))
        return 0

    try:
        cfg = _build_config(args)
    except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    try:
        result = run_scenario(cfg, workers=args.workers)
        if args.out:
            write_csv(result, args.out)
        else:
            from .harness import csv_lines
            for line in csv_lines(result):
                print(line)
    except Exception as exc:  # surfaced as exit 1 with the message
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
