"""``noma-aoi`` command line: preset sweeps, JSON experiment files and validation suites."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Any, Sequence

from .config import SystemConfig
from .experiments import (EVALUATORS, PRESETS, VALIDATION_SUITES, ExperimentError, build_spec,
                          load_spec, run_experiment, validate)

_BASE_KEYS = {f.name for f in dataclasses.fields(SystemConfig)} | {"tx_power_db"}


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_sets(items: Sequence[str]) -> dict[str, Any]:
    """``key=value`` pairs; config fields go into ``base``, the rest are experiment fields."""
    out: dict[str, Any] = {}
    base: dict[str, Any] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ExperimentError(f"--set expects key=value, got {item!r}")
        key = key.strip().replace("-", "_")
        (base if key in _BASE_KEYS else out)[key] = _parse_value(value)
    if base:
        out["base"] = base
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="noma-aoi",
        description="Average age of information of grant-free OMA and NOMA access: sweeps and checks.",
    )
    p.add_argument("--preset", choices=sorted(PRESETS), help="experiment preset")
    p.add_argument("--config", metavar="PATH", help="JSON experiment file (flags override it)")
    p.add_argument("--out", metavar="PREFIX", help="output path prefix")
    p.add_argument("--seed", type=int, help="simulation seed (unsigned 64-bit)")
    p.add_argument("--frames", type=int, help="simulated frames per sweep point")
    p.add_argument("--evaluator", choices=EVALUATORS)
    p.add_argument("--svg", action="store_true", help="also write an SVG line chart")
    p.add_argument("--validate", choices=VALIDATION_SUITES, metavar="SUITE",
                   help=f"run a validation suite instead: {', '.join(VALIDATION_SUITES)}")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config or experiment field (repeatable)")
    p.add_argument("--list-presets", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_presets:
        for name, fields in PRESETS.items():
            values = fields.get("sweep_values", ())
            span = f"{values[0]}..{values[-1]} ({len(values)} points)" if values else "-"
            print(f"{name}\t{fields.get('sweep_variable', '-')}\t{span}")
        return 0

    if args.validate:
        try:
            checks = validate(args.validate, frames=args.frames or 1_000_000,
                              seed=2024 if args.seed is None else args.seed)
        except ExperimentError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for c in checks:
            print(c.line())
        return 0 if all(c.passed for c in checks) else 1

    if not args.preset and not args.config:
        parser.print_usage(sys.stderr)
        print("error: give --preset, --config or --validate", file=sys.stderr)
        return 2

    try:
        overrides = _parse_sets(args.set)
        for key in ("out", "seed", "frames", "evaluator"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        if args.svg:
            overrides["svg"] = True
        if args.config:
            spec = load_spec(args.config, args.preset, overrides)
        else:
            spec = build_spec(args.preset, overrides)
        written = run_experiment(spec)
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
