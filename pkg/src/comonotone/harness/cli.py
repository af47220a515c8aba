"""Command line entry point.

::

    comonotone experiment fig3 --out results/
    comonotone experiment fig5 --override betas=[2,4] --workers 4
    comonotone experiment fig3 --config results/fig3_manifest.json
    comonotone solve discrete --problem comono2 --override alpha=10 --override beta=3

Exit status is 0 when every gated verdict passes, 1 when one fails and 2
for invalid configurations or unwritable outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ComonotoneError, ConfigInvalid, IOFailure
from .presets import PRESETS
from .runner import run_preset

__all__ = ["main", "build_parser", "parse_override"]

_SOLVE_METHODS = {"ode": ("ds",), "discrete": ("ed", "raw_al"), "baseline": ("cripas", "sys6", "ppa")}


def parse_override(text: str):
    """Split ``key=value``; the value is parsed as JSON, else kept as a string."""
    if "=" not in text:
        raise ConfigInvalid(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigInvalid(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid(f"config {path} must hold a JSON object")
    # A run manifest nests the resolved parameters.
    if "parameters" in data and isinstance(data["parameters"], dict):
        return data.get("preset"), dict(data["parameters"])
    data = dict(data)
    return data.pop("preset", None), data


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter file or run manifest")
    common.add_argument("--out", help="output directory (default: $COMONOTONE_OUT or .)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a parameter; VALUE is parsed as JSON (repeatable)")
    common.add_argument("--allow-unproven", action="store_true",
                        help="run parameters outside the guaranteed region")
    common.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")

    parser = argparse.ArgumentParser(prog="comonotone", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("experiment", parents=[common], help="run a preset")
    exp.add_argument("preset", choices=sorted(PRESETS))
    solve = sub.add_parser("solve", parents=[common], help="run a single solver")
    solve.add_argument("kind", choices=sorted(_SOLVE_METHODS))
    solve.add_argument("--problem", help="skew2, comono2 or matrix:<path>")
    solve.add_argument("--method", help="solver within the kind (default: the first listed)")
    return parser


def _run(args) -> int:
    file_preset, file_cfg = (None, {}) if not args.config else _load_config(args.config)
    overrides = dict(parse_override(o) for o in args.override)
    if args.allow_unproven:
        overrides["allow_unproven"] = True

    if args.command == "experiment":
        name = args.preset
        if file_preset is not None and file_preset != name:
            raise ConfigInvalid(f"config is for preset {file_preset!r}, not {name!r}")
    else:
        name = "custom"
        choices = _SOLVE_METHODS[args.kind]
        method = args.method or file_cfg.get("method") or choices[0]
        if method not in choices:
            raise ConfigInvalid(f"solve {args.kind} supports methods {choices}, got {method!r}")
        overrides.setdefault("method", method)
        if args.problem:
            overrides["problem"] = args.problem

    result = run_preset(name, overrides, config=file_cfg, out_dir=args.out, workers=args.workers)
    for run_name, run in result.report["runs"].items():
        verdicts = " ".join(f"{g}={v}" for g, v in run["gated_verdicts"].items()) or "(ungated)"
        print(f"{run_name}: {'PASS' if run['passed'] else 'FAIL'} {verdicts}")
    for row in result.report["comparison"]:
        print(f"compare {row['ed_run']} ({row['ed_iterations']} its) vs "
              f"{row['cripas_run']} ({row['cripas_iterations']} its): "
              f"ed_le_cripas={row['ed_le_cripas']}")
    for p in result.paths:
        print(f"wrote {p}")
    return 0 if result.passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigInvalid, IOFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComonotoneError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
