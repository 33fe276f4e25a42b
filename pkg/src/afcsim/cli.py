"""Scenario-driven command-line front end.

Verbs: run <scenario-or-path>, list, validate <scenario-or-path>, version.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The output root defaults to ./afcsim-results and can be overridden with
the AFCSIM_OUTPUT_ROOT environment variable or --out.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import ConfigError
from .scenarios import SCENARIOS, load_config, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def bundled_scenarios() -> dict[str, Path]:
    """Name -> path of the configs shipped with the package."""
    base = resources.files("afcsim").joinpath("data/scenarios")
    out = {}
    for entry in base.iterdir():
        if entry.name.endswith(".ini"):
            out[entry.name[:-4]] = Path(str(entry))
    return out


def _resolve(target: str) -> Path:
    p = Path(target)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if target in bundled:
        return bundled[target]
    raise ConfigError(
        f"{target!r} is neither a config file nor a bundled scenario "
        f"(bundled: {', '.join(sorted(bundled))})"
    )


def _output_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("AFCSIM_OUTPUT_ROOT", "afcsim-results"))


def cmd_list(_args) -> int:
    for name in sorted(bundled_scenarios()):
        print(name)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(_resolve(args.scenario))
    if cfg.name not in SCENARIOS:
        raise ConfigError(f"{cfg.path}: unknown scenario {cfg.name!r}")
    print(f"{cfg.path}: ok (scenario {cfg.name}, seed {cfg.seed})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(_resolve(args.scenario))
    outdir = _output_root(args) / cfg.name
    partial = outdir.with_name(outdir.name + ".partial")
    if partial.exists():
        shutil.rmtree(partial)
    partial.mkdir(parents=True)
    try:
        results = run_scenario(cfg, partial)
        payload = {"scenario": cfg.name, "seed": cfg.seed, "results": results}
        with open(partial / "results.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except BaseException:
        shutil.rmtree(partial, ignore_errors=True)
        raise
    if outdir.exists():
        shutil.rmtree(outdir)
    partial.rename(outdir)
    print(f"{cfg.name}: results written to {outdir}")
    return EXIT_OK


def cmd_version(_args) -> int:
    print(f"afcsim {__version__}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afcsim",
        description="Atomic-frequency-comb quantum-memory simulation scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config or bundled name")
    p_run.add_argument("scenario", help="path to a .ini config or a bundled name")
    p_run.add_argument("--out", help="output root directory", default=None)
    p_run.set_defaults(func=cmd_run)

    p_list = sub.add_parser("list", help="list bundled scenarios")
    p_list.set_defaults(func=cmd_list)

    p_val = sub.add_parser("validate", help="parse and schema-check a config")
    p_val.add_argument("scenario", help="path to a .ini config or a bundled name")
    p_val.set_defaults(func=cmd_validate)

    p_ver = sub.add_parser("version", help="print the package version")
    p_ver.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # numerical or module failure
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
