"""
Command-line interface

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

    trumpet [-v | -q] <simulate|analyze|budget|localize|recipe> [options]

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure.
"""

import argparse
import logging
import sys

import numpy as np

from src.core.errors import NumericalError, TrumpetError, ValidationError
from src.pipeline.commands import cmd_analyze, cmd_budget, cmd_localize, cmd_simulate
from src.pipeline.config import load_run_config
from src.pipeline.recipes import RECIPES, run_recipe
from src.utils.utils import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="trumpet",
        description="Mechanical read-out of a resonantly driven quantum dot: simulate, analyze, budget, localize",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging and tracebacks")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a photon record from a run configuration")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--duration", type=float, default=None, help="override simulation.duration_s")
    p.add_argument("--out", default=None, help="output directory (default: paths.out_dir)")

    p = sub.add_parser("analyze", help="spectra, peaks, g2 and coupling from a record")
    p.add_argument("input", nargs="?", default=None, help="photon tag file or time trace CSV")
    p.add_argument("--config", default=None, help="YAML run configuration with analysis options")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--g2", action="store_true", help="also compute g2 and its NPSD (two-channel tags)")
    p.add_argument("--lineshape", default=None, help="JSON with Voigt parameters or a detuning scan")
    p.add_argument("--areas", default=None, help="CSV of peak areas against detuning")
    p.add_argument("--mode", default=None, help="mode label the areas belong to")
    p.add_argument("--catalog", default=None, help="JSON mode catalog used for peak assignment")
    p.add_argument("--detuning", type=float, default=None, help="operating detuning in rad/s, for the sensitivity")
    p.add_argument("--temperature", type=float, default=None, help="bath temperature in K")

    p = sub.add_parser("budget", help="noise-budget sweep of a read-out operating point")
    p.add_argument("--config", required=True, help="YAML run configuration with a budget block")
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("localize", help="emitter position from relative mode amplitudes")
    p.add_argument("amplitudes", help="CSV with label, amplitude and optional sigma columns")
    p.add_argument("--catalog", required=True, help="JSON mode catalog")
    p.add_argument("--reference", default="B2", help="breathing mode used as unit (default B2)")
    p.add_argument("--out", default="results", help="output directory")

    p = sub.add_parser("recipe", help="regenerate the data behind a figure")
    p.add_argument("name", choices=sorted(RECIPES), help="recipe name")
    p.add_argument("--config", default=None, help="run configuration for the simulation recipes")
    p.add_argument("--duration", type=float, default=None, help="record length of simulation recipes, s")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--out", default="results", help="output directory")
    return parser


def _print_files(result):
    for key, path in result.files.items():
        print(f"  {key:<18} {path}")


def _run(args):
    if args.command == "simulate":
        cfg = load_run_config(args.config, {"seed": args.seed, "simulation.duration_s": args.duration})
        result = cmd_simulate(cfg, args.out)
    elif args.command == "analyze":
        cfg = load_run_config(args.config) if args.config else None
        result = cmd_analyze(
            args.input, cfg=cfg, out_dir=args.out, g2=args.g2, lineshape=args.lineshape, areas=args.areas,
            mode=args.mode, catalog=args.catalog, detuning=args.detuning, temperature=args.temperature,
        )
        coupling = result.products.get("coupling")
        if coupling is not None:
            print(f"{args.mode}: lambda/2pi = {coupling.coupling / (2 * np.pi):.5g} Hz "
                  f"+- {coupling.stderr / (2 * np.pi):.2g} Hz")
    elif args.command == "budget":
        result = cmd_budget(load_run_config(args.config), args.out)
    elif args.command == "localize":
        result = cmd_localize(args.amplitudes, args.catalog, out_dir=args.out, reference=args.reference)
        loc = result.products["localization"]
        print(f"r = {loc.position.r * 1e9:.1f} nm, phi = {np.rad2deg(loc.position.phi):.1f} deg, "
              f"chi2 = {loc.chi2:.4g}")
        print(loc.comparison.to_string(index=False))
    else:
        result = run_recipe(args.name, args.out, duration=args.duration, seed=args.seed, config=args.config)
    print(f"{args.command}: wrote")
    _print_files(result)
    return result


def main(argv=None):
    """Parse argv, run one command, and return the exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(1 if args.verbose else -1 if args.quiet else 0)
    try:
        _run(args)
    except ValidationError as exc:
        logger.error("%s", exc, exc_info=args.verbose)
        return EXIT_VALIDATION
    except NumericalError as exc:
        logger.error("%s", exc, exc_info=args.verbose)
        return EXIT_NUMERICAL
    except TrumpetError as exc:
        logger.error("%s", exc, exc_info=args.verbose)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
