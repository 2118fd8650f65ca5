"""
@description
Command-line front end: `recurrence`, `qfi`, `husimi` and `reproduce`
subcommands sharing one flag set.

Key features:
- Flags mirror RunConfig; only flags given explicitly take part in the merge
- --config FILE (YAML) wins over flags, with a warning on conflicts
- Returns the exit code from the command controller

@dependencies
- argparse
- kicked_top.utils.config_loader, kicked_top.controllers.command_controller

@notes
- Symbolic values such as pi/2 or pi*j+delta are accepted for alpha, beta, theta, phi.
"""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from kicked_top import __version__
from kicked_top.controllers.command_controller import FIGURES, execute_command
from kicked_top.errors import EXIT_CONFIG, ConfigError
from kicked_top.utils.config_loader import COMMANDS, METHODS, NORMALIZATIONS, build_run_config, load_yaml_config
from kicked_top.utils.logger import get_logger, set_log_level

logger = get_logger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    # defaults are suppressed so that only explicit flags reach the merge
    s = argparse.SUPPRESS
    parser.add_argument("--config", default=None, help="YAML config file; its values win over flags")
    parser.add_argument("--N", dest="n_spins", nargs="+", type=int, default=s, help="even spin numbers")
    parser.add_argument("--alpha", default=s, help="rotation angle, e.g. pi/2")
    parser.add_argument("--beta", default=s, help="kick strength, e.g. pi*j, 2*pi*j, pi*j+delta")
    parser.add_argument("--resonance", choices=["i", "ii", "iii"], default=s,
                        help="resonance shorthand: i (2 pi j), ii (pi j), iii (pi j / 2)")
    parser.add_argument("--delta", default=s, help="perturbation added through beta expressions")
    parser.add_argument("--gamma", type=float, default=s, help="superradiant damping rate")
    parser.add_argument("--theta", default=s, help="initial coherent state polar angle")
    parser.add_argument("--phi", default=s, help="initial coherent state azimuth")
    parser.add_argument("--period-T", dest="period_T", default=s, help="kick period")
    parser.add_argument("--out", dest="out_dir", default=s, help="output directory")
    parser.add_argument("--workers", type=int, default=s, help="parallel sweep workers")
    parser.add_argument("--no-cache", dest="use_cache", action="store_false", default=s,
                        help="neither read nor write the sweep cache")
    parser.add_argument("--cache-dir", dest="cache_dir", default=s, help="sweep cache directory")
    parser.add_argument("--log-level", dest="log_level", default=s, help="DEBUG, INFO, WARNING, ...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kicked-top",
        description="Quantum kicked top at resonance: recurrences, QFI scaling and phase-space snapshots.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    s = argparse.SUPPRESS

    rec = sub.add_parser("recurrence", help="find the smallest n with U^n proportional to the identity")
    _add_common(rec)
    rec.add_argument("--max-period", dest="max_period", type=int, default=s)
    rec.add_argument("--tol", type=float, default=s)

    qfi = sub.add_parser("qfi", help="QFI traces for one or more N")
    _add_common(qfi)
    qfi.add_argument("--method", choices=METHODS, default=s)
    qfi.add_argument("--n-max", dest="n_max", type=int, default=s)
    qfi.add_argument("--dense-until", dest="dense_until", type=int, default=s)
    qfi.add_argument("--per-decade", dest="per_decade", type=int, default=s)
    qfi.add_argument("--stride", type=int, default=s)
    qfi.add_argument("--eps", dest="eps_ladder", nargs="+", type=float, default=s)
    qfi.add_argument("--substeps", type=int, default=s)
    qfi.add_argument("--decay-normalization", dest="decay_normalization", choices=NORMALIZATIONS, default=s)
    qfi.add_argument("--fit-range", dest="fit_range", nargs=2, type=float, default=s)
    qfi.add_argument("--no-fit", dest="fit", action="store_false", default=s)

    hus = sub.add_parser("husimi", help="Husimi snapshots and peak counts")
    _add_common(hus)
    hus.add_argument("--snapshots", nargs="+", type=int, default=s)
    hus.add_argument("--n-theta", dest="n_theta", type=int, default=s)
    hus.add_argument("--n-phi", dest="n_phi", type=int, default=s)
    hus.add_argument("--threshold", dest="rel_threshold", type=float, default=s)
    hus.add_argument("--substeps", type=int, default=s)
    hus.add_argument("--decay-normalization", dest="decay_normalization", choices=NORMALIZATIONS, default=s)

    rep = sub.add_parser("reproduce", help="run a figure pipeline and write its bundle")
    _add_common(rep)
    rep.add_argument("figure", help=f"one of {', '.join(FIGURES)}")
    rep.add_argument("--desk-scale", dest="desk_scale", action="store_true", default=s)
    return parser


def _explicit_flags(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    return flags


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, build the RunConfig and run the command.

    :return: process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        file_data = load_yaml_config(args.config) if args.config else {}
        config = build_run_config(args.command, _explicit_flags(args), file_data)
    except ConfigError as e:
        logger.error("[cli] Invalid configuration: %s", e)
        return EXIT_CONFIG
    set_log_level(config.log_level)

    exit_code, report = execute_command(config)
    print(json.dumps(report, indent=2, default=str))
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
