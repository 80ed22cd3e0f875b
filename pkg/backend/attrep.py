"""
Batch Command Line - attrep.py
==============================

Thin argument layer over ``services.core_service``. Parses flags, merges them
with the environment and an optional ``--config`` JSON file, runs one command
and maps failures to exit codes:

    0  success
    1  invalid input (bad flags, bad config, missing or malformed files)
    2  numerical failure (monotonicity lost, flow blew up, floating point error)

USAGE:
    python backend/attrep.py energy --mu mu.csv --omega delta:0 --qa 1 --qr 1 --out results/energy
    python backend/attrep.py flow --mu0 uniform:0:1 --omega uniform:1:2 --qa 2 --qr 2 --t-end 3
    python backend/attrep.py tile --n 5 --d 2 --uniform
    python backend/attrep.py minimize --grid --datum omega1 --qa 1 --lambda 1e-4
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from services.core_service import COMMAND_DEFAULTS, RunConfig, run_command
from services.data_io import dumps
from services.errors import NumericalFailure
from services.settings import get_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

# argparse dest -> RunConfig key, where they differ
DEST_TO_KEY = {"lam": "lambda", "datum": "omega"}


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        raise ValueError(f"{self.prog}: {message}")


# ==============================
# Argument Parsing
# ==============================
def _common() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="seed for every random choice of the run")
    common.add_argument("--out", help="output directory (default: ATTREP_OUTPUT_DIR)")
    common.add_argument("--config", help="JSON file whose keys override the flags")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    return common


def _kernel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--qa", type=float, help="attraction exponent in [1, 2]")
    parser.add_argument("--qr", type=float, help="repulsion exponent in [1, 2]")


def _tv_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, help="total-variation weight")
    parser.add_argument("--tv-method", dest="tv_method", choices=["pwc", "kde"])
    parser.add_argument("--kernel", choices=["hat", "gaussian"], help="KDE kernel")
    parser.add_argument("--h", type=float, help="KDE bandwidth (default N^(-1/4))")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="attrep", description="Attraction-repulsion energies, minimizers and flows.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    energy = sub.add_parser("energy", parents=[common], help="energy of mu against omega")
    energy.add_argument("--mu")
    energy.add_argument("--omega")
    energy.add_argument("--datum", help="built-in datum used as omega")
    energy.add_argument("--n", type=int, help="particles drawn from mu when it is not equal-weight")
    _kernel_flags(energy)
    _tv_flags(energy)
    energy.add_argument("--datum-constant", dest="datum_constant", action="store_true", default=None)
    energy.add_argument("--fourier", action="store_true", default=None,
                        help="also report the symmetrized and Fourier-quadrature energies")

    tv = sub.add_parser("tv", parents=[common], help="total variation of a particle cloud or grid")
    tv.add_argument("--mu")
    tv.add_argument("--n", type=int)
    tv.add_argument("--tv-method", dest="method", choices=["pwc", "kde", "grid"])
    tv.add_argument("--kernel", choices=["hat", "gaussian"])
    tv.add_argument("--h", type=float)

    wasserstein = sub.add_parser("wasserstein", parents=[common], help="1D Wasserstein distances")
    wasserstein.add_argument("--mu")
    wasserstein.add_argument("--omega")
    wasserstein.add_argument("--datum")
    wasserstein.add_argument("--p", type=float)
    wasserstein.add_argument("--m-grid", dest="m_grid", type=int)

    tile = sub.add_parser("tile", parents=[common], help="equal-mass quantile tiling")
    tile.add_argument("--density", help="grid JSON, PGM image or datum")
    tile.add_argument("--uniform", action="store_true", help="tile the uniform density on [lo, hi]^d")
    tile.add_argument("--n", type=int)
    tile.add_argument("--d", type=int)
    tile.add_argument("--lo", type=float)
    tile.add_argument("--hi", type=float)
    tile.add_argument("--cells", type=int, help="grid cells per axis of the uniform density")

    minimize = sub.add_parser("minimize", parents=[common], help="particle or grid minimizer")
    minimize.add_argument("--omega")
    minimize.add_argument("--datum")
    minimize.add_argument("--n", type=int)
    _kernel_flags(minimize)
    _tv_flags(minimize)
    minimize.add_argument("--init", choices=["tiling", "quantile", "random"])
    minimize.add_argument("--max-iters", dest="max_iters", type=int)
    minimize.add_argument("--grad-tol", dest="grad_tol", type=float)
    minimize.add_argument("--step0", type=float)
    minimize.add_argument("--decay-iters", dest="decay_iters", type=float)
    minimize.add_argument("--grid", action="store_true", default=None, help="solve the grid problem")
    minimize.add_argument("--m-grid", dest="m_grid", type=int, help="cells of a datum for --grid")

    flow = sub.add_parser("flow", parents=[common], help="1D gradient flow")
    flow.add_argument("--mu0")
    flow.add_argument("--omega")
    flow.add_argument("--datum")
    _kernel_flags(flow)
    flow.add_argument("--m-grid", dest="m_grid", type=int)
    flow.add_argument("--dt", type=float)
    flow.add_argument("--t-end", dest="t_end", type=float)
    flow.add_argument("--scheme", choices=["euler", "rk4"])
    flow.add_argument("--sample-dt", dest="sample_dt", type=float)
    flow.add_argument("--max-abs", dest="max_abs", type=float)
    flow.add_argument("--no-monotone-guard", dest="monotone_guard", action="store_false", default=None)
    flow.add_argument("--dump-states", dest="dump_states", action="store_true", default=None)
    return parser


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    known = set(COMMAND_DEFAULTS[args.command]) | {"seed", "out"}
    flags = {}
    for dest, value in vars(args).items():
        key = DEST_TO_KEY.get(dest, dest)
        if key in known and value is not None:
            flags[key] = value
    return flags


def _file_config(path: Optional[str], command: str) -> Dict[str, Any]:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    if data.get("command", command) != command:
        raise ValueError(f"{path}: config is for {data['command']!r}, not {command!r}")
    return data


# ==============================
# Entry Point
# ==============================
def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        get_logger("DEBUG" if args.verbose else None)
        if getattr(args, "uniform", False):
            args.density = None
        config = RunConfig.resolve(args.command, _flags(args), _file_config(args.config, args.command))
        document = run_command(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        logger.debug(f"[CLI] rejected: {exc!r}")
        return EXIT_INVALID
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        logger.debug(f"[CLI] numerical failure: {exc!r}")
        return EXIT_NUMERICAL

    print(dumps(document["result"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
