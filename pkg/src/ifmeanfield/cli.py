"""Command-line entry point: ``ifmeanfield <subcommand> [--config ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical-contract violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import PRESETS, dump_config, load_config
from .errors import ContractError, DomainError, IFMeanFieldError
from .studies import run_study

log = logging.getLogger("ifmeanfield")

SUBCOMMANDS = {
    "simulate": "trajectories",
    "pde": "pde",
    "convergence": "convergence",
    "energy": "energy",
    "spikes": "spikes",
    "mkv-check": "mkv_check",
    "mild-check": "mild_check",
    "euler-order": "euler_order",
}

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifmeanfield", description="Spatial integrate-and-fire mean-field experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help=f"YAML config file or preset name ({', '.join(sorted(PRESETS))})")
        p.add_argument("--out", default=None, help="output directory (default: output_dir from the config)")
        p.add_argument("--seed", type=_u64, default=None, help="override the config seed")
        p.add_argument("--threads", type=_positive, default=1, help="worker threads for replica cells")
        p.add_argument("--plot", action="store_true", help="also write SVG figures")
    show = sub.add_parser("show-config", help="print a config (or preset) as YAML")
    show.add_argument("--config", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else load_config("full")
        if args.command == "show-config":
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.plot:
            cfg = replace(cfg, plot=True)
        result = run_study(cfg, args.out, threads=args.threads, kind=SUBCOMMANDS[args.command])
    except (ContractError, DomainError) as exc:
        print(f"error: numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except IFMeanFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in result.files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
