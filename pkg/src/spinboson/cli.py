"""Command-line entry point: ``spinboson <command> [--config PATH] ...``."""
from __future__ import annotations

import argparse
import sys

from . import __version__, harness
from .config import ConfigError, RunSpec, load

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

COMMANDS = {
    "single": "inchworm curve <O(tau)> on [0, t_final]",
    "converge": "first-order convergence study against a fine-step reference",
    "compare": "bare series and inchworm curves side by side",
    "variance": "bare-estimator variance against contour length",
    "dump-bath": "tabulated bath correlation function",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinboson", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, metavar="U64", help="override run.seed")
        p.add_argument("--out", metavar="PATH", help="override output.path")
        p.add_argument("--threads", type=int, metavar="K", help="worker threads for compiled kernels")
    return parser


def _run_spec(args) -> RunSpec:
    run = load(args.config) if args.config else RunSpec()
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output"] = args.out
    return run.replace(**changes) if changes else run


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _run_spec(args)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            import warnings

            import numba

            # numba falls back to another threading layer when TBB is too old
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", numba.NumbaWarning)
                numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    except ConfigError as exc:
        print(f"spinboson: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    action = {
        "single": harness.run_single,
        "converge": harness.run_convergence,
        "compare": harness.run_compare,
        "variance": harness.run_variance,
        "dump-bath": harness.dump_bath,
    }[args.command]
    try:
        result = action(run)
    except (OSError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"spinboson: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(result[0])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
