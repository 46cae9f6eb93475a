#!/usr/bin/env python
"""
Command-line launcher for the quantum Frank-Wolfe emulation.

Subcommands:
    run <config>      execute one configured run
    sweep <config>    execute a parameter grid and aggregate scaling laws
    verify            run the invariant suite

Exit codes: 0 success, 1 violated invariant or unexpected error,
2 invalid configuration, 3 degenerate solver input.
"""

import os
import sys
import argparse
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger("launch_qfw")

# Ensure the parent directory is in sys.path
parent_dir = os.path.dirname(os.path.abspath(__file__))
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

from qfw.errors import ConfigError, DegenerateInputError, InvalidArgumentError, PreconditionError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3


def parse_arguments(argv=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(description="Quantum Frank-Wolfe emulation")

    # Shared options
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Seed overriding the config's [run] seed")
    common.add_argument("--out", type=str, default=None, help="Output directory (overrides OUTPUT_DIR and [run] output_dir)")
    common.add_argument("--quiet", action="store_true", help="Minimize output")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", parents=[common], help="Execute one configured run")
    run_parser.add_argument("config", type=str, help="Run config file")

    sweep_parser = subparsers.add_parser("sweep", parents=[common], help="Execute a parameter grid")
    sweep_parser.add_argument("config", type=str, help="Sweep config file with a [grid] section")
    sweep_parser.add_argument("--workers", type=int, default=None, help="Worker processes (default: CPU count)")

    verify_parser = subparsers.add_parser("verify", parents=[common], help="Run the invariant suite")
    verify_parser.add_argument(
        "--filter",
        type=str,
        default=None,
        help="Comma-separated suite names or invariant prefixes (e.g. matrix or lmo.maxfind)",
    )

    return parser.parse_args(argv)


def main(argv=None) -> int:
    """Main function dispatching the subcommands; returns the process exit code."""
    # Parse command line arguments
    args = parse_arguments(argv)

    # Configure logging level
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
        for handler in logging.getLogger().handlers:
            handler.setLevel(logging.DEBUG)

    # Import the app module
    from qfw.app import run_experiment, run_sweep, run_verify

    try:
        if args.command == "run":
            run_experiment(args.config, seed=args.seed, out=args.out, quiet=args.quiet)
        elif args.command == "sweep":
            run_sweep(args.config, seed=args.seed, out=args.out, workers=args.workers, quiet=args.quiet)
        else:
            filters = [f.strip() for f in args.filter.split(",") if f.strip()] if args.filter else None
            ok, _ = run_verify(filters, seed=args.seed or 0, quiet=args.quiet)
            if not ok:
                logger.error("Invariant violations found")
                return EXIT_FAILURE
    except (ConfigError, InvalidArgumentError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except (DegenerateInputError, PreconditionError) as e:
        logger.error(f"Solver input error: {e}")
        return EXIT_DEGENERATE
    except Exception as e:
        logger.error(f"Error: {e}")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
