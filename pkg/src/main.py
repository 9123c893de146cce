#!/usr/bin/env python3
"""
bksim - perfect simulation and non-uniqueness certification for
Bramson-Kalikow chains.

Main entry point for the command-line interface. Every invocation prints
exactly one JSON document on stdout; logs go to stderr.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add parent directory to Python path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from backend.data_manager import ResultsManager
from backend.models import ErrorDocument
from src.bounds import logspace
from src.errors import BKSimError, ConfigError
from src.pipeline import ExperimentPipeline, RunOptions
from src.utils.config_loader import ConfigLoader, set_default_settings, validate_settings
from src.utils.logger import ROOT_LOGGER, setup_logger

EXIT_OK = 0
EXIT_UNEXPECTED = 1

COMMANDS = {
    "simulate": "Perfect sample (or forward run) of one kernel; writes trajectory files",
    "dbar": "Shared-uniform d-bar upper bounds for kernel pairs, next to exact values",
    "estimate": "Marginal, regeneration/coalescence time and concentration estimates",
    "exact": "Exact stationary laws, d-bar identity, truncation ledger, lemma checks",
    "check-criterium": "Non-uniqueness criterium for a corollary family or custom parameters",
    "gen-params": "Model parameter documents (corollary families or minimal orders)",
    "phase-transition": "Gap between the +1-past and -1-past chains of a truncation",
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Master seed (overrides config and settings)")
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes for replications; 0 uses every core (results do not depend on it)",
    )
    common.add_argument("--out", type=str, default=None, help="Output directory for bulk files")
    common.add_argument(
        "--config-dir",
        type=str,
        default="config",
        help="Directory holding settings.yaml and experiments/ (default: config)",
    )
    common.add_argument("--results-db", type=str, default=None, help="Results ledger URL or SQLite path")
    common.add_argument("--no-ledger", action="store_true", help="Do not record rows in the results ledger")
    common.add_argument("--timing", action="store_true", help="Include wall-clock timing in the document")
    common.add_argument("--debug", action="store_true", help="Enable debug logging and tracebacks")
    return common


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="bksim",
        description="Perfect simulation and non-uniqueness certification for Bramson-Kalikow chains",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s check-criterium --config corollary1.json
  %(prog)s check-criterium --config corollary1.json --strict-base
  %(prog)s exact --config two_state.json
  %(prog)s dbar --config dbar_lower_upper.json --workers 4
  %(prog)s gen-params --config gen_params_minimal.json
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
        sub.add_argument(
            "--config",
            required=True,
            help="Experiment config (JSON); bare names are looked up under config/experiments/",
        )
        if name in ("dbar", "estimate", "phase-transition"):
            sub.add_argument("--n", type=int, default=None, help="Replications (overrides config)")
        if name in ("check-criterium", "gen-params"):
            sub.add_argument("--c", type=int, default=None, help="Family constant c (overrides config)")
            sub.add_argument("--k-max", type=int, default=None, help="Last inspected index (overrides config)")
        if name == "check-criterium":
            sub.add_argument(
                "--strict-base",
                action="store_true",
                help="Require the direct order inequality at every inspected k (no printed constants)",
            )
            sub.add_argument(
                "--finite-only",
                action="store_true",
                help="Custom parameters: check k = 0..k_max without requiring an inductive tail rule",
            )
    return parser.parse_args(argv)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config fields set from command-line flags."""
    return {key: getattr(args, key) for key in ("n", "c", "k_max") if getattr(args, key, None) is not None}


def _emit(document: str) -> None:
    sys.stdout.write(document + "\n")
    sys.stdout.flush()


def _emit_error(error: BKSimError) -> int:
    data = error.to_dict()
    doc = ErrorDocument(exit_code=error.exit_code, **data)
    _emit(json.dumps(doc.model_dump(), sort_keys=True, indent=2, default=str))
    return error.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = parse_args(argv)
    logger = setup_logger(ROOT_LOGGER, level="DEBUG" if args.debug else None)

    logger.info("=" * 80)
    logger.info(f"BKSIM - {args.command}")
    logger.info("=" * 80)

    try:
        loader = ConfigLoader(config_dir=args.config_dir)
        settings = loader.load_settings()
        problems = validate_settings(settings)
        if problems:
            raise ConfigError("Settings validation failed", {"problems": problems})
        set_default_settings(settings)
        logspace.configure(
            precision_bits=settings.bounds.log_precision_bits,
            exact_bit_cap=settings.bounds.exact_bit_cap,
            log_magnitude_bits=settings.bounds.log_magnitude_bits,
        )

        document = loader.load_experiment(args.config)
        document.update(_overrides(args))

        options = RunOptions(
            seed=args.seed,
            workers=args.workers,
            out=args.out,
            strict_base=getattr(args, "strict_base", False),
            finite_only=getattr(args, "finite_only", False),
            timing=args.timing,
            record=not args.no_ledger,
        )
        results = None if args.no_ledger else ResultsManager(args.results_db or settings.runtime.results_db)
        pipeline = ExperimentPipeline(settings, options, results)
        outcome = pipeline.run(document, args.command)
        _emit(outcome.envelope.to_json())
        return EXIT_OK

    except BKSimError as e:
        logger.error(f"{type(e).__name__}: {e.message}", exc_info=args.debug)
        return _emit_error(e)

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_UNEXPECTED

    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=args.debug)
        _emit(json.dumps(
            {"error": "unexpected", "type": type(e).__name__, "message": str(e), "details": {}, "exit_code": EXIT_UNEXPECTED},
            sort_keys=True,
            indent=2,
        ))
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
