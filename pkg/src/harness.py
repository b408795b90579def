"""
Command-line entry point: python -m src.harness --experiment fig3-od --desk-scale

Failures print one JSON line {"error": ..., "message": ...} on stderr; exit
code 2 for usage/config errors, 1 for runtime failures.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .config import ConfigError, get_setting, load_config, parse_overrides
from .experiments import EXPERIMENTS, UnknownExperimentError, run_experiment
from .results_io import FORMATS, ResultsIOError, emit_results

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Console handler, plus a file handler when `log_file` is given."""
    format_str = "%(asctime)s - %(levelname)s - %(message)s"
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path, mode="w", encoding="utf-8"))
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        raise ConfigError(f"unknown log level {level!r}")
    logging.basicConfig(level=numeric, format=format_str, handlers=handlers, force=True)


def build_parser() -> argparse.ArgumentParser:
    experiments = "\n".join(f"  {k:<16} {v}" for k, v in EXPERIMENTS.items())
    parser = _Parser(
        prog="python -m src.harness",
        description="Seeded Monte-Carlo sweeps for the IBFD IAB link-level simulator",
        epilog=f"Experiments:\n{experiments}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--experiment", "-e", required=True, help="experiment id (see below)")
    parser.add_argument("--config", help="key=value config file (default: $IABSIM_CONFIG)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per grid point")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, default="csv")
    parser.add_argument("--desk-scale", action="store_true", default=None,
                        help="K=64, D=16, U=2 with 8x2 subarrays")
    parser.add_argument("--workers", type=int, help="worker processes for trials")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: $IABSIM_LOG_LEVEL or WARNING)")
    parser.add_argument("--log-file", help="also log to this file")
    parser.add_argument("--quiet", "-q", action="store_true", help="no progress bars")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    return parser


def _cli_overrides(args: argparse.Namespace) -> Dict:
    pairs = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value
    overrides = parse_overrides(pairs, source="--set")
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
        overrides["canceler_trials"] = args.trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    return overrides


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level or get_setting("IABSIM_LOG_LEVEL") or "WARNING", args.log_file)
        if args.experiment not in EXPERIMENTS:
            raise UnknownExperimentError(args.experiment)
        cfg = load_config(args.config, _cli_overrides(args), desk_scale=args.desk_scale)
    except UsageError as e:
        return _fail("usage", str(e), EXIT_USAGE)
    except UnknownExperimentError as e:
        return _fail("unknown_experiment", str(e), EXIT_USAGE)
    except ConfigError as e:
        return _fail("config", str(e), EXIT_USAGE)

    try:
        result = run_experiment(args.experiment, cfg, quiet=args.quiet)
        text = emit_results(result, args.format, args.out)
    except ResultsIOError as e:
        return _fail("io", str(e), EXIT_RUNTIME)
    except (ValueError, RuntimeError) as e:
        logger.exception(f"[Harness] {args.experiment} failed")
        return _fail("runtime", str(e), EXIT_RUNTIME)

    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
