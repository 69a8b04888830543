from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from hjhomog.errors import HJHomogError, NonconvergenceError, NotApplicableError, ParameterError, StageError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3

LOG_LEVEL_ENV = "HJHOMOG_LOG_LEVEL"


def build_parser() -> argparse.ArgumentParser:
    from hjhomog.verify import SUITES

    parser = argparse.ArgumentParser(
        prog="hjhomog",
        description="Numerical homogenization experiments for viscous Hamilton-Jacobi equations.",
    )
    parser.add_argument(
        "--log-level",
        default=os.environ.get(LOG_LEVEL_ENV, "INFO").upper(),
        type=str.upper,
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help=f"Logging level (default from {LOG_LEVEL_ENV}, else INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run the experiment described by a JSON config")
    run_parser.add_argument("config", type=Path)
    _add_common(run_parser)

    verify_parser = commands.add_parser("verify", help="Run a built-in acceptance suite")
    verify_parser.add_argument("suite", choices=SUITES)
    _add_common(verify_parser)

    plot_parser = commands.add_parser("plot", help="Plot numeric CSV columns to SVG")
    plot_parser.add_argument("csv", type=Path)
    plot_parser.add_argument("--out", type=Path, required=True)
    plot_parser.add_argument("--x", default=None, help="Abscissa column (default: first numeric column)")
    plot_parser.add_argument("--y", action="append", default=[], help="Ordinate column, repeatable")
    return parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key (dotted path); VALUE is parsed as JSON",
    )
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes for independent solves")
    parser.add_argument("--output", type=Path, default=None, help="Output directory (overrides output.directory)")


def configure_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("hjhomog")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def _exit_code_for(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, NonconvergenceError):
        return EXIT_NONCONVERGENCE
    if isinstance(cause, (ParameterError, NotApplicableError)):
        return EXIT_USAGE
    return EXIT_CHECK_FAILED


def _run(args: argparse.Namespace) -> int:
    from hjhomog.pipelines import run

    record = run(args.config, args.overrides, workers=args.jobs, output=args.output)
    print(
        json.dumps(
            {
                "ok": record.passed is not False,
                "experiment": record.experiment,
                "output": str(record.output_dir),
                "metrics": record.metrics,
                "passed": record.passed,
            },
            ensure_ascii=True,
            default=str,
        )
    )
    return EXIT_CHECK_FAILED if record.passed is False else EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    from hjhomog.verify import verify

    result = verify(args.suite, args.overrides, workers=args.jobs, output=args.output)
    for check in result.checks:
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
    failure = result.first_failure
    if failure is not None:
        print(f"first failing check: {failure.name}", file=sys.stderr)
    return result.exit_code


def _plot(args: argparse.Namespace) -> int:
    from hjhomog.plotting import plot_csv, save_svg

    save_svg(plot_csv(args.csv, x=args.x, y=args.y), args.out)
    print(str(args.out))
    return EXIT_OK


_COMMANDS = {"run": _run, "verify": _verify, "plot": _plot}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return _COMMANDS[args.command](args)
    except (HJHomogError, OSError) as exc:
        code = _exit_code_for(exc) if isinstance(exc, HJHomogError) else EXIT_USAGE
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    raise SystemExit(main())
