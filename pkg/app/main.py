"""
Command-line entry point: ``python -m app.main <subcommand> ...``.

Exit codes: 0 success, 1 engine or oracle failure, 2 invalid configuration.
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from app.api.commands import dispatch
from app.config import SOFTWARE_VERSION, settings
from app.core.errors import CheomError, ConfigError
from app.core.logging import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ENGINE = 1
EXIT_CONFIG = 2


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--output", help=f"artifact directory (default: {settings.output_dir}/<name>-<subcommand>)")
    parser.add_argument("--seed", type=int, help="override ensemble.master_seed")
    parser.add_argument("--dt", type=float, help="override integrator.dt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cheom", description="Conditioned hierarchy engine for monitored cavity QED")
    parser.add_argument("--version", action="version", version=f"%(prog)s {SOFTWARE_VERSION}")
    parser.add_argument("--threads", type=int, default=None, help="worker count (default: CHEOM_THREADS)")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one conditioned trajectory")
    _add_config(run)
    run.add_argument("--kmax", type=int, help="override truncation.k_max")
    run.add_argument("--trajectory-index", type=int, default=0)
    run.add_argument("--save-noise", action="store_true", help="also write the binary noise path")

    ensemble = sub.add_parser("ensemble", help="conditioned-ensemble statistics")
    _add_config(ensemble)
    ensemble.add_argument("--kmax", type=int, help="override truncation.k_max")
    ensemble.add_argument("--trajectories", type=int)

    scan = sub.add_parser("scan-lambda", help="feedback-strength scan of the deterministic feedback equation")
    _add_config(scan)
    scan.add_argument("--kmax", type=int, help="override truncation.k_max")
    scan.add_argument("--lambdas", help="start:stop:step (inclusive) or a comma list, e.g. --lambdas=-0.6:0.8:0.01; default [-0.6, 0.8] Omega")
    scan.add_argument("--check-kmax", action="store_true", help="repeat the scan at k_max + 2")

    switch = sub.add_parser("switch-protocol", help="lambda_plus -> lambda_minus -> lambda_plus")
    _add_config(switch)
    switch.add_argument("--kmax", type=int, help="override truncation.k_max")
    switch.add_argument("--lambda-plus", type=float, required=True)
    switch.add_argument("--lambda-minus", type=float, required=True)
    switch.add_argument("--t1", type=float, required=True)
    switch.add_argument("--t2", type=float, required=True)

    compare = sub.add_parser("compare-oracle", help="mean trace distance to the full-system oracle")
    _add_config(compare)
    compare.add_argument("--kmax", help="comma list of hierarchy depths, e.g. 1,2,4,6")
    compare.add_argument("--trajectories", type=int)
    compare.add_argument("--drive", choices=["noise", "current"], default="noise")
    compare.add_argument("--nmax", type=int, help="oracle Fock cutoff (default: truncation.n_max)")

    count = sub.add_parser("count-aux", help="number of auxiliary matrices")
    count.add_argument("--modes", type=int, required=True)
    count.add_argument("--kmax", type=int, required=True)

    validate = sub.add_parser("validate", help="check a scenario file without running it")
    validate.add_argument("--config", required=True)
    return parser


def _error_chain(e: BaseException) -> str:
    messages = []
    while e is not None:
        messages.append(str(e))
        e = e.__cause__
    return " <- ".join(dict.fromkeys(messages))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return dispatch(args)
    except ConfigError as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_CONFIG
    except CheomError as e:
        logger.error("%s failed: %s", args.command, _error_chain(e))
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
