"""
Forward-backward parabolic solver: command-line entry point.

Usage:
    python solver_main.py run --config scenarios/heat.yaml
    python solver_main.py ensemble --config scenarios/becu_ensemble.yaml --threads 4
    python solver_main.py study --config scenarios/heat_ensemble.yaml
    python solver_main.py check --config scenarios/becu.yaml
    python solver_main.py export --config scenarios/becu_ensemble.yaml --bins 20
"""

import argparse
import logging
import os
import sys
from pathlib import Path

# Ensure project root is on sys.path
ROOT_DIR = Path(__file__).parent
sys.path.insert(0, str(ROOT_DIR))

from config import VERSION, AppConfig, load_platform_config, load_run_config
from errors import ConfigurationError, NonConvergenceError, PropertyGateError, SolverError

logger = logging.getLogger("solver")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_GATE = 4

COMMANDS = ("run", "ensemble", "study", "check", "export")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--out", default=None, help="artifact directory (default: <output.directory>/<config name>)")
    common.add_argument("--seed", type=int, default=None, help="override ensemble.seed")
    common.add_argument("--threads", type=int, default=None, help="parallel workers (default: FBP_THREADS)")
    common.add_argument("--allow-uncovered", action="store_true", default=None,
                        help="downgrade structural violations to warnings")
    common.add_argument("--log-level", default=None, help="debug, info, warning, error")

    parser = argparse.ArgumentParser(prog="solver_main", description="Forward-backward parabolic solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single trajectory with energy report")
    sub.add_parser("ensemble", parents=[common], help="ensemble Young measure approximation")
    sub.add_parser("study", parents=[common], help="refinement and Monte-Carlo studies")
    sub.add_parser("check", parents=[common], help="structural checks of the nonlinearity")
    export = sub.add_parser("export", parents=[common], help="histogram export of stored measures")
    export.add_argument("--bins", type=int, default=10)
    return parser


def setup_logging(override: str | None = None) -> None:
    platform_cfg = load_platform_config()
    level = (override or os.getenv("FBP_LOG_LEVEL") or platform_cfg.get("logging", {}).get("level", "info")).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def dispatch(args: argparse.Namespace) -> dict:
    from cli.commands import cmd_check, cmd_ensemble, cmd_export, cmd_run, cmd_study

    env = AppConfig.from_env()
    cfg = load_run_config(args.config, seed=args.seed, allow_uncovered=args.allow_uncovered)
    threads = max(1, args.threads if args.threads is not None else env.threads)
    base = Path(args.out) if args.out else Path(cfg.output.directory) / cfg.name

    if args.command == "run":
        return cmd_run(cfg, base / "run", threads)
    if args.command == "ensemble":
        return cmd_ensemble(cfg, base / "ensemble", threads)
    if args.command == "study":
        return cmd_study(cfg, base / "study", threads)
    if args.command == "check":
        return cmd_check(cfg, base / "check", threads)
    return cmd_export(cfg, base / "export", source=base / "ensemble", bins=args.bins)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    logger.info(f"solver {VERSION}: {args.command} {args.config}")
    try:
        summary = dispatch(args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NonConvergenceError as e:
        logger.error(f"Solver did not converge: {e}")
        return EXIT_NONCONVERGENCE
    except PropertyGateError as e:
        logger.error(f"Verification gate failed: {e}")
        return EXIT_GATE
    except SolverError as e:
        logger.error(f"Solver error: {e}")
        return EXIT_UNEXPECTED
    except Exception:
        logger.exception("Unexpected error")
        return EXIT_UNEXPECTED
    for w in summary.get("warning", []):
        logger.warning(w)
    logger.info(f"{args.command} finished: {len(summary.get('ok', []))} checks ok")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
