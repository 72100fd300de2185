"""
EDT Lab - command-line entry point
Subcommands: analytic, simulate, queue, validate, sweep.

Settings precedence: CLI flags > --config file > built-in defaults. A project-root
`.env` is loaded first (never overriding exported variables).
Exit codes: 0 success, 1 a validation check failed, 2 configuration / IO / truncation error.
"""

from __future__ import annotations

import argparse
import re
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from edt_lab.commands import (
    register_analytic,
    register_queue,
    register_simulate,
    register_sweep,
    register_validate,
)
from edt_lab.config import get_logger, get_settings, load_dotenv_if_present, read_config_file, set_log_level
from edt_lab.errors import ConfigError, EdtLabError, IOFailure, NormalizationFailure, TruncationFailure
from edt_lab.models import ExperimentConfig, ModeKind, Strategy

logger = get_logger("edt_lab.main")

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2

LIST_KEYS = {"psi_values", "load_factors", "pe_values", "strategies", "sections", "seeds"}
CONFIG_RENAMES = {"lambda": "lam", "grid_resolution": "grid_res"}
_NOT_CONFIG = {"config", "handler", "verbose", "quiet"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="flat key=value experiment file (flags win)")
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="mean PU ON period")
    common.add_argument("--mu", type=float, default=None, help="mean PU OFF period")
    common.add_argument("--ttr", type=float, default=None, help="packet transmission time T_tr")
    common.add_argument("--ts", type=float, default=None, help="sensing interval T_s")
    common.add_argument("--pe", type=float, default=None, help="missed-detection probability")
    common.add_argument("--mode", choices=[m.value for m in ModeKind], default=None)
    common.add_argument("--strategy", choices=[s.value for s in Strategy], default=None)
    common.add_argument("--psi", type=float, default=None, help="mean packet inter-arrival time")
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--horizon", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tolerance", type=float, default=None)
    common.add_argument("--grid-res", dest="grid_res", type=int, default=None)
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="edt_lab", description="Extended delivery time toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for register in (register_analytic, register_simulate, register_queue, register_validate, register_sweep):
        register(subparsers, [common])
    return parser


def _config_values(path: str) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for key, value in read_config_file(path).items():
        key = CONFIG_RENAMES.get(key, key)
        if key == "command":
            continue
        if key in LIST_KEYS:
            out[key] = [v for v in re.split(r"[,\s]+", value) if v]
        else:
            out[key] = value
    return out


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: Dict[str, object] = {}
    if args.config:
        values.update(_config_values(args.config))
    values.update({k: v for k, v in vars(args).items() if v is not None and k not in _NOT_CONFIG})
    return ExperimentConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv_if_present()
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_log_level("DEBUG")
    elif args.quiet:
        set_log_level("WARNING")

    try:
        settings = get_settings()
        cfg = resolve_config(args)
        logger.debug(f"Running {cfg.command.value} with {settings.threads} worker thread(s)")
        return args.handler(cfg)
    except ValidationError as e:
        logger.error(f"[CONFIG] invalid configuration: {e}")
    except TruncationFailure as e:
        logger.error(f"[ANALYTIC] {e} (suggested horizon: {e.suggested_horizon})")
    except NormalizationFailure as e:
        logger.error(f"[ANALYTIC] {e}")
    except ConfigError as e:
        logger.error(f"[CONFIG] {e}")
    except IOFailure as e:
        logger.error(f"[IO] {e}")
    except EdtLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
    return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
