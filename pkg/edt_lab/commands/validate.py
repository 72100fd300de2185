"""
Validate command
Runs the acceptance suite; exit status 1 when any check fails.
"""

from __future__ import annotations

from edt_lab.config import get_logger
from edt_lab.models import ExperimentConfig
from edt_lab.services.persistence_service import output_path, persistence_service
from edt_lab.services.validation_service import ValidationConfig, validation_service

logger = get_logger("edt_lab.commands.validate")

SECTIONS = ("grid", "partial_fractions", "closed_forms", "reduction", "simulation", "queue")


def register(subparsers, parents) -> None:
    p = subparsers.add_parser("validate", parents=parents, help="run the acceptance checks")
    p.add_argument("--replications", type=int, default=None,
                   help="pilot queue replications per point, raised until the standard error target is met")
    p.add_argument("--sections", nargs="+", choices=SECTIONS, default=None)
    p.add_argument("--seeds", nargs="+", type=int, default=None, help="repeat the simulation checks once per seed")
    p.set_defaults(handler=run_validate)


def run_validate(cfg: ExperimentConfig) -> int:
    defaults = ValidationConfig()
    vcfg = ValidationConfig(
        samples=cfg.samples or defaults.samples,
        replications=cfg.replications or defaults.replications,
        queue_horizon=cfg.horizon or defaults.queue_horizon,
        tolerance=cfg.tolerance,
        grid_resolution=cfg.grid_res,
        seed=cfg.seed,
        seeds=cfg.seeds,
    )
    checks = validation_service.run(vcfg, sections=cfg.sections or None)
    failed = [c.name for c in checks if not c.passed]

    persistence_service.write_rows(
        output_path(cfg.out, "validation.csv"), [c.as_row() for c in checks],
        {"config": cfg.model_dump(mode="json"), "validation": vcfg.model_dump(mode="json"),
         "failed": failed})
    if failed:
        logger.error(f"[VALIDATE] {len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")
        return 1
    logger.info(f"[VALIDATE] all {len(checks)} checks passed")
    return 0
