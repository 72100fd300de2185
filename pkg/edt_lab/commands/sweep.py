"""
Sweep command
Delay against mean inter-arrival time for each requested pe and strategy.
"""

from __future__ import annotations

from edt_lab.config import get_logger
from edt_lab.models import ExperimentConfig, Strategy, SweepConfig
from edt_lab.services.persistence_service import output_path, persistence_service
from edt_lab.services.sweep_service import sweep_service

logger = get_logger("edt_lab.commands.sweep")


def register(subparsers, parents) -> None:
    p = subparsers.add_parser("sweep", parents=parents, help="delay vs. arrival rate CSV")
    p.add_argument("--psi-values", type=float, nargs="+", default=None)
    p.add_argument("--load-factors", type=float, nargs="+", default=None, help="psi as multiples of E1[t]")
    p.add_argument("--pe-values", type=float, nargs="+", default=None)
    p.add_argument("--strategies", nargs="+", choices=[s.value for s in Strategy], default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--no-sim", dest="simulate", action="store_false", default=None,
                   help="analytic columns only")
    p.set_defaults(handler=run_sweep)


def run_sweep(cfg: ExperimentConfig) -> int:
    periodic = cfg.sensing().is_periodic
    sweep = SweepConfig(
        model=cfg.traffic(), packet=cfg.packet(), ts=cfg.ts if periodic else None,
        psi_values=cfg.psi_values, load_factors=cfg.load_factors,
        pe_values=cfg.pe_values or (cfg.pe,),
        strategies=cfg.strategies or (cfg.strategy,),
        horizon=cfg.horizon if cfg.horizon is not None else SweepConfig.model_fields["horizon"].default,
        warmup_fraction=cfg.warmup, replications=cfg.replications or 1, seed=cfg.seed,
        simulate=cfg.simulate,
    )
    rows = sweep_service.run_sweep(sweep)
    path = persistence_service.write_rows(output_path(cfg.out, "sweep.csv"), rows,
                                          {"config": cfg.model_dump(mode="json")})
    unstable = sum(1 for r in rows if not r["stable"])
    logger.info(f"[QUEUE] sweep: {len(rows)} rows ({unstable} unstable) -> {path}")
    return 0
