"""
Simulate command
Monte Carlo EDT samples, compared against the analytic law by KS distance.
"""

from __future__ import annotations

import math

import numpy as np

from edt_lab.config import get_logger
from edt_lab.errors import EdtLabError
from edt_lab.models import Case, EdtQuery, ExperimentConfig, SimConfig
from edt_lab.services import analytic_edt, simulator
from edt_lab.services.persistence_service import output_path, persistence_service

logger = get_logger("edt_lab.commands.simulate")

DEFAULT_SAMPLES = 100_000


def register(subparsers, parents) -> None:
    p = subparsers.add_parser("simulate", parents=parents, help="simulate single-packet EDT")
    p.add_argument("--case", choices=[c.value for c in Case], default=None,
                   help="fix the PU state at packet arrival (default: stationary draw)")
    p.set_defaults(handler=run_simulate)


def summary_block(title: str, values: dict) -> str:
    width = max(len(k) for k in values)
    lines = [title, "-" * len(title)]
    for k, v in values.items():
        lines.append(f"{k.ljust(width)} : {v:.10g}" if isinstance(v, float) else f"{k.ljust(width)} : {v}")
    return "\n".join(lines)


def run_simulate(cfg: ExperimentConfig) -> int:
    mode = cfg.sensing()
    sim_cfg = SimConfig(model=cfg.traffic(), packet=cfg.packet(), mode=mode, strategy=cfg.strategy,
                        samples=cfg.samples or DEFAULT_SAMPLES, seed=cfg.seed, initial_state=cfg.case)
    result = simulator.simulate_edt(sim_cfg)

    ks = math.nan
    try:
        query = EdtQuery(model=sim_cfg.model, packet=sim_cfg.packet, mode=mode, horizon=cfg.horizon,
                         tolerance=cfg.tolerance, grid_resolution=cfg.grid_res)
        if cfg.case is None:
            law = analytic_edt.edt_distribution(query)
        else:
            law = analytic_edt.waiting_dist(query, cfg.case).shifted(cfg.ttr)
        ks = simulator.ks_distance(law, result)
    except EdtLabError as e:
        logger.warning(f"[SIM] analytic comparison skipped: {e}")

    values = {
        "samples": sim_cfg.samples,
        "seed": sim_cfg.seed,
        "mean": result.mean,
        "second_moment": result.second_moment,
        "standard_error": result.standard_error,
        "ks_statistic": ks,
        "ks_critical_1pct": simulator.ks_critical_value(sim_cfg.samples),
    }
    print(summary_block(f"EDT simulation {mode.label()} {cfg.strategy.value}", values))

    if cfg.out:
        persistence_service.write_table(
            output_path(cfg.out, "samples.csv"),
            {"sample_index": np.arange(result.samples.size), "value": result.samples},
            {"config": cfg.model_dump(mode="json"), **values})
    return 0
