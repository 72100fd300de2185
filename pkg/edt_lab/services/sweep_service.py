"""
Sweep Service
-------------
Mean queueing delay against the mean inter-arrival time ψ, one row per
(pe, strategy, ψ): the analytic E[D] / E[N_Q] next to the simulated mean sojourn.

Analytic values exist for the non-work-preserving strategy only; the work-preserving
rows carry the simulated baseline. Points beyond the stability threshold are flagged
stable=0 with infinite analytic delay and are not simulated unless asked.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List

from edt_lab.config import get_logger, get_settings
from edt_lab.models import QueueConfig, QueueSimConfig, Strategy, SweepConfig
from edt_lab.services import simulator
from edt_lab.services.queueing import mean_delay, stability_threshold

logger = get_logger("edt_lab.sweep")


class SweepService:
    def psi_grid(self, cfg: SweepConfig, pe: float) -> List[float]:
        """Explicit ψ values, or load factors scaled by this mode's E1[t]."""
        if cfg.psi_values:
            return list(cfg.psi_values)
        e1 = stability_threshold(cfg.model, cfg.packet, cfg.mode_for(pe))
        return [load * e1 for load in cfg.load_factors]

    def run_sweep(self, cfg: SweepConfig) -> List[Dict[str, float]]:
        points = [(pe, psi) for pe in cfg.pe_values for psi in self.psi_grid(cfg, pe)]

        def analytic(point):
            pe, psi = point
            return mean_delay(QueueConfig(model=cfg.model, packet=cfg.packet, mode=cfg.mode_for(pe), psi=psi))

        with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
            delays = list(pool.map(analytic, points))

        rows: List[Dict[str, float]] = []
        for (pe, psi), delay in zip(points, delays):
            mode = cfg.mode_for(pe)
            if not delay.stable:
                logger.warning(f"[QUEUE] psi={psi:.6g} is at or below E1[t]={delay.e1_t:.6g} ({mode.label()}): unstable")
            for strategy in cfg.strategies:
                row = {
                    "pe": pe,
                    "strategy": strategy.value,
                    "load": psi / delay.e1_t if delay.e1_t > 0 else math.nan,
                    **delay.as_row(),
                    "p_empty": delay.p_empty,
                    "extension": int(delay.extension),
                    "sim_mean": math.nan,
                    "sim_se": math.nan,
                    "sim_queue_length": math.nan,
                    "sim_packets": 0,
                }
                if strategy is not Strategy.NWP:
                    row.update(E_D=math.nan, E_NQ=math.nan)
                if cfg.simulate and (delay.stable or cfg.simulate_unstable):
                    sim = simulator.simulate_queue(QueueSimConfig(
                        queue=QueueConfig(model=cfg.model, packet=cfg.packet, mode=mode, psi=psi),
                        strategy=strategy, horizon=cfg.horizon, warmup_fraction=cfg.warmup_fraction,
                        replications=cfg.replications, seed=cfg.seed))
                    row.update(sim_mean=sim.mean, sim_se=sim.standard_error,
                               sim_queue_length=sim.extras["mean_queue_length"],
                               sim_packets=int(sim.extras["packets"]))
                rows.append(row)
            logger.info(f"[QUEUE] sweep point pe={pe:g} psi={psi:.6g} done")
        return rows


sweep_service = SweepService()
