"""
Queue command
Analytic M/G/1 delay for one ψ next to a simulated FIFO queue.
"""

from __future__ import annotations

import numpy as np

from edt_lab.commands.simulate import summary_block
from edt_lab.config import get_logger
from edt_lab.models import ExperimentConfig, QueueConfig, QueueSimConfig, Strategy
from edt_lab.services import simulator
from edt_lab.services.persistence_service import output_path, persistence_service
from edt_lab.services.queueing import mean_delay

logger = get_logger("edt_lab.commands.queue")


def register(subparsers, parents) -> None:
    p = subparsers.add_parser("queue", parents=parents, help="analytic and simulated queueing delay at one psi")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--warmup", type=float, default=None, help="fraction of the horizon discarded")
    p.set_defaults(handler=run_queue)


def run_queue(cfg: ExperimentConfig) -> int:
    qc = QueueConfig(model=cfg.traffic(), packet=cfg.packet(), mode=cfg.sensing(), psi=cfg.psi)
    delay = mean_delay(qc)
    if not delay.stable:
        logger.warning(f"[QUEUE] psi={qc.psi:g} <= E1[t]={delay.e1_t:.6g}: the queue is unstable")

    sim_cfg = QueueSimConfig(queue=qc, strategy=cfg.strategy,
                             horizon=cfg.horizon if cfg.horizon is not None else QueueSimConfig.model_fields["horizon"].default,
                             warmup_fraction=cfg.warmup, replications=cfg.replications or 1, seed=cfg.seed)
    result = simulator.simulate_queue(sim_cfg)

    values = {
        **{k: float(v) for k, v in delay.as_row().items()},
        "p_empty": delay.p_empty,
        "sim_mean_sojourn": result.mean,
        "sim_standard_error": result.standard_error,
        **result.extras,
    }
    if cfg.strategy is Strategy.WP:
        values["E_D"] = values["E_NQ"] = float("nan")
    print(summary_block(f"Queue psi={qc.psi:g} {qc.mode.label()} {cfg.strategy.value}", values))

    if cfg.out:
        persistence_service.write_table(
            output_path(cfg.out, "sojourn.csv"),
            {"sample_index": np.arange(result.samples.size), "value": result.samples},
            {"config": cfg.model_dump(mode="json"), **values})
    return 0
