"""
Simulator Service
-----------------
Seeded Monte Carlo ground truth for single-packet EDT and for the secondary FIFO queue.

PU periods are pre-drawn per sample in column chunks keyed by (seed, block, chunk);
rows that run out of path are re-served on a longer table whose prefix is unchanged.
Blocks (EDT) and replications (queue) run on a thread pool capped by EDT_LAB_THREADS
and are merged by index, so output never depends on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from edt_lab.config import get_logger, get_settings
from edt_lab.errors import OutOfRange
from edt_lab.models import Case, PacketSpec, PrimaryTrafficModel, QueueSimConfig, SimConfig, SimResult, Strategy
from edt_lab.services import sim_kernels
from edt_lab.services.mixed_distribution import MixedDistribution
from edt_lab.services.primary_model import stationary_probabilities, success_probability
from edt_lab.services.queueing import service_moments_for_mode
from edt_lab.services.rng_streams import Purpose, exponentials, stream

logger = get_logger("edt_lab.simulator")

PERIOD_CHUNK = 16          # PU periods per chunk (EDT tables)
UNIFORM_CHUNK = 32         # missed-detection draws per chunk (EDT tables)
QUEUE_CHUNK = 1 << 16      # PU periods / arrivals / uniforms per chunk (queue tables)
MAX_EXTENSIONS = 24
BATCHES = 20


def _path_ends(durations_std: np.ndarray, first_on: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Cumulative PU period end times; column k is ON iff (k even) == first_on."""
    even = (np.arange(durations_std.shape[-1]) % 2 == 0)
    on = even[None, :] == first_on[:, None]
    return np.cumsum(durations_std * np.where(on, lam, mu), axis=1)


class SimulatorService:
    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers

    def _workers(self) -> int:
        return self.max_workers or get_settings().threads

    # ── Single packet ───────────────────────────────────────────────────────

    def _initial_states(self, cfg: SimConfig, block: int, size: int) -> np.ndarray:
        if cfg.initial_state is Case.PU_ON:
            return np.ones(size, dtype=np.bool_)
        if cfg.initial_state is Case.PU_OFF:
            return np.zeros(size, dtype=np.bool_)
        p_on, _ = stationary_probabilities(cfg.model)
        return stream(cfg.seed, Purpose.INITIAL_STATE, block).random(size) < p_on

    def _initial_chunks(self, cfg: SimConfig) -> int:
        sm = service_moments_for_mode(cfg.model, cfg.packet, cfg.mode)
        periods = 2.0 * sm.m1_on / (cfg.model.lam + cfg.model.mu) + 4.0
        if not math.isfinite(periods):
            periods = PERIOD_CHUNK
        return max(1, int(math.ceil(2.0 * periods / PERIOD_CHUNK)))

    def _run_block(self, cfg: SimConfig, block: int, size: int) -> Tuple[np.ndarray, np.ndarray]:
        model, mode = cfg.model, cfg.mode
        periodic = mode.is_periodic
        ts = mode.ts if periodic else 0.0
        pe = mode.pe
        wp = cfg.strategy is Strategy.WP
        first_on = self._initial_states(cfg, block, size)

        out = np.full(size, -1.0)
        slots = np.zeros(size, dtype=np.int64)
        pending = np.arange(size)
        chunks = self._initial_chunks(cfg)

        for attempt in range(MAX_EXTENSIONS):
            draws = [exponentials(stream(cfg.seed, Purpose.PU_PERIODS, block, c), (size, PERIOD_CHUNK))
                     for c in range(chunks)]
            ends = _path_ends(np.concatenate(draws, axis=1), first_on, model.lam, model.mu)
            if pe > 0.0:
                unif = np.concatenate(
                    [stream(cfg.seed, Purpose.MISSED_DETECTION, block, c).random((size, UNIFORM_CHUNK))
                     for c in range(chunks)], axis=1)
            else:
                unif = np.zeros((size, 0))

            res, sl = sim_kernels.edt_block(
                np.ascontiguousarray(ends[pending]), first_on[pending], periodic, ts, pe,
                cfg.packet.t_tr, wp, np.ascontiguousarray(unif[pending]))
            out[pending] = res
            slots[pending] = sl
            pending = pending[res < 0.0]
            if pending.size == 0:
                return out, slots
            logger.debug("[SIM] block %d: %d rows exhausted %d chunks, extending",
                         block, pending.size, chunks)
            chunks *= 2
        raise OutOfRange(f"block {block}: {pending.size} packets still undelivered after path extension")

    def simulate_edt(self, cfg: SimConfig) -> SimResult:
        """Per-packet extended delivery times (completion minus availability)."""
        sizes: List[Tuple[int, int]] = []
        remaining = cfg.samples
        block = 0
        while remaining > 0:
            size = min(cfg.block_size, remaining)
            sizes.append((block, size))
            remaining -= size
            block += 1

        workers = min(self._workers(), len(sizes))
        logger.info("[SIM] EDT %s %s: %d samples in %d blocks on %d workers",
                    cfg.mode.label(), cfg.strategy.value, cfg.samples, len(sizes), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda bs: self._run_block(cfg, *bs), sizes))

        samples = np.concatenate([p[0] for p in parts])
        slots = np.concatenate([p[1] for p in parts])
        return SimResult(samples=samples, seed=cfg.seed, slots=slots)

    # ── Queue ───────────────────────────────────────────────────────────────

    def _arrivals(self, seed: int, rep: int, psi: float, horizon: float) -> np.ndarray:
        parts = []
        t = 0.0
        c = 0
        while t < horizon:
            gaps = psi * exponentials(stream(seed, Purpose.ARRIVALS, rep, c), QUEUE_CHUNK)
            times = t + np.cumsum(gaps)
            parts.append(times)
            t = float(times[-1])
            c += 1
        arrivals = np.concatenate(parts)
        return arrivals[arrivals < horizon]

    def _queue_path(self, seed: int, rep: int, first_on: bool, lam: float, mu: float,
                    cover: float, pe: float, ts: float) -> Tuple[np.ndarray, np.ndarray]:
        parts = []
        end = 0.0
        c = 0
        while end < cover:
            parts.append(exponentials(stream(seed, Purpose.QUEUE_PU_PERIODS, rep, c), QUEUE_CHUNK))
            c += 1
            end = float(_path_ends(np.concatenate(parts)[None, :], np.array([first_on]), lam, mu)[0, -1])
        ends = _path_ends(np.concatenate(parts)[None, :], np.array([first_on]), lam, mu)[0]

        if pe > 0.0:
            n_unif = int(cover / ts) + QUEUE_CHUNK
            chunks = int(math.ceil(n_unif / QUEUE_CHUNK))
            unif = np.concatenate([stream(seed, Purpose.QUEUE_MISSED_DETECTION, rep, k).random(QUEUE_CHUNK)
                                   for k in range(chunks)])
        else:
            unif = np.zeros(0)
        return ends, unif

    def _run_replication(self, cfg: QueueSimConfig, rep: int) -> Dict[str, np.ndarray]:
        qc = cfg.queue
        model, mode = qc.model, qc.mode
        periodic = mode.is_periodic
        ts = mode.ts if periodic else 0.0
        wp = cfg.strategy is Strategy.WP

        arrivals = self._arrivals(cfg.seed, rep, qc.psi, cfg.horizon)
        p_on, _ = stationary_probabilities(model)
        first_on = bool(stream(cfg.seed, Purpose.QUEUE_INITIAL_STATE, rep).random() < p_on)

        cover = cfg.horizon * 1.25 + 20.0 * (model.lam + model.mu)
        done = 0
        for _ in range(6):
            ends, unif = self._queue_path(cfg.seed, rep, first_on, model.lam, model.mu, cover, mode.pe, ts)
            done, sojourn, waiting, type2, type2_on = sim_kernels.fifo_queue(
                arrivals, ends, first_on, periodic, ts, mode.pe, qc.packet.t_tr, wp, unif)
            if done == arrivals.size:
                break
            cover *= 2.0
        if done < arrivals.size:
            logger.warning("[QUEUE] replication %d: %d of %d packets left in the system at path end "
                           "(backlog grows; psi=%g may be unstable)", rep, arrivals.size - done, arrivals.size, qc.psi)

        keep = arrivals[:done] >= cfg.warmup_fraction * cfg.horizon
        return {
            "arrivals": arrivals[:done][keep],
            "sojourn": sojourn[:done][keep],
            "waiting": waiting[:done][keep],
            "type2": type2[:done][keep],
            "type2_on": type2_on[:done][keep],
            "dropped": np.array([arrivals.size - done]),
        }

    def simulate_queue(self, cfg: QueueSimConfig) -> SimResult:
        """Long-run FIFO sojourn times after warmup, pooled over replications."""
        workers = min(self._workers(), cfg.replications)
        logger.info("[QUEUE] psi=%g %s %s: %d replication(s) of horizon %g",
                    cfg.queue.psi, cfg.queue.mode.label(), cfg.strategy.value, cfg.replications, cfg.horizon)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(lambda r: self._run_replication(cfg, r), range(cfg.replications)))

        sojourn = np.concatenate([r["sojourn"] for r in reps])
        waiting = np.concatenate([r["waiting"] for r in reps])
        type2 = np.concatenate([r["type2"] for r in reps])
        type2_on = np.concatenate([r["type2_on"] for r in reps])
        window = cfg.horizon * (1.0 - cfg.warmup_fraction) * cfg.replications

        batch_means: List[float] = []
        for r in reps:
            if r["sojourn"].size >= 2 * BATCHES:
                batch_means.extend(float(b.mean()) for b in np.array_split(r["sojourn"], BATCHES))
        se = float(np.std(batch_means, ddof=1) / math.sqrt(len(batch_means))) if len(batch_means) > 1 else math.inf

        extras = {
            "standard_error": se,
            "mean_wait": float(waiting.mean()) if waiting.size else math.nan,
            "mean_queue_length": float(waiting.sum() / window) if window > 0 else math.nan,
            "type2_fraction": float(type2.mean()) if type2.size else math.nan,
            "p_on2": float(type2_on[type2].mean()) if type2.any() else math.nan,
            "packets": float(sojourn.size),
            "dropped": float(sum(int(r["dropped"][0]) for r in reps)),
        }
        return SimResult(samples=sojourn, seed=cfg.seed, extras=extras)


simulator_service = SimulatorService()


# ── Comparisons ────────────────────────────────────────────────────────────────

def simulate_edt(cfg: SimConfig) -> SimResult:
    return simulator_service.simulate_edt(cfg)


def simulate_queue(cfg: QueueSimConfig) -> SimResult:
    return simulator_service.simulate_queue(cfg)


def ks_distance(analytic: MixedDistribution, empirical: SimResult) -> float:
    """sup |F_analytic - F_empirical| over both one-sided limits at every sample point."""
    xs = np.sort(np.asarray(empirical.samples, dtype=float))
    n = xs.size
    if n == 0:
        raise OutOfRange("empirical sample is empty")
    values, counts = np.unique(xs, return_counts=True)
    right = np.cumsum(counts) / n
    left = right - counts / n
    f_right = analytic.cdf(values)
    f_left = analytic.cdf_left(values)
    return float(max(np.max(np.abs(f_right - right)), np.max(np.abs(f_left - left))))


def resample(dist: MixedDistribution, n: int, seed: int = 0) -> SimResult:
    """Inverse-CDF draws from the represented part of an analytic law."""
    u = stream(seed, Purpose.RESAMPLE).random(n) * dist.total_mass()
    return SimResult(samples=dist.quantile(u), seed=seed)


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Two-sided Kolmogorov critical distance for n samples at level alpha."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def empirical_slot_frequencies(result: SimResult, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Fraction of packets delivered in transmission slot k = 1..k_max and its standard error."""
    if result.slots is None:
        raise OutOfRange("result carries no slot counts")
    n = result.slots.size
    freq = np.array([np.count_nonzero(result.slots == k) / n for k in range(1, k_max + 1)])
    return freq, np.sqrt(freq * (1.0 - freq) / n)


def success_frequency_check(result: SimResult, model: PrimaryTrafficModel, packet: PacketSpec,
                            k_max: int = 5, n_se: float = 3.0) -> List[Tuple[int, float, float, bool]]:
    """(k, observed, expected, within n_se standard errors) for delivery in slot k."""
    freq, se = empirical_slot_frequencies(result, k_max)
    rows = []
    for k in range(1, k_max + 1):
        expected = success_probability(model, packet, k)
        err = abs(freq[k - 1] - expected)
        rows.append((k, float(freq[k - 1]), expected, bool(err <= n_se * max(se[k - 1], 1e-12))))
    return rows
