"""
Validation Service
------------------
Acceptance suite: analytic laws against their transforms, the pointwise closed forms,
closed-form moments and the Monte Carlo simulator; queue formulas against simulated
queues sized to a standard-error target. Each check produces one
`Check` row (name, tolerance, observed, passed); the suite passes when every row does.

A check whose computation itself fails (truncation, unresolvable grid) is recorded as
failed with observed = inf instead of aborting the suite.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from edt_lab.config import get_logger, get_settings
from edt_lab.errors import ConfigError, EdtLabError, NonPositiveInput, OutOfRange
from edt_lab.models import (
    DEFAULT_GRID_RESOLUTION,
    DEFAULT_TOLERANCE,
    Case,
    EdtQuery,
    ModeKind,
    PacketSpec,
    PrimaryTrafficModel,
    QueueConfig,
    QueueSimConfig,
    SensingMode,
    SimConfig,
    Strategy,
)
from edt_lab.services import analytic_edt, closed_forms, simulator
from edt_lab.services.primary_model import attempt_outcomes, busy_persistence_beta, stationary_probabilities
from edt_lab.services.queueing import mean_delay, service_moments, stability_threshold
from edt_lab.services.series_kernel import expand_power_at_a, expand_power_at_zero, partial_fraction_expand

logger = get_logger("edt_lab.validation")

LAMBDAS = (1.0, 3.0, 10.0)
MUS = (1.0, 2.0, 6.0)
TTRS = (0.5, 1.0, 4.0)
SENSING_INTERVALS = (0.25, 0.5, 1.0)
MGF_POINTS = (-0.05, -0.1, -0.2, -0.5, -1.0)
GRID_PE = 0.1

EDT_POINT = (3.0, 2.0, 4.0)       # λ, μ, T_tr
EDT_TS = 0.5
QUEUE_MODEL = (10.0, 6.0)         # λ, μ
QUEUE_TS = 0.5
QUEUE_LOADS = (1.25, 1.5, 2.0)    # ψ / E1[t]
PE_LEVELS = (0.0, 0.1, 0.2)
QUEUE_SE_FRACTION = 0.004         # target standard error relative to the analytic mean wait
MAX_QUEUE_REPLICATIONS = 400
EARLY_WINDOW = (0.713, 2.318, 5.731, 9.137)


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    observed: float
    passed: bool

    def as_row(self) -> Dict[str, object]:
        return {"check": self.name, "tolerance": self.tolerance, "observed": self.observed,
                "passed": int(self.passed)}


def _within(name: str, tolerance: float, observed: float) -> Check:
    return Check(name, tolerance, observed, bool(math.isfinite(observed) and observed <= tolerance))


class ValidationConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    samples: int = 1_000_000
    replications: int = 5
    queue_horizon: float = 1e6
    tolerance: float = DEFAULT_TOLERANCE
    grid_resolution: int = DEFAULT_GRID_RESOLUTION
    seed: int = 0
    seeds: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check(self):
        if self.samples < 1 or self.replications < 1:
            raise NonPositiveInput("samples and replications must be >= 1")
        if not (self.queue_horizon > 0):
            raise NonPositiveInput("queue_horizon must be positive")
        if not (self.tolerance > 0):
            raise OutOfRange("tolerance must be positive")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        return self

    def simulation_seeds(self) -> Tuple[int, ...]:
        return self.seeds or (self.seed,)


def grid_points(lambdas: Sequence[float] = LAMBDAS, mus: Sequence[float] = MUS, ttrs: Sequence[float] = TTRS,
                intervals: Sequence[float] = SENSING_INTERVALS) -> List[Tuple[float, float, float, float]]:
    return list(itertools.product(lambdas, mus, ttrs, intervals))


def well_conditioned_points(rng: np.random.Generator, count: int) -> List[Tuple[float, float]]:
    """(x, a) with x = r·a, r in [-0.5, 1.5] and |x|, |x - a| > 0.1; larger |x/a| cancels catastrophically."""
    out: List[Tuple[float, float]] = []
    while len(out) < count:
        a = rng.uniform(0.5, 3.0) * rng.choice([-1.0, 1.0])
        x = rng.uniform(-0.5, 1.5) * a
        if abs(x) > 0.1 and abs(x - a) > 0.1:
            out.append((float(x), float(a)))
    return out


class ValidationService:
    def __init__(self):
        self.checks: List[Check] = []

    # ── Analytic consistency on a parameter grid ───────────────────────────

    def _grid_item(self, point: Tuple[float, float, float, float], cfg: ValidationConfig,
                   with_continuous: bool) -> Dict[str, float]:
        """Worst normalization / MGF / moment errors over the modes and cases at one grid point."""
        lam, mu, ttr, ts = point
        model = PrimaryTrafficModel(lam=lam, mu=mu)
        packet = PacketSpec(t_tr=ttr)
        modes = [SensingMode.periodic(ts), SensingMode.imperfect(ts, GRID_PE)]
        if with_continuous:
            modes.insert(0, SensingMode.continuous())
        worst = {"mass": 0.0, "mgf": 0.0, "moment": 0.0}

        for mode in modes:
            query = EdtQuery(model=model, packet=packet, mode=mode, tolerance=cfg.tolerance,
                             grid_resolution=cfg.grid_resolution)
            dists = {}
            for case in (Case.PU_OFF, Case.PU_ON):
                try:
                    dist = analytic_edt.waiting_dist(query, case)
                except EdtLabError as e:
                    logger.warning(f"[VALIDATE] {mode.label()} {case.value} at {point}: {e}")
                    return {k: math.inf for k in worst}
                dists[case] = dist
                worst["mass"] = max(worst["mass"], abs(1.0 - dist.total_mass()))
                for s in MGF_POINTS:
                    exact = analytic_edt.mgf_waiting(model, packet, mode, case, s)
                    worst["mgf"] = max(worst["mgf"], abs(dist.laplace(s) - exact))

            if mode.kind is ModeKind.PERIODIC:
                sm = service_moments(model, packet, ts)
                for case, m1, m2 in ((Case.PU_OFF, sm.m1_off, sm.m2_off), (Case.PU_ON, sm.m1_on, sm.m2_on)):
                    w1 = dists[case].moment(1)
                    w2 = dists[case].moment(2)
                    s1 = w1 + ttr
                    s2 = w2 + 2.0 * ttr * w1 + ttr * ttr
                    worst["moment"] = max(worst["moment"], abs(s1 - m1) / m1, abs(s2 - m2) / m2)
        return worst

    def grid_checks(self, cfg: ValidationConfig,
                    points: Optional[Iterable[Tuple[float, float, float, float]]] = None) -> List[Check]:
        points = list(points) if points is not None else grid_points()
        seen_continuous = set()
        jobs = []
        for p in points:
            key = p[:3]
            jobs.append((p, key not in seen_continuous))
            seen_continuous.add(key)

        logger.info(f"[VALIDATE] analytic grid: {len(jobs)} parameter points")
        with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
            results = list(pool.map(lambda job: self._grid_item(job[0], cfg, job[1]), jobs))

        return [
            _within("normalization", cfg.tolerance, max(r["mass"] for r in results)),
            _within("laplace_vs_mgf", 1e-6, max(r["mgf"] for r in results)),
            _within("moment_closure", 1e-3, max(r["moment"] for r in results)),
        ]

    def partial_fraction_checks(self, n_max: int = 10, points: int = 100, seed: int = 0) -> List[Check]:
        """1/[x(x-a)]^n and the single-sided 1/[x^k(x-a)], 1/[x(x-a)^k] against their expansions."""
        rng = np.random.default_rng(seed)
        worst = worst_helper = 0.0
        for n in range(1, n_max + 1):
            for x, a in well_conditioned_points(rng, points):
                exact = 1.0 / (x * (x - a)) ** n
                approx = partial_fraction_expand(n, a).evaluate(x)
                worst = max(worst, abs(approx - exact) / abs(exact))

                y = x - a
                at_zero = 1.0 / (x ** n * y)
                at_a = 1.0 / (x * y ** n)
                worst_helper = max(worst_helper,
                                   abs(expand_power_at_zero(n, a, x) - at_zero) / abs(at_zero),
                                   abs(expand_power_at_a(n, a, x) - at_a) / abs(at_a))
        return [_within("partial_fractions", 1e-9, worst),
                _within("partial_fraction_helpers", 1e-9, worst_helper)]

    def closed_form_checks(self, cfg: ValidationConfig) -> List[Check]:
        """Grid densities and atoms against the pointwise closed forms on the early window."""
        lam, mu, ttr = EDT_POINT
        model = PrimaryTrafficModel(lam=lam, mu=mu)
        packet = PacketSpec(t_tr=ttr)
        worst_density = worst_atom = 0.0
        for mode in (SensingMode.continuous(), SensingMode.periodic(EDT_TS), SensingMode.imperfect(EDT_TS, GRID_PE)):
            query = EdtQuery(model=model, packet=packet, mode=mode, tolerance=cfg.tolerance,
                             grid_resolution=cfg.grid_resolution)
            for case in (Case.PU_OFF, Case.PU_ON):
                dist = analytic_edt.waiting_dist(query, case)
                for t in EARLY_WINDOW:
                    exact = closed_forms.density(model, packet, mode, case, t)
                    # relative error, absolute below a density of 1e-3
                    err = abs(float(dist.pdf(t)[0]) - exact) / max(abs(exact), 1e-3)
                    worst_density = max(worst_density, err)
                for loc, mass in closed_forms.closed_form_atoms(model, packet, mode, case, EARLY_WINDOW[-1]):
                    got = 0.0
                    if dist.atom_locations.size:
                        i = int(np.argmin(np.abs(dist.atom_locations - loc)))
                        if abs(dist.atom_locations[i] - loc) <= 1e-9 * max(1.0, loc):
                            got = float(dist.atom_masses[i])
                    worst_atom = max(worst_atom, abs(got - mass) / max(mass, 1e-2))
                logger.debug(f"[VALIDATE] closed forms {mode.label()} {case.value}: density {worst_density:.3g}, "
                             f"atoms {worst_atom:.3g}")
        return [_within("closed_form_vs_grid", 1e-4, worst_density),
                _within("closed_form_atoms", 1e-10, worst_atom)]

    def reduction_checks(self, cfg: ValidationConfig) -> List[Check]:
        lam, mu, ttr = EDT_POINT
        model = PrimaryTrafficModel(lam=lam, mu=mu)
        packet = PacketSpec(t_tr=ttr)

        def law(mode: SensingMode):
            return analytic_edt.edt_distribution(EdtQuery(model=model, packet=packet, mode=mode,
                                                          tolerance=cfg.tolerance,
                                                          grid_resolution=cfg.grid_resolution))

        periodic = law(SensingMode.periodic(EDT_TS))
        imperfect = law(SensingMode.imperfect(EDT_TS, 0.0))
        t = np.linspace(0.0, min(periodic.horizon, imperfect.horizon), 20_001)
        same = float(np.max(np.abs(periodic.cdf(t) - imperfect.cdf(t))))

        fine = law(SensingMode.periodic(0.01))
        cont = law(SensingMode.continuous())
        t = np.union1d(np.linspace(0.0, min(fine.horizon, cont.horizon), 40_001), cont.atom_locations)
        close = float(np.max(np.abs(fine.cdf(t) - cont.cdf(t))))
        return [_within("imperfect_pe0_equals_periodic", 1e-10, same),
                _within("fine_periodic_to_continuous", 0.02, close)]

    # ── Analytic vs simulation ──────────────────────────────────────────────

    def edt_simulation_checks(self, cfg: ValidationConfig) -> List[Check]:
        lam, mu, ttr = EDT_POINT
        model = PrimaryTrafficModel(lam=lam, mu=mu)
        packet = PacketSpec(t_tr=ttr)
        n = cfg.samples
        checks: List[Check] = []

        def run(mode: SensingMode, **kw):
            sim = simulator.simulate_edt(SimConfig(model=model, packet=packet, mode=mode, samples=n,
                                                   seed=cfg.seed, **kw))
            law = analytic_edt.edt_distribution(EdtQuery(model=model, packet=packet, mode=mode,
                                                         tolerance=cfg.tolerance,
                                                         grid_resolution=cfg.grid_resolution))
            return sim, law

        q, _ = attempt_outcomes(model, packet)
        _, p_off = stationary_probabilities(model)

        sim, law = run(SensingMode.continuous())
        checks.append(_within("ks_continuous", 0.005, simulator.ks_distance(law, sim)))
        freq = np.count_nonzero(sim.samples == ttr) / n
        expected = p_off * q
        checks.append(_within("atom_at_ttr_z", 3.0, abs(freq - expected) / math.sqrt(expected * (1 - expected) / n)))
        slots = simulator.success_frequency_check(sim, model, packet, k_max=5)
        checks.append(Check("slot_frequencies", 3.0, float(sum(not r[3] for r in slots)), all(r[3] for r in slots)))

        sim, law = run(SensingMode.periodic(EDT_TS))
        checks.append(_within("ks_periodic", 0.005, simulator.ks_distance(law, sim)))

        on = simulator.simulate_edt(SimConfig(model=model, packet=packet, mode=SensingMode.periodic(EDT_TS),
                                              samples=n, seed=cfg.seed, initial_state=Case.PU_ON))
        beta = busy_persistence_beta(model, EDT_TS)
        worst_z = 0.0
        for k in (1, 2, 3):
            expected = q * (1.0 - beta) * beta ** (k - 1)
            freq = np.count_nonzero(on.samples == ttr + k * EDT_TS) / n
            worst_z = max(worst_z, abs(freq - expected) / math.sqrt(expected * (1 - expected) / n))
        checks.append(_within("periodic_on_atoms_z", 3.0, worst_z))

        means = []
        for pe, band in ((0.1, 0.02), (0.2, 0.04)):
            sim, law = run(SensingMode.imperfect(EDT_TS, pe))
            checks.append(_within(f"ks_imperfect_pe{pe:g}", band, simulator.ks_distance(law, sim)))
            means.append(sim.mean)
        base = simulator.simulate_edt(SimConfig(model=model, packet=packet, mode=SensingMode.periodic(EDT_TS),
                                                samples=n, seed=cfg.seed)).mean
        increasing = base < means[0] < means[1]
        logger.info(f"[VALIDATE] mean EDT by pe 0/0.1/0.2: {base:.6g} / {means[0]:.6g} / {means[1]:.6g}")
        checks.append(Check("edt_increasing_in_pe", 0.0, 0.0 if increasing else 1.0, increasing))
        return checks

    def seeded_simulation_checks(self, cfg: ValidationConfig) -> List[Check]:
        """edt_simulation_checks once per seed; names carry the seed when there are several."""
        seeds = cfg.simulation_seeds()
        if len(seeds) == 1:
            return self.edt_simulation_checks(cfg.model_copy(update={"seed": seeds[0]}))
        checks: List[Check] = []
        for seed in seeds:
            logger.info(f"[VALIDATE] simulation checks with seed {seed}")
            for c in self.edt_simulation_checks(cfg.model_copy(update={"seed": seed})):
                checks.append(Check(f"{c.name}@seed{seed}", c.tolerance, c.observed, c.passed))
        return checks

    # ── Queue ──────────────────────────────────────────────────────────────

    def _queue_sim(self, cfg: ValidationConfig, model, packet, mode, psi, strategy=Strategy.NWP,
                   replications: Optional[int] = None):
        qc = QueueConfig(model=model, packet=packet, mode=mode, psi=psi)
        return simulator.simulate_queue(QueueSimConfig(queue=qc, strategy=strategy, horizon=cfg.queue_horizon,
                                                       replications=replications or cfg.replications,
                                                       seed=cfg.seed))

    def _sized_queue_sim(self, cfg: ValidationConfig, model, packet, mode, psi, analytic):
        """NWP run whose pooled standard error is at most QUEUE_SE_FRACTION of the analytic E[W].

        A pilot with cfg.replications sets the count; replications are keyed by index, so
        the rerun extends the pilot. Returns the run and the replication count used.
        """
        target = QUEUE_SE_FRACTION * min(analytic.e_d, analytic.e_nq * analytic.psi)
        reps = cfg.replications
        run = self._queue_sim(cfg, model, packet, mode, psi, Strategy.NWP, reps)
        if run.standard_error > target and reps < MAX_QUEUE_REPLICATIONS:
            reps = min(MAX_QUEUE_REPLICATIONS, math.ceil(1.2 * reps * (run.standard_error / target) ** 2))
            logger.info(f"[VALIDATE] psi={psi:.6g}: standard error {run.standard_error:.3g} above {target:.3g}; "
                        f"rerunning with {reps} replications")
            run = self._queue_sim(cfg, model, packet, mode, psi, Strategy.NWP, reps)
        return run, reps

    def queue_checks(self, cfg: ValidationConfig) -> List[Check]:
        lam, mu = QUEUE_MODEL
        model = PrimaryTrafficModel(lam=lam, mu=mu)
        mode = SensingMode.periodic(QUEUE_TS)
        checks: List[Check] = []
        worst_d = worst_nq = 0.0
        order_violations = 0
        gaps: Dict[float, List[float]] = {}

        for ttr in (2.0, 1.0):
            packet = PacketSpec(t_tr=ttr)
            e1 = stability_threshold(model, packet, mode)
            for load in QUEUE_LOADS:
                psi = load * e1
                analytic = mean_delay(QueueConfig(model=model, packet=packet, mode=mode, psi=psi))
                nwp, reps = self._sized_queue_sim(cfg, model, packet, mode, psi, analytic)
                wp = self._queue_sim(cfg, model, packet, mode, psi, Strategy.WP, reps)
                worst_d = max(worst_d, abs(nwp.mean - analytic.e_d) / analytic.e_d)
                worst_nq = max(worst_nq, abs(nwp.extras["mean_queue_length"] - analytic.e_nq) / analytic.e_nq)
                if wp.mean > nwp.mean:
                    order_violations += 1
                gaps.setdefault(load, []).append((nwp.mean - wp.mean) / nwp.mean)
                logger.info(f"[VALIDATE] T_tr={ttr:g} psi={psi:.6g}: E[D] analytic {analytic.e_d:.6g}, "
                            f"nwp {nwp.mean:.6g} ± {nwp.standard_error:.2g} over {reps} replications, wp {wp.mean:.6g}")

        shrink_violations = sum(1 for g in gaps.values() if not g[1] < g[0])
        checks.append(_within("queue_delay_rel_error", 0.02, worst_d))
        checks.append(_within("queue_length_rel_error", 0.03, worst_nq))
        checks.append(Check("wp_not_slower_than_nwp", 0.0, float(order_violations), order_violations == 0))
        checks.append(Check("strategy_gap_shrinks_with_ttr", 0.0, float(shrink_violations), shrink_violations == 0))
        checks.append(self.pe_ordering_check(cfg))
        return checks

    def pe_ordering_check(self, cfg: ValidationConfig, ttr: float = 1.0) -> Check:
        lam, mu = QUEUE_MODEL
        model = PrimaryTrafficModel(lam=lam, mu=mu)
        packet = PacketSpec(t_tr=ttr)
        modes = [SensingMode.imperfect(QUEUE_TS, pe) for pe in PE_LEVELS]
        e1 = stability_threshold(model, packet, modes[-1])
        worst = math.inf
        for load in QUEUE_LOADS:
            runs = [self._queue_sim(cfg, model, packet, m, load * e1) for m in modes]
            for lo, hi in zip(runs, runs[1:]):
                sep = (hi.mean - lo.mean) / math.hypot(lo.standard_error, hi.standard_error)
                worst = min(worst, sep)
        # observed is the weakest separation in standard errors; it must reach 3
        return Check("queue_delay_increasing_in_pe", 3.0, worst, bool(worst >= 3.0))

    # ── Suite ──────────────────────────────────────────────────────────────

    def run(self, cfg: ValidationConfig, sections: Optional[Sequence[str]] = None) -> List[Check]:
        steps: Dict[str, Callable[[], List[Check]]] = {
            "grid": lambda: self.grid_checks(cfg),
            "partial_fractions": lambda: self.partial_fraction_checks(seed=cfg.seed),
            "closed_forms": lambda: self.closed_form_checks(cfg),
            "reduction": lambda: self.reduction_checks(cfg),
            "simulation": lambda: self.seeded_simulation_checks(cfg),
            "queue": lambda: self.queue_checks(cfg),
        }
        self.checks = []
        for name in sections or list(steps):
            logger.info(f"[VALIDATE] running {name} checks")
            try:
                self.checks.extend(steps[name]())
            except EdtLabError as e:
                logger.error(f"[VALIDATE] {name} checks aborted: {e}")
                self.checks.append(Check(name, 0.0, math.inf, False))

        for c in self.checks:
            log = logger.info if c.passed else logger.error
            log(f"[VALIDATE] {'PASS' if c.passed else 'FAIL'} {c.name}: observed {c.observed:.6g} "
                f"(tolerance {c.tolerance:g})")
        return self.checks


validation_service = ValidationService()
