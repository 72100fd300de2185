"""
Analytic EDT
------------
Exact waiting-time (T_w) and extended-delivery-time (T_ED = T_w + T_tr) laws for the
three sensing modes and both initial PU states.

The law of T_w is e^{-T_tr/μ} times the attempt-start measure of the secondary user:
the initial attempt atoms plus a density produced by `renewal_kernels`. The
moment-generating functions are summed in closed form here; they give the Chernoff
bound that certifies how much mass the finite horizon leaves out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.signal import lfilter

from edt_lab.config import get_logger
from edt_lab.errors import ConfigError, DivergentSeries, NormalizationFailure, OutOfRange, TruncationFailure
from edt_lab.models import (
    DEFAULT_GRID_RESOLUTION,
    DEFAULT_TOLERANCE,
    Case,
    EdtQuery,
    ModeKind,
    PacketSpec,
    PrimaryTrafficModel,
    SensingMode,
)
from edt_lab.services import renewal_kernels
from edt_lab.services.mixed_distribution import MixedDistribution, merge_atoms
from edt_lab.services.primary_model import alpha, attempt_outcomes, busy_persistence_beta, stationary_probabilities
from edt_lab.services.queueing import service_moments_for_mode

logger = get_logger("edt_lab.analytic_edt")

MAX_CELLS = 20_000_000
STEP_RATE_MULTIPLE = 10.0   # cells per mean PU transition time 1/α
NODE_SNAP = 1e-9            # relative to the step
BREAKPOINT_GENERATIONS = 3  # multiples of T_tr kept as nodes
NORMALIZATION_FLOOR = 1e-9
MAX_REFINEMENTS = 3
HORIZON_MEAN_MULTIPLE = 20.0
DEGENERATE_FRACTION = 1e-2   # failures below tolerance × this are dropped


# ── Transforms ─────────────────────────────────────────────────────────────────

def _as_case(case: Union[Case, str]) -> Case:
    try:
        return case if isinstance(case, Case) else Case(str(case).lower())
    except ValueError as e:
        raise ConfigError(f"case must be 'on' or 'off', got {case!r}") from e


def _waste_factor(model: PrimaryTrafficModel, packet: PacketSpec, s: float) -> float:
    """p·M_waste(s) = (1 - e^{T_tr(s-1/μ)})/(1 - μs), stable at s = 1/μ."""
    x = s - 1.0 / model.mu
    tx = packet.t_tr * x
    if abs(tx) < 1e-8:
        return packet.t_tr / model.mu * (1.0 + 0.5 * tx)
    return math.expm1(tx) / (model.mu * x)


def _singularity(model: PrimaryTrafficModel, mode: SensingMode) -> float:
    """Smallest positive s at which a waiting or missed-detection factor blows up."""
    if mode.kind is ModeKind.CONTINUOUS:
        pole = 1.0 / model.lam
    else:
        pole = -math.log(busy_persistence_beta(model, mode.ts)) / mode.ts
    if mode.pe > 0.0:
        pole = min(pole, -math.log(mode.pe) / mode.ts)
    return pole


def _factors(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode, s: float) -> Tuple[float, float, float]:
    """(M_wait, M_mis, p·M_waste) at s."""
    if s >= _singularity(model, mode):
        raise DivergentSeries(f"s={s!r} lies beyond the waiting-time singularity")
    if mode.kind is ModeKind.CONTINUOUS:
        wait = 1.0 / (1.0 - model.lam * s)
        mis = 1.0
    else:
        z = math.exp(s * mode.ts)
        beta = busy_persistence_beta(model, mode.ts)
        wait = (1.0 - beta) * z / (1.0 - beta * z)
        mis = (1.0 - mode.pe) / (1.0 - mode.pe * z) if mode.pe > 0.0 else 1.0
    return wait, mis, _waste_factor(model, packet, s)


def mgf_waiting(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
                case: Union[Case, str], s: float) -> float:
    """E[e^{s·T_w}] = Σ_k q p^{k-1} M_wait^{k-1 (+1 if on)} M_mis^k M_waste^{k-1}, summed in closed form."""
    case = _as_case(case)
    q, _ = attempt_outcomes(model, packet)
    wait, mis, waste = _factors(model, packet, mode, s)
    ratio = waste * wait * mis
    if not (ratio < 1.0):
        raise DivergentSeries(f"attempt series ratio {ratio:.6g} >= 1 at s={s!r}")
    value = q * mis / (1.0 - ratio)
    return value * wait if case is Case.PU_ON else value


def convergence_radius(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode) -> float:
    """Supremum of s > 0 for which mgf_waiting converges."""
    pole = _singularity(model, mode)
    upper = pole * (1.0 - 1e-12)

    def excess(s: float) -> float:
        wait, mis, waste = _factors(model, packet, mode, s)
        return waste * wait * mis - 1.0

    if excess(upper) < 0.0:
        return upper
    return brentq(excess, 0.0, upper, xtol=1e-14 * pole, rtol=1e-13)


def chernoff_tail(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
                  case: Union[Case, str], horizon: float) -> Tuple[float, float, float]:
    """min_s M(s)·e^{-s·horizon}: returns (bound on P(T_w > horizon), s*, M(s*))."""
    case = _as_case(case)
    s_max = convergence_radius(model, packet, mode) * (1.0 - 1e-9)

    def objective(s: float) -> float:
        try:
            return math.log(mgf_waiting(model, packet, mode, case, s)) - s * horizon
        except (DivergentSeries, ValueError, ZeroDivisionError):
            return math.inf

    res = minimize_scalar(objective, bounds=(0.0, s_max), method="bounded",
                          options={"xatol": max(s_max * 1e-10, 1e-300)})
    s_opt = float(res.x)
    log_bound = objective(s_opt)
    if not math.isfinite(log_bound) or log_bound > 0.0:
        return 1.0, 0.0, 0.0
    return math.exp(log_bound), s_opt, mgf_waiting(model, packet, mode, case, s_opt)


def suggest_horizon(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
                    case: Union[Case, str], tolerance: float, start: float) -> float:
    h = max(start, packet.t_tr * 2.0)
    for _ in range(80):
        if chernoff_tail(model, packet, mode, case, h)[0] <= tolerance:
            return h
        h *= 1.5
    return math.inf


# ── Grid ───────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray
    period_cells: int     # cells per sensing interval; 0 in continuous mode
    snap: float           # points closer than this to a node are that node

    @property
    def n_cells(self) -> int:
        return int(self.nodes.size - 1)

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    def nearest_node(self, t: np.ndarray) -> np.ndarray:
        i = np.clip(np.searchsorted(self.nodes, t), 1, self.n_cells)
        left_closer = (t - self.nodes[i - 1]) <= (self.nodes[i] - t)
        return np.where(left_closer, i - 1, i)


def default_horizon(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode) -> float:
    """T_tr + 20·E[ST_on]."""
    sm = service_moments_for_mode(model, packet, mode)
    return packet.t_tr + HORIZON_MEAN_MULTIPLE * sm.m1_on


def max_step(model: PrimaryTrafficModel, grid_resolution: int, refinement: int = 0) -> float:
    """Cell width cap: 1/grid_resolution, and short against the PU time scale 1/α."""
    return min(1.0 / grid_resolution, 1.0 / (STEP_RATE_MULTIPLE * alpha(model))) / 2.0 ** refinement


def _insert_breakpoints(uniform: np.ndarray, breaks: np.ndarray, snap: float) -> np.ndarray:
    """Add breakpoints to a sorted node set; a node within `snap` of a breakpoint moves onto it."""
    end = uniform[-1]
    breaks = np.unique(breaks[(breaks > uniform[0] + snap) & (breaks < end - snap)])
    if breaks.size > 1:
        breaks = breaks[np.concatenate([[True], np.diff(breaks) > snap])]
    if not breaks.size:
        return uniform
    idx = np.searchsorted(uniform, breaks)
    on_left = breaks - uniform[idx - 1] <= snap
    on_right = ~on_left & (uniform[idx] - breaks <= snap)
    nodes = uniform.copy()
    nodes[idx[on_left] - 1] = breaks[on_left]
    nodes[idx[on_right]] = breaks[on_right]
    return np.union1d(nodes, breaks[~(on_left | on_right)])


def build_grid(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode, horizon: float,
               grid_resolution: int, with_packet: bool = True, refinement: int = 0) -> Grid:
    """Nodes at most `max_step` apart, plus every jump or kink the packet length induces.

    The density jumps at T_tr after each attempt atom and kinks at the next few
    multiples, so those points are nodes. Periodic grids repeat every T_s.
    """
    h = max_step(model, grid_resolution, refinement)
    snap = NODE_SNAP * h
    generations = np.arange(1, BREAKPOINT_GENERATIONS + 1, dtype=float)
    breaks = packet.t_tr * generations if with_packet else np.zeros(0)

    if mode.is_periodic:
        ts = mode.ts
        sub = max(1, math.ceil(ts / h - 1e-9))
        n_periods = max(1, math.ceil(horizon / ts - 1e-9))
        base = _insert_breakpoints(np.linspace(0.0, ts, sub + 1), np.mod(breaks, ts), snap)
        period_cells = base.size - 1
        n_cells = n_periods * period_cells
        if n_cells > MAX_CELLS:
            raise ConfigError(f"grid needs {n_cells} cells (step {h:.3g}); shorten the horizon "
                              f"{horizon:.6g} or lower grid_resolution")
        starts = ts * np.arange(n_periods, dtype=float)
        nodes = np.append((starts[:, None] + base[None, :-1]).ravel(), n_periods * ts)
        return Grid(nodes=nodes, period_cells=period_cells, snap=snap)

    n_uniform = max(1, math.ceil(horizon / h - 1e-9))
    if n_uniform + breaks.size > MAX_CELLS:
        raise ConfigError(f"grid needs {n_uniform} cells (step {h:.3g}); shorten the horizon "
                          f"{horizon:.6g} or lower grid_resolution")
    nodes = _insert_breakpoints(h * np.arange(n_uniform + 1, dtype=float), breaks, snap)
    return Grid(nodes=nodes, period_cells=0, snap=snap)


def attempt_atoms(model: PrimaryTrafficModel, mode: SensingMode, case: Case,
                  n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Initial attempt-start atoms as (sensing-lattice index, probability), index <= n_max."""
    if mode.kind is ModeKind.CONTINUOUS:
        if case is Case.PU_OFF:
            return np.zeros(1, dtype=np.int64), np.ones(1)
        return np.zeros(0, dtype=np.int64), np.zeros(0)

    pe = mode.pe
    if case is Case.PU_OFF:
        idx = np.arange(0, n_max + 1, dtype=np.int64)
        mass = (1.0 - pe) * pe ** idx.astype(float) if pe > 0.0 else (idx == 0).astype(float)
    else:
        beta = busy_persistence_beta(model, mode.ts)
        idx = np.arange(1, n_max + 1, dtype=np.int64)
        release = (1.0 - beta) * beta ** (idx - 1).astype(float)
        # Missed detections convolve the release law with a geometric delay.
        mass = lfilter([1.0 - pe], [1.0, -pe], release) if pe > 0.0 else release
    keep = mass > 0.0
    return idx[keep], mass[keep]


# ── Distributions ──────────────────────────────────────────────────────────────

def _solve_on_grid(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode, case: Case,
                   grid: Grid, degenerate: bool) -> Tuple[np.ndarray, np.ndarray, Tuple[np.ndarray, ...]]:
    """Atoms (locations, attempt-start masses) and the Hermite data of the attempt-start density."""
    q, _ = attempt_outcomes(model, packet)
    kill = not degenerate
    n = grid.n_cells

    if mode.is_periodic:
        lattice_idx, lattice_mass = attempt_atoms(model, mode, case, n // grid.period_cells)
        at = lattice_idx * grid.period_cells
        locations = lattice_idx.astype(float) * mode.ts
    else:
        lattice_idx, lattice_mass = attempt_atoms(model, mode, case, 0)
        at = lattice_idx
        locations = lattice_idx.astype(float)

    s_jumps = np.zeros(n + 1)
    np.add.at(s_jumps, at, lattice_mass)
    if kill:
        ends = locations + packet.t_tr
        inside = ends <= grid.horizon + grid.snap
        np.add.at(s_jumps, grid.nearest_node(ends[inside]), -q * lattice_mass[inside])

    inv_mu = 0.0 if degenerate else 1.0 / model.mu
    if mode.is_periodic:
        beta = busy_persistence_beta(model, mode.ts)
        cells = renewal_kernels.solve_periodic(
            grid.nodes, inv_mu, q, beta, mode.pe, grid.period_cells, packet.t_tr, kill, s_jumps, grid.snap)
    else:
        cells = renewal_kernels.solve_continuous(
            grid.nodes, 1.0 / model.lam, inv_mu, q, packet.t_tr, kill,
            1.0 if case is Case.PU_ON else 0.0, s_jumps)
    return locations, lattice_mass, cells


def waiting_dist(query: EdtQuery, case: Union[Case, str]) -> MixedDistribution:
    """Law of T_w for the query's sensing mode and the given initial PU state."""
    return _waiting_dist(query, _as_case(case))[0]


def _waiting_dist(query: EdtQuery, case: Case, first_refinement: int = 0) -> Tuple[MixedDistribution, int]:
    """The law and the grid refinement that normalized it."""
    model, packet, mode = query.model, query.packet, query.mode
    q, p = attempt_outcomes(model, packet)
    horizon = query.horizon if query.horizon is not None else default_horizon(model, packet, mode)
    degenerate = p < query.tolerance * DEGENERATE_FRACTION

    bound, rate, prefactor = chernoff_tail(model, packet, mode, case, horizon)
    if degenerate:
        bound = min(1.0, bound + p)
    if bound > query.tolerance:
        suggestion = suggest_horizon(model, packet, mode, case, query.tolerance, horizon)
        raise TruncationFailure(
            f"tail mass bound {bound:.3g} exceeds tolerance {query.tolerance:.3g} at horizon {horizon:.6g}; "
            f"try horizon >= {suggestion:.6g}",
            suggested_horizon=suggestion,
        )

    slack = max(query.tolerance, NORMALIZATION_FLOOR)
    label = f"T_w {mode.label()} PU-{case.value}"
    for refinement in range(first_refinement, max(first_refinement, MAX_REFINEMENTS) + 1):
        grid = build_grid(model, packet, mode, horizon, query.grid_resolution,
                          with_packet=not degenerate, refinement=refinement)
        locations, lattice_mass, (v0, d0, v1, d1) = _solve_on_grid(model, packet, mode, case, grid, degenerate)
        atom_loc, atom_mass = merge_atoms(locations, q * lattice_mass)
        dist = MixedDistribution(
            atom_locations=atom_loc, atom_masses=atom_mass, nodes=grid.nodes,
            # Rounding residue around zero density is clamped.
            v0=np.where(v0 < 0.0, 0.0, q * v0), d0=q * d0,
            v1=np.where(v1 < 0.0, 0.0, q * v1), d1=q * d1,
            tail_mass_bound=bound, tail_rate=rate, tail_prefactor=prefactor, label=label,
        )
        deficit = 1.0 - dist.total_mass()
        logger.debug("[ANALYTIC] %s: %d cells, max step %.4g, mass %.12f, tail <= %.3g",
                     label, grid.n_cells, float(np.max(np.diff(grid.nodes))), 1.0 - deficit, bound)
        if -slack <= deficit <= bound + slack:
            return dist, refinement
        logger.warning(f"[ANALYTIC] {label}: mass off by {deficit:.3g} on {grid.n_cells} cells; refining the grid")

    raise NormalizationFailure(
        f"{label}: total mass misses 1 by {deficit:.3g} (tail bound {bound:.3g}, allowed {slack:.3g}) "
        f"after {refinement} grid refinements; loosen the tolerance or raise grid_resolution"
    )


def _query(model, packet, mode, horizon, tolerance, grid_resolution) -> EdtQuery:
    return EdtQuery(model=model, packet=packet, mode=mode, horizon=horizon,
                    tolerance=tolerance, grid_resolution=grid_resolution)


def waiting_dist_continuous(model: PrimaryTrafficModel, packet: PacketSpec, case: Union[Case, str], *,
                            horizon: Optional[float] = None, tolerance: float = DEFAULT_TOLERANCE,
                            grid_resolution: int = DEFAULT_GRID_RESOLUTION) -> MixedDistribution:
    return waiting_dist(_query(model, packet, SensingMode.continuous(), horizon, tolerance, grid_resolution), case)


def waiting_dist_periodic(model: PrimaryTrafficModel, packet: PacketSpec, ts: float, case: Union[Case, str], *,
                          horizon: Optional[float] = None, tolerance: float = DEFAULT_TOLERANCE,
                          grid_resolution: int = DEFAULT_GRID_RESOLUTION) -> MixedDistribution:
    return waiting_dist(_query(model, packet, SensingMode.periodic(ts), horizon, tolerance, grid_resolution), case)


def waiting_dist_imperfect(model: PrimaryTrafficModel, packet: PacketSpec, ts: float, pe: float,
                           case: Union[Case, str], *, horizon: Optional[float] = None,
                           tolerance: float = DEFAULT_TOLERANCE,
                           grid_resolution: int = DEFAULT_GRID_RESOLUTION) -> MixedDistribution:
    return waiting_dist(_query(model, packet, SensingMode.imperfect(ts, pe), horizon, tolerance, grid_resolution), case)


def edt_distribution(query: EdtQuery) -> MixedDistribution:
    """Stationary mixture of the two initial-state laws, shifted right by T_tr."""
    off, r_off = _waiting_dist(query, Case.PU_OFF)
    on, r_on = _waiting_dist(query, Case.PU_ON, first_refinement=r_off)
    if r_on > r_off:
        off, _ = _waiting_dist(query, Case.PU_OFF, first_refinement=r_on)
    p_on, p_off = stationary_probabilities(query.model)
    mix = MixedDistribution.mixture([p_on, p_off], [on, off])
    return mix.shifted(query.packet.t_tr, label=f"T_ED {query.mode.label()}")


# ── Queries on a distribution ──────────────────────────────────────────────────

def cdf(dist: MixedDistribution, t):
    """P(X <= t) for a scalar or array t."""
    out = dist.cdf(t)
    return float(out[0]) if np.ndim(t) == 0 else out


def moments(dist: MixedDistribution, order: int) -> float:
    if order not in (1, 2):
        raise OutOfRange(f"moment order must be 1 or 2, got {order}")
    return dist.moment(order)


def moment_interval(dist: MixedDistribution, order: int) -> Tuple[float, float]:
    """Represented moment and an upper bound that adds the Chernoff tail contribution."""
    value = moments(dist, order)
    return value, value + dist.moment_tail_bound(order)
