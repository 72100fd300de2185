"""Domain types shared by services and commands.

Inputs are frozen pydantic models; their validators raise the toolkit's own errors
(NonPositiveInput, OutOfRange, ConfigError) so callers see one error vocabulary.
Results are plain frozen dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from edt_lab.errors import ConfigError, NonPositiveInput, OutOfRange

DEFAULT_TOLERANCE = 1e-6
DEFAULT_GRID_RESOLUTION = 40
MIN_GRID_RESOLUTION = 10
MAX_TOLERANCE = 1e-3


def _require_positive(name: str, value: float) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise NonPositiveInput(f"{name} must be a positive finite number, got {value!r}")


class Case(str, Enum):
    PU_ON = "on"
    PU_OFF = "off"


class Strategy(str, Enum):
    NWP = "nwp"   # non-work-preserving: restart the whole packet after interruption
    WP = "wp"     # work-preserving: resume where the interruption happened


class ModeKind(str, Enum):
    CONTINUOUS = "continuous"
    PERIODIC = "periodic"
    IMPERFECT = "imperfect"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class PrimaryTrafficModel(_Frozen):
    """Alternating-renewal PU channel: mean ON period `lam`, mean OFF period `mu`."""

    lam: float
    mu: float

    @model_validator(mode="after")
    def _check(self):
        _require_positive("lambda", self.lam)
        _require_positive("mu", self.mu)
        return self


class PacketSpec(_Frozen):
    t_tr: float

    @model_validator(mode="after")
    def _check(self):
        _require_positive("T_tr", self.t_tr)
        return self


class SensingMode(_Frozen):
    """Continuous, perfect periodic (interval ts) or imperfect periodic (ts, pe)."""

    kind: ModeKind
    ts: Optional[float] = None
    pe: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if self.kind is ModeKind.CONTINUOUS:
            if self.ts is not None or self.pe != 0.0:
                raise ConfigError("continuous sensing takes neither ts nor pe")
            return self
        if self.ts is None:
            raise ConfigError(f"{self.kind.value} sensing requires ts")
        _require_positive("T_s", self.ts)
        if self.kind is ModeKind.PERIODIC and self.pe != 0.0:
            raise ConfigError("perfect periodic sensing has pe = 0; use the imperfect mode")
        if not (0.0 <= self.pe < 1.0):
            raise OutOfRange(f"p_e must lie in [0, 1), got {self.pe!r}")
        return self

    @classmethod
    def continuous(cls) -> "SensingMode":
        return cls(kind=ModeKind.CONTINUOUS)

    @classmethod
    def periodic(cls, ts: float) -> "SensingMode":
        return cls(kind=ModeKind.PERIODIC, ts=ts)

    @classmethod
    def imperfect(cls, ts: float, pe: float) -> "SensingMode":
        return cls(kind=ModeKind.IMPERFECT, ts=ts, pe=pe)

    @property
    def is_periodic(self) -> bool:
        return self.kind is not ModeKind.CONTINUOUS

    def label(self) -> str:
        if self.kind is ModeKind.CONTINUOUS:
            return "continuous"
        if self.kind is ModeKind.PERIODIC:
            return f"periodic(ts={self.ts:g})"
        return f"imperfect(ts={self.ts:g}, pe={self.pe:g})"


class EdtQuery(_Frozen):
    model: PrimaryTrafficModel
    packet: PacketSpec
    mode: SensingMode
    horizon: Optional[float] = None
    tolerance: float = DEFAULT_TOLERANCE
    grid_resolution: int = DEFAULT_GRID_RESOLUTION

    @model_validator(mode="after")
    def _check(self):
        if not (0.0 < self.tolerance <= MAX_TOLERANCE):
            raise OutOfRange(f"tolerance must lie in (0, {MAX_TOLERANCE:g}], got {self.tolerance!r}")
        if self.grid_resolution < MIN_GRID_RESOLUTION:
            raise OutOfRange(f"grid_resolution must be >= {MIN_GRID_RESOLUTION}, got {self.grid_resolution}")
        if self.horizon is not None:
            _require_positive("horizon", self.horizon)
            if self.horizon <= self.packet.t_tr:
                raise OutOfRange("horizon must exceed T_tr")
        return self


class QueueConfig(_Frozen):
    model: PrimaryTrafficModel
    packet: PacketSpec
    mode: SensingMode
    psi: float  # mean packet inter-arrival time

    @model_validator(mode="after")
    def _check(self):
        _require_positive("psi", self.psi)
        return self


class SimConfig(_Frozen):
    """Per-packet EDT simulation. `initial_state=None` draws the PU state from stationarity."""

    model: PrimaryTrafficModel
    packet: PacketSpec
    mode: SensingMode
    strategy: Strategy = Strategy.NWP
    samples: int = 100_000
    seed: int = 0
    initial_state: Optional[Case] = None
    block_size: int = 16_384

    @model_validator(mode="after")
    def _check(self):
        if self.samples < 1:
            raise NonPositiveInput("samples must be >= 1")
        if self.seed < 0:
            raise OutOfRange("seed must be non-negative")
        if self.block_size < 1:
            raise NonPositiveInput("block_size must be >= 1")
        return self


class QueueSimConfig(_Frozen):
    queue: QueueConfig
    strategy: Strategy = Strategy.NWP
    horizon: float = 1e6
    warmup_fraction: float = 0.1
    replications: int = 1
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        _require_positive("horizon", self.horizon)
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise OutOfRange("warmup_fraction must lie in [0, 1)")
        if self.replications < 1:
            raise NonPositiveInput("replications must be >= 1")
        if self.seed < 0:
            raise OutOfRange("seed must be non-negative")
        return self


# ── Results ─────────────────────────────────────────────


@dataclass(frozen=True)
class ServiceMoments:
    """First/second moments of the service time ST = T_w + T_tr, conditioned on PU state."""

    m1_off: float
    m2_off: float
    m1_on: float
    m2_on: float
    extension: bool = False  # True outside perfect periodic sensing


@dataclass(frozen=True)
class TypeMoments:
    """Service moments of type-1 (queued) and type-2 (arrived to empty queue) packets."""

    e1_t: float
    e1_t2: float
    e2_t: float
    e2_t2: float
    p_on2: float


@dataclass(frozen=True)
class DelayResult:
    psi: float
    e1_t: float
    e2_t: float
    et2: float
    p_empty: float
    e_d: float
    e_nq: float
    stable: bool
    extension: bool = False

    def as_row(self) -> Dict[str, float]:
        return {
            "psi": self.psi,
            "E1_t": self.e1_t,
            "E2_t": self.e2_t,
            "Et2": self.et2,
            "E_D": self.e_d,
            "E_NQ": self.e_nq,
            "stable": int(self.stable),
        }


@dataclass(frozen=True, eq=False)
class SimResult:
    """Samples of the simulated quantity plus the seed that reproduces them."""

    samples: np.ndarray
    seed: int
    slots: Optional[np.ndarray] = None
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def second_moment(self) -> float:
        return float(np.mean(np.square(self.samples)))

    @property
    def standard_error(self) -> float:
        if "standard_error" in self.extras:
            return float(self.extras["standard_error"])
        n = self.samples.size
        if n < 2:
            return math.inf
        return float(np.std(self.samples, ddof=1) / math.sqrt(n))

    def empirical_cdf(self):
        """Sorted sample values and the right-continuous empirical CDF at each."""
        xs = np.sort(self.samples)
        return xs, np.arange(1, xs.size + 1, dtype=float) / xs.size


class SweepConfig(_Frozen):
    """Delay-versus-arrival sweep. Give `psi_values` directly or `load_factors` (multiples of E1[t])."""

    model: PrimaryTrafficModel
    packet: PacketSpec
    ts: Optional[float] = None
    psi_values: Tuple[float, ...] = ()
    load_factors: Tuple[float, ...] = ()
    pe_values: Tuple[float, ...] = (0.0,)
    strategies: Tuple[Strategy, ...] = (Strategy.NWP,)
    horizon: float = 1e6
    warmup_fraction: float = 0.1
    replications: int = 1
    seed: int = 0
    simulate: bool = True
    simulate_unstable: bool = False

    @model_validator(mode="after")
    def _check(self):
        if not self.psi_values and not self.load_factors:
            raise ConfigError("a sweep needs psi_values or load_factors")
        for psi in self.psi_values:
            _require_positive("psi", psi)
        for load in self.load_factors:
            _require_positive("load factor", load)
        if not self.strategies:
            raise ConfigError("a sweep needs at least one strategy")
        if self.ts is None and any(pe != 0.0 for pe in self.pe_values):
            raise ConfigError("pe values other than 0 need a sensing interval ts")
        if self.ts is not None:
            _require_positive("T_s", self.ts)
        for pe in self.pe_values:
            if not (0.0 <= pe < 1.0):
                raise OutOfRange(f"p_e must lie in [0, 1), got {pe!r}")
        return self

    def mode_for(self, pe: float) -> SensingMode:
        if self.ts is None:
            return SensingMode.continuous()
        if pe == 0.0:
            return SensingMode.periodic(self.ts)
        return SensingMode.imperfect(self.ts, pe)


class Command(str, Enum):
    ANALYTIC = "analytic"
    SIMULATE = "simulate"
    QUEUE = "queue"
    VALIDATE = "validate"
    SWEEP = "sweep"


class ExperimentConfig(_Frozen):
    """One CLI run: subcommand plus every resolved flag. Dumped next to each output for re-runs."""

    command: Command
    lam: Optional[float] = None
    mu: Optional[float] = None
    ttr: Optional[float] = None
    ts: Optional[float] = None
    pe: float = 0.0
    mode: Optional[ModeKind] = None
    strategy: Strategy = Strategy.NWP
    case: Optional[Case] = None
    psi: Optional[float] = None
    samples: Optional[int] = None
    horizon: Optional[float] = None
    seed: int = 0
    tolerance: float = DEFAULT_TOLERANCE
    grid_res: int = DEFAULT_GRID_RESOLUTION
    out: Optional[str] = None
    psi_values: Tuple[float, ...] = ()
    load_factors: Tuple[float, ...] = ()
    pe_values: Tuple[float, ...] = ()
    strategies: Tuple[Strategy, ...] = ()
    replications: Optional[int] = None
    warmup: float = 0.1
    sections: Tuple[str, ...] = ()
    seeds: Tuple[int, ...] = ()
    simulate: bool = True

    @model_validator(mode="after")
    def _check(self):
        if self.command is not Command.VALIDATE:
            missing = [n for n in ("lam", "mu", "ttr") if getattr(self, n) is None]
            if missing:
                raise ConfigError(f"{self.command.value} needs --{', --'.join(m if m != 'lam' else 'lambda' for m in missing)}")
        if self.command is Command.QUEUE and self.psi is None:
            raise ConfigError("queue needs --psi")
        if self.command is Command.SWEEP and not (self.psi_values or self.load_factors):
            raise ConfigError("sweep needs --psi-values or --load-factors")
        if self.out is not None and not self.out.strip():
            raise ConfigError("--out must not be empty")
        return self

    def traffic(self) -> PrimaryTrafficModel:
        return PrimaryTrafficModel(lam=self.lam, mu=self.mu)

    def packet(self) -> PacketSpec:
        return PacketSpec(t_tr=self.ttr)

    def sensing(self) -> SensingMode:
        """Explicit --mode wins; otherwise ts/pe decide (no ts: continuous, pe > 0: imperfect)."""
        kind = self.mode
        if kind is None:
            kind = ModeKind.CONTINUOUS if self.ts is None else (ModeKind.IMPERFECT if self.pe > 0 else ModeKind.PERIODIC)
        if kind is ModeKind.CONTINUOUS:
            return SensingMode.continuous()
        if self.ts is None:
            raise ConfigError(f"--mode {kind.value} needs --ts")
        if kind is ModeKind.PERIODIC:
            return SensingMode.periodic(self.ts)
        return SensingMode.imperfect(self.ts, self.pe)
