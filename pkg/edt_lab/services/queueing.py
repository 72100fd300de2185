"""
Queueing
--------
Service-time moments of a secondary packet and the M/G/1 mean delay with two packet
types: type 1 packets queued behind another packet start right after a departure
(PU necessarily off), type 2 packets arrive to an empty queue and may find the PU on.

`service_moments` is the closed form for perfect periodic sensing. The same
conditional-expectation recursion also covers continuous and imperfect periodic
sensing (`service_moments_for_mode`); those results carry `extension=True`.
"""

from __future__ import annotations

import math
from typing import Iterable, List, NamedTuple, Tuple

from edt_lab.config import get_logger
from edt_lab.errors import NonPositiveInput
from edt_lab.models import (
    DelayResult,
    ModeKind,
    PacketSpec,
    PrimaryTrafficModel,
    QueueConfig,
    SensingMode,
    ServiceMoments,
    TypeMoments,
)
from edt_lab.services.primary_model import attempt_outcomes, busy_persistence_beta, failure_odds

logger = get_logger("edt_lab.queueing")


class SlotMoments(NamedTuple):
    wait_mean: float
    wait_second: float
    waste_mean: float
    waste_second: float


# ── Slot moments ───────────────────────────────────────────────────────────────

def waste_moments(model: PrimaryTrafficModel, packet: PacketSpec) -> Tuple[float, float]:
    """Moments of a wasted (interrupted) slot: Exp(μ) conditioned below T_tr."""
    mu, t = model.mu, packet.t_tr
    odds = failure_odds(model, packet)
    if math.isinf(odds):
        return mu, 2.0 * mu * mu
    return mu - t / odds, 2.0 * mu * mu - (t * t + 2.0 * mu * t) / odds


def wait_moments(model: PrimaryTrafficModel, mode: SensingMode) -> Tuple[float, float]:
    """Moments of one waiting slot (from an interruption to the next free-channel detection)."""
    if mode.kind is ModeKind.CONTINUOUS:
        return model.lam, 2.0 * model.lam ** 2
    beta = busy_persistence_beta(model, mode.ts)
    w = mode.ts / (1.0 - beta)
    return w, mode.ts ** 2 * (1.0 + beta) / (1.0 - beta) ** 2


def missed_detection_moments(mode: SensingMode) -> Tuple[float, float]:
    """Moments of the pre-attempt delay M·T_s, M ~ Geometric(1 - p_e) on {0, 1, ...}."""
    pe = mode.pe
    if mode.kind is not ModeKind.IMPERFECT or pe == 0.0:
        return 0.0, 0.0
    ts = mode.ts
    return ts * pe / (1.0 - pe), ts * ts * pe * (1.0 + pe) / (1.0 - pe) ** 2


def slot_moments(model: PrimaryTrafficModel, packet: PacketSpec, ts: float) -> SlotMoments:
    w1, w2 = wait_moments(model, SensingMode.periodic(ts))
    x1, x2 = waste_moments(model, packet)
    return SlotMoments(w1, w2, x1, x2)


# ── Service moments ────────────────────────────────────────────────────────────

def service_moments(model: PrimaryTrafficModel, packet: PacketSpec, ts: float) -> ServiceMoments:
    """Closed forms for perfect periodic sensing."""
    t, mu = packet.t_tr, model.mu
    w, w2 = wait_moments(model, SensingMode.periodic(ts))
    inv_q = math.exp(t / mu)
    odds = failure_odds(model, packet)

    m1_off = odds * (mu + w)
    m1_on = m1_off + w
    m2_off = (inv_q * (-2.0 * t * w - 2.0 * mu * t)
              + odds * inv_q * (2.0 * mu * w + 2.0 * mu * mu)
              + odds * w2
              + odds * odds * (2.0 * w * w + 2.0 * mu * w))
    m2_on = (inv_q * (-2.0 * t * w - 2.0 * mu * t + w2)
             + odds * inv_q * (2.0 * mu * w + 2.0 * mu * mu + 2.0 * w * w + 2.0 * mu * w))
    return ServiceMoments(m1_off=m1_off, m2_off=m2_off, m1_on=m1_on, m2_on=m2_on)


def service_moments_for_mode(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode) -> ServiceMoments:
    """Recursion E[S] = D + q·T + p·E[X + W + S'] for any sensing mode (D = missed-detection delay)."""
    if mode.kind is ModeKind.PERIODIC:
        return service_moments(model, packet, mode.ts)

    t = packet.t_tr
    q, p = attempt_outcomes(model, packet)
    w1, w2 = wait_moments(model, mode)
    x1, x2 = waste_moments(model, packet)
    d1, d2 = missed_detection_moments(mode)
    odds = failure_odds(model, packet)

    if q == 0.0:
        return ServiceMoments(math.inf, math.inf, math.inf, math.inf, extension=True)

    m1_off = d1 / q + odds * (model.mu + w1)
    rhs = d2 + 2.0 * d1 * (m1_off - d1) + q * t * t + p * (x2 + w2 + 2.0 * x1 * w1 + 2.0 * (x1 + w1) * m1_off)
    m2_off = rhs / q
    m1_on = w1 + m1_off
    m2_on = w2 + 2.0 * w1 * m1_off + m2_off
    return ServiceMoments(m1_off=m1_off, m2_off=m2_off, m1_on=m1_on, m2_on=m2_on, extension=True)


# ── Two-type M/G/1 ─────────────────────────────────────────────────────────────

def p_on_type2(model: PrimaryTrafficModel, psi: float) -> float:
    """P(type-2 packet finds PU on) = λψ/(λψ + λμ + μψ)."""
    if not (psi > 0):
        raise NonPositiveInput(f"psi must be positive, got {psi!r}")
    lam, mu = model.lam, model.mu
    if math.isinf(psi):
        return lam / (lam + mu)
    return lam * psi / (lam * psi + lam * mu + mu * psi)


def type_moments(sm: ServiceMoments, p_on2: float) -> TypeMoments:
    return TypeMoments(
        e1_t=sm.m1_off,
        e1_t2=sm.m2_off,
        e2_t=p_on2 * sm.m1_on + (1.0 - p_on2) * sm.m1_off,
        e2_t2=p_on2 * sm.m2_on + (1.0 - p_on2) * sm.m2_off,
        p_on2=p_on2,
    )


def mean_delay(config: QueueConfig) -> DelayResult:
    """Mean sojourn time E[D] and mean queue length E[N_Q]; instability is reported, not raised."""
    sm = service_moments_for_mode(config.model, config.packet, config.mode)
    tm = type_moments(sm, p_on_type2(config.model, config.psi))
    psi = config.psi

    if not (psi > tm.e1_t):
        logger.debug("[QUEUE] psi=%g <= E1[t]=%g, unstable", psi, tm.e1_t)
        return DelayResult(psi=psi, e1_t=tm.e1_t, e2_t=tm.e2_t, et2=math.inf, p_empty=0.0,
                           e_d=math.inf, e_nq=math.inf, stable=False, extension=sm.extension)

    p_empty = (psi - tm.e1_t) / (psi + tm.e2_t - tm.e1_t)
    et2 = p_empty * tm.e2_t2 + (1.0 - p_empty) * tm.e1_t2
    e_d = psi * tm.e2_t / (psi + tm.e2_t - tm.e1_t) + et2 / (2.0 * (psi - tm.e1_t))
    e_nq = et2 / (2.0 * psi * (psi - tm.e1_t))
    return DelayResult(psi=psi, e1_t=tm.e1_t, e2_t=tm.e2_t, et2=et2, p_empty=p_empty,
                       e_d=e_d, e_nq=e_nq, stable=True, extension=sm.extension)


def stability_threshold(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode) -> float:
    """Smallest mean inter-arrival time the queue can sustain (= E1[t])."""
    return service_moments_for_mode(model, packet, mode).m1_off


def delay_curve(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
                psis: Iterable[float]) -> List[DelayResult]:
    return [mean_delay(QueueConfig(model=model, packet=packet, mode=mode, psi=psi)) for psi in psis]
