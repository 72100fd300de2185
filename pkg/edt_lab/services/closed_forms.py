"""
Closed Forms
------------
Pointwise evaluation of the inverse-transform densities of T_w.

Every sum is finite at a given t: a term indexed by i transmissions and n sensing
intervals only switches on once t passes n·T_s + i·T_tr. The alternating families
cancel heavily as t grows, so these evaluators are meant for the first few packet
durations; `analytic_edt` produces full-horizon distributions.

  continuous_density  : hypergeometric families for continuous sensing
  periodic_density    : ₁F₁/₂F₂ families for perfect periodic sensing
  lattice_density     : Erlang-kernel quadruple sum, periodic and imperfect sensing
"""

from __future__ import annotations

import math
from typing import List, Tuple, Union

from scipy.special import gammaln

from edt_lab.errors import ConfigError
from edt_lab.models import Case, ModeKind, PacketSpec, PrimaryTrafficModel, SensingMode
from edt_lab.services.primary_model import alpha, attempt_outcomes, busy_persistence_beta
from edt_lab.services.series_kernel import hyp1f1_terminating, hyp2f2_terminating, log_binomial

_EPS = 1e-12


def _case(case: Union[Case, str]) -> Case:
    return case if isinstance(case, Case) else Case(str(case).lower())


# ── Continuous sensing ─────────────────────────────────────────────────────────

def _continuous_off(model: PrimaryTrafficModel, packet: PacketSpec, t: float) -> float:
    lam, mu, tr = model.lam, model.mu, packet.t_tr
    a = alpha(model)
    q, _ = attempt_outcomes(model, packet)

    def g(i: int, tau: float) -> float:
        return (hyp1f1_terminating(-i, -2 * i, -a * tau)
                - math.exp(-a * tau) * hyp1f1_terminating(-i, -2 * i, a * tau))

    terms: List[float] = []
    i = 0
    while i * tr <= t + _EPS:
        log_c = (i * math.log(lam * mu) + log_binomial(2 * i, i) - (2 * i + 1) * math.log(lam + mu)
                 - i * tr / mu)
        c = math.exp(log_c)
        terms.append(c * g(i, max(t - i * tr, 0.0)))
        tail = t - (i + 1) * tr
        if tail >= 0.0:
            terms.append(-q * c * g(i, tail))
        i += 1
    return q * math.fsum(terms)


def _continuous_on(model: PrimaryTrafficModel, packet: PacketSpec, t: float) -> float:
    lam, mu, tr = model.lam, model.mu, packet.t_tr
    a = alpha(model)
    q, _ = attempt_outcomes(model, packet)

    terms: List[float] = []
    i = 0
    while i * tr <= t + _EPS:
        tau = max(t - i * tr, 0.0)
        decay = math.exp(-a * tau)
        log_w = i * math.log(lam * mu) - (2 * i + 1) * math.log(lam + mu) - i * tr / mu
        f_minus = hyp1f1_terminating(-i, -2 * i, -a * tau)
        f_plus = hyp1f1_terminating(-i, -2 * i, a * tau)
        terms.append(math.exp(log_w + log_binomial(2 * i, i)) * (f_minus + (mu / lam) * decay * f_plus))
        if i >= 1:
            h_minus = hyp1f1_terminating(1 - i, 1 - 2 * i, -a * tau)
            h_plus = hyp1f1_terminating(1 - i, 1 - 2 * i, a * tau)
            terms.append(-math.exp(log_w + log_binomial(2 * i - 1, i)) * (1.0 + mu / lam)
                         * (h_minus + decay * h_plus))
        i += 1
    return q * math.fsum(terms)


def continuous_density(model: PrimaryTrafficModel, packet: PacketSpec, case: Union[Case, str], t: float) -> float:
    """Continuous part of the T_w density at t (atoms excluded)."""
    if t < 0:
        return 0.0
    if _case(case) is Case.PU_OFF:
        return _continuous_off(model, packet, t)
    return _continuous_on(model, packet, t)


# ── Perfect periodic sensing ───────────────────────────────────────────────────

def periodic_density(model: PrimaryTrafficModel, packet: PacketSpec, ts: float,
                     case: Union[Case, str], t: float) -> float:
    """Continuous part of the T_w density at t, hypergeometric form."""
    if t < 0:
        return 0.0
    mu, tr = model.mu, packet.t_tr
    beta = busy_persistence_beta(model, ts)
    q, _ = attempt_outcomes(model, packet)
    k = (1.0 - beta) / beta
    case = _case(case)
    terms: List[float] = []

    n = 1
    while n * ts < t - _EPS:
        x = t - n * ts
        if case is Case.PU_OFF:
            terms.append(q * (1.0 - beta) * beta ** (n - 1) / mu * math.exp(-x / mu)
                         * hyp1f1_terminating(1 - n, 1, -k * x / mu))
            i_range = range(1, n + 1)
        else:
            if n >= 2:
                terms.append(q * (n - 1) * (1.0 - beta) ** 2 * beta ** (n - 2) / mu * math.exp(-x / mu)
                             * hyp1f1_terminating(2 - n, 2, -k * x / mu))
            i_range = range(1, n)

        for i in i_range:
            y = x - i * tr
            if y <= 0.0:
                break
            if case is Case.PU_OFF:
                log_w = (log_binomial(n - 1, i - 1) + i * math.log1p(-beta) + (n - i) * math.log(beta))
                series = hyp2f2_terminating(i + 1, i - n, i, i, -k * y / mu)
            else:
                log_w = (log_binomial(n - 1, i) + (i + 1) * math.log1p(-beta) + (n - i - 1) * math.log(beta))
                series = hyp1f1_terminating(i + 1 - n, i, -k * y / mu)
            log_w += (-(i + 1) * tr / mu + (i - 1) * math.log(y) - gammaln(i) - i * math.log(mu) - y / mu)
            terms.append((-1) ** i * math.exp(log_w) * series)
        n += 1
    return math.fsum(terms)


# ── Erlang-kernel form (periodic and imperfect) ────────────────────────────────

def lattice_density(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
                    case: Union[Case, str], t: float) -> float:
    """Σ over waits n, missed detections m, wasted slots j and their survivors i of Erlang(j, μ) kernels."""
    if mode.kind is ModeKind.CONTINUOUS:
        raise ConfigError("lattice_density needs a periodic sensing mode")
    if t < 0:
        return 0.0
    mu, tr, ts, pe = model.mu, packet.t_tr, mode.ts, mode.pe
    beta = busy_persistence_beta(model, ts)
    q, _ = attempt_outcomes(model, packet)
    on = _case(case) is Case.PU_ON
    log_mu = math.log(mu)
    terms: List[float] = []

    n_top = int(math.floor(t / ts + _EPS))
    m_top = n_top if pe > 0.0 else 0
    for j in range(1, n_top + 1):
        n_first = j + 1 if on else j
        for n in range(n_first, n_top + 1):
            if on:
                log_wait = log_binomial(n - 1, j) + (j + 1) * math.log1p(-beta) + (n - j - 1) * math.log(beta)
            else:
                log_wait = log_binomial(n - 1, j - 1) + j * math.log1p(-beta) + (n - j) * math.log(beta)
            for m in range(0, m_top + 1):
                base = t - (n + m) * ts
                if base <= 0.0:
                    break
                log_mis = (j + 1) * math.log1p(-pe) if pe > 0.0 else 0.0
                if m:
                    log_mis += log_binomial(m + j, j) + m * math.log(pe)
                for i in range(0, j + 1):
                    x = base - i * tr
                    if x <= 0.0:
                        break
                    log_term = (log_wait + log_mis + log_binomial(j, i) - i * tr / mu
                                + (j - 1) * math.log(x) - x / mu - gammaln(j) - j * log_mu)
                    terms.append((-1) ** i * math.exp(log_term))
    return q * math.fsum(terms)


# ── Atoms ──────────────────────────────────────────────────────────────────────

def closed_form_atoms(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
                      case: Union[Case, str], t_max: float) -> List[Tuple[float, float]]:
    """(location, mass) of every point mass of T_w at or below t_max."""
    q, _ = attempt_outcomes(model, packet)
    case = _case(case)
    if mode.kind is ModeKind.CONTINUOUS:
        return [(0.0, q)] if case is Case.PU_OFF else []

    ts, pe = mode.ts, mode.pe
    beta = busy_persistence_beta(model, ts)
    top = int(math.floor(t_max / ts + _EPS))
    out: List[Tuple[float, float]] = []
    for total in range(0, top + 1):
        if case is Case.PU_OFF:
            mass = q * (1.0 - pe) * pe ** total if pe > 0.0 else (q if total == 0 else 0.0)
        else:
            mass = 0.0
            for n in range(1, total + 1):
                m = total - n
                if pe == 0.0 and m:
                    continue
                mass += q * (1.0 - beta) * beta ** (n - 1) * (1.0 - pe) * (pe ** m if m else 1.0)
        if mass > 0.0:
            out.append((total * ts, mass))
    return out


def density(model: PrimaryTrafficModel, packet: PacketSpec, mode: SensingMode,
            case: Union[Case, str], t: float) -> float:
    if mode.kind is ModeKind.CONTINUOUS:
        return continuous_density(model, packet, case, t)
    if mode.kind is ModeKind.PERIODIC:
        return periodic_density(model, packet, mode.ts, case, t)
    return lattice_density(model, packet, mode, case, t)
