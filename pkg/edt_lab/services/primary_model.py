"""
Primary Traffic Model
---------------------
Alternating-renewal PU channel: ON periods ~ Exp(mean λ), OFF periods ~ Exp(mean μ),
independent. Everything downstream (densities, transforms, service moments, the
simulator) is parameterised through the handful of scalars computed here.

q = e^{-T_tr/μ} is the probability that an OFF period (memoryless, so also the
residual of one) outlasts a packet; p = 1 - q is computed with expm1 so that short
packets keep full relative precision.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from scipy import integrate

from edt_lab.errors import NonPositiveInput, OutOfRange
from edt_lab.models import PacketSpec, PrimaryTrafficModel


# ── PU state ───────────────────────────────────────────────────────────────────

def stationary_probabilities(model: PrimaryTrafficModel) -> Tuple[float, float]:
    """(P_on, P_off) = (λ/(λ+μ), μ/(λ+μ))."""
    total = model.lam + model.mu
    return model.lam / total, model.mu / total


def alpha(model: PrimaryTrafficModel) -> float:
    """Rate of relaxation to stationarity, 1/λ + 1/μ."""
    return 1.0 / model.lam + 1.0 / model.mu


def busy_persistence_beta(model: PrimaryTrafficModel, ts: float) -> float:
    """P(PU on at t + ts | PU on at t) = λ/(λ+μ) + μ/(λ+μ)·e^{-α·ts}."""
    if not (ts > 0):
        raise NonPositiveInput(f"T_s must be positive, got {ts!r}")
    p_on, p_off = stationary_probabilities(model)
    return p_on + p_off * math.exp(-alpha(model) * ts)


# ── Packet survival ────────────────────────────────────────────────────────────

def attempt_outcomes(model: PrimaryTrafficModel, packet: PacketSpec) -> Tuple[float, float]:
    """(q, p): probability a single attempt completes, and its complement."""
    x = packet.t_tr / model.mu
    return math.exp(-x), -math.expm1(-x)


def success_probability(model: PrimaryTrafficModel, packet: PacketSpec, k: int) -> float:
    """P(success in exactly k attempts) = q·p^{k-1}."""
    if k < 1:
        raise OutOfRange(f"attempt index must be >= 1, got {k}")
    q, p = attempt_outcomes(model, packet)
    if k == 1:
        return q
    if p == 0.0:
        return 0.0
    return math.exp(math.log(q) + (k - 1) * math.log(p))


def failure_odds(model: PrimaryTrafficModel, packet: PacketSpec) -> float:
    """p/q = e^{T_tr/μ} - 1, the mean number of failed attempts."""
    return math.expm1(packet.t_tr / model.mu)


# ── Transmission time ──────────────────────────────────────────────────────────

def ergodic_spectral_efficiency(gamma, density) -> float:
    """∫ log2(1+γ) f_γ(γ) dγ over a tabulated SNR density (linear interpolation between nodes)."""
    g = np.asarray(gamma, dtype=float)
    f = np.asarray(density, dtype=float)
    if g.ndim != 1 or g.shape != f.shape or g.size < 2:
        raise OutOfRange("gamma and density must be 1-D tables of equal length >= 2")
    if np.any(np.diff(g) <= 0):
        raise OutOfRange("gamma grid must be strictly increasing")
    if g[0] < 0 or np.any(f < 0):
        raise OutOfRange("SNR values and density must be non-negative")

    def integrand(x: float) -> float:
        return math.log2(1.0 + x) * float(np.interp(x, g, f))

    # The interpolant has a kink at every node, so integrate node to node.
    total = 0.0
    for a, b in zip(g[:-1], g[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-12, limit=50)
        total += val
    return total


def estimate_transmission_time(packet_bits: float, bandwidth_hz: float, spectral_efficiency: float) -> float:
    """T_tr = L / (B·C) with C in bit/s/Hz."""
    for name, value in (("packet_bits", packet_bits), ("bandwidth", bandwidth_hz),
                        ("spectral_efficiency", spectral_efficiency)):
        if not (value > 0) or not math.isfinite(value):
            raise NonPositiveInput(f"{name} must be positive, got {value!r}")
    return packet_bits / (bandwidth_hz * spectral_efficiency)
