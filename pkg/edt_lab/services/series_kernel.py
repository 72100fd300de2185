"""
Series Kernel
-------------
Terminating hypergeometric series, overflow-safe binomials and the partial-fraction
expansion of 1/[x(x-a)]^n used to invert the waiting-time transforms.

Terms are generated by their ratio recurrence (never by separate factorials). When a
term magnitude passes 1e12 the sum is redone in the log/sign domain with
scipy's logsumexp so that large alternating families do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from edt_lab.errors import OutOfRange, SingularParameter, ZeroPoleOffset

LOG_DOMAIN_THRESHOLD = 1e12


# ── Helpers ────────────────────────────────────────────────────────────────────

def _as_nonpositive_int(name: str, value: float) -> int:
    iv = int(round(value))
    if iv > 0 or abs(value - iv) > 0.0:
        raise SingularParameter(f"{name} must be a non-positive integer for a terminating series, got {value!r}")
    return iv


def _sum_from_ratios(ratios: Sequence[float]) -> float:
    """Σ_k t_k with t_0 = 1 and t_{k+1} = t_k·ratios[k]."""
    terms = [1.0]
    t = 1.0
    big = False
    for r in ratios:
        t *= r
        if t == 0.0:
            break
        if not math.isfinite(t) or abs(t) > LOG_DOMAIN_THRESHOLD:
            big = True
            break
        terms.append(t)
    if not big:
        return math.fsum(terms)

    log_abs = [0.0]
    signs = [1.0]
    la, sg = 0.0, 1.0
    for r in ratios:
        if r == 0.0:
            break
        la += math.log(abs(r))
        sg *= math.copysign(1.0, r)
        log_abs.append(la)
        signs.append(sg)
    value, sign = logsumexp(np.asarray(log_abs), b=np.asarray(signs), return_sign=True)
    return float(sign * math.exp(value)) if math.isfinite(value) else 0.0


# ── Hypergeometric ─────────────────────────────────────────────────────────────

def hyp1f1_terminating(a: float, b: float, z: float) -> float:
    """₁F₁(a; b; z) for a non-positive integer a (|a|+1 terms)."""
    m = -_as_nonpositive_int("a", a)
    ratios: List[float] = []
    for k in range(m):
        denom = (b + k) * (k + 1)
        if b + k == 0:
            raise SingularParameter(f"(b)_k vanishes at k={k + 1} before the series terminates (b={b!r})")
        ratios.append((a + k) * z / denom)
    return _sum_from_ratios(ratios)


def hyp2f2_terminating(a1: float, a2: float, b1: float, b2: float, z: float) -> float:
    """₂F₂(a1, a2; b1, b2; z) for a non-positive integer a2."""
    m = -_as_nonpositive_int("a2", a2)
    ratios: List[float] = []
    for k in range(m):
        if b1 + k == 0 or b2 + k == 0:
            raise SingularParameter(f"(b1)_k(b2)_k vanishes at k={k + 1} before the series terminates")
        ratios.append((a1 + k) * (a2 + k) * z / ((b1 + k) * (b2 + k) * (k + 1)))
    return _sum_from_ratios(ratios)


# ── Binomials ──────────────────────────────────────────────────────────────────

def log_binomial(n: int, k: int) -> float:
    """ln C(n, k) via log-gamma."""
    if n < 0 or k < 0 or k > n:
        raise OutOfRange(f"log_binomial needs 0 <= k <= n, got n={n}, k={k}")
    if k == 0 or k == n:
        return 0.0
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


# ── Partial fractions ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PartialFractionExpansion:
    """1/[x(x-a)]^n = Σ_j coeffs_at_zero[j]/x^{j+1} + coeffs_at_a[j]/(x-a)^{j+1}."""

    order: int
    pole_offset: float
    coeffs_at_zero: Tuple[float, ...]
    coeffs_at_a: Tuple[float, ...]

    def evaluate(self, x: float) -> float:
        if self.order == 0:
            return 1.0
        if x == 0.0 or x == self.pole_offset:
            raise SingularParameter("expansion evaluated at a pole")
        y = x - self.pole_offset
        return math.fsum(
            [c / x ** (j + 1) for j, c in enumerate(self.coeffs_at_zero)]
            + [c / y ** (j + 1) for j, c in enumerate(self.coeffs_at_a)]
        )


def partial_fraction_expand(n: int, a: float) -> PartialFractionExpansion:
    """Coefficients (-1)^n·C(2n-j-2, n-1)/a^{2n-j-1} at zero, (-1)^{j+1} times that at a."""
    if n < 0:
        raise OutOfRange(f"order must be non-negative, got {n}")
    if a == 0:
        raise ZeroPoleOffset("pole offset a must be non-zero")
    at_zero: List[float] = []
    at_a: List[float] = []
    sign_n = -1.0 if n % 2 else 1.0
    for j in range(n):
        c = sign_n * math.comb(2 * n - j - 2, n - 1) / a ** (2 * n - j - 1)
        at_zero.append(c)
        at_a.append(c if j % 2 else -c)
    return PartialFractionExpansion(order=n, pole_offset=float(a),
                                    coeffs_at_zero=tuple(at_zero), coeffs_at_a=tuple(at_a))


def expand_power_at_zero(k: int, a: float, x: float) -> float:
    """1/[x^k(x-a)] as -Σ_{j≤k} 1/(a^{k-j+1}x^j) + 1/(a^k(x-a))."""
    if k < 1:
        raise OutOfRange(f"power must be >= 1, got {k}")
    if a == 0:
        raise ZeroPoleOffset("pole offset a must be non-zero")
    if x == 0.0 or x == a:
        raise SingularParameter("expansion evaluated at a pole")
    terms = [-1.0 / (a ** (k - j + 1) * x ** j) for j in range(1, k + 1)]
    terms.append(1.0 / (a ** k * (x - a)))
    return math.fsum(terms)


def expand_power_at_a(k: int, a: float, x: float) -> float:
    """1/[x(x-a)^k] as Σ_{j≤k} (-1)^{k-j}/(a^{k-j+1}(x-a)^j) + (-1)^k/(a^k x)."""
    if k < 1:
        raise OutOfRange(f"power must be >= 1, got {k}")
    if a == 0:
        raise ZeroPoleOffset("pole offset a must be non-zero")
    if x == 0.0 or x == a:
        raise SingularParameter("expansion evaluated at a pole")
    y = x - a
    terms = [(-1) ** (k - j) / (a ** (k - j + 1) * y ** j) for j in range(1, k + 1)]
    terms.append((-1) ** k / (a ** k * x))
    return math.fsum(terms)
