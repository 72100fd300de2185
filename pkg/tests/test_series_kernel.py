"""
Series kernel tests.

Exact oracles: Fraction sums for the terminating series, math.comb for binomials,
direct evaluation of 1/[x(x-a)]^n for the partial fractions.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from edt_lab.errors import OutOfRange, SingularParameter, ZeroPoleOffset
from edt_lab.services.series_kernel import (
    expand_power_at_a,
    expand_power_at_zero,
    hyp1f1_terminating,
    hyp2f2_terminating,
    log_binomial,
    partial_fraction_expand,
)
from edt_lab.services.validation_service import well_conditioned_points


def _pochhammer(x: Fraction, k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out *= x + i
    return out


def _exact_pfq(num, den, z, terms):
    z = Fraction(z)
    total = Fraction(0)
    for k in range(terms + 1):
        t = Fraction(1)
        for a in num:
            t *= _pochhammer(Fraction(a), k)
        for b in den:
            t /= _pochhammer(Fraction(b), k)
        total += t * z ** k / math.factorial(k)
    return total


# ── Hypergeometric ─────────────────────────────────────────────────────────────

def test_hyp1f1_trivial_cases():
    assert hyp1f1_terminating(0, 3.7, 7.3) == 1.0
    assert hyp1f1_terminating(-1, -2, 3.0) == pytest.approx(2.5, rel=1e-15)


def test_hyp1f1_against_exact_sum():
    exact = _exact_pfq([-4], [-8], 1.25, 4)
    assert hyp1f1_terminating(-4, -8, 1.25) == pytest.approx(float(exact), rel=1e-14)


@pytest.mark.parametrize("m, b, z", [(7, -14, 0.9), (12, 2.5, -3.1), (20, -40, 4.0)])
def test_hyp1f1_polynomial_against_exact_sum(m, b, z):
    exact = _exact_pfq([-m], [Fraction(b)], Fraction(z), m)
    assert hyp1f1_terminating(-m, b, z) == pytest.approx(float(exact), rel=1e-12)


def test_hyp2f2_cases():
    assert hyp2f2_terminating(5.0, 0, 2.0, 3.0, 9.0) == 1.0
    for z in (-1.5, 0.3, 2.0):
        assert hyp2f2_terminating(2, -1, 1, 1, z) == pytest.approx(1 - 2 * z, rel=1e-15)
    exact = _exact_pfq([4, -3], [3, 3], Fraction(4, 5), 3)
    assert hyp2f2_terminating(4, -3, 3, 3, 0.8) == pytest.approx(float(exact), rel=1e-14)


def test_series_errors():
    with pytest.raises(SingularParameter):
        hyp1f1_terminating(-3, -1, 1.0)
    with pytest.raises(SingularParameter):
        hyp1f1_terminating(2, 1, 1.0)
    with pytest.raises(SingularParameter):
        hyp2f2_terminating(1, -2.5, 1, 1, 1.0)
    with pytest.raises(SingularParameter):
        hyp2f2_terminating(1, -3, 1, -1, 1.0)


def test_large_series_switches_to_log_domain():
    # Terms exceed 1e12 here; compare with the exact rational sum.
    exact = _exact_pfq([-30], [1], Fraction(-40), 30)
    assert hyp1f1_terminating(-30, 1, -40.0) == pytest.approx(float(exact), rel=1e-9)


@pytest.mark.parametrize("m", range(2, 11))
def test_contiguous_recurrence_in_a(m):
    # (b - a) M(a-1) + (2a - b + z) M(a) - a M(a+1) = 0 at a = -m
    b, z = 2.5, 0.7
    a = -m
    lhs = [(b - a) * hyp1f1_terminating(a - 1, b, z),
           (2 * a - b + z) * hyp1f1_terminating(a, b, z),
           -a * hyp1f1_terminating(a + 1, b, z)]
    assert abs(math.fsum(lhs)) <= 1e-11 * max(abs(t) for t in lhs)


# ── Binomials ──────────────────────────────────────────────────────────────────

def test_log_binomial_small():
    assert log_binomial(17, 0) == 0.0
    assert log_binomial(4, 2) == pytest.approx(math.log(6))


def test_log_binomial_exact_big_integer():
    assert log_binomial(200, 71) == pytest.approx(math.log(math.comb(200, 71)), rel=1e-13)
    for n in range(0, 61, 7):
        for k in range(0, n + 1, 3):
            assert math.exp(log_binomial(n, k)) == pytest.approx(math.comb(n, k), rel=1e-12)


def test_log_binomial_out_of_range():
    with pytest.raises(OutOfRange):
        log_binomial(3, 5)
    with pytest.raises(OutOfRange):
        log_binomial(3, -1)


# ── Partial fractions ──────────────────────────────────────────────────────────

def test_partial_fraction_base_case():
    pf = partial_fraction_expand(1, 2.0)
    assert pf.coeffs_at_zero == pytest.approx((-0.5,))
    assert pf.coeffs_at_a == pytest.approx((0.5,))
    assert pf.evaluate(3.3) == pytest.approx(1 / (3.3 * 1.3), rel=1e-14)


def test_partial_fraction_order_zero():
    pf = partial_fraction_expand(0, 1.5)
    assert pf.coeffs_at_zero == () and pf.coeffs_at_a == ()
    assert pf.evaluate(0.7) == 1.0


def test_partial_fraction_order_five():
    x, a = 0.4, 1.7
    assert partial_fraction_expand(5, a).evaluate(x) == pytest.approx(1 / (x * (x - a)) ** 5, rel=1e-9)


def test_partial_fraction_errors():
    with pytest.raises(ZeroPoleOffset):
        partial_fraction_expand(3, 0.0)
    with pytest.raises(SingularParameter):
        partial_fraction_expand(2, 1.0).evaluate(1.0)


@pytest.mark.parametrize("n", range(1, 11))
def test_partial_fraction_identity_random_points(n):
    rng = np.random.default_rng(n)
    for x, a in well_conditioned_points(rng, 100):
        exact = 1.0 / (x * (x - a)) ** n
        assert partial_fraction_expand(n, a).evaluate(x) == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("k", range(1, 11))
def test_helper_expansions(k):
    """1/[x^k(x-a)] and 1/[x(x-a)^k], the two single-sided expansions behind the general case."""
    rng = np.random.default_rng(100 + k)
    for x, a in well_conditioned_points(rng, 100):
        y = x - a
        assert expand_power_at_zero(k, a, x) == pytest.approx(1.0 / (x ** k * y), rel=1e-9)
        assert expand_power_at_a(k, a, x) == pytest.approx(1.0 / (x * y ** k), rel=1e-9)


def test_helper_expansion_errors():
    with pytest.raises(OutOfRange):
        expand_power_at_zero(0, 1.0, 0.5)
    with pytest.raises(ZeroPoleOffset):
        expand_power_at_a(2, 0.0, 0.5)
    with pytest.raises(SingularParameter):
        expand_power_at_a(2, 1.0, 1.0)
