"""
Renewal Kernels
---------------
Compiled stepping solvers for the attempt-start density of the secondary user.

An attempt that starts at time s survives its whole packet with probability q and is
otherwise interrupted at rate 1/μ. S(t) is the mass of attempts in progress, so the
interruption density is S/μ. What happens after an interruption depends on sensing:

  continuous : the SU waits through the PU ON period, modelled jointly with the PU
               state as a linear delay system (P_on, S) stepped with its exact
               2×2 propagator.
  periodic   : the SU re-senses every T_s; release after n intervals with
               probability (1-β)β^{n-1}, then a geometric number of missed
               detections, each costing one more interval.

The grid is non-uniform. Its nodes contain every point where the density jumps or
kinks, and in periodic modes it repeats with period T_s so that the sensing shift
maps cells onto cells. All cells carry cubic Hermite data (left value, left slope,
right value, right slope). The T_tr-delayed term is read back from that data at
arbitrary offsets, piece by piece across the source cells, so T_tr need not sit on
the sensing lattice.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS

SELF_PASSES = 30
SELF_RTOL = 1e-15


@njit(cache=True)
def _hermite(h, f0, fd0, f1, fd1, x):
    x2 = x * x
    x3 = x2 * x
    return ((2 * x3 - 3 * x2 + 1) * f0 + h * (x3 - 2 * x2 + x) * fd0
            + (-2 * x3 + 3 * x2) * f1 + h * (x3 - x2) * fd1)


@njit(cache=True)
def _value_at(nodes, f0, fd0, f1, fd1, tau, from_left, snap):
    """One-sided value of the Hermite interpolant at tau; zero outside the grid."""
    n = nodes.size - 1
    j = np.searchsorted(nodes, tau)
    if j <= n and abs(nodes[j] - tau) <= snap:
        tau = nodes[j]
    elif j > 0 and abs(tau - nodes[j - 1]) <= snap:
        tau = nodes[j - 1]
    if from_left:
        if tau <= nodes[0]:
            return 0.0
        c = np.searchsorted(nodes, tau) - 1
    else:
        if tau < nodes[0]:
            return 0.0
        c = np.searchsorted(nodes, tau, side="right") - 1
    if c >= n:
        c = n - 1
    h = nodes[c + 1] - nodes[c]
    x = min(max((tau - nodes[c]) / h, 0.0), 1.0)
    return _hermite(h, f0[c], fd0[c], f1[c], fd1[c], x)


@njit(cache=True)
def _delayed_integrals(nodes, f0, fd0, f1, fd1, lo, hi, delay, rate, end):
    """(∫ f(τ-delay) dτ, ∫ e^{-rate(end-τ)} f(τ-delay) dτ) over [lo, hi], f zero before nodes[0]."""
    a = lo - delay
    b = hi - delay
    plain = 0.0
    decayed = 0.0
    if b <= nodes[0]:
        return plain, decayed
    if a < nodes[0]:
        a = nodes[0]
    n = nodes.size - 1
    j = np.searchsorted(nodes, a, side="right") - 1
    while a < b and j < n:
        right = min(b, nodes[j + 1])
        width = right - a
        if width > 0.0:
            h = nodes[j + 1] - nodes[j]
            for k in range(_GL_X.size):
                src = a + width * _GL_X[k]
                x = min(max((src - nodes[j]) / h, 0.0), 1.0)
                val = _hermite(h, f0[j], fd0[j], f1[j], fd1[j], x) * width * _GL_W[k]
                plain += val
                decayed += val * math.exp(-rate * (end - src - delay))
        a = right
        j += 1
    return plain, decayed


@njit(cache=True, nogil=True)
def solve_continuous(nodes, inv_lam, inv_mu, q, t_tr, kill, p_init, s_jumps):
    """Step (P_on, S) across the grid; returns Hermite data of the attempt density P_on/λ."""
    a = inv_lam
    b = inv_mu
    al = a + b
    n_cells = nodes.size - 1

    P0 = np.zeros(n_cells)
    Pd0 = np.zeros(n_cells)
    P1 = np.zeros(n_cells)
    Pd1 = np.zeros(n_cells)

    P = p_init
    S = 0.0
    for c in range(n_cells):
        S += s_jumps[c]
        left = nodes[c]
        right = nodes[c + 1]
        h = right - left
        ea = math.exp(-al * h)
        P0[c] = P
        Pd0[c] = -a * P + b * S
        P1[c] = P + h * Pd0[c]
        Pd1[c] = Pd0[c]

        delayed = kill and right - t_tr > 0.0
        # A delay shorter than the cell reads this cell's own data: iterate to a fixed point.
        passes = SELF_PASSES if delayed and right - t_tr > left else 1
        s_end = S
        for _ in range(passes):
            i0 = 0.0
            ia = 0.0
            if delayed:
                g0, ga = _delayed_integrals(nodes, P0, Pd0, P1, Pd1, left, right, t_tr, al, right)
                i0 = -q * a * g0
                ia = -q * a * ga
            tot = P + S
            p_end = (b * tot + ea * (a * P - b * S) + b * (i0 - ia)) / al
            s_end = (a * tot + ea * (b * S - a * P) + a * i0 + b * ia) / al
            slope = -a * p_end + b * s_end
            moved = abs(p_end - P1[c]) + h * abs(slope - Pd1[c])
            P1[c] = p_end
            Pd1[c] = slope
            if moved <= SELF_RTOL * (abs(p_end) + abs(s_end)):
                break
        P = P1[c]
        S = s_end

    return P0 * a, Pd0 * a, P1 * a, Pd1 * a


@njit(cache=True, nogil=True)
def solve_periodic(nodes, inv_mu, q, beta, pe, period_cells, t_tr, kill, s_jumps, snap):
    """Step S across a T_s-periodic grid; returns Hermite data of the continuous attempt density."""
    m = inv_mu
    n_cells = nodes.size - 1
    r0 = np.zeros(n_cells)
    rd0 = np.zeros(n_cells)
    r1 = np.zeros(n_cells)
    rd1 = np.zeros(n_cells)
    b0 = np.zeros(n_cells)
    bd0 = np.zeros(n_cells)
    b1 = np.zeros(n_cells)
    bd1 = np.zeros(n_cells)
    a0 = np.zeros(n_cells)
    ad0 = np.zeros(n_cells)
    a1 = np.zeros(n_cells)
    ad1 = np.zeros(n_cells)

    S = 0.0
    for c in range(n_cells):
        S += s_jumps[c]
        left = nodes[c]
        right = nodes[c + 1]
        h = right - left

        cp = c - period_cells
        if cp >= 0:
            b0[c] = (1.0 - beta) * r0[cp] + beta * b0[cp]
            bd0[c] = (1.0 - beta) * rd0[cp] + beta * bd0[cp]
            b1[c] = (1.0 - beta) * r1[cp] + beta * b1[cp]
            bd1[c] = (1.0 - beta) * rd1[cp] + beta * bd1[cp]

        a0[c] = (1.0 - pe) * b0[c]
        ad0[c] = (1.0 - pe) * bd0[c]
        a1[c] = (1.0 - pe) * b1[c]
        ad1[c] = (1.0 - pe) * bd1[c]
        if pe > 0.0 and cp >= 0:
            a0[c] += pe * a0[cp]
            ad0[c] += pe * ad0[cp]
            a1[c] += pe * a1[cp]
            ad1[c] += pe * ad1[cp]

        # Forcing f(t) = a(t) - q·a(t - T_tr); a on this cell is already final.
        _, gain = _delayed_integrals(nodes, a0, ad0, a1, ad1, left, right, 0.0, m, right)
        f_left = a0[c]
        f_right = a1[c]
        if kill and right - t_tr > 0.0:
            _, loss = _delayed_integrals(nodes, a0, ad0, a1, ad1, left, right, t_tr, m, right)
            gain -= q * loss
            f_left -= q * _value_at(nodes, a0, ad0, a1, ad1, left - t_tr, False, snap)
            f_right -= q * _value_at(nodes, a0, ad0, a1, ad1, right - t_tr, True, snap)

        s_end = math.exp(-m * h) * S + gain
        r0[c] = S * m
        rd0[c] = (f_left - S * m) * m
        r1[c] = s_end * m
        rd1[c] = (f_right - s_end * m) * m
        S = s_end

    return a0, ad0, a1, ad1
