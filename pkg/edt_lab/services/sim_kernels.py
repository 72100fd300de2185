"""
Simulation Kernels
------------------
Event-driven service of secondary packets on a pre-drawn PU path.

A PU path is the array `ends` of cumulative period end times starting at 0; period
j is ON iff (j even) == first_on. Returning a finish time of -1 means the path (or
the missed-detection table) ran out and the caller must extend it.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def serve_packet(ends, first_on, j, t0, periodic, ts, pe, t_tr, work_preserving, unif, u_pos):
    """Serve one packet available at t0; returns (finish, period index, uniforms used, slots)."""
    n_per = ends.shape[0]
    remaining = t_tr
    slots = 0

    if not periodic:
        t = t0
        while True:
            while j < n_per and ends[j] <= t:
                j += 1
            if j >= n_per:
                return -1.0, j, u_pos, slots
            if (j % 2 == 0) == first_on:
                t = ends[j]
                continue
            slots += 1
            avail = ends[j] - t
            if avail >= remaining:
                return t + remaining, j, u_pos, slots
            if work_preserving:
                remaining -= avail
            t = ends[j]

    base = t0
    k = 0
    while True:
        t = base + k * ts
        while j < n_per and ends[j] <= t:
            j += 1
        if j >= n_per:
            return -1.0, j, u_pos, slots
        if (j % 2 == 0) == first_on:
            k += 1
            continue
        if pe > 0.0:
            if u_pos >= unif.shape[0]:
                return -1.0, j, u_pos, slots
            u = unif[u_pos]
            u_pos += 1
            if u < pe:
                k += 1
                continue
        slots += 1
        avail = ends[j] - t
        if avail >= remaining:
            return t + remaining, j, u_pos, slots
        if work_preserving:
            remaining -= avail
        # The PU is back on at ends[j]; sensing resumes one interval later.
        base = ends[j]
        k = 1


@njit(cache=True, nogil=True)
def edt_block(ends, first_on, periodic, ts, pe, t_tr, work_preserving, unif):
    """One independent packet per row, available at time 0."""
    n = ends.shape[0]
    out = np.empty(n)
    slots = np.zeros(n, dtype=np.int64)
    for i in range(n):
        fin, _, _, sl = serve_packet(ends[i], first_on[i], 0, 0.0, periodic, ts, pe, t_tr,
                                     work_preserving, unif[i], 0)
        out[i] = fin
        slots[i] = sl
    return out, slots


@njit(cache=True, nogil=True)
def fifo_queue(arrivals, ends, first_on, periodic, ts, pe, t_tr, work_preserving, unif):
    """FIFO service of Poisson arrivals on one shared PU path."""
    n = arrivals.shape[0]
    n_per = ends.shape[0]
    sojourn = np.empty(n)
    waiting = np.empty(n)
    type2 = np.zeros(n, dtype=np.bool_)
    type2_on = np.zeros(n, dtype=np.bool_)

    j = 0
    u_pos = 0
    prev_departure = 0.0
    done = 0
    for i in range(n):
        arr = arrivals[i]
        start = arr
        if arr >= prev_departure:
            type2[i] = True
            while j < n_per and ends[j] <= arr:
                j += 1
            if j >= n_per:
                break
            type2_on[i] = (j % 2 == 0) == first_on
        else:
            start = prev_departure
        fin, j, u_pos, _ = serve_packet(ends, first_on, j, start, periodic, ts, pe, t_tr,
                                        work_preserving, unif, u_pos)
        if fin < 0.0:
            break
        sojourn[i] = fin - arr
        waiting[i] = start - arr
        prev_departure = fin
        done = i + 1
    return done, sojourn, waiting, type2, type2_on
