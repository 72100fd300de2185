"""
Mixed Distribution
------------------
A law on [origin, horizon] made of point masses plus a piecewise-cubic density.

The density lives on the cells between consecutive `nodes`, which need not be evenly
spaced. Each cell carries its one-sided end values and slopes (v0, d0, v1, d1), i.e. a
cubic Hermite piece, so jumps and kinks of the true density sit exactly on nodes.
Probability mass beyond the horizon is not represented; `tail_mass_bound` bounds it
from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc

from edt_lab.errors import OutOfRange

ATOM_MERGE_TOLERANCE = 1e-12
ATOM_CDF_TOLERANCE = 1e-9
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def _hermite_basis(x: np.ndarray):
    x2 = x * x
    x3 = x2 * x
    return 2 * x3 - 3 * x2 + 1, x3 - 2 * x2 + x, -2 * x3 + 3 * x2, x3 - x2


def _hermite_antiderivative(x: np.ndarray):
    x2 = x * x
    x3 = x2 * x
    x4 = x3 * x
    return (0.5 * x4 - x3 + x,
            0.25 * x4 - 2.0 * x3 / 3.0 + 0.5 * x2,
            -0.5 * x4 + x3,
            0.25 * x4 - x3 / 3.0)


def merge_atoms(locations: Sequence[float], masses: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Sort atoms and merge those closer than ATOM_MERGE_TOLERANCE (relative to scale)."""
    loc = np.asarray(locations, dtype=float)
    mass = np.asarray(masses, dtype=float)
    keep = mass != 0.0
    loc, mass = loc[keep], mass[keep]
    if loc.size == 0:
        return loc, mass
    order = np.argsort(loc, kind="stable")
    loc, mass = loc[order], mass[order]
    out_loc: List[float] = [float(loc[0])]
    out_mass: List[float] = [float(mass[0])]
    for x, m in zip(loc[1:], mass[1:]):
        if x - out_loc[-1] <= ATOM_MERGE_TOLERANCE * max(1.0, abs(x)):
            out_mass[-1] += float(m)
        else:
            out_loc.append(float(x))
            out_mass.append(float(m))
    return np.asarray(out_loc), np.asarray(out_mass)


@dataclass(frozen=True, eq=False)
class MixedDistribution:
    atom_locations: np.ndarray
    atom_masses: np.ndarray
    nodes: np.ndarray             # n_cells + 1 increasing breakpoints
    v0: np.ndarray
    d0: np.ndarray
    v1: np.ndarray
    d1: np.ndarray
    tail_mass_bound: float
    tail_rate: float = 0.0        # Chernoff exponent s behind the tail bound (0 = unknown)
    tail_prefactor: float = 0.0   # M(s) at that exponent
    label: str = ""

    # ── Shape ──────────────────────────────────────────────────────────────

    @property
    def n_cells(self) -> int:
        return int(self.v0.size)

    @property
    def origin(self) -> float:
        return float(self.nodes[0]) if self.nodes.size else 0.0

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1]) if self.nodes.size else 0.0

    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    # ── Mass ───────────────────────────────────────────────────────────────

    def cell_masses(self) -> np.ndarray:
        h = self.widths()
        return h * 0.5 * (self.v0 + self.v1) + h * h * (self.d0 - self.d1) / 12.0

    def continuous_mass(self) -> float:
        return math.fsum(self.cell_masses())

    def atom_mass(self) -> float:
        return math.fsum(self.atom_masses)

    def total_mass(self) -> float:
        return self.continuous_mass() + self.atom_mass()

    # ── Pointwise ──────────────────────────────────────────────────────────

    def _locate(self, t: np.ndarray):
        cell = np.clip(np.searchsorted(self.nodes, t, side="right") - 1, 0, max(self.n_cells - 1, 0))
        frac = np.clip((t - self.nodes[cell]) / self.widths()[cell], 0.0, 1.0)
        inside = (t >= self.origin) & (t < self.horizon)
        return cell, frac, inside

    def pdf(self, t) -> np.ndarray:
        """Continuous-part density (right-continuous at nodes); atoms excluded."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.n_cells == 0:
            return np.zeros_like(t)
        cell, x, inside = self._locate(t)
        b00, b10, b01, b11 = _hermite_basis(x)
        h = self.widths()[cell]
        val = (self.v0[cell] * b00 + h * self.d0[cell] * b10
               + self.v1[cell] * b01 + h * self.d1[cell] * b11)
        return np.where(inside, val, 0.0)

    def _atoms_below(self, t: np.ndarray, inclusive: bool) -> np.ndarray:
        if not self.atom_locations.size:
            return np.zeros_like(t)
        cum_atoms = np.concatenate([[0.0], np.cumsum(self.atom_masses)])
        eps = ATOM_CDF_TOLERANCE * np.maximum(1.0, np.abs(t))
        idx = np.searchsorted(self.atom_locations, t + eps if inclusive else t - eps, side="right")
        return cum_atoms[idx]

    def cdf(self, t) -> np.ndarray:
        """P(X <= t); an atom at t is included (within ATOM_CDF_TOLERANCE)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self._atoms_below(t, inclusive=True) + self._continuous_cdf(t)

    def cdf_left(self, t) -> np.ndarray:
        """P(X < t), the left limit of the CDF."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self._atoms_below(t, inclusive=False) + self._continuous_cdf(t)

    def _continuous_cdf(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        if self.n_cells:
            cum = np.concatenate([[0.0], np.cumsum(self.cell_masses())])
            cell, x, inside = self._locate(t)
            h = self.widths()[cell]
            a00, a10, a01, a11 = _hermite_antiderivative(x)
            partial = h * (self.v0[cell] * a00 + h * self.d0[cell] * a10
                           + self.v1[cell] * a01 + h * self.d1[cell] * a11)
            cont = np.where(inside, cum[cell] + partial, 0.0)
            cont = np.where(t >= self.horizon, cum[-1], cont)
            out += cont
        return out

    def quantile(self, u) -> np.ndarray:
        """Generalized inverse of the CDF, linear within a cell; u beyond the represented mass maps to inf."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        nodes = self.nodes if self.n_cells else np.zeros(0)
        t = np.union1d(nodes, self.atom_locations)
        if t.size == 0:
            return np.full_like(u, math.inf)
        xs = np.repeat(t, 2)
        fs = np.empty_like(xs)
        fs[0::2] = self.cdf_left(t)
        fs[1::2] = self.cdf(t)
        fs = np.maximum.accumulate(fs)
        out = np.interp(u, fs, xs)
        return np.where(u > fs[-1], math.inf, out)

    # ── Integrals ──────────────────────────────────────────────────────────

    def _quadrature(self):
        """Gauss-Legendre nodes/weights on every cell, exact for polynomial × Hermite piece up to degree 15."""
        h = self.widths()[:, None]
        x = self.nodes[:-1, None] + h * _GL_X[None, :]
        b00, b10, b01, b11 = (b[None, :] for b in _hermite_basis(_GL_X))
        f = (self.v0[:, None] * b00 + h * self.d0[:, None] * b10
             + self.v1[:, None] * b01 + h * self.d1[:, None] * b11)
        return x, f * h * _GL_W[None, :]

    def moment(self, k: int) -> float:
        if k < 0:
            raise OutOfRange("moment order must be non-negative")
        parts = [float(np.sum(self.atom_masses * self.atom_locations ** k))] if self.atom_locations.size else []
        if self.n_cells:
            x, wf = self._quadrature()
            parts.append(float(np.sum(wf * x ** k)))
        return math.fsum(parts)

    def moment_tail_bound(self, k: int) -> float:
        """Upper bound on E[X^k; X > horizon] from the Chernoff tail P(X > x) <= C·e^{-s·x}."""
        s, c, hz = self.tail_rate, self.tail_prefactor, self.horizon
        if s <= 0 or c <= 0:
            return math.inf if self.tail_mass_bound > 0 else 0.0
        head = hz ** k * c * math.exp(-s * hz)
        if k == 0:
            return head
        body = k * c * gammaincc(k, s * hz) * gamma_fn(k) / s ** k
        return head + float(body)

    def laplace(self, s: float) -> float:
        """E[e^{sX}] restricted to the represented part (atoms + density on the grid)."""
        parts = [float(np.sum(self.atom_masses * np.exp(s * self.atom_locations)))] if self.atom_locations.size else []
        if self.n_cells:
            x, wf = self._quadrature()
            parts.append(float(np.sum(wf * np.exp(s * x))))
        return math.fsum(parts)

    # ── Transformations ────────────────────────────────────────────────────

    def shifted(self, delta: float, label: str | None = None) -> "MixedDistribution":
        return replace(self,
                       atom_locations=self.atom_locations + delta,
                       nodes=self.nodes + delta,
                       tail_prefactor=self.tail_prefactor * math.exp(self.tail_rate * delta),
                       label=self.label if label is None else label)

    @classmethod
    def mixture(cls, weights: Sequence[float], parts: Sequence["MixedDistribution"], label: str = "") -> "MixedDistribution":
        """Convex combination of distributions that share one grid."""
        first = parts[0]
        for d in parts[1:]:
            if not np.array_equal(d.nodes, first.nodes):
                raise OutOfRange("mixture components must share one grid")
        loc = np.concatenate([d.atom_locations for d in parts])
        mass = np.concatenate([w * d.atom_masses for w, d in zip(weights, parts)])
        loc, mass = merge_atoms(loc, mass)

        def combine(attr: str) -> np.ndarray:
            return sum(w * getattr(d, attr) for w, d in zip(weights, parts))

        # The slowest component decay governs the mixture tail.
        rate = min(d.tail_rate for d in parts)
        prefactor = 0.0
        if rate > 0:
            prefactor = sum(w * d.tail_prefactor for w, d in zip(weights, parts) if d.tail_rate == rate)
            prefactor += sum(w * d.tail_prefactor * math.exp(-(d.tail_rate - rate) * d.horizon)
                             for w, d in zip(weights, parts) if d.tail_rate != rate)
        return cls(
            atom_locations=loc, atom_masses=mass, nodes=first.nodes,
            v0=combine("v0"), d0=combine("d0"), v1=combine("v1"), d1=combine("d1"),
            tail_mass_bound=float(sum(w * d.tail_mass_bound for w, d in zip(weights, parts))),
            tail_rate=rate, tail_prefactor=prefactor, label=label,
        )

    # ── Export ─────────────────────────────────────────────────────────────

    def table(self) -> Dict[str, np.ndarray]:
        """Columns t, pdf, cdf, atom_mass on the grid nodes plus every atom location."""
        nodes = self.nodes if self.n_cells else np.zeros(0)
        t = np.union1d(nodes, self.atom_locations) if self.atom_locations.size else nodes
        atom_col = np.zeros_like(t)
        if self.atom_locations.size:
            idx = np.searchsorted(t, self.atom_locations)
            atom_col[idx] = self.atom_masses
        pdf = self.pdf(t)
        if self.n_cells:
            pdf = np.where(np.isclose(t, self.horizon, rtol=0, atol=1e-12 * max(1.0, self.horizon)),
                           self.v1[-1], pdf)
        return {"t": t, "pdf": pdf, "cdf": self.cdf(t), "atom_mass": atom_col}
