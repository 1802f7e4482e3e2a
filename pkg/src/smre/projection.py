"""Projections onto residual-constraint sets and Dykstra's algorithm.

Each constraint is a cylinder: a Euclidean ball in the coordinates of
one pixel subset, free elsewhere.  Dykstra's cyclic scheme with per-set
corrections converges to the exact projection onto the intersection.

Two execution paths are provided.  The generic path visits sets one at
a time in system order and is the reference used by tests.  The grouped
path batches sets with pairwise disjoint supports (dyadic levels,
strided square lattices) so each batch is one vectorized block
operation; batching only reorders the cyclic sweep, which leaves the
limit unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import PixelRect, SubsetSystem, SummedAreaTable, as_field, s2_levels

__all__ = [
    "CylinderSet",
    "OrthantSet",
    "project_cylinder",
    "project_orthant",
    "project_shifted_cylinder",
    "dykstra",
    "dykstra_system",
    "DykstraResult",
]


@dataclass(frozen=True)
class CylinderSet:
    """{v : sum over rect of (v - center)^2 <= radius2}, free outside rect."""

    rect: PixelRect
    center: np.ndarray
    radius2: float

    def __post_init__(self):
        if self.radius2 <= 0:
            raise ValueError("radius2 must be positive")


@dataclass(frozen=True)
class OrthantSet:
    """{v : v >= 0 everywhere}."""


class DykstraResult(NamedTuple):
    x: np.ndarray
    converged: bool
    sweeps: int


def project_cylinder(v, rect: PixelRect, Y, c_S: float, sigma2: float) -> np.ndarray:
    """Projection onto {v : (c_S/sigma^2) * sum over rect (v - Y)^2 <= 1}.

    Pixels outside the rectangle are unchanged; inside, the point is
    pulled radially toward Y onto the ball of radius sigma/sqrt(c_S).
    """
    if c_S <= 0 or sigma2 <= 0:
        raise ValueError("c_S and sigma2 must be positive")
    v = as_field(v)
    Y = as_field(Y, "center")
    out = v.copy()
    sl = (slice(rect.top, rect.top + rect.height),
          slice(rect.left, rect.left + rect.width))
    d = v[sl] - Y[sl]
    ss = float(np.sum(d * d))
    radius2 = sigma2 / c_S
    if ss > radius2:
        out[sl] = Y[sl] + d * np.sqrt(radius2 / ss)
    return out


def project_orthant(v) -> np.ndarray:
    """Pointwise max(v, 0)."""
    return np.maximum(as_field(v), 0.0)


def project_shifted_cylinder(w, rect: PixelRect, offset, radius2: float) -> np.ndarray:
    """Projection onto {w : sum over rect of (w + offset)^2 <= radius2},
    the ball of radius sqrt(radius2) around -offset in the rect coordinates."""
    if radius2 <= 0:
        raise ValueError("radius2 must be positive")
    w = as_field(w)
    offset = as_field(offset, "offset")
    out = w.copy()
    sl = (slice(rect.top, rect.top + rect.height),
          slice(rect.left, rect.left + rect.width))
    d = w[sl] + offset[sl]
    ss = float(np.sum(d * d))
    if ss > radius2:
        out[sl] = -offset[sl] + d * np.sqrt(radius2 / ss)
    return out


# ---------------------------------------------------------------------------
# Generic Dykstra over an explicit set list (reference path, system order)
# ---------------------------------------------------------------------------

def _cyl_step(x, corr, s: CylinderSet):
    r = s.rect
    sl = (slice(r.top, r.top + r.height), slice(r.left, r.left + r.width))
    z = x[sl] + corr
    d = z - s.center[sl]
    ss = float(np.sum(d * d))
    if ss > s.radius2:
        xn = s.center[sl] + d * np.sqrt(s.radius2 / ss)
    else:
        xn = z
    delta = float(np.max(np.abs(xn - x[sl]))) if xn.size else 0.0
    corr_new = z - xn
    x[sl] = xn
    return corr_new, delta


def _orthant_step(x, corr):
    z = x + corr
    xn = np.maximum(z, 0.0)
    delta = float(np.max(np.abs(xn - x)))
    x[:] = xn
    return z - xn, delta


def dykstra(v0, sets, tol: float = 1e-6, max_sweeps: int = 500) -> DykstraResult:
    """Dykstra's algorithm over an explicit list of CylinderSet / OrthantSet.

    Sweeps cyclically in the given order; terminates when the largest
    pixel change during a full sweep falls below tol.  A single set is
    projected exactly in one sweep.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = as_field(v0).copy()
    corrections = [np.zeros((s.rect.height, s.rect.width))
                   if isinstance(s, CylinderSet) else np.zeros_like(x)
                   for s in sets]
    if not sets:
        raise ValueError("need at least one set")
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for i, s in enumerate(sets):
            if isinstance(s, CylinderSet):
                corrections[i], delta = _cyl_step(x, corrections[i], s)
            else:
                corrections[i], delta = _orthant_step(x, corrections[i])
            max_delta = max(max_delta, delta)
        if len(sets) == 1:
            return DykstraResult(x, True, 1)
        if max_delta <= tol:
            return DykstraResult(x, True, sweep)
    return DykstraResult(x, False, max_sweeps)


# ---------------------------------------------------------------------------
# Grouped Dykstra over a SubsetSystem (vectorized path used by the solvers)
# ---------------------------------------------------------------------------

class _TileGroup:
    """One dyadic level: tiles of side `stride` anchored at multiples of
    stride, clipped at the far edges.  Supports are pairwise disjoint and
    cover the grid, so the whole level is one simultaneous block step."""

    def __init__(self, m, n, stride, set_slice):
        self.m, self.n = m, n
        self.ai = np.arange(0, m, stride)
        self.aj = np.arange(0, n, stride)
        self.bi = np.minimum(self.ai + stride, m)
        self.bj = np.minimum(self.aj + stride, n)
        self.heights = self.bi - self.ai
        self.widths = self.bj - self.aj
        self.set_slice = set_slice

    def radii2(self, all_radii2):
        return all_radii2[self.set_slice].reshape(self.ai.size, self.aj.size)

    def step(self, x, corr, center, radii2):
        z = x if corr is None else x + corr
        d = z - center
        sat = SummedAreaTable(d * d)
        T = sat.table
        B = (T[np.ix_(self.bi, self.bj)] - T[np.ix_(self.ai, self.bj)]
             - T[np.ix_(self.bi, self.aj)] + T[np.ix_(self.ai, self.aj)])
        if np.all(B <= radii2):
            if corr is None or not corr.any():
                return corr, 0.0
            rho_e = 1.0
            xn = z
        else:
            rho = np.sqrt(radii2 / np.maximum(B, radii2))
            rho_e = np.repeat(np.repeat(rho, self.heights, axis=0),
                              self.widths, axis=1)
            xn = np.where(rho_e == 1.0, z, center + d * rho_e)
        delta = float(np.max(np.abs(xn - x)))
        corr = z - xn
        x[:] = xn
        return corr, delta


class _LatticeGroup:
    """Color class of an all-squares system: full side-s squares anchored
    on a stride-s lattice offset by (a, b); pairwise disjoint."""

    def __init__(self, m, n, side, a, b, indices):
        ki = (m - a - side) // side + 1
        kj = (n - b - side) // side + 1
        self.side = side
        self.region = (slice(a, a + ki * side), slice(b, b + kj * side))
        self.ki, self.kj = ki, kj
        self.indices = indices  # shape (ki, kj), into the system arrays

    def radii2(self, all_radii2):
        return all_radii2[self.indices]

    def step(self, x, corr, center, radii2):
        s, ki, kj = self.side, self.ki, self.kj
        xr = x[self.region]
        z = xr if corr is None else xr + corr
        d = z - center[self.region]
        B = (d * d).reshape(ki, s, kj, s).sum(axis=(1, 3))
        if np.all(B <= radii2):
            if corr is None or not corr.any():
                return corr, 0.0
            xn = z
        else:
            rho = np.sqrt(radii2 / np.maximum(B, radii2))
            rho_e = np.repeat(np.repeat(rho, s, axis=0), s, axis=1)
            xn = np.where(rho_e == 1.0, z, center[self.region] + d * rho_e)
        delta = float(np.max(np.abs(xn - xr)))
        corr = z - xn
        x[self.region] = xn
        return corr, delta


class _SingleSetGroup:
    def __init__(self, rect: PixelRect, index: int):
        self.rect = rect
        self.index = index

    def radii2(self, all_radii2):
        return float(all_radii2[self.index])

    def step(self, x, corr, center, radius2):
        r = self.rect
        sl = (slice(r.top, r.top + r.height), slice(r.left, r.left + r.width))
        xs = x[sl]
        z = xs if corr is None else xs + corr
        d = z - center[sl]
        ss = float(np.sum(d * d))
        if ss > radius2:
            xn = center[sl] + d * np.sqrt(radius2 / ss)
        else:
            if corr is None or not corr.any():
                return corr, 0.0
            xn = z
        delta = float(np.max(np.abs(xn - xs)))
        corr = z - xn
        x[sl] = xn
        return corr, delta


class _OrthantGroup:
    def radii2(self, all_radii2):
        return None

    def step(self, x, corr, center, radius2):
        z = x if corr is None else x + corr
        xn = np.maximum(z, 0.0)
        delta = float(np.max(np.abs(xn - x)))
        corr = z - xn
        x[:] = xn
        return corr, delta


def _system_groups(sys: SubsetSystem):
    m, n = sys.m, sys.n
    groups = []
    if sys.kind == "s2":
        start = 0
        for s in s2_levels(m, n):
            count = ((m + s - 1) // s) * ((n + s - 1) // s)
            groups.append(_TileGroup(m, n, s, slice(start, start + count)))
            start += count
    elif sys.kind == "s0":
        start = 0
        side = 1
        while start < len(sys):
            rows, cols = m - side + 1, n - side + 1
            for a in range(min(side, rows)):
                ii = np.arange(a, rows, side)
                for b in range(min(side, cols)):
                    jj = np.arange(b, cols, side)
                    idx = start + ii[:, None] * cols + jj[None, :]
                    groups.append(_LatticeGroup(m, n, side, a, b, idx))
            start += rows * cols
            side += 1
    else:
        for i in range(len(sys)):
            groups.append(_SingleSetGroup(sys.rect(i), i))
    return groups


def dykstra_system(v0, sys: SubsetSystem, center, sigma2: float = 1.0,
                   nonneg: bool = False, tol: float = 1e-6,
                   max_sweeps: int = 500, active_set: bool = False,
                   rescan_every: int = 5) -> DykstraResult:
    """Project v0 onto the intersection of the system's residual cylinders
    (radius^2 = sigma2 / c_S around `center` on each set), optionally
    intersected with the nonnegative orthant.

    With active_set=True, groups that were feasible with zero correction
    are skipped between full re-scans (every `rescan_every` sweeps);
    convergence is only accepted on a full sweep.
    """
    if not sys.calibrated:
        raise RuntimeError("system is not calibrated (no weights assigned)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = as_field(v0).copy()
    center = as_field(center, "center")
    radii2 = sigma2 / sys.weights
    groups = list(_system_groups(sys))
    if nonneg:
        groups.insert(0, _OrthantGroup())
    grp_radii = [g.radii2(radii2) for g in groups]
    corrections: list[np.ndarray | None] = [None] * len(groups)
    active = np.ones(len(groups), dtype=bool)
    for sweep in range(1, max_sweeps + 1):
        full = not active_set or (sweep - 1) % rescan_every == 0
        max_delta = 0.0
        for gi, g in enumerate(groups):
            if not (full or active[gi]):
                continue
            corr, delta = g.step(x, corrections[gi], center, grp_radii[gi])
            corrections[gi] = corr
            active[gi] = delta > 0.0 or (corr is not None and corr.any())
            max_delta = max(max_delta, delta)
        if len(groups) == 1:
            return DykstraResult(x, True, 1)
        if full and max_delta <= tol:
            return DykstraResult(x, True, sweep)
    return DykstraResult(x, False, max_sweeps)


def cylinder_sets(sys: SubsetSystem, center, sigma2: float) -> list[CylinderSet]:
    """Explicit CylinderSet list for a calibrated system (reference path)."""
    if not sys.calibrated:
        raise RuntimeError("system is not calibrated (no weights assigned)")
    center = as_field(center, "center")
    return [CylinderSet(sys.rect(i), center, float(sigma2 / sys.weights[i]))
            for i in range(len(sys))]
