"""Pixel grids, rectangular subset systems and fast windowed sums.

A pixel field is a plain 2-d float64 ndarray.  Subset systems are
collections of axis-aligned rectangles over the grid, carried in
structure-of-arrays form so that per-set statistics can be evaluated
with vectorized gathers from a summed-area table.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_field",
    "PixelRect",
    "SummedAreaTable",
    "windowed_sums",
    "SubsetSystem",
    "build_system_s0",
    "build_system_s2",
    "build_system_global",
    "build_custom_system",
    "write_system",
    "read_system",
]


def as_field(a, name: str = "field") -> np.ndarray:
    """Validate and return `a` as a 2-d float64 array with finite entries."""
    f = np.asarray(a, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-d array, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")
    return f


@dataclass(frozen=True)
class PixelRect:
    """Axis-aligned rectangle of pixels: rows top..top+height-1, cols left..left+width-1."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("rectangle must contain at least one pixel")
        if self.top < 0 or self.left < 0:
            raise ValueError("rectangle origin must be nonnegative")

    @property
    def card(self) -> int:
        return self.height * self.width

    def inside(self, m: int, n: int) -> bool:
        return self.top + self.height <= m and self.left + self.width <= n


class SummedAreaTable:
    """Cumulative-sum table answering rectangle sums in O(1).

    table[i, j] holds the sum of f[:i, :j]; rect_sum subtracts four
    corners, exact up to floating round-off.
    """

    def __init__(self, f: np.ndarray):
        f = as_field(f)
        m, n = f.shape
        t = np.zeros((m + 1, n + 1))
        np.cumsum(np.cumsum(f, axis=0), axis=1, out=t[1:, 1:])
        self.table = t
        self.shape = (m, n)

    def rect_sum(self, rect: PixelRect) -> float:
        t, l, h, w = rect.top, rect.left, rect.height, rect.width
        T = self.table
        return float(T[t + h, l + w] - T[t, l + w] - T[t + h, l] + T[t, l])

    def gather(self, tops, lefts, heights, widths) -> np.ndarray:
        """Vectorized rect_sum for arrays of rectangles."""
        T = self.table
        b, r = tops + heights, lefts + widths
        return T[b, r] - T[tops, r] - T[b, lefts] + T[tops, lefts]

    def gather_flat(self, flat_idx: np.ndarray) -> np.ndarray:
        """rect sums from precomputed flat corner indices, shape (4, nsets)."""
        Tr = self.table.ravel()
        return Tr[flat_idx[0]] - Tr[flat_idx[1]] - Tr[flat_idx[2]] + Tr[flat_idx[3]]


def windowed_sums(f) -> SummedAreaTable:
    """Build a summed-area table for the field f."""
    return SummedAreaTable(f)


def _fourth_root_mu_sigma(cards: np.ndarray):
    mu = np.power(cards - 0.5, 0.25)
    sigma = 1.0 / np.sqrt(8.0 * np.sqrt(cards))
    return mu, sigma


class SubsetSystem:
    """A multiscale system of rectangular pixel subsets with scale metadata.

    Stores, per set: cardinality, the normal-approximation moments of the
    fourth-rooted chi-square residual sum (mu, sigma) and, once calibrated,
    the constraint weight.  Immutable after construction; calibration
    returns a new instance.
    """

    def __init__(self, system_id, m, n, tops, lefts, heights, widths,
                 weights=None, q_alpha=None, alpha=None, kind="custom"):
        self.system_id = str(system_id)
        self.m = int(m)
        self.n = int(n)
        self.tops = np.ascontiguousarray(tops, dtype=np.int64)
        self.lefts = np.ascontiguousarray(lefts, dtype=np.int64)
        self.heights = np.ascontiguousarray(heights, dtype=np.int64)
        self.widths = np.ascontiguousarray(widths, dtype=np.int64)
        if self.tops.size == 0:
            raise ValueError("subset system must be nonempty")
        if (np.any(self.heights < 1) or np.any(self.widths < 1)
                or np.any(self.tops < 0) or np.any(self.lefts < 0)
                or np.any(self.tops + self.heights > self.m)
                or np.any(self.lefts + self.widths > self.n)):
            raise ValueError("all sets must lie inside the grid")
        self.cards = self.heights * self.widths
        self.mu, self.sigma = _fourth_root_mu_sigma(self.cards.astype(np.float64))
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)
        if self.weights is not None and (self.weights.shape != self.cards.shape
                                         or np.any(self.weights <= 0)):
            raise ValueError("weights must be positive, one per set")
        self.q_alpha = None if q_alpha is None else float(q_alpha)
        self.alpha = None if alpha is None else float(alpha)
        self.kind = kind
        self._flat_idx = None
        for arr in (self.tops, self.lefts, self.heights, self.widths, self.cards,
                    self.mu, self.sigma):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.tops.size

    def __repr__(self):
        cal = "calibrated" if self.calibrated else "uncalibrated"
        return (f"SubsetSystem({self.system_id!r}, {self.m}x{self.n}, "
                f"{len(self)} sets, {cal})")

    @property
    def calibrated(self) -> bool:
        return self.weights is not None

    @property
    def sets(self) -> list[PixelRect]:
        return [PixelRect(int(t), int(l), int(h), int(w))
                for t, l, h, w in zip(self.tops, self.lefts, self.heights, self.widths)]

    def rect(self, i: int) -> PixelRect:
        return PixelRect(int(self.tops[i]), int(self.lefts[i]),
                         int(self.heights[i]), int(self.widths[i]))

    def flat_corner_idx(self) -> np.ndarray:
        """Corner indices into a raveled (m+1, n+1) SAT, cached; shape (4, nsets)."""
        if self._flat_idx is None:
            stride = self.n + 1
            b = (self.tops + self.heights) * stride
            t = self.tops * stride
            r = self.lefts + self.widths
            l = self.lefts
            self._flat_idx = np.stack([b + r, t + r, b + l, t + l]).astype(np.int64)
        return self._flat_idx

    def with_weights(self, weights, q_alpha, alpha) -> "SubsetSystem":
        return SubsetSystem(self.system_id, self.m, self.n, self.tops, self.lefts,
                            self.heights, self.widths, weights=weights,
                            q_alpha=q_alpha, alpha=alpha, kind=self.kind)


def build_system_s0(m: int, n: int, max_side: int) -> SubsetSystem:
    """All axis-aligned squares of side 1..max_side at every position.

    Side-major, then row-major ordering.  Count per side s is
    (m-s+1)(n-s+1).
    """
    m, n, max_side = int(m), int(n), int(max_side)
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    if not (1 <= max_side <= min(m, n)):
        raise ValueError(f"max_side must be in [1, {min(m, n)}], got {max_side}")
    tops, lefts, sides = [], [], []
    for s in range(1, max_side + 1):
        ii, jj = np.meshgrid(np.arange(m - s + 1), np.arange(n - s + 1), indexing="ij")
        tops.append(ii.ravel())
        lefts.append(jj.ravel())
        sides.append(np.full(ii.size, s))
    tops = np.concatenate(tops)
    lefts = np.concatenate(lefts)
    sides = np.concatenate(sides)
    return SubsetSystem(f"S0-{max_side}", m, n, tops, lefts, sides, sides, kind="s0")


def s2_levels(m: int, n: int) -> list[int]:
    """Dyadic side lengths 2^l for l = 0..ceil(log2(max(m, n)))."""
    top = int(np.ceil(np.log2(max(m, n)))) if max(m, n) > 1 else 0
    return [2 ** l for l in range(top + 1)]


def build_system_s2(m: int, n: int) -> SubsetSystem:
    """Dyadic partition system: for each level, tiles of side 2^l anchored at
    multiples of 2^l, clipped at the right/bottom grid edges.

    Each level tiles the grid exactly; level 0 is the singleton partition.
    """
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    tops, lefts, heights, widths = [], [], [], []
    for s in s2_levels(m, n):
        anchor_i = np.arange(0, m, s)
        anchor_j = np.arange(0, n, s)
        ii, jj = np.meshgrid(anchor_i, anchor_j, indexing="ij")
        hh = np.minimum(ii + s, m) - ii
        ww = np.minimum(jj + s, n) - jj
        tops.append(ii.ravel())
        lefts.append(jj.ravel())
        heights.append(hh.ravel())
        widths.append(ww.ravel())
    return SubsetSystem("S2", m, n, np.concatenate(tops), np.concatenate(lefts),
                        np.concatenate(heights), np.concatenate(widths), kind="s2")


def build_system_global(m: int, n: int) -> SubsetSystem:
    """The trivial system containing the full grid only."""
    return SubsetSystem("global", m, n, [0], [0], [m], [n], kind="global")


def build_custom_system(system_id: str, m: int, n: int, rects) -> SubsetSystem:
    """System from an explicit list of PixelRect (or (top,left,h,w) tuples)."""
    rows = [(r.top, r.left, r.height, r.width) if isinstance(r, PixelRect) else tuple(r)
            for r in rects]
    a = np.array(rows, dtype=np.int64).reshape(-1, 4)
    return SubsetSystem(system_id, m, n, a[:, 0], a[:, 1], a[:, 2], a[:, 3],
                        kind="custom")


def write_system(sys: SubsetSystem, path) -> None:
    """Serialize a system descriptor: header line then one `top left height width`
    line per set."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"SMRE-SYS v1 {sys.system_id} {sys.m} {sys.n}\n")
        for t, l, h, w in zip(sys.tops, sys.lefts, sys.heights, sys.widths):
            fh.write(f"{t} {l} {h} {w}\n")


def read_system(path) -> SubsetSystem:
    """Parse a system descriptor written by write_system."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "SMRE-SYS" or header[1] != "v1":
            raise ValueError(f"bad system descriptor header in {path}")
        system_id, m, n = header[2], int(header[3]), int(header[4])
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"bad set line in {path}: {line!r}")
            rows.append(tuple(int(p) for p in parts))
    return build_custom_system(system_id, m, n, rows)
