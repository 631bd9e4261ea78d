"""Dyadic cubes on a periodic window, with exact lattice arithmetic.

All cube corners and dilation corners are integers in units of the lattice
pitch ``2**-(d_max + k0 + 1)``.  A family of cubes on the torus stands for its
periodic lift to R^n; measures and multiplicities count every translate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np


class DepthExhausted(ValueError):
    """Raised when a request needs a level deeper than the window allows."""


class ResolutionError(ValueError):
    """Raised when a cube is finer than the sampling grid can resolve."""


@dataclass(frozen=True)
class DilationParam:
    """Dilation by the factor 1 + lam around the cube centre, lam = 2**-k0."""

    k0: int = 0

    def __post_init__(self):
        if self.k0 < 0:
            raise ValueError("k0 must be non-negative")

    @property
    def lam(self) -> Fraction:
        return Fraction(1, 2 ** self.k0)

    @property
    def factor(self) -> Fraction:
        return 1 + self.lam


@dataclass(frozen=True)
class Window:
    """The periodic box [0, M)^n in x together with t in (0, T]."""

    n: int
    M: int
    d_max: int
    k0: int = 0
    T: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.d_max < 0:
            raise ValueError("d_max must be >= 0")
        if self.k0 < 0:
            raise ValueError("k0 must be >= 0")

    @property
    def dilation(self) -> DilationParam:
        return DilationParam(self.k0)

    @property
    def lam(self) -> Fraction:
        return self.dilation.lam

    @property
    def scale(self) -> int:
        """Lattice points per unit length."""
        return 2 ** (self.d_max + self.k0 + 1)

    @property
    def period(self) -> int:
        """Window side in lattice units."""
        return self.M * self.scale

    def cells_per_axis(self, k: int) -> int:
        return self.M * 2 ** k

    def cube(self, k: int, m: Sequence[int]) -> "DyadicCube":
        if k < 0 or k > self.d_max:
            raise DepthExhausted(f"level {k} outside 0..{self.d_max}")
        if len(m) != self.n:
            raise ValueError(f"index {m} does not have length {self.n}")
        p = self.cells_per_axis(k)
        return DyadicCube(k, tuple(int(mi) % p for mi in m))

    def cubes_at(self, k: int) -> Iterator["DyadicCube"]:
        p = self.cells_per_axis(k)
        for m in itertools.product(range(p), repeat=self.n):
            yield DyadicCube(k, m)

    def with_depth(self, d_max: int) -> "Window":
        return Window(self.n, self.M, d_max, self.k0, self.T)


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Q_{k,m} = 2^-k (m + [0,1)^n), stored with m reduced mod M 2^k."""

    level: int
    index: tuple[int, ...]

    @property
    def side(self) -> Fraction:
        return Fraction(1, 2 ** self.level)

    def lower(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) / 2.0 ** self.level

    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) / 2.0 ** self.level


@dataclass(frozen=True)
class Box:
    """Open axis-parallel box with integer corners in lattice units."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]
    scale: int

    @property
    def n(self) -> int:
        return len(self.lo)

    def widths(self) -> tuple[int, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def volume(self) -> Fraction:
        v = Fraction(1)
        for w in self.widths():
            v *= Fraction(w, self.scale)
        return v

    def real_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.asarray(self.lo, dtype=float) / self.scale,
                np.asarray(self.hi, dtype=float) / self.scale)


@dataclass(frozen=True)
class SpaceTimeBox:
    """Real box lo < x < hi, t0 < t < t1 in the upper half-space."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    t0: float
    t1: float

    @property
    def n(self) -> int:
        return len(self.lo)

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)) * (self.t1 - self.t0))


def cube_box(cube: DyadicCube, window: Window) -> Box:
    unit = window.scale >> cube.level
    lo = tuple(mi * unit for mi in cube.index)
    return Box(lo, tuple(l + unit for l in lo), window.scale)


def dilate(cube: DyadicCube, window: Window) -> Box:
    """Concentric dilation of ``cube`` by the factor 1 + 2**-k0."""
    if cube.level > window.d_max:
        raise DepthExhausted(f"level {cube.level} beyond d_max={window.d_max}")
    unit = window.scale >> cube.level
    pad = unit >> (window.k0 + 1)
    lo = tuple(mi * unit - pad for mi in cube.index)
    return Box(lo, tuple(l + unit + 2 * pad for l in lo), window.scale)


def children_of(cube: DyadicCube, window: Window) -> list[DyadicCube]:
    if cube.level >= window.d_max:
        raise DepthExhausted(f"cannot refine below level {window.d_max}")
    base = [2 * mi for mi in cube.index]
    return [DyadicCube(cube.level + 1, tuple(b + o for b, o in zip(base, off)))
            for off in itertools.product((0, 1), repeat=window.n)]


def parent_of(cube: DyadicCube) -> DyadicCube:
    if cube.level == 0:
        raise ValueError("level-0 cubes have no parent")
    return DyadicCube(cube.level - 1, tuple(mi // 2 for mi in cube.index))


def ancestor_at(cube: DyadicCube, level: int) -> DyadicCube:
    if level > cube.level:
        raise ValueError("ancestor level must not exceed the cube level")
    shift = cube.level - level
    return DyadicCube(level, tuple(mi >> shift for mi in cube.index))


def space_time_box(cube: DyadicCube, dilated: bool = False,
                   window: Window | None = None) -> SpaceTimeBox:
    """The box Q x (0, side), optionally with Q replaced by its dilation."""
    if dilated:
        if window is None:
            raise ValueError("dilated boxes need a window")
        lo, hi = dilate(cube, window).real_bounds()
    else:
        lo = cube.lower()
        hi = lo + 2.0 ** -cube.level
    return SpaceTimeBox(tuple(lo), tuple(hi), 0.0, 2.0 ** -cube.level)


# -- periodic measure and coverage -------------------------------------------

def _overlap_1d(a0: int, a1: int, b0: int, b1: int, period: int) -> int:
    """Total length of [a0,a1) meeting every translate of [b0,b1) by the period."""
    total = 0
    j_lo = -((b1 - a0) // period) - 1
    j_hi = (a1 - b0) // period + 1
    for j in range(j_lo, j_hi + 1):
        lo = max(a0, b0 + j * period)
        hi = min(a1, b1 + j * period)
        if hi > lo:
            total += hi - lo
    return total


def intersection_measure(a: Box, b: Box, window: Window) -> Fraction:
    """Lebesgue measure of a intersected with the periodic lift of b."""
    if a.scale != b.scale:
        raise ValueError("boxes live on different lattices")
    L = window.period
    prod = 1
    for a0, a1, b0, b1 in zip(a.lo, a.hi, b.lo, b.hi):
        prod *= _overlap_1d(a0, a1, b0, b1, L)
        if prod == 0:
            return Fraction(0)
    return Fraction(prod, a.scale ** a.n)


def _translates_containing(lo: int, hi: int, x: Fraction, period: int) -> int:
    # number of integers j with lo < x - j*period < hi
    j_min = (x - hi) / period
    j_max = (x - lo) / period
    count = 0
    for j in range(math.floor(j_min) - 1, math.ceil(j_max) + 2):
        v = x - j * period
        if lo < v < hi:
            count += 1
    return count


def overlap_multiplicity(x: Sequence, family: Iterable[Box], window: Window) -> int:
    """Number of (box, translate) pairs whose open box contains the point x."""
    pts = [Fraction(xi) * window.scale for xi in x]
    total = 0
    for box in family:
        c = 1
        for lo, hi, xa in zip(box.lo, box.hi, pts):
            c *= _translates_containing(lo, hi, xa, window.period)
            if c == 0:
                break
        total += c
    return total


def covered_by_union(target: Box, others: Iterable[Box], window: Window) -> bool:
    """True iff every point of open ``target`` lies in the lift of some other box.

    The edges of all relevant boxes cut the target into strata (open
    elementary intervals and the cut points between them, per axis); coverage
    is constant on each stratum, so one sample per stratum decides exactly.
    """
    L = window.period
    n = target.n
    relevant = [b for b in others
                if all(_overlap_1d(target.lo[a], target.hi[a], b.lo[a], b.hi[a], L) > 0
                       for a in range(n))]
    if not relevant:
        return False
    samples = []
    for a in range(n):
        t0, t1 = target.lo[a], target.hi[a]
        pts = {t0, t1}
        for b in relevant:
            for edge in (b.lo[a], b.hi[a]):
                j0 = (t0 - edge) // L
                for j in range(j0, j0 + (t1 - t0) // L + 3):
                    e = edge + j * L
                    if t0 < e < t1:
                        pts.add(e)
        c = np.array(sorted(pts), dtype=np.int64)
        # doubled coordinates: interval midpoints and interior cut points
        samples.append(np.concatenate([c[:-1] + c[1:], 2 * c[1:-1]]))
    covered = np.zeros([len(s) for s in samples], dtype=bool)
    for b in relevant:
        cell = None
        for a in range(n):
            p = samples[a]
            lo2, hi2 = 2 * b.lo[a], 2 * b.hi[a]
            j = np.floor_divide(p - lo2, 2 * L)
            inside = np.zeros(len(p), dtype=bool)
            # boxes wider than the period reach back over several translates
            for back in range(0, (b.hi[a] - b.lo[a]) // L + 1):
                shift = (j - back) * 2 * L
                inside |= (p > lo2 + shift) & (p < hi2 + shift)
            cell = inside if cell is None else np.multiply.outer(cell, inside)
        covered |= cell
    return bool(covered.all())


# -- rasterization helpers ---------------------------------------------------

def family_resolution(cubes: Iterable[DyadicCube], window: Window) -> int:
    """Coarsest lattice unit that resolves every dilation in the family."""
    kmax = max((c.level for c in cubes), default=0)
    return 2 ** (window.d_max - kmax)


def paint(counts: np.ndarray, box: Box, unit: int, value: int = 1) -> None:
    """Add ``value`` on every stratum covered by the periodic lift of an open box.

    The raster uses doubled coordinates: even entries are lattice points,
    odd entries the open cells between them.
    """
    L2 = counts.shape[0]
    idx = [np.arange(2 * lo // unit + 1, 2 * hi // unit) % L2
           for lo, hi in zip(box.lo, box.hi)]
    np.add.at(counts, np.ix_(*idx), value)


def raster_counts(boxes: Iterable[Box], window: Window, unit: int) -> np.ndarray:
    """Lifted multiplicity of a family on the doubled raster at pitch ``unit``."""
    L2 = 2 * (window.period // unit)
    counts = np.zeros((L2,) * window.n, dtype=np.int32)
    for b in boxes:
        paint(counts, b, unit)
    return counts
