"""Dyadic tilings, greedy cover selection and admissible systems of tilings."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import (Box, DyadicCube, Window, ancestor_at, children_of,
                       covered_by_union, dilate, family_resolution, paint)
from .weights import Weight, WeightScales

BLUE = "blue"
YELLOW = "yellow"


class TruncationWarning(UserWarning):
    """A schedule or system stopped early because the window depth ran out."""


def canonical(cubes: Iterable[DyadicCube]) -> list[DyadicCube]:
    """Level ascending, then lexicographic index."""
    return sorted(cubes, key=lambda c: (c.level, c.index))


@dataclass
class Tiling:
    window: Window
    cubes: list[DyadicCube]
    colors: dict[DyadicCube, str] = field(default_factory=dict)

    def __post_init__(self):
        self.cubes = canonical(self.cubes)

    def color(self, cube: DyadicCube) -> str:
        return self.colors.get(cube, YELLOW)

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    @property
    def max_level(self) -> int:
        return max(c.level for c in self.cubes)

    @classmethod
    def uniform(cls, window: Window, k: int) -> "Tiling":
        return cls(window, list(window.cubes_at(k)))


def random_tiling(window: Window, rng: np.random.Generator, depth: int | None = None,
                  split: float = 0.5) -> Tiling:
    """Random dyadic tiling: every cube above ``depth`` splits with probability ``split``."""
    depth = window.d_max if depth is None else depth
    todo = list(window.cubes_at(0))
    cubes = []
    while todo:
        c = todo.pop()
        if c.level < depth and rng.random() < split:
            todo.extend(children_of(c, window))
        else:
            cubes.append(c)
    return Tiling(window, cubes)


# -- validation --------------------------------------------------------------

@dataclass
class TilingDiagnostics:
    valid: bool
    message: str = ""
    cell: tuple | None = None


def validate_tiling(cubes: Iterable[DyadicCube], window: Window) -> TilingDiagnostics:
    """Check that the cubes have disjoint interiors and cover the window."""
    cubes = list(cubes)
    if not cubes:
        return TilingDiagnostics(False, "empty family")
    kmax = max(c.level for c in cubes)
    if kmax > window.d_max:
        return TilingDiagnostics(False, f"cube deeper than d_max={window.d_max}")
    p = window.cells_per_axis(kmax)
    counts = np.zeros((p,) * window.n, dtype=np.int32)
    for c in cubes:
        if any(not 0 <= mi < window.cells_per_axis(c.level) for mi in c.index):
            return TilingDiagnostics(False, f"index of {c} not reduced")
        s = 2 ** (kmax - c.level)
        counts[tuple(slice(mi * s, (mi + 1) * s) for mi in c.index)] += 1
    if np.any(counts > 1):
        cell = tuple(int(i) for i in np.argwhere(counts > 1)[0])
        return TilingDiagnostics(False, f"overlap at level-{kmax} cell {cell}", cell)
    if np.any(counts == 0):
        cell = tuple(int(i) for i in np.argwhere(counts == 0)[0])
        return TilingDiagnostics(False, f"gap at level-{kmax} cell {cell}", cell)
    return TilingDiagnostics(True)


# -- greedy selection --------------------------------------------------------

def _own_multiplicity(box: Box, unit: int, L2: int):
    idx, own = [], []
    for lo, hi in zip(box.lo, box.hi):
        raw = np.arange(2 * lo // unit + 1, 2 * hi // unit) % L2
        u, c = np.unique(raw, return_counts=True)
        idx.append(u)
        own.append(c)
    mult = own[0]
    for c in own[1:]:
        mult = np.multiply.outer(mult, c)
    return idx, mult


def select_cover(tiling: Tiling | Sequence[DyadicCube], window: Window) -> list[DyadicCube]:
    """Greedy single pass: drop a cube when the other survivors' dilations cover its own.

    Coverage is tracked on a raster of lattice points and open lattice cells
    holding the lifted multiplicity of the surviving dilations.
    """
    cubes = canonical(tiling.cubes if isinstance(tiling, Tiling) else tiling)
    unit = family_resolution(cubes, window)
    L2 = 2 * (window.period // unit)
    counts = np.zeros((L2,) * window.n, dtype=np.int32)
    boxes = [dilate(c, window) for c in cubes]
    for b in boxes:
        paint(counts, b, unit)
    survivors = []
    for cube, box in zip(cubes, boxes):
        idx, own = _own_multiplicity(box, unit, L2)
        others = counts[np.ix_(*idx)] - own
        if np.all(others >= 1):
            paint(counts, box, unit, -1)
        else:
            survivors.append(cube)
    return survivors


def pairwise_overlaps(boxes: Sequence[Box], window: Window, chunk: int = 512):
    """Lifted overlap measures (lattice units^n) for all pairs i < j, as arrays i, j, measure."""
    lo = np.array([b.lo for b in boxes], dtype=np.int64)
    hi = np.array([b.hi for b in boxes], dtype=np.int64)
    L = window.period
    reach = int(np.max(hi - lo)) // L + 1
    shifts = np.arange(-reach - 1, reach + 2) * L
    out_i, out_j, out_m = [], [], []
    N = len(boxes)
    for start in range(0, N, chunk):
        sl = slice(start, min(N, start + chunk))
        prod = np.ones((sl.stop - sl.start, N), dtype=np.int64)
        for a in range(window.n):
            a0 = lo[sl, a][:, None, None]
            a1 = hi[sl, a][:, None, None]
            b0 = lo[None, :, a, None] + shifts
            b1 = hi[None, :, a, None] + shifts
            ov = np.clip(np.minimum(a1, b1) - np.maximum(a0, b0), 0, None).sum(axis=2)
            prod *= ov
        ii, jj = np.nonzero(prod)
        keep = jj > ii + start
        out_i.append(ii[keep] + start)
        out_j.append(jj[keep])
        out_m.append(prod[ii[keep], jj[keep]])
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_m)


@dataclass
class CoverProperties:
    covers: bool
    max_multiplicity: int
    multiplicity_bound: int
    min_overlap_ratio: float
    redundant: list[DyadicCube]

    @property
    def multiplicity_ok(self) -> bool:
        return self.max_multiplicity <= self.multiplicity_bound

    @property
    def overlap_ok(self) -> bool:
        return self.min_overlap_ratio >= 1

    @property
    def all_ok(self) -> bool:
        return self.covers and self.multiplicity_ok and self.overlap_ok and not self.redundant


def cover_properties(survivors: Sequence[DyadicCube], window: Window) -> CoverProperties:
    """Evaluate the four structural properties of a selected cover exactly."""
    boxes = [dilate(c, window) for c in survivors]
    pad = window.scale
    whole = Box((-pad,) * window.n, (window.period + pad,) * window.n, window.scale)
    covers = covered_by_union(whole, boxes, window)
    unit = family_resolution(survivors, window)
    L2 = 2 * (window.period // unit)
    counts = np.zeros((L2,) * window.n, dtype=np.int32)
    for b in boxes:
        paint(counts, b, unit)
    ii, jj, meas = pairwise_overlaps(boxes, window)
    ratio = math.inf
    if len(ii):
        # cube volume in lattice units^n is (scale 2^-k)^n
        levels = np.array([c.level for c in survivors])
        kmax = np.maximum(levels[ii], levels[jj])
        n = window.n
        # need meas >= (lam/2)^n * (scale 2^-kmax)^n; compare exactly via integers
        side = window.scale >> kmax
        needed = (side >> (window.k0 + 1)) ** n
        ratio = float(np.min(meas / needed))
    redundant = [c for i, c in enumerate(survivors)
                 if covered_by_union(boxes[i], boxes[:i] + boxes[i + 1:], window)]
    bound = (window.n + 1) * 2 ** window.n
    return CoverProperties(covers, int(counts.max()), bound, ratio, redundant)


# -- level schedule ----------------------------------------------------------

@dataclass
class LevelSchedule:
    levels: list[int]
    truncated: bool = False
    slab_norms: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.levels or self.levels[0] != 0:
            raise ValueError("a schedule starts at level 0")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("schedule levels must be strictly increasing")

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, j):
        return self.levels[j]

    @classmethod
    def uniform(cls, stages: int, step: int = 1) -> "LevelSchedule":
        return cls([j * step for j in range(stages)])


def schedule_from_slab_norms(slab_norm: Callable[[int], float], d_max: int,
                             max_stages: int, rtol: float = 1e-9) -> LevelSchedule:
    """Halving schedule: each next level is the first whose slab norm halves.

    Halving is judged up to ``rtol`` so that an exactly proportional slab norm,
    computed by quadrature, is not pushed a level deeper by rounding.
    """
    levels = [0]
    norms = {0: slab_norm(0)}
    truncated = False
    while len(levels) < max_stages:
        cur = levels[-1]
        if norms[cur] == 0:
            nxt = cur + 1
        else:
            nxt = None
            for l in range(cur + 1, d_max + 1):
                if l not in norms:
                    norms[l] = slab_norm(l)
                if norms[l] <= 0.5 * norms[cur] * (1 + rtol):
                    nxt = l
                    break
        if nxt is None or nxt > d_max:
            truncated = True
            break
        norms.setdefault(nxt, slab_norm(nxt))
        levels.append(nxt)
    if truncated:
        warnings.warn(f"level schedule truncated at depth {d_max} after {len(levels)} stages",
                      TruncationWarning, stacklevel=2)
    return LevelSchedule(levels, truncated, [norms[l] for l in levels])


def build_lj_sequence(f, w: Weight, window: Window, max_stages: int,
                      depth: int | None = None) -> LevelSchedule:
    """Schedule driven by the weighted first-order norm of f on thin slabs."""
    from .functions import weighted_sobolev_norm

    def slab(l):
        region = (0.0, 2.0 ** -l)
        return weighted_sobolev_norm(f, w, window, order=1, t_range=region, depth=depth).value

    return schedule_from_slab_norms(slab, window.d_max, max_stages)


# -- admissible systems ------------------------------------------------------

@dataclass
class TilingSystem:
    window: Window
    stages: list[Tiling]
    selected: list[list[DyadicCube]]
    schedule: list[int]
    r: int
    q: float
    c1: float
    c2: float
    truncated: bool = False
    raw_schedule: list[int] = field(default_factory=list)
    brackets: dict[DyadicCube, int] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.stages) - 1

    @classmethod
    def from_stages(cls, window: Window, stages: Sequence[Tiling], schedule: Sequence[int],
                    q: float = 1.0, r: int = 5) -> "TilingSystem":
        selected = [select_cover(t, window) for t in stages]
        return cls(window, list(stages), selected, list(schedule), r, q, q ** 3, q ** r)

    @classmethod
    def uniform(cls, window: Window, levels: Sequence[int], q: float = 1.0,
                r: int = 5) -> "TilingSystem":
        return cls.from_stages(window, [Tiling.uniform(window, k) for k in levels], levels, q, r)


def q_bracket(value: float, q: float) -> int:
    """floor(log_q value), exact at the bracket edges q^j."""
    j = math.floor(math.log(value) / math.log(q))
    while q ** (j + 1) <= value:
        j += 1
    while q ** j > value:
        j -= 1
    return j


def build_raw_stages(scales: WeightScales, window: Window, levels: Sequence[int],
                     q: float) -> tuple[list[Tiling], dict[DyadicCube, int]]:
    """Stages of the blue/yellow subdivision, one per schedule level."""
    stage = Tiling(window, list(window.cubes_at(0)), {})
    stages = [stage]
    brackets: dict[DyadicCube, int] = {}
    for target in levels[1:]:
        if target > window.d_max or target > scales.depth:
            break
        cubes, colors = [], {}
        for cube in stage.cubes:
            j = q_bracket(scales.hat_gamma(cube.level, cube.index), q)
            ceiling = q ** (j + 1)
            todo = children_of(cube, window)
            while todo:
                child = todo.pop()
                g = scales.hat_gamma(child.level, child.index)
                if g > ceiling:
                    colors[child] = BLUE
                    brackets[child] = j
                    cubes.append(child)
                elif child.level == target:
                    colors[child] = YELLOW
                    cubes.append(child)
                else:
                    todo.extend(children_of(child, window))
        stage = Tiling(window, cubes, colors)
        stages.append(stage)
    return stages, brackets


def build_admissible_system(w: Weight, window: Window, schedule: LevelSchedule | Sequence[int],
                            q: float, r: int = 5, scales: WeightScales | None = None
                            ) -> TilingSystem:
    """Blue/yellow subdivision followed by keeping every r-th stage."""
    if r < 5:
        raise ValueError("thinning factor r must be at least 5")
    if q <= 1:
        raise ValueError("q must exceed 1")
    levels = list(schedule.levels if isinstance(schedule, LevelSchedule) else schedule)
    if scales is None:
        scales = WeightScales(w, window, min(window.d_max, max(levels)))
    raw, brackets = build_raw_stages(scales, window, levels, q)
    truncated = len(raw) < len(levels) or (isinstance(schedule, LevelSchedule)
                                           and schedule.truncated)
    kept = raw[::r]
    thinned_levels = [levels[r * s] for s in range(len(kept))]
    if truncated:
        warnings.warn(f"system truncated after {len(raw)} raw stages "
                      f"({len(kept)} thinned stages)", TruncationWarning, stacklevel=2)
    selected = [select_cover(t, window) for t in kept]
    return TilingSystem(window, kept, selected, thinned_levels, r, q, q ** 3, q ** r,
                        truncated, levels[:len(raw)], brackets)


# -- admissibility -----------------------------------------------------------

@dataclass
class ConditionResult:
    condition: int
    passed: bool
    worst: float
    bound: float
    where: str = ""


@dataclass
class AdmissibilityReport:
    results: list[ConditionResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, condition: int) -> ConditionResult:
        return self.results[condition - 1]


def _stage_raster(cubes, values, window, unit, reducer, fill):
    L2 = 2 * (window.period // unit)
    arr = np.full((L2,) * window.n, fill, dtype=float)
    for c, v in zip(cubes, values):
        box = dilate(c, window)
        idx = [np.arange(2 * lo // unit + 1, 2 * hi // unit) % L2
               for lo, hi in zip(box.lo, box.hi)]
        reducer.at(arr, np.ix_(*idx), v)
    return arr


def _find_ancestor(cube: DyadicCube, lookup: dict, min_level: int) -> DyadicCube | None:
    for lev in range(cube.level, min_level - 1, -1):
        a = ancestor_at(cube, lev)
        if a in lookup:
            return a
    return None


def check_admissible(system: TilingSystem, scales: WeightScales, c1: float | None = None,
                     c2: float | None = None, rtol: float = 1e-6) -> AdmissibilityReport:
    """Evaluate the four admissibility conditions with their worst ratios."""
    window = system.window
    c1 = system.c1 if c1 is None else c1
    c2 = system.c2 if c2 is None else c2
    kmax = max(t.max_level for t in system.stages)
    unit = 2 ** (window.d_max - kmax)

    worst1, where1 = 1.0, ""
    for s, stage in enumerate(system.stages):
        g = [scales.hat_gamma(c.level, c.index) for c in stage.cubes]
        hi = _stage_raster(stage.cubes, g, window, unit, np.maximum, 0.0)
        lo = _stage_raster(stage.cubes, g, window, unit, np.minimum, np.inf)
        ratio = float(np.max(hi / lo))
        if ratio > worst1:
            worst1, where1 = ratio, f"stage {s}"
    res1 = ConditionResult(1, worst1 <= c1 * (1 + rtol), worst1, c1, where1)

    worst2, where2 = 1.0, ""
    orphan = ""
    for s in range(len(system.stages) - 1):
        coarse = {c: scales.hat_gamma(c.level, c.index) for c in system.stages[s].cubes}
        min_level = min(c.level for c in coarse)
        for c in system.stages[s + 1].cubes:
            a = _find_ancestor(c, coarse, min_level)
            if a is None:
                orphan = f"stage {s + 1} cube {c} has no ancestor in stage {s}"
                continue
            g = scales.hat_gamma(c.level, c.index)
            ratio = max(g / coarse[a], coarse[a] / g)
            if ratio > worst2:
                worst2, where2 = ratio, f"stage {s + 1} cube {c.level},{c.index}"
    res2 = ConditionResult(2, worst2 <= c2 * (1 + rtol) and not orphan, worst2, c2,
                           orphan or where2)

    worst3, where3 = 0.0, ""
    for s in range(len(system.stages) - 1):
        a, b = system.stages[s], system.stages[s + 1]
        min_side = _stage_raster(a.cubes, [2.0 ** -c.level for c in a.cubes], window, unit,
                                 np.minimum, np.inf)
        max_side = _stage_raster(b.cubes, [2.0 ** -c.level for c in b.cubes], window, unit,
                                 np.maximum, 0.0)
        ratio = float(np.max(max_side / min_side))
        if ratio > worst3:
            worst3, where3 = ratio, f"stages {s},{s + 1}"
    res3 = ConditionResult(3, worst3 <= 0.5, worst3, 0.5, where3)

    bad4 = ""
    worst4 = 0.0
    for s, stage in enumerate(system.stages):
        deepest = stage.max_level
        if s < len(system.schedule):
            worst4 = max(worst4, 2.0 ** (deepest - system.schedule[s]))
            if deepest > system.schedule[s] and not bad4:
                bad4 = f"stage {s} reaches level {deepest} > {system.schedule[s]}"
    res4 = ConditionResult(4, not bad4, worst4, 1.0, bad4)
    return AdmissibilityReport([res1, res2, res3, res4])


def succession_holds(system: TilingSystem) -> bool:
    """Every cube of each stage lies inside a cube of the previous stage."""
    for s in range(len(system.stages) - 1):
        coarse = set(system.stages[s].cubes)
        min_level = min(c.level for c in coarse)
        if any(_find_ancestor(c, coarse, min_level) is None for c in system.stages[s + 1].cubes):
            return False
    return True
