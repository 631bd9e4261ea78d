"""Variable-smoothness Besov-type norm and the stage functional of a tiling system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import (GridFunction, NormReport, best_l1_poly_error, delta_modulus_level,
                        mean_oscillation)
from .geometry import ResolutionError, dilate
from .tilings import TilingSystem, check_admissible
from .weights import WeightScales


class InadmissibleSystem(ValueError):
    """The tiling system fails one of the admissibility conditions."""


@dataclass(frozen=True)
class BesovParams:
    l: int = 2
    k_max: int = 4
    variant: str = "delta"

    def __post_init__(self):
        if self.l not in (1, 2, 3):
            raise ValueError("l must be 1, 2 or 3")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.variant not in ("delta", "E_l"):
            raise ValueError("variant is 'delta' or 'E_l'")


def unit_cube_l1(phi: GridFunction) -> np.ndarray:
    """L1 norm of phi on each unit cube, shape (M,)*n."""
    n = phi.window.n
    M = phi.window.M
    N = 2 ** phi.depth
    shp = []
    for _ in range(n):
        shp += [M, N]
    return np.abs(phi.values).reshape(shp).sum(axis=tuple(range(1, 2 * n, 2))) * phi.pitch ** n


def besov_variable_norm(phi: GridFunction, scales: WeightScales, params: BesovParams
                        ) -> NormReport:
    """Level-0 weighted L1 term plus weighted difference moduli for levels 1..k_max.

    One breakdown row per (k, m); the level-k_max total is the tail estimate.
    """
    if params.k_max > scales.depth:
        raise ValueError(f"scale table stops at level {scales.depth} < k_max={params.k_max}")
    if params.k_max > phi.depth:
        raise ResolutionError("k_max finer than the sampling grid")
    n = phi.window.n
    terms = _cube_rows("level0", scales.integral[0] * unit_cube_l1(phi))
    last = 0.0
    for k in range(1, params.k_max + 1):
        g3 = scales.gamma3(k, params.l)
        if params.variant == "delta":
            mod = delta_modulus_level(phi, k, params.l)
        else:
            mod = np.zeros_like(g3)
            side = 2.0 ** -k
            for m in np.ndindex(*g3.shape):
                lo = (np.asarray(m) - 0.5) * side
                hi = lo + 2 * side
                mod[m] = 2.0 ** (k * n) * best_l1_poly_error(phi, lo, hi, params.l)
        rows = _cube_rows(f"level{k}", g3 * mod)
        last = sum(v for _, v in rows)
        terms += rows
    return NormReport.from_terms(terms, truncation_level=params.k_max,
                                 refinement_delta=last, name="besov")


def _cube_rows(prefix: str, values: np.ndarray) -> list[tuple[str, float]]:
    return [(f"{prefix} m={','.join(map(str, m))}", float(values[m]))
            for m in np.ndindex(*values.shape)]


def _stage_rows(s: int, cubes, values) -> list[tuple[str, float]]:
    return [(f"stage{s} k={c.level} m={','.join(map(str, c.index))}", float(v))
            for c, v in zip(cubes, values)]


def _require_admissible(system: TilingSystem, scales: WeightScales):
    rep = check_admissible(system, scales)
    if not rep.passed:
        bad = [r for r in rep.results if not r.passed][0]
        raise InadmissibleSystem(f"condition {bad.condition} fails: worst {bad.worst:.6g} "
                                 f"vs bound {bad.bound:.6g} ({bad.where})")


def _level0_rows(phi: GridFunction, scales: WeightScales) -> list[tuple[str, float]]:
    return _cube_rows("level0", scales.hat[0] * unit_cube_l1(phi))


def z_functional(phi: GridFunction, system: TilingSystem, scales: WeightScales,
                 check: bool = True) -> NormReport:
    """Level-0 weighted L1 term plus, for every later stage, the mean weight of
    each selected cube times the best constant L1 error on its dilation."""
    if check:
        _require_admissible(system, scales)
    win = system.window
    terms = _level0_rows(phi, scales)
    last = 0.0
    for s in range(1, len(system.stages)):
        vals = []
        for c in system.selected[s]:
            lo, hi = dilate(c, win).real_bounds()
            vals.append(scales.hat_gamma(c.level, c.index) * best_l1_poly_error(phi, lo, hi, 1))
        terms += _stage_rows(s, system.selected[s], vals)
        last = float(sum(vals))
    return NormReport.from_terms(terms, truncation_level=len(system.stages) - 1,
                                 refinement_delta=last, name="z")


def z_functional_min(phi: GridFunction, systems, scales: WeightScales,
                     check: bool = True) -> NormReport:
    """Smallest functional value over a library of systems."""
    reports = [z_functional(phi, s, scales, check) for s in systems]
    return min(reports, key=lambda r: r.value)


def trace_side(phi: GridFunction, system: TilingSystem, scales: WeightScales) -> NormReport:
    """Level-0 weighted L1 term plus weighted mean oscillations over selected dilations.

    This is the left side of the trace estimate for the system built from f.
    """
    win = system.window
    terms = _level0_rows(phi, scales)
    for s in range(1, len(system.stages)):
        vals = []
        for c in system.selected[s]:
            lo, hi = dilate(c, win).real_bounds()
            vals.append(scales.hat_gamma(c.level, c.index) * mean_oscillation(phi, lo, hi))
        terms += _stage_rows(s, system.selected[s], vals)
    return NormReport.from_terms(terms, truncation_level=len(system.stages) - 1, name="trace-side")
