"""Tensor Gauss-Legendre rules with dimension-adaptive bisection."""
from __future__ import annotations

import heapq
import itertools
from functools import lru_cache
from typing import Callable

import numpy as np


class QuadratureFailure(RuntimeError):
    """The adaptive rule did not reach its tolerance within the cell budget."""


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _tensor_rule(order: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    pts = np.array(list(itertools.product(x, repeat=d)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return pts, wts


def tensor_gauss(fn: Callable[[np.ndarray], np.ndarray], lo, hi, order: int = 6) -> float:
    """Non-adaptive tensor rule on the box [lo, hi]."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    pts, wts = _tensor_rule(order, len(lo))
    vol = np.prod(hi - lo)
    return float(vol * np.dot(wts, fn(lo + pts * (hi - lo))))


class _Cell:
    __slots__ = ("lo", "hi", "estimate", "error", "axis")


def adaptive_integral(fn: Callable[[np.ndarray], np.ndarray], lo, hi, rtol: float = 1e-8,
                      atol: float = 0.0, order: int = 5, max_cells: int = 20000) -> float:
    """Integrate ``fn`` (points of shape (N, d) -> values (N,)) over a box.

    Each cell is compared against its two halves along every axis; the axis
    with the largest discrepancy is the one split when the cell is refined.
    Refinement always targets the cell with the largest error estimate.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    d = len(lo)
    pts, wts = _tensor_rule(order, d)
    npts = len(pts)

    def evaluate(clo, chi):
        width = chi - clo
        blocks = [clo + pts * width]
        for a in range(d):
            half = width.copy()
            half[a] *= 0.5
            blocks.append(clo + pts * half)
            shifted = clo.copy()
            shifted[a] += half[a]
            blocks.append(shifted + pts * half)
        vals = fn(np.concatenate(blocks))
        if not np.all(np.isfinite(vals)):
            raise QuadratureFailure("integrand returned non-finite values")
        vol = np.prod(width)
        sums = vals.reshape(-1, npts) @ wts
        whole = vol * sums[0]
        halves = 0.5 * vol * (sums[1::2] + sums[2::2])
        diffs = np.abs(halves - whole)
        cell = _Cell()
        cell.lo, cell.hi = clo, chi
        cell.axis = int(np.argmax(diffs))
        cell.estimate = float(halves[cell.axis])
        cell.error = float(diffs[cell.axis])
        return cell

    root = evaluate(lo, hi)
    heap = [(-root.error, 0, root)]
    total, err = root.estimate, root.error
    counter = 1
    while err > max(rtol * abs(total), atol):
        if counter >= max_cells:
            raise QuadratureFailure(
                f"no convergence after {max_cells} cells (estimate {total:.6g}, error {err:.3g})")
        _, _, cell = heapq.heappop(heap)
        total -= cell.estimate
        err -= cell.error
        a = cell.axis
        mid = 0.5 * (cell.lo[a] + cell.hi[a])
        left_hi = cell.hi.copy()
        left_hi[a] = mid
        right_lo = cell.lo.copy()
        right_lo[a] = mid
        for child in (evaluate(cell.lo, left_hi), evaluate(right_lo, cell.hi)):
            total += child.estimate
            err += child.error
            heapq.heappush(heap, (-child.error, counter, child))
            counter += 1
        # guard against drift in the running sums
        if counter % 512 == 0:
            total = sum(c.estimate for _, _, c in heap)
            err = sum(c.error for _, _, c in heap)
    return total


def graded_slabs(t_top: float, levels: int) -> list[tuple[float, float]]:
    """Dyadic slabs (t_top 2^-j-1, t_top 2^-j) for j = 0..levels-1, top first."""
    return [(t_top * 2.0 ** -(j + 1), t_top * 2.0 ** -j) for j in range(levels)]
