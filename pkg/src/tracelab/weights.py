"""Locally integrable weights on the upper half-space and their dyadic scales.

Weights are periodic in x with the window period.  Every built-in weight
provides vectorized closed-form box integrals and essential infima; arbitrary
callables fall back to adaptive quadrature.  Negative t is handled by even
reflection, so boxes that straddle t = 0 are allowed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import SpaceTimeBox, Window
from .quadrature import adaptive_integral


class WeightMisdeclared(ValueError):
    """A measured local A1 constant exceeds the constant the weight declares."""


def _as_rows(a, n):
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, n)


class Weight:
    """Base class: gamma(x, t) >= 0 with optional closed forms."""

    name = "weight"
    declared_c: float | None = None
    x_independent = False

    def __call__(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_integral(self, lo, hi, t0, t1):
        """Integral over boxes given as arrays (N, n), (N, n), (N,), (N,); None if unknown."""
        return None

    def exact_essinf(self, lo, hi, t0, t1):
        return None

    def jumps(self, lo, hi, t0: float, t1: float) -> list[np.ndarray]:
        """Coordinates of jump hyperplanes strictly inside one box, per axis (x axes, then t)."""
        return [np.empty(0)] * (len(lo) + 1)

    @property
    def has_exact(self) -> bool:
        return type(self).exact_integral is not Weight.exact_integral

    def t_integral(self, x: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Integral in t over (t0, t1) at each point of x (shape (N, n))."""
        x = np.atleast_2d(x)
        out = np.empty(len(x))
        for i, xi in enumerate(x):
            out[i] = adaptive_integral(
                lambda s: self(np.broadcast_to(xi, (len(s), len(xi))), s[:, 0]),
                [t0], [t1], rtol=1e-9)
        return out


@dataclass
class ConstantWeight(Weight):
    value: float = 1.0
    name: str = "constant"

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("constant weight must be positive")
        self.declared_c = 1.0
        self.x_independent = True

    def __call__(self, x, t):
        return np.full(np.shape(t), self.value, dtype=float)

    def exact_integral(self, lo, hi, t0, t1):
        return self.value * np.prod(np.asarray(hi) - np.asarray(lo), axis=-1) * (
            np.asarray(t1) - np.asarray(t0))

    def exact_essinf(self, lo, hi, t0, t1):
        return np.full(np.shape(t0), self.value, dtype=float)

    def t_integral(self, x, t0, t1):
        return np.full(len(np.atleast_2d(x)), self.value * (t1 - t0))


def _power_antiderivative(t, alpha):
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** (1.0 - alpha) / (1.0 - alpha)


def _power_essinf(t0, t1, alpha):
    if alpha == 0:
        return np.ones(np.shape(t0))
    far = np.maximum(np.abs(t0), np.abs(t1))
    return far ** (-alpha)


@dataclass
class PowerWeight(Weight):
    """scale * |t|^-alpha with 0 <= alpha < 1."""

    alpha: float = 0.5
    scale: float = 1.0
    name: str = "power"

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        self.declared_c = 1.0 / (1.0 - self.alpha)
        self.x_independent = True

    def __call__(self, x, t):
        return self.scale * np.abs(np.asarray(t, dtype=float)) ** (-self.alpha)

    def exact_integral(self, lo, hi, t0, t1):
        vol = np.prod(np.asarray(hi) - np.asarray(lo), axis=-1)
        return self.scale * vol * (_power_antiderivative(t1, self.alpha)
                                   - _power_antiderivative(t0, self.alpha))

    def exact_essinf(self, lo, hi, t0, t1):
        return self.scale * _power_essinf(np.asarray(t0), np.asarray(t1), self.alpha)

    def t_integral(self, x, t0, t1):
        v = self.scale * (_power_antiderivative(t1, self.alpha)
                          - _power_antiderivative(t0, self.alpha))
        return np.full(len(np.atleast_2d(x)), float(v))


def _periodic_coverage(lo, hi, cell, count):
    """Measure of [lo, hi) inside each residue class of cells, shape (N, count)."""
    period = cell * count
    idx = np.arange(count)

    def antider(x):
        x = np.asarray(x, dtype=float)[:, None]
        whole = np.floor(x / period)
        rest = x - whole * period
        return whole * cell + np.clip(rest - idx * cell, 0.0, cell)

    return antider(hi) - antider(lo)


def _contract(values, covers):
    """Sum of values[i1..in] * prod_a covers[a][:, ia] for each row."""
    letters = "abcdefgh"[: len(covers)]
    spec = ",".join("z" + c for c in letters) + "," + letters + "->z"
    return np.einsum(spec, *covers, values)


def _masked_min(values, masks):
    full = np.ones((len(masks[0]),) + values.shape, dtype=bool)
    for a, m in enumerate(masks):
        shape = [len(m)] + [1] * values.ndim
        shape[a + 1] = m.shape[1]
        full &= m.reshape(shape)
    return np.where(full, values[None], np.inf).reshape(len(masks[0]), -1).min(axis=1)


@dataclass
class StepPowerWeight(Weight):
    """w(x) * scale * |t|^-alpha with w a periodic positive step function.

    ``values`` has shape (p,)*n and holds w on cells of side ``cell``; w is
    periodic with period p * cell in every coordinate.
    """

    values: np.ndarray = field(default_factory=lambda: np.array([1.0, 4.0]))
    cell: float = 0.5
    alpha: float = 0.5
    scale: float = 1.0
    name: str = "step-power"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values <= 0):
            raise ValueError("step values must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if len(set(self.values.shape)) != 1:
            raise ValueError("step values must have equal extent along every axis")
        self.declared_c = float(self.values.max() / self.values.min()) / (1.0 - self.alpha)

    @property
    def n(self) -> int:
        return self.values.ndim

    def step(self, x):
        x = _as_rows(x, self.n)
        p = self.values.shape[0]
        idx = tuple(np.floor(x[:, a] / self.cell).astype(int) % p for a in range(self.n))
        return self.values[idx]

    def __call__(self, x, t):
        t = np.asarray(t, dtype=float)
        w = self.step(x).reshape(t.shape)
        return w * self.scale * np.abs(t) ** (-self.alpha)

    def _covers(self, lo, hi):
        lo = _as_rows(lo, self.n)
        hi = _as_rows(hi, self.n)
        p = self.values.shape[0]
        return [_periodic_coverage(lo[:, a], hi[:, a], self.cell, p) for a in range(self.n)]

    def exact_integral(self, lo, hi, t0, t1):
        xpart = _contract(self.values, self._covers(lo, hi))
        return self.scale * xpart * (_power_antiderivative(t1, self.alpha)
                                     - _power_antiderivative(t0, self.alpha))

    def exact_essinf(self, lo, hi, t0, t1):
        masks = [c > 0 for c in self._covers(lo, hi)]
        return self.scale * _masked_min(self.values, masks) * _power_essinf(
            np.asarray(t0), np.asarray(t1), self.alpha)

    def jumps(self, lo, hi, t0, t1):
        return [_grid_lines(a, b, self.cell) for a, b in zip(lo, hi)] + [np.empty(0)]

    def t_integral(self, x, t0, t1):
        return self.step(x) * self.scale * (_power_antiderivative(t1, self.alpha)
                                            - _power_antiderivative(t0, self.alpha))


def _grid_lines(a: float, b: float, step: float) -> np.ndarray:
    """Multiples of step strictly between a and b."""
    k = np.arange(np.floor(a / step) + 1, np.ceil(b / step))
    return k * step


def _t_cell_coverage(t0, t1, count):
    """Measure of (t0, t1) in each unit t-cell, the last cell unbounded, |t| reflected."""
    idx = np.arange(count)

    def antider(t):
        t = np.asarray(t, dtype=float)[:, None]
        a = np.abs(t)
        part = np.clip(a - idx, 0.0, 1.0)
        part[:, -1] = np.maximum(a[:, 0] - (count - 1), 0.0)
        return np.sign(t) * part

    return antider(t1) - antider(t0)


@dataclass
class UnitCellWeight(Weight):
    """Piecewise constant on unit cells of the window times unit t-intervals.

    ``values`` has shape (M,)*n + (T,); the last t-cell extends upward.
    """

    values: np.ndarray = field(default_factory=lambda: np.array([[1.0, 2.0], [3.0, 1.5]]))
    name: str = "unit-cell"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values <= 0):
            raise ValueError("cell values must be positive")
        self.declared_c = float(self.values.max() / self.values.min())

    @property
    def n(self) -> int:
        return self.values.ndim - 1

    def _cell_index(self, x, t):
        x = _as_rows(x, self.n)
        t = np.abs(np.asarray(t, dtype=float)).reshape(-1)
        idx = [np.floor(x[:, a]).astype(int) % self.values.shape[a] for a in range(self.n)]
        idx.append(np.minimum(np.floor(t).astype(int), self.values.shape[-1] - 1))
        return tuple(idx)

    def __call__(self, x, t):
        t = np.asarray(t, dtype=float)
        return self.values[self._cell_index(x, t)].reshape(t.shape)

    def _covers(self, lo, hi, t0, t1):
        lo = _as_rows(lo, self.n)
        hi = _as_rows(hi, self.n)
        covers = [_periodic_coverage(lo[:, a], hi[:, a], 1.0, self.values.shape[a])
                  for a in range(self.n)]
        covers.append(_t_cell_coverage(np.ravel(t0), np.ravel(t1), self.values.shape[-1]))
        return covers

    def exact_integral(self, lo, hi, t0, t1):
        return _contract(self.values, self._covers(lo, hi, t0, t1))

    def exact_essinf(self, lo, hi, t0, t1):
        masks = [c != 0 for c in self._covers(lo, hi, t0, t1)]
        return _masked_min(self.values, masks)

    def jumps(self, lo, hi, t0, t1):
        T = self.values.shape[-1]
        t_lines = np.arange(-(T - 1), T).astype(float)
        t_lines = t_lines[(t_lines > t0) & (t_lines < t1) & (t_lines != 0)]
        return [_grid_lines(a, b, 1.0) for a, b in zip(lo, hi)] + [t_lines]

    def t_integral(self, x, t0, t1):
        x = _as_rows(x, self.n)
        idx = [np.floor(x[:, a]).astype(int) % self.values.shape[a] for a in range(self.n)]
        cov = _t_cell_coverage(np.array([t0]), np.array([t1]), self.values.shape[-1])[0]
        return self.values[tuple(idx)] @ cov


class FunctionWeight(Weight):
    """An arbitrary callable gamma(x, t); integrals go through quadrature."""

    def __init__(self, fn: Callable, name: str = "function", declared_c: float | None = None):
        self.fn = fn
        self.name = name
        self.declared_c = declared_c

    def __call__(self, x, t):
        return self.fn(x, t)


def clipped_exponential_weight(cap: float = 1e12, declared_c: float = 4.0) -> FunctionWeight:
    """min(exp(1/|t|), cap): integrable but far from any reasonable A1 class."""
    log_cap = np.log(cap)

    def fn(x, t):
        a = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp(np.minimum(1.0 / np.maximum(a, 1e-300), log_cap))

    return FunctionWeight(fn, name="clipped-exp", declared_c=declared_c)


# -- box integrals and averages ---------------------------------------------

def _box_arrays(box: SpaceTimeBox):
    return (np.asarray([box.lo], float), np.asarray([box.hi], float),
            np.asarray([box.t0], float), np.asarray([box.t1], float))


def quadrature_integral(w: Weight, box: SpaceTimeBox, rtol: float = 1e-8) -> float:
    """Adaptive tensor Gauss integral of w over the box, ignoring closed forms."""
    n = box.n
    lo = [float(v) for v in box.lo] + [float(box.t0)]
    hi = [float(v) for v in box.hi] + [float(box.t1)]
    cuts = [list(j) for j in w.jumps(lo[:n], hi[:n], lo[n], hi[n])]
    if lo[n] < 0 < hi[n]:
        # keep the t = 0 singularity on a cell boundary
        cuts[n].append(0.0)
    # integrate piece by piece so that no Gauss cell straddles a jump
    edges = [np.unique([a, *c, b]) for a, b, c in zip(lo, hi, cuts)]
    total = 0.0
    for piece in itertools.product(*[range(len(e) - 1) for e in edges]):
        plo = [e[i] for e, i in zip(edges, piece)]
        phi = [e[i + 1] for e, i in zip(edges, piece)]
        total += adaptive_integral(lambda p: w(p[:, :n], p[:, n]), plo, phi, rtol=rtol,
                                   max_cells=40000)
    return total


def box_integral(w: Weight, box: SpaceTimeBox, exact: bool = True) -> float:
    if exact and w.has_exact:
        return float(w.exact_integral(*_box_arrays(box))[0])
    return quadrature_integral(w, box)


def box_average(w: Weight, box: SpaceTimeBox, exact: bool = True) -> float:
    """Mean of w over the box; closed form when available, else quadrature."""
    vol = box.volume()
    if vol <= 0:
        raise ValueError("box has zero volume")
    return box_integral(w, box, exact) / vol


def essinf(w: Weight, box: SpaceTimeBox, resolution: int = 8) -> tuple[float, bool]:
    """Essential infimum over the open box and whether it is certified exact.

    Without a closed form the value is the minimum over successively finer
    sample grids, stopping once two refinements agree to 1e-3.
    """
    if w.has_exact:
        return float(w.exact_essinf(*_box_arrays(box))[0]), True
    n = box.n
    lo = np.array(list(box.lo) + [box.t0])
    hi = np.array(list(box.hi) + [box.t1])
    prev = np.inf
    res = resolution
    for _ in range(6):
        axes = [lo[a] + (np.arange(res) + 0.5) / res * (hi[a] - lo[a]) for a in range(n + 1)]
        pts = np.array(list(itertools.product(*axes)))
        cur = float(np.min(w(pts[:, :n], pts[:, n])))
        if np.isfinite(prev) and abs(cur - prev) <= 1e-3 * abs(prev):
            return cur, False
        prev = cur
        res *= 2
    return prev, False


# -- dyadic scan helpers -----------------------------------------------------

def _level_boxes(window: Window, k: int, t_cells: int | None = None):
    """All dyadic (n+1)-cubes of side 2^-k in window x (0, T), as arrays."""
    side = 2.0 ** -k
    p = window.cells_per_axis(k)
    nt = window.T * 2 ** k if t_cells is None else t_cells
    grids = np.meshgrid(*([np.arange(p)] * window.n), np.arange(nt), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    lo = idx[:, :-1] * side
    return lo, lo + side, idx[:, -1] * side, (idx[:, -1] + 1) * side


def _integrals(w: Weight, lo, hi, t0, t1):
    if w.has_exact:
        return np.asarray(w.exact_integral(lo, hi, t0, t1), float)
    return np.array([quadrature_integral(w, SpaceTimeBox(tuple(a), tuple(b), c, d))
                     for a, b, c, d in zip(lo, hi, t0, t1)])


def _essinfs(w: Weight, lo, hi, t0, t1):
    if w.has_exact:
        return np.asarray(w.exact_essinf(lo, hi, t0, t1), float)
    return np.array([essinf(w, SpaceTimeBox(tuple(a), tuple(b), c, d))[0]
                     for a, b, c, d in zip(lo, hi, t0, t1)])


def empirical_a1(w: Weight, window: Window, depth: int) -> float:
    """Largest ratio of box average to essential infimum over dyadic cubes."""
    worst = 1.0
    for k in range(depth + 1):
        lo, hi, t0, t1 = _level_boxes(window, k)
        vol = 2.0 ** (-k * (window.n + 1))
        ratio = _integrals(w, lo, hi, t0, t1) / vol / _essinfs(w, lo, hi, t0, t1)
        worst = max(worst, float(np.max(ratio)))
    return worst


def a1loc_constant(w: Weight, window: Window, depth: int, rtol: float = 1e-9) -> float:
    """Local A1 constant over dyadic cubes of side <= 1 down to ``depth``.

    Raises WeightMisdeclared when the measured value exceeds the declared one.
    """
    c = empirical_a1(w, window, depth)
    if w.declared_c is not None and c > w.declared_c * (1 + rtol):
        raise WeightMisdeclared(
            f"{w.name}: measured A1 constant {c:.6g} exceeds declared {w.declared_c:.6g}")
    return c


class WeightScales:
    """Per-level tables of box integrals over Q_{k,m} x (0, 2^-k).

    ``integral[k]`` and ``hat[k]`` are arrays of shape (M 2^k,)*n.  ``hat`` is
    the mean value and equals the integral divided by 2^-k(n+1).
    """

    def __init__(self, w: Weight, window: Window, depth: int | None = None):
        self.weight = w
        self.window = window
        self.depth = window.d_max if depth is None else depth
        self.integral: list[np.ndarray] = []
        self.hat: list[np.ndarray] = []
        for k in range(self.depth + 1):
            lo, hi, t0, t1 = _level_boxes(window, k, t_cells=1)
            shape = (window.cells_per_axis(k),) * window.n
            vals = _integrals(w, lo, hi, t0, t1).reshape(shape)
            self.integral.append(vals)
            self.hat.append(vals / 2.0 ** (-k * (window.n + 1)))

    def hat_gamma(self, k: int, m) -> float:
        return float(self.hat[k][tuple(np.asarray(m) % self.hat[k].shape[0])])

    def gamma_integral(self, k: int, m) -> float:
        return float(self.integral[k][tuple(np.asarray(m) % self.integral[k].shape[0])])

    def gamma3(self, k: int, l: int) -> np.ndarray:
        """2^{kl} times the integral over Q_{k,m} x (0, 2^-k), for all m."""
        return 2.0 ** (k * l) * self.integral[k]


@dataclass(frozen=True)
class QParameters:
    qtilde: float
    q: float
    c_gamma: float
    safety: float = 2.0

    @property
    def q_construction(self) -> float:
        """q recomputed with the safety factor applied to qtilde."""
        return self.q * self.safety


def _neighbour_offsets(n: int, reach: int):
    return list(itertools.product(range(-reach, reach + 1), repeat=n))


def q_parameters(w: Weight, window: Window, depth: int, scales: WeightScales | None = None,
                 c_gamma: float | None = None) -> QParameters:
    """Comparability constant qtilde and q = 16 qtilde C 2^(n+1).

    qtilde is the smallest C >= 1 such that the mean of w over 8Q x (0, r)
    is at most C times the mean over Q' x (0, r) for every level-k cube Q'
    inside 8Q, measured for levels 0..depth.
    """
    n = window.n
    if scales is None or scales.depth < depth:
        scales = WeightScales(w, window, depth)
    if c_gamma is None:
        c_gamma = w.declared_c if w.declared_c is not None else empirical_a1(w, window, depth)
    qt = 1.0
    for k in range(depth + 1):
        r = 2.0 ** -k
        p = window.cells_per_axis(k)
        grids = np.meshgrid(*([np.arange(p)] * n), indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1).astype(float)
        lo = (idx - 3.5) * r
        hi = (idx + 4.5) * r
        t0 = np.zeros(len(idx))
        big = _integrals(w, lo, hi, t0, t0 + r) / (8.0 ** n * r ** (n + 1))
        hat = scales.hat[k]
        for off in _neighbour_offsets(n, 3):
            shifted = np.roll(hat, shift=[-o for o in off], axis=tuple(range(n))).ravel()
            qt = max(qt, float(np.max(big / shifted)))
    q = 16.0 * qt * c_gamma * 2 ** (n + 1)
    return QParameters(qt, q, c_gamma)


# -- structural inequalities -------------------------------------------------

@dataclass
class InequalityCheck:
    name: str
    worst_ratio: float
    passed: bool
    detail: str = ""


@dataclass
class A1Report:
    weight: str
    c_gamma: float
    checks: list[InequalityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[InequalityCheck]:
        return [c for c in self.checks if not c.passed]


def _ratio_check(name, ratios, tol=1e-9, detail=""):
    worst = float(np.max(ratios)) if np.size(ratios) else 0.0
    return InequalityCheck(name, worst, worst <= 1 + tol, detail)


def verify_a1_inequalities(w: Weight, window: Window, depth: int,
                           c_gamma: float | None = None) -> A1Report:
    """Check the structural consequences of the local A1 condition.

    Each entry reports the worst ratio of left side to right side; a ratio
    above one (beyond rounding) is a failure.  Nothing is raised.
    """
    n = window.n
    d = n + 1
    checks: list[InequalityCheck] = []
    try:
        emp = a1loc_constant(w, window, depth)
        checks.append(InequalityCheck("a1loc", emp / (w.declared_c or emp), True))
    except WeightMisdeclared as exc:
        emp = empirical_a1(w, window, depth)
        checks.append(InequalityCheck("a1loc", emp / w.declared_c, False, str(exc)))
    C = c_gamma if c_gamma is not None else (w.declared_c or emp)
    K = 2.0 ** d * C

    halving, adjacent_inf, adjacent_int, dilation = [], [], [], []
    for k in range(depth + 1):
        lo, hi, t0, t1 = _level_boxes(window, k)
        side = 2.0 ** -k
        p = window.cells_per_axis(k)
        nt = window.T * 2 ** k
        shape = (p,) * n + (nt,)
        ints = _integrals(w, lo, hi, t0, t1).reshape(shape)
        infs = _essinfs(w, lo, hi, t0, t1).reshape(shape)
        # every half-side dyadic subcube
        if k < depth:
            clo, chi, ct0, ct1 = _level_boxes(window, k + 1)
            child = _integrals(w, clo, chi, ct0, ct1).reshape((2 * p,) * n + (2 * nt,))
            parent = ints
            for off in itertools.product((0, 1), repeat=d):
                sub = child[tuple(slice(o, None, 2) for o in off)]
                halving.append((parent / sub / K).ravel())
        if k >= 1:
            for off in itertools.product((-1, 0, 1), repeat=d):
                if not any(off):
                    continue
                if off[-1] == 0:
                    other_int = np.roll(ints, shift=off[:-1], axis=tuple(range(n)))
                    other_inf = np.roll(infs, shift=off[:-1], axis=tuple(range(n)))
                    sl = (slice(None),) * d
                else:
                    other_int = np.roll(ints, shift=off, axis=tuple(range(d)))
                    other_inf = np.roll(infs, shift=off, axis=tuple(range(d)))
                    # drop pairs that wrapped around in t
                    sl = (slice(None),) * n + ((slice(1, None) if off[-1] > 0 else slice(0, -1)),)
                adjacent_inf.append((infs[sl] / other_inf[sl] / K).ravel())
                adjacent_int.append((ints[sl] / other_int[sl] / K).ravel())
            # concentric doubling, reflected evenly across t = 0
            c = 0.5 * side
            big = _integrals(w, lo - c, hi + c, t0 - c, t1 + c)
            dilation.append((big / ints.ravel() / K))
    checks.append(_ratio_check("halving", np.concatenate(halving) if halving else [],
                               detail="integral over Q <= 2^(n+1) C times any half-side subcube"))
    checks.append(_ratio_check("adjacent-essinf", np.concatenate(adjacent_inf) if adjacent_inf else []))
    checks.append(_ratio_check("adjacent-integral", np.concatenate(adjacent_int) if adjacent_int else []))
    checks.append(_ratio_check("doubling", np.concatenate(dilation) if dilation else []))

    # side-2 cubes: mean against essinf, via a chain of unit-cube comparisons
    lo, hi, t0, t1 = _level_boxes(window, 0)
    sel = np.all(lo % 2 == 0, axis=1) & (t0 % 2 == 0)
    lo, t0 = lo[sel], t0[sel]
    big_ints = _integrals(w, lo, lo + 2.0, t0, t0 + 2.0) / 2.0 ** d
    big_infs = _essinfs(w, lo, lo + 2.0, t0, t0 + 2.0)
    bound = C * K ** (2 * d)
    checks.append(_ratio_check("side-two", big_ints / big_infs / bound))

    # comparability of neighbouring and nested box means, with q from C
    qp = q_parameters(w, window, depth, c_gamma=C)
    scales = WeightScales(w, window, depth)
    half_q = qp.q / 2
    neigh, nest = [], []
    for k in range(depth + 1):
        hat = scales.hat[k]
        for off in itertools.product((-1, 0, 1), repeat=n):
            if any(off):
                other = np.roll(hat, shift=off, axis=tuple(range(n)))
                neigh.append((hat / other / half_q).ravel())
        if k < depth:
            fine = scales.hat[k + 1]
            for off in itertools.product((0, 1), repeat=n):
                sub = fine[tuple(slice(o, None, 2) for o in off)]
                nest.append((sub / hat / half_q).ravel())
                nest.append((hat / sub / half_q).ravel())
    checks.append(_ratio_check("neighbour-means", np.concatenate(neigh) if neigh else []))
    checks.append(_ratio_check("nested-means", np.concatenate(nest) if nest else []))
    return A1Report(w.name, C, checks)
