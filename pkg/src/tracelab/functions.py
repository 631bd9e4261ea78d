"""Sampled boundary functions, half-space functions and their basic functionals."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .geometry import DyadicCube, ResolutionError, Window
from .quadrature import gauss_legendre
from .weights import Weight


# -- reports -----------------------------------------------------------------

@dataclass
class NormReport:
    """A norm value with its per-term breakdown."""

    value: float
    breakdown: list[tuple[str, float]] = field(default_factory=list)
    truncation_level: int | None = None
    refinement_delta: float | None = None
    name: str = "norm"

    def __post_init__(self):
        total = float(sum(v for _, v in self.breakdown))
        if self.breakdown and abs(total - self.value) > 1e-12 * max(1.0, abs(total)):
            raise ValueError("breakdown does not sum to the reported value")

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[str, float]], **kw) -> "NormReport":
        terms = [(k, float(v)) for k, v in terms]
        return cls(float(sum(v for _, v in terms)), terms, **kw)

    def term(self, label: str) -> float:
        return sum(v for k, v in self.breakdown if k == label)

    def group(self, prefix: str) -> float:
        """Total of the rows whose label starts with the given first word."""
        return sum(v for k, v in self.breakdown if k.split()[0] == prefix)

    def groups(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for k, v in self.breakdown:
            head = k.split()[0]
            out[head] = out.get(head, 0.0) + v
        return out


# -- boundary functions on the grid -----------------------------------------

@dataclass
class GridFunction:
    """Values on the cells of pitch 2^-depth covering the window (cell centres)."""

    window: Window
    depth: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        N = self.window.M * 2 ** self.depth
        if self.values.shape != (N,) * self.window.n:
            raise ValueError(f"expected shape {(N,) * self.window.n}, got {self.values.shape}")

    @property
    def pitch(self) -> float:
        return 2.0 ** -self.depth

    @property
    def shape(self):
        return self.values.shape

    def centers(self) -> np.ndarray:
        N = self.values.shape[0]
        c = (np.arange(N) + 0.5) * self.pitch
        grids = np.meshgrid(*([c] * self.window.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], window: Window,
                      depth: int) -> "GridFunction":
        N = window.M * 2 ** depth
        c = (np.arange(N) + 0.5) * 2.0 ** -depth
        grids = np.meshgrid(*([c] * window.n), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return cls(window, depth, np.asarray(fn(pts), float).reshape((N,) * window.n))

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.pitch ** self.window.n)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.window, self.depth, self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.window, self.depth, self.values * c)

    __rmul__ = __mul__

    def coarsen(self, depth: int) -> "GridFunction":
        """Cell averages on a coarser grid."""
        if depth > self.depth:
            raise ValueError("can only coarsen")
        f = 2 ** (self.depth - depth)
        v = self.values
        for a in range(self.window.n):
            shp = list(v.shape)
            shp[a:a + 1] = [shp[a] // f, f]
            v = v.reshape(shp).mean(axis=a + 1)
        return GridFunction(self.window, depth, v)


def _axis_weights(lo: float, hi: float, pitch: float, N: int):
    """Sample indices (mod N) and overlap lengths of the cells meeting [lo, hi]."""
    first = int(np.floor(lo / pitch))
    last = int(np.ceil(hi / pitch))
    cells = np.arange(first, last)
    left = np.maximum(cells * pitch, lo)
    right = np.minimum((cells + 1) * pitch, hi)
    length = np.clip(right - left, 0.0, None)
    keep = length > 0
    return cells[keep] % N, length[keep]


def _box_samples(phi: GridFunction, lo, hi):
    """Values and measure weights of the sample cells meeting a box."""
    N = phi.values.shape[0]
    idx, wts = [], []
    for a in range(phi.window.n):
        i, w = _axis_weights(float(lo[a]), float(hi[a]), phi.pitch, N)
        idx.append(i)
        wts.append(w)
    vals = phi.values[np.ix_(*idx)]
    weight = wts[0]
    for w in wts[1:]:
        weight = np.multiply.outer(weight, w)
    return vals, weight, idx


def _check_resolution(phi: GridFunction, lo, hi):
    if np.any(np.asarray(hi) - np.asarray(lo) < phi.pitch * (1 - 1e-12)):
        raise ResolutionError("box narrower than the sampling pitch")


def cell_average(phi: GridFunction, lo, hi) -> float:
    """Mean of phi over the box [lo, hi], with partial boundary cells weighted."""
    _check_resolution(phi, lo, hi)
    vals, weight, _ = _box_samples(phi, lo, hi)
    return float((vals * weight).sum() / weight.sum())


def l1_on_box(phi: GridFunction, lo, hi) -> float:
    vals, weight, _ = _box_samples(phi, lo, hi)
    return float((np.abs(vals) * weight).sum())


def mean_oscillation(phi: GridFunction, lo, hi) -> float:
    """Integral over the box of |phi - mean of phi over the box|."""
    vals, weight, _ = _box_samples(phi, lo, hi)
    avg = (vals * weight).sum() / weight.sum()
    return float((np.abs(vals - avg) * weight).sum())


def weighted_lower_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    c = np.cumsum(weights[order])
    return float(v[np.searchsorted(c, 0.5 * c[-1] * (1 - 1e-14))])


def _monomials(coords: np.ndarray, degree: int) -> np.ndarray:
    n = coords.shape[1]
    cols = []
    for total in range(degree + 1):
        for powers in itertools.product(range(total + 1), repeat=n):
            if sum(powers) == total:
                cols.append(np.prod(coords ** np.array(powers), axis=1))
    return np.stack(cols, axis=1)


def best_l1_poly_error(phi: GridFunction, lo, hi, l: int, rtol: float = 1e-6,
                       max_iter: int = 500) -> float:
    """Smallest L1 distance on the box from phi to polynomials of degree < l.

    l = 1 uses the weighted lower median; higher l uses iteratively
    reweighted least squares, stopped at relative change ``rtol``.
    """
    _check_resolution(phi, lo, hi)
    vals, weight, idx = _box_samples(phi, lo, hi)
    v = vals.ravel()
    w = weight.ravel()
    if l == 1:
        med = weighted_lower_median(v, w)
        return float(np.dot(w, np.abs(v - med)))
    pitch = phi.pitch
    centre = 0.5 * (np.asarray(lo, float) + np.asarray(hi, float))
    half = 0.5 * (np.asarray(hi, float) - np.asarray(lo, float))
    # sample positions, unwrapped so that the box is contiguous
    axes = []
    for a in range(phi.window.n):
        first = int(np.floor(float(lo[a]) / pitch))
        cells = np.arange(first, first + len(idx[a]))
        axes.append(((cells + 0.5) * pitch - centre[a]) / half[a])
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    A = _monomials(coords, l - 1)
    sw = np.sqrt(w)
    coef = np.linalg.lstsq(A * sw[:, None], v * sw, rcond=None)[0]
    prev = np.dot(w, np.abs(v - A @ coef))
    scale_eps = max(1e-300, 1e-10 * (np.abs(v).max() + 1e-300))
    for _ in range(max_iter):
        r = np.abs(v - A @ coef)
        ww = w / np.maximum(r, scale_eps)
        sw = np.sqrt(ww)
        coef = np.linalg.lstsq(A * sw[:, None], v * sw, rcond=None)[0]
        cur = np.dot(w, np.abs(v - A @ coef))
        if abs(prev - cur) <= rtol * max(cur, 1e-300):
            prev = cur
            break
        prev = min(prev, cur)
    return float(prev)


def difference_operator(values: np.ndarray, shift: Sequence[int], l: int) -> np.ndarray:
    """l-th forward difference with periodic wrap: sum_i (-1)^(l-i) C(l,i) f(x + i h)."""
    out = np.zeros_like(values)
    axes = tuple(range(values.ndim))
    for i in range(l + 1):
        c = (-1) ** (l - i) * comb(l, i)
        out += c * np.roll(values, shift=[-i * s for s in shift], axis=axes)
    return out


def _trapezoid_offsets(N: int, n: int):
    """Integer shifts j in [-N, N]^n with trapezoid weights (endpoints halved)."""
    j = np.arange(-N, N + 1)
    w1 = np.ones(2 * N + 1)
    w1[0] = w1[-1] = 0.5
    for js in itertools.product(range(2 * N + 1), repeat=n):
        yield tuple(int(j[i]) for i in js), float(np.prod(w1[list(js)]))


def delta_modulus(phi: GridFunction, cube: DyadicCube, l: int) -> float:
    """|Q|^-2 times the double integral of |Delta^l(h) phi| over h in r(Q)(-1,1)^n, x in Q."""
    n = phi.window.n
    if cube.level > phi.depth:
        raise ResolutionError("cube finer than the sampling grid")
    N = 2 ** (phi.depth - cube.level)
    h = phi.pitch
    total = 0.0
    block = tuple(slice(mi * N, (mi + 1) * N) for mi in cube.index)
    for shift, wt in _trapezoid_offsets(N, n):
        if not any(shift):
            continue
        d = difference_operator(phi.values, shift, l)
        total += wt * np.abs(d[block]).sum()
    vol = (2.0 ** -cube.level) ** n
    return float(total * h ** (2 * n) / vol ** 2)


def delta_modulus_level(phi: GridFunction, k: int, l: int) -> np.ndarray:
    """delta_modulus for every cube of level k at once, shape (M 2^k,)*n."""
    n = phi.window.n
    if k > phi.depth:
        raise ResolutionError("level finer than the sampling grid")
    N = 2 ** (phi.depth - k)
    P = phi.values.shape[0] // N
    acc = np.zeros((P,) * n)
    for shift, wt in _trapezoid_offsets(N, n):
        if not any(shift):
            continue
        d = np.abs(difference_operator(phi.values, shift, l))
        shp = []
        for _ in range(n):
            shp += [P, N]
        acc += wt * d.reshape(shp).sum(axis=tuple(range(1, 2 * n, 2)))
    vol = (2.0 ** -k) ** n
    return acc * phi.pitch ** (2 * n) / vol ** 2


# -- functions on the half-space --------------------------------------------

def multi_indices(d: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(order + 1):
        for a in itertools.product(range(total + 1), repeat=d):
            if sum(a) == total:
                out.append(a)
    return out


class HalfSpaceFunction:
    """f(x, t) on the window times (0, T], periodic in x.

    Subclasses provide ``value``; ``derivatives`` falls back to centred
    differences (with a step shrinking near t = 0) unless overridden.
    """

    n: int = 1
    fd_step: float = 1e-4

    def value(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def trace(self, x: np.ndarray) -> np.ndarray | None:
        return None

    def derivatives(self, x: np.ndarray, t: np.ndarray, order: int) -> dict:
        out = {}
        for alpha in multi_indices(self.n + 1, order):
            out[alpha] = self._fd(x, t, alpha)
        return out

    def _fd(self, x, t, alpha):
        if not any(alpha):
            return self.value(x, t)
        d = len(alpha)
        h = np.minimum(self.fd_step, 0.25 * t)
        total = np.zeros(len(t))
        steps = []
        for a, k in enumerate(alpha):
            steps.append([(j, (-1) ** j * comb(k, j)) for j in range(k + 1)])
        for combo in itertools.product(*steps):
            coef = np.prod([c for _, c in combo])
            xs = x.copy()
            ts = t.copy()
            for a, (j, _) in enumerate(combo):
                k = alpha[a]
                off = (k / 2 - j) * h
                if a < d - 1:
                    xs[:, a] = xs[:, a] + off
                else:
                    ts = ts + off
            total += coef * self.value(xs, ts)
        return total / h ** sum(alpha)


class ProductFunction(HalfSpaceFunction):
    """phi(x) chi(t) with analytic first derivatives."""

    def __init__(self, phi, chi, n: int = 1, name: str = "product"):
        self.phi = phi
        self.chi = chi
        self.n = n
        self.name = name

    def value(self, x, t):
        return self.phi.value(x) * self.chi.value(t)

    def trace(self, x):
        return self.phi.value(x) * self.chi.value(np.zeros(len(x)))

    def derivatives(self, x, t, order):
        if order > 2:
            return super().derivatives(x, t, order)
        pv, cv = self.phi.value(x), self.chi.value(t)
        out = {(0,) * (self.n + 1): pv * cv}
        if order >= 1:
            g = self.phi.grad(x)
            cd = self.chi.deriv(t, 1)
            for a in range(self.n):
                e = [0] * (self.n + 1)
                e[a] = 1
                out[tuple(e)] = g[:, a] * cv
            e = [0] * self.n + [1]
            out[tuple(e)] = pv * cd
        if order >= 2:
            H = self.phi.hessian(x)
            c2 = self.chi.deriv(t, 2)
            for alpha in multi_indices(self.n + 1, 2):
                if sum(alpha) != 2:
                    continue
                ax = [i for i, k in enumerate(alpha[:-1]) for _ in range(k)]
                kt = alpha[-1]
                if kt == 2:
                    out[alpha] = pv * c2
                elif kt == 1:
                    out[alpha] = g[:, ax[0]] * cd
                else:
                    out[alpha] = H[:, ax[0], ax[1]] * cv
        return out


class Trig:
    """Real trigonometric polynomial sum_j a_j cos(2 pi k_j.x / P + p_j), period P."""

    def __init__(self, freqs, amps, phases, period: float, offset: float = 0.0):
        self.freqs = np.atleast_2d(np.asarray(freqs, float))
        self.amps = np.asarray(amps, float)
        self.phases = np.asarray(phases, float)
        self.period = period
        self.offset = offset

    def _arg(self, x):
        return 2 * np.pi * np.atleast_2d(x) @ self.freqs.T / self.period + self.phases

    def value(self, x):
        return self.offset + np.cos(self._arg(x)) @ self.amps

    def grad(self, x):
        s = -np.sin(self._arg(x)) * self.amps
        return s @ (2 * np.pi * self.freqs / self.period)

    def hessian(self, x):
        c = -np.cos(self._arg(x)) * self.amps
        K = 2 * np.pi * self.freqs / self.period
        return np.einsum("pj,ja,jb->pab", c, K, K)


class TimeProfile:
    """chi(t) = exp(-t / s) * (1 + b t), with derivatives."""

    def __init__(self, s: float = 1.0, b: float = 0.0):
        self.s = s
        self.b = b

    def value(self, t):
        t = np.asarray(t, float)
        return np.exp(-t / self.s) * (1 + self.b * t)

    def deriv(self, t, k):
        t = np.asarray(t, float)
        e = np.exp(-t / self.s)
        if k == 1:
            return e * (self.b - (1 + self.b * t) / self.s)
        if k == 2:
            return e * ((1 + self.b * t) / self.s ** 2 - 2 * self.b / self.s)
        raise ValueError("only first and second derivatives")


class TravellingWave(HalfSpaceFunction):
    """A cos(2 pi (k.x + c t) / P) exp(-t / s): a trace that mixes x and t."""

    def __init__(self, k, c: float, period: float, s: float = 0.5, amp: float = 1.0):
        self.k = np.asarray(k, float)
        self.n = len(self.k)
        self.c = c
        self.period = period
        self.s = s
        self.amp = amp
        self.name = "wave"

    def value(self, x, t):
        arg = 2 * np.pi * (np.atleast_2d(x) @ self.k + self.c * t) / self.period
        return self.amp * np.cos(arg) * np.exp(-t / self.s)

    def trace(self, x):
        return self.value(x, np.zeros(len(x)))


class ZeroFunction(HalfSpaceFunction):
    def __init__(self, n: int = 1):
        self.n = n
        self.name = "zero"

    def value(self, x, t):
        return np.zeros(len(t))

    def trace(self, x):
        return np.zeros(len(x))

    def derivatives(self, x, t, order):
        return {a: np.zeros(len(t)) for a in multi_indices(self.n + 1, order)}


class CallableFunction(HalfSpaceFunction):
    def __init__(self, fn, n: int = 1, trace_fn=None, name: str = "callable"):
        self.fn = fn
        self.n = n
        self.trace_fn = trace_fn
        self.name = name

    def value(self, x, t):
        return self.fn(x, t)

    def trace(self, x):
        return None if self.trace_fn is None else self.trace_fn(x)


# -- weighted Sobolev norm ---------------------------------------------------

def _x_nodes(window: Window, depth: int, order: int):
    """Tensor Gauss nodes on the cells of pitch 2^-depth and their weights."""
    g, gw = gauss_legendre(order)
    h = 2.0 ** -depth
    N = window.M * 2 ** depth
    one = ((np.arange(N)[:, None] + g[None, :]) * h).ravel()
    one_w = np.tile(gw * h, N)
    grids = np.meshgrid(*([one] * window.n), indexing="ij")
    wgrids = np.meshgrid(*([one_w] * window.n), indexing="ij")
    pts = np.stack([q.ravel() for q in grids], axis=1)
    wts = np.prod(np.stack([q.ravel() for q in wgrids], axis=1), axis=1)
    return pts, wts


def _label(alpha) -> str:
    return "D" + "".join(str(a) for a in alpha)


def weighted_sobolev_norm(f: HalfSpaceFunction, w: Weight, window: Window, order: int = 1,
                          t_range: tuple[float, float] | None = None, depth: int | None = None,
                          x_order: int = 2, t_order: int = 4, tail_levels: int = 24,
                          chunk: int = 1 << 17) -> NormReport:
    """Sum over |alpha| <= order of the integral of w |D^alpha f| on window x t_range.

    The t-range is cut into dyadic slabs refined toward t = 0; below the last
    slab the integrand is frozen at the slab's lower edge and the weight is
    integrated in t exactly.  x uses Gauss nodes on cells of pitch 2^-depth.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    t0, t1 = (0.0, float(window.T)) if t_range is None else t_range
    depth = window.d_max + 1 if depth is None else depth
    xs, xw = _x_nodes(window, depth, x_order)
    tg, tgw = gauss_legendre(t_order)
    alphas = multi_indices(window.n + 1, order)
    sums = {a: 0.0 for a in alphas}

    levels = depth + tail_levels
    slabs = []
    top = t1
    # slabs below t1, halving toward t0 (t0 > 0 only for bounded regions)
    for j in range(levels):
        lo = max(t0, t1 * 2.0 ** -(j + 1))
        if lo >= top:
            break
        slabs.append((lo, top))
        top = lo
    bottom = (t0, top) if top > t0 else None

    def accumulate(px, pt, pw):
        for s in range(0, len(pt), chunk):
            sl = slice(s, s + chunk)
            ders = f.derivatives(px[sl], pt[sl], order)
            g = w(px[sl], pt[sl])
            for a in alphas:
                sums[a] += float(np.dot(pw[sl] * g, np.abs(ders[a])))

    for lo, hi in slabs:
        tt = lo + tg * (hi - lo)
        px = np.repeat(xs, len(tt), axis=0)
        pt = np.tile(tt, len(xs))
        pw = np.repeat(xw, len(tt)) * np.tile(tgw * (hi - lo), len(xs))
        accumulate(px, pt, pw)
    if bottom is not None and bottom[1] > bottom[0]:
        # freeze f at the bottom edge; integrate the weight in t exactly
        tb = np.full(len(xs), bottom[1])
        wt = w.t_integral(xs, bottom[0], bottom[1])
        for s in range(0, len(xs), chunk):
            sl = slice(s, s + chunk)
            ders = f.derivatives(xs[sl], tb[sl], order)
            for a in alphas:
                sums[a] += float(np.dot(xw[sl] * wt[sl], np.abs(ders[a])))
    terms = [(_label(a), sums[a]) for a in alphas]
    return NormReport.from_terms(terms, truncation_level=depth, name=f"W{order}")


# -- traces ------------------------------------------------------------------

@dataclass
class TraceResult:
    trace: GridFunction
    increments: list[float]
    converged: bool


def trace_of(f: HalfSpaceFunction, window: Window, depth: int,
             t_seq: Sequence[float] | None = None, tol: float = 1e-2) -> TraceResult:
    """Sample f(., t) on the grid along t -> 0 and test L1 Cauchy convergence.

    ``converged`` is true when the last L1 increment is below ``tol`` times the
    L1 norm of the final slice.
    """
    if t_seq is None:
        t_seq = [2.0 ** -(j + depth) for j in range(0, 8)]
    t_seq = sorted(t_seq, reverse=True)
    N = window.M * 2 ** depth
    c = (np.arange(N) + 0.5) * 2.0 ** -depth
    grids = np.meshgrid(*([c] * window.n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vol = 2.0 ** (-depth * window.n)
    slices = [f.value(pts, np.full(len(pts), t)) for t in t_seq]
    incs = [float(np.abs(a - b).sum() * vol) for a, b in zip(slices, slices[1:])]
    last = slices[-1].reshape((N,) * window.n)
    norm = float(np.abs(last).sum() * vol)
    converged = not incs or incs[-1] <= tol * max(norm, 1e-300)
    return TraceResult(GridFunction(window, depth, last), incs, converged)
