"""Extension operators from the boundary into the half-space.

Two constructions live here.  The smooth (linear) one blends mollified copies
of phi across dyadic time bands.  The limiting (nonlinear) one blends cell
averages of phi over the dilated cubes of an admissible tiling system through
a partition of unity indexed by dyadic cubes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, sparse
from scipy.special import expit, gamma as gamma_fn

from .functions import GridFunction, HalfSpaceFunction, cell_average, multi_indices
from .geometry import DyadicCube, ResolutionError, Window, dilate
from .quadrature import gauss_legendre
from .tilings import TilingSystem, check_admissible
from .weights import Weight, WeightScales


class PartitionError(ValueError):
    """The system cannot carry the cube partition (inadmissible or wrong dilation)."""


# -- smooth ramps ------------------------------------------------------------

def smooth_step(x, deriv: int = 0) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, and its first two derivatives.

    Written as a logistic of g(x) = 1/(1-x) - 1/x, which is stable near both ends.
    """
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.where(inside, x, 0.5)
    g = 1.0 / (1.0 - xi) - 1.0 / xi
    s = expit(g)
    if deriv == 0:
        return np.where(inside, s, (x >= 1).astype(float))
    g1 = 1.0 / (1.0 - xi) ** 2 + 1.0 / xi ** 2
    s1 = s * (1.0 - s) * g1
    if deriv == 1:
        return np.where(inside, s1, 0.0)
    g2 = 2.0 / (1.0 - xi) ** 3 - 2.0 / xi ** 3
    s2 = s1 * (1.0 - 2.0 * s) * g1 + s * (1.0 - s) * g2
    if deriv == 2:
        return np.where(inside, s2, 0.0)
    raise ValueError("derivatives up to order 2 only")


def _ramp(t, a: float, b: float, deriv: int = 0):
    """Step rising from 0 at a to 1 at b, with chain-rule derivatives."""
    return smooth_step((np.asarray(t, float) - a) / (b - a), deriv) / (b - a) ** deriv


def _scaled(fn, c: float, t, deriv: int):
    """d^deriv/dt^deriv of fn(c t)."""
    return c ** deriv * fn(c * np.asarray(t, float), deriv)


def unit_bump(u, deriv: int = 0) -> np.ndarray:
    """1-D profile on (-1/2, 3/2) whose integer translates sum to one."""
    u = np.asarray(u, float)
    return _ramp(u, -0.5, 0.5, deriv) - _ramp(u - 1.0, -0.5, 0.5, deriv)


# -- time bands for the cube partition ---------------------------------------

def _rise(t, deriv=0):
    # 0 below 7/8, 1 above 9/8
    return _ramp(t, 7 / 8, 9 / 8, deriv)


def _top_cut(t, deriv=0):
    # 1 below 2, 0 above 9/4
    v = _ramp(t, 2.0, 9 / 4, deriv)
    return 1.0 - v if deriv == 0 else -v


def band(k: int, t, K: int, deriv: int = 0) -> np.ndarray:
    """Time band k of the cube partition, truncated so that bands 0..K sum to 1 on (0, 2).

    Band k lives in (7/8 2^-k, 9/4 2^-k); band K also absorbs everything below.
    """
    t = np.asarray(t, float)
    if k < 0 or k > K:
        return np.zeros_like(t)
    if k == 0:
        if K == 0:
            return _top_cut(t, deriv)
        h0, h1 = _rise(t), _rise(t, 1)
        c0, c1 = _top_cut(t), _top_cut(t, 1)
        if deriv == 0:
            return h0 * c0
        if deriv == 1:
            return h1 * c0 + h0 * c1
        return _rise(t, 2) * c0 + 2 * h1 * c1 + h0 * _top_cut(t, 2)
    lower = _scaled(_rise, 2.0 ** (k - 1), t, deriv)
    if k == K:
        return (1.0 - lower) if deriv == 0 else -lower
    return _scaled(_rise, 2.0 ** k, t, deriv) - lower


def active_bands(t, K: int) -> list[int]:
    """Bands that can be nonzero somewhere in the given t values."""
    t = np.asarray(t, float)
    tmin, tmax = float(t.min()), float(t.max())
    hi = K if tmin <= 0 else min(K, int(math.floor(-math.log2(tmin))) + 2)
    lo = max(0, int(math.floor(-math.log2(tmax))) - 1) if tmax > 0 else K
    return list(range(min(lo, hi), hi + 1))


# -- cube partition ------------------------------------------------------------

def _spatial_terms(x: np.ndarray, k: int, N: int, deriv: bool):
    """For every point, the 2^n indices m with theta_{k,m}(x) possibly nonzero.

    Returns flat periodic indices (P, 2^n), values (P, 2^n) and, if asked,
    gradients (P, 2^n, n).
    """
    P, n = x.shape
    v = x * 2.0 ** k
    base = np.floor(v - 0.5).astype(np.int64)
    corners = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    m = base[:, None, :] + corners[None, :, :]
    u = v[:, None, :] - m
    vals1 = unit_bump(u)
    value = np.prod(vals1, axis=2)
    flat = np.ravel_multi_index(tuple(np.mod(m, N).transpose(2, 0, 1)), (N,) * n)
    if not deriv:
        return flat, value, None
    d1 = unit_bump(u, 1) * 2.0 ** k
    grad = np.empty(u.shape)
    for a in range(n):
        others = np.prod(np.delete(vals1, a, axis=2), axis=2) if n > 1 else 1.0
        grad[:, :, a] = d1[:, :, a] * others
    return flat, value, grad


@dataclass
class Owner:
    stage: int
    cube: DyadicCube
    average: float = 0.0


class PartitionFamily:
    """Products theta_{k,m}(x) band_k(t) grouped by the tiling-system cube owning (k,m).

    ``owners[k]`` holds, per periodic index m at level k, the id of the owning
    (stage, cube) pair or -1.  The grouped sums are the functions g^s_alpha.
    """

    def __init__(self, system: TilingSystem, K: int | None = None):
        window = system.window
        if window.k0 != 0:
            raise PartitionError("the cube partition needs factor-2 dilations (k0 = 0)")
        self.system = system
        self.window = window
        self.n = window.n
        self.K = window.d_max if K is None else K
        self.owners_list: list[Owner] = []
        self.owners = self._paint()
        self.orphans = {k: int((o < 0).sum()) for k, o in enumerate(self.owners) if (o < 0).any()}

    def level_size(self, k: int) -> int:
        return self.window.M * 2 ** k

    # ownership
    def _paint(self) -> list[np.ndarray]:
        win = self.window
        owners = [np.full((self.level_size(k),) * self.n, -1, dtype=np.int64)
                  for k in range(self.K + 1)]
        for s, chosen in enumerate(self.system.selected):
            by_level: dict[int, list[DyadicCube]] = {}
            for c in chosen:
                by_level.setdefault(c.level, []).append(c)
            # coarse groups first, reverse label order: the last painter is the
            # finest cube of the latest stage with the earliest label
            for level in sorted(by_level):
                for cube in sorted(by_level[level], reverse=True):
                    ident = len(self.owners_list)
                    self.owners_list.append(Owner(s, cube))
                    box = dilate(cube, win)
                    for k in range(self.K + 1):
                        idx = self._contained_indices(box, k)
                        if idx is not None:
                            owners[k][np.ix_(*idx)] = ident
        return owners

    def _contained_indices(self, box, k: int):
        """Periodic indices m of the level-k cubes inside the box, per axis."""
        scale = self.window.scale
        N = self.level_size(k)
        idx = []
        for lo, hi in zip(box.lo, box.hi):
            first = -(-(lo << k) // scale)
            last = (hi << k) // scale
            if last <= first:
                return None
            cells = np.arange(first, min(last, first + N))
            idx.append(np.mod(cells, N))
        return idx

    def e_sets(self) -> dict[int, set[tuple[int, tuple[int, ...]]]]:
        """Index set owned by every owner id."""
        out: dict[int, set] = {i: set() for i in range(len(self.owners_list))}
        for k, arr in enumerate(self.owners):
            for m in zip(*np.nonzero(arr >= 0)):
                out[int(arr[m])].add((k, tuple(int(v) for v in m)))
        return out

    # evaluation
    def terms(self, x: np.ndarray, t: np.ndarray, deriv: bool = False):
        """Nonzero products theta_{k,m} band_k at each point.

        Returns point index, owner id, value and (if ``deriv``) the space-time
        gradient of shape (terms, n+1).
        """
        x = np.mod(np.atleast_2d(np.asarray(x, float)), self.window.M)
        t = np.asarray(t, float)
        pts, own, vals, grads = [], [], [], []
        for k in active_bands(t, self.K):
            b = band(k, t, self.K)
            live = b != 0
            if not live.any():
                continue
            flat, th, thg = _spatial_terms(x[live], k, self.level_size(k), deriv)
            bl = b[live][:, None]
            pid = np.broadcast_to(np.nonzero(live)[0][:, None], flat.shape)
            pts.append(pid.ravel())
            own.append(self.owners[k].ravel()[flat].ravel())
            vals.append((th * bl).ravel())
            if deriv:
                g = np.empty(flat.shape + (self.n + 1,))
                g[..., :self.n] = thg * bl[:, :, None]
                g[..., self.n] = th * band(k, t[live], self.K, 1)[:, None]
                grads.append(g.reshape(-1, self.n + 1))
        if not pts:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0), np.zeros((0, self.n + 1)) if deriv else None
        out = [np.concatenate(pts), np.concatenate(own), np.concatenate(vals)]
        keep = out[2] != 0
        if deriv:
            g = np.concatenate(grads)
            keep |= np.any(g != 0, axis=1)
        out = [a[keep] for a in out]
        if (out[1] < 0).any():
            raise PartitionError("sample point falls on an index with no owner")
        return out[0], out[1], out[2], (g[keep] if deriv else None)

    def theta_sum(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Sum over every (k,m) of theta_{k,m}(x) band_k(t), owner-independent."""
        x = np.mod(np.atleast_2d(np.asarray(x, float)), self.window.M)
        t = np.asarray(t, float)
        total = np.zeros(len(t))
        for k in active_bands(t, self.K):
            _, th, _ = _spatial_terms(x, k, self.level_size(k), False)
            total += th.sum(axis=1) * band(k, t, self.K)
        return total

    def g_matrix(self, x: np.ndarray, t: np.ndarray, component: int | None = None
                 ) -> sparse.csr_matrix:
        """Values (or one gradient component) of every g at every point, points x owners."""
        pid, own, val, grad = self.terms(x, t, deriv=component is not None)
        data = val if component is None else grad[:, component]
        shape = (len(np.asarray(t)), len(self.owners_list))
        return sparse.coo_matrix((data, (pid, own)), shape=shape).tocsr()

    def g_gradients(self, x, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Point index, owner id and full gradient of each nonzero g at each point."""
        pid, own, _, grad = self.terms(x, t, deriv=True)
        key = pid * len(self.owners_list) + own
        uniq, inv = np.unique(key, return_inverse=True)
        acc = np.zeros((len(uniq), self.n + 1))
        np.add.at(acc, inv, grad)
        return uniq // len(self.owners_list), uniq % len(self.owners_list), acc

    def support_multiplicity(self, x, t) -> np.ndarray:
        """Number of g's that are positive at each point."""
        G = self.g_matrix(x, t)
        G.data = (G.data > 0).astype(float)
        G.eliminate_zeros()
        return np.asarray(G.sum(axis=1)).ravel().astype(int)

    def gradient_ratios(self, x, t) -> np.ndarray:
        """|grad g| / 2^k with k the band level of t, over every nonzero pair."""
        t = np.asarray(t, float)
        pid, _, grad = self.g_gradients(x, t)
        level = np.maximum(np.ceil(-np.log2(t)), 0.0)
        return np.linalg.norm(grad, axis=1) / 2.0 ** level[pid]

    def gradient_integrals(self, w: Weight, order: int = 3) -> np.ndarray:
        """Integral of w |grad g| over window x (0, 2) for every owner.

        Dyadic t-slabs with Gauss nodes; x nodes on cells a quarter of the
        finest active band.  Below the last band only the x-gradient survives
        and the weight is integrated in t exactly.
        """
        win = self.window
        tg, tw = gauss_legendre(order)
        out = np.zeros(len(self.owners_list))
        # slab j covers (2^-j-1, 2^-j); j = -1 is (1, 2)
        t_floor = 7 / 8 * 2.0 ** -(self.K - 1) if self.K >= 1 else 0.0
        for j in range(-1, self.K + 1):
            lo, hi = 2.0 ** -(j + 1), 2.0 ** -j
            lo = max(lo, t_floor) if self.K >= 1 else lo
            if lo >= hi:
                continue
            xs, xw = _cell_nodes(win, max(j, 0) + 2, order)
            for tt, ww in zip(lo + tg * (hi - lo), tw * (hi - lo)):
                self._accumulate(out, xs, xw * ww, np.full(len(xs), tt), w)
        if self.K >= 1:
            xs, xw = _cell_nodes(win, self.K + 2, order)
            tb = np.full(len(xs), t_floor)
            wt = w.t_integral(xs, 0.0, t_floor)
            self._accumulate(out, xs, xw, tb, None, wt, spatial_only=True)
        return out

    def _accumulate(self, out, xs, xw, ts, w, wt=None, spatial_only=False, chunk=1 << 16):
        for s in range(0, len(ts), chunk):
            sl = slice(s, s + chunk)
            pid, own, grad = self.g_gradients(xs[sl], ts[sl])
            if spatial_only:
                grad = grad[:, :self.n]
            weight = (xw[sl] * (wt[sl] if wt is not None else w(xs[sl], ts[sl])))[pid]
            np.add.at(out, own, weight * np.linalg.norm(grad, axis=1))

    def gradient_constant(self, w: Weight, scales: WeightScales, order: int = 3):
        """Per owner: integral of w |grad g| over hat_gamma times the cube volume."""
        integrals = self.gradient_integrals(w, order)
        denom = np.array([scales.hat_gamma(o.cube.level, o.cube.index)
                          * float(o.cube.side) ** self.n for o in self.owners_list])
        return integrals / denom


def _cell_nodes(window: Window, depth: int, order: int):
    g, gw = gauss_legendre(order)
    h = 2.0 ** -depth
    N = window.M * 2 ** depth
    one = ((np.arange(N)[:, None] + g[None, :]) * h).ravel()
    one_w = np.tile(gw * h, N)
    grids = np.meshgrid(*([one] * window.n), indexing="ij")
    wgrids = np.meshgrid(*([one_w] * window.n), indexing="ij")
    return (np.stack([q.ravel() for q in grids], axis=1),
            np.prod(np.stack([q.ravel() for q in wgrids], axis=1), axis=1))


def build_partition_g(system: TilingSystem, scales: WeightScales | None = None,
                      K: int | None = None, check: bool = True) -> PartitionFamily:
    """Cube partition grouped by the system's selected cubes.

    With ``scales`` and ``check`` the system must pass the admissibility test.
    """
    if check and scales is not None:
        rep = check_admissible(system, scales)
        if not rep.passed:
            bad = [r for r in rep.results if not r.passed][0]
            raise PartitionError(f"system not admissible: condition {bad.condition} "
                                 f"({bad.where})")
    fam = PartitionFamily(system, K)
    if fam.orphans:
        raise PartitionError(f"indices without owner at levels {sorted(fam.orphans)}")
    return fam


# -- limiting extension ------------------------------------------------------

class LimitingExtension(HalfSpaceFunction):
    """Sum of g^s_alpha times the average of phi over the dilated cube of (s, alpha)."""

    def __init__(self, family: PartitionFamily, phi: GridFunction, name: str = "ext-limiting"):
        self.family = family
        self.phi = phi
        self.n = family.n
        self.name = name
        win = family.window
        for o in family.owners_list:
            lo, hi = dilate(o.cube, win).real_bounds()
            o.average = cell_average(phi, lo, hi)
        avg = np.array([o.average for o in family.owners_list])
        self.coefficients = [avg[own] for own in family.owners]

    def _sum(self, x, t, deriv):
        fam = self.family
        x = np.mod(np.atleast_2d(np.asarray(x, float)), fam.window.M)
        t = np.asarray(t, float)
        val = np.zeros(len(t))
        grad = np.zeros((len(t), self.n + 1)) if deriv else None
        for k in active_bands(t, fam.K):
            b = band(k, t, fam.K)
            db = band(k, t, fam.K, 1) if deriv else None
            live = (b != 0) | (db != 0 if deriv else False)
            if not live.any():
                continue
            flat, th, thg = _spatial_terms(x[live], k, fam.level_size(k), deriv)
            c = self.coefficients[k].ravel()[flat]
            s = (th * c).sum(axis=1)
            val[live] += b[live] * s
            if deriv:
                grad[live, :self.n] += b[live][:, None] * np.einsum("pj,pja->pa", c, thg)
                grad[live, self.n] += db[live] * s
        return val, grad

    def value(self, x, t):
        return self._sum(x, t, False)[0]

    def derivatives(self, x, t, order):
        if order > 1:
            return super().derivatives(x, t, order)
        val, grad = self._sum(x, t, order == 1)
        out = {(0,) * (self.n + 1): val}
        if order == 1:
            for a in range(self.n + 1):
                e = [0] * (self.n + 1)
                e[a] = 1
                out[tuple(e)] = grad[:, a]
        return out


def extend_limiting(phi: GridFunction, system: TilingSystem, w: Weight | None = None,
                    scales: WeightScales | None = None, K: int | None = None
                    ) -> LimitingExtension:
    """Partition-of-unity extension of phi driven by the given system."""
    if scales is None and w is not None:
        scales = WeightScales(w, system.window)
    family = build_partition_g(system, scales, K)
    return LimitingExtension(family, phi)


# -- mollifier ---------------------------------------------------------------

def _bump_raw(u: np.ndarray) -> np.ndarray:
    s = 1.0 - np.sum(u * u, axis=-1)
    inside = s > 0
    return np.where(inside, np.exp(-1.0 / np.where(inside, s, 1.0)), 0.0)


@lru_cache(maxsize=None)
def _radial_moment(n: int, power: int) -> float:
    """Integral over the unit ball of |u|^power exp(-1/(1-|u|^2))."""
    sphere = 2 * math.pi ** (n / 2) / gamma_fn(n / 2)
    val, _ = integrate.quad(lambda r: r ** (n - 1 + power) * math.exp(-1.0 / (1.0 - r * r))
                            if r < 1 else 0.0, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    return sphere * val


def bump_kernel(u: np.ndarray, n: int) -> np.ndarray:
    """Normalized smooth bump on the unit ball of R^n (unit integral)."""
    return _bump_raw(u) / _radial_moment(n, 0)


def _bump_derivs(u: np.ndarray, n: int):
    """Normalized bump with its gradient and Hessian in u."""
    s = 1.0 - np.sum(u * u, axis=-1)
    inside = s > 0
    si = np.where(inside, s, 1.0)
    val = np.where(inside, np.exp(-1.0 / si), 0.0) / _radial_moment(n, 0)
    grad = val[..., None] * (-2.0 * u / si[..., None] ** 2)
    outer = u[..., :, None] * u[..., None, :]
    eye = np.eye(n)
    hess = val[..., None, None] * (4 * outer / si[..., None, None] ** 4
                                   - 8 * outer / si[..., None, None] ** 3
                                   - 2 * eye / si[..., None, None] ** 2)
    return val, grad, hess


def _axis_moment(n: int, beta: tuple[int, ...]) -> float:
    """Moment of the normalized bump for a multi-index with even entries.

    Uses the product formula for monomial integrals over the sphere.
    """
    if any(b % 2 for b in beta):
        return 0.0
    p = sum(beta)
    if p == 0:
        return 1.0
    # integral of u^beta over the unit sphere relative to its surface measure
    num = math.prod(gamma_fn((b + 1) / 2) for b in beta)
    sphere_avg = 2 * num / gamma_fn((p + n) / 2) / (2 * math.pi ** (n / 2) / gamma_fn(n / 2))
    return sphere_avg * _radial_moment(n, p) / _radial_moment(n, 0)


@dataclass(frozen=True)
class MollifierSpec:
    """Order-l combination of composite bump averages reproducing polynomials of degree < l."""

    n: int
    l: int
    mu: tuple[float, ...]

    def __post_init__(self):
        if len(self.mu) != self.l:
            raise ValueError("need one coefficient per composite kernel")

    @classmethod
    def build(cls, n: int, l: int) -> "MollifierSpec":
        """Minimum-norm coefficients satisfying the composite moment conditions."""
        if l < 1:
            raise ValueError("order must be positive")
        rows, rhs = [], []
        for beta in multi_indices(n, l - 1):
            row = []
            for j in range(1, l + 1):
                # moment of (outer of radius 1) * (inner of radius j)
                total = 0.0
                for b1 in itertools.product(*[range(b + 1) for b in beta]):
                    b2 = tuple(b - c for b, c in zip(beta, b1))
                    coef = math.prod(math.comb(b, c) for b, c in zip(beta, b1))
                    total += coef * _axis_moment(n, b1) * _axis_moment(n, b2) * j ** sum(b2)
                row.append(total)
            if any(abs(v) > 1e-15 for v in row):
                rows.append(row)
                rhs.append(1.0 if not any(beta) else 0.0)
        mu = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
        return cls(n, l, tuple(float(v) for v in mu))

    def residuals(self) -> np.ndarray:
        """Moment-condition residuals of the stored coefficients."""
        res = []
        for beta in multi_indices(self.n, self.l - 1):
            total = 0.0
            for j, mu in enumerate(self.mu, start=1):
                for b1 in itertools.product(*[range(b + 1) for b in beta]):
                    b2 = tuple(b - c for b, c in zip(beta, b1))
                    coef = math.prod(math.comb(b, c) for b, c in zip(beta, b1))
                    total += mu * coef * _axis_moment(self.n, b1) * _axis_moment(self.n, b2) \
                        * j ** sum(b2)
            res.append(total - (1.0 if not any(beta) else 0.0))
        return np.array(res)


def _periodic_kernel(N: int, n: int, radius_cells: float) -> np.ndarray:
    """Discrete bump of the given radius (in cells) on the periodic grid, summing to one."""
    R = int(math.ceil(radius_cells))
    off = np.arange(-R, R + 1)
    grids = np.meshgrid(*([off] * n), indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1) / radius_cells
    vals = _bump_raw(u)
    ker = np.zeros((N,) * n)
    np.add.at(ker, tuple(np.mod(np.stack(grids), N).reshape(n, -1)), vals)
    return ker / ker.sum()


def _periodic_convolve(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    axes = tuple(range(values.ndim))
    return np.fft.irfftn(np.fft.rfftn(values) * np.fft.rfftn(kernel), s=values.shape, axes=axes)


def _inner_average(phi: GridFunction, eps: float, spec: MollifierSpec) -> np.ndarray:
    """sum_j mu_j (inner bump of radius j eps) * phi on phi's grid."""
    N = phi.values.shape[0]
    out = np.zeros_like(phi.values)
    for j, mu in enumerate(spec.mu, start=1):
        ker = _periodic_kernel(N, phi.window.n, j * eps / phi.pitch)
        out += mu * _periodic_convolve(phi.values, ker)
    return out


def _check_eps(phi: GridFunction, eps: float):
    if eps < 2 * phi.pitch * (1 - 1e-12):
        raise ResolutionError(f"mollifier radius {eps} below twice the grid pitch {phi.pitch}")


def mollify_grid(phi: GridFunction, eps: float, spec: MollifierSpec) -> GridFunction:
    """E_eps[phi] at every cell centre (both averages as discrete normalized kernels)."""
    _check_eps(phi, eps)
    inner = _inner_average(phi, eps, spec)
    ker = _periodic_kernel(phi.values.shape[0], phi.window.n, eps / phi.pitch)
    return GridFunction(phi.window, phi.depth, _periodic_convolve(inner, ker))


def _outer_average(values: np.ndarray, pitch: float, eps: float, x: np.ndarray,
                   order: int = 0, chunk: int = 4096):
    """Bump average of gridded values at arbitrary points, renormalized over the grid.

    Returns value, gradient (P, n) and Hessian (P, n, n) up to ``order``.
    """
    P, n = x.shape
    N = values.shape[0]
    R = int(math.ceil(eps / pitch)) + 1
    off = np.arange(-R, R + 1)
    stencil = np.stack([g.ravel() for g in np.meshgrid(*([off] * n), indexing="ij")], axis=1)
    val = np.empty(P)
    grad = np.empty((P, n)) if order >= 1 else None
    hess = np.empty((P, n, n)) if order >= 2 else None
    flat_vals = values.ravel()
    for s in range(0, P, chunk):
        xc = x[s:s + chunk]
        centre = np.floor(xc / pitch).astype(np.int64)
        cells = centre[:, None, :] + stencil[None, :, :]
        u = ((cells + 0.5) * pitch - xc[:, None, :]) / eps
        flat = np.ravel_multi_index(tuple(np.mod(cells, N).transpose(2, 0, 1)), (N,) * n)
        v = flat_vals[flat]
        b, bg, bh = _bump_derivs(u, n)
        D = b.sum(axis=1)
        F = (b * v).sum(axis=1) / D
        val[s:s + chunk] = F
        if order >= 1:
            # d/dx = -(1/eps) d/du
            Dg = -bg.sum(axis=1) / eps
            Ng = -(bg * v[:, :, None]).sum(axis=1) / eps
            Fg = (Ng - F[:, None] * Dg) / D[:, None]
            grad[s:s + chunk] = Fg
        if order >= 2:
            Dh = bh.sum(axis=1) / eps ** 2
            Nh = (bh * v[:, :, None, None]).sum(axis=1) / eps ** 2
            hess[s:s + chunk] = (Nh - Fg[:, :, None] * Dg[:, None, :]
                                 - Dg[:, :, None] * Fg[:, None, :]
                                 - F[:, None, None] * Dh) / D[:, None, None]
    return val, grad, hess


def mollify_E_eps(phi: GridFunction, eps: float, spec: MollifierSpec, x) -> np.ndarray:
    """E_eps[phi] at arbitrary points (outer average renormalized over the sample grid)."""
    _check_eps(phi, eps)
    x = np.atleast_2d(np.asarray(x, float))
    inner = _inner_average(phi, eps, spec)
    return _outer_average(inner, phi.pitch, eps, x)[0]


# -- smooth extension ----------------------------------------------------------

def _cutoff(t, deriv=0):
    # 1 on [0, 1/2], 0 from 1 on
    v = _ramp(t, 0.5, 1.0, deriv)
    return 1.0 - v if deriv == 0 else -v


def smooth_band(k: int, t, K: int, deriv: int = 0) -> np.ndarray:
    """Band k >= 1 of the smooth extension; bands 1..K sum to the cutoff at t."""
    lower = _scaled(_cutoff, 2.0 ** (k - 1), t, deriv)
    if k == K:
        return lower
    return lower - _scaled(_cutoff, 2.0 ** k, t, deriv)


class SmoothExtension(HalfSpaceFunction):
    """sum_k band_k(t) E_{2^-k}[phi](x) for k = 1..K, vanishing for t >= 1."""

    def __init__(self, phi: GridFunction, spec: MollifierSpec, K: int | None = None,
                 oversample: int = 8, name: str = "ext-smooth"):
        self.phi = phi
        self.spec = spec
        self.n = phi.window.n
        self.name = name
        self.K = phi.depth - 1 if K is None else K
        if self.K < 1:
            raise ResolutionError("grid too coarse for any band")
        _check_eps(phi, 2.0 ** -self.K)
        self.grids = {}
        for k in range(1, self.K + 1):
            coarse = phi.coarsen(min(phi.depth, k + int(math.log2(oversample))))
            self.grids[k] = (_inner_average(coarse, 2.0 ** -k, spec), coarse.pitch)

    def _bands(self, t):
        t = np.asarray(t, float)
        hi = self.K if t.min() <= 0 else min(self.K, int(math.floor(-math.log2(t.min()))) + 2)
        return range(1, hi + 1)

    def _collect(self, x, t, order):
        x = np.atleast_2d(np.asarray(x, float))
        t = np.asarray(t, float)
        n = self.n
        out = {a: np.zeros(len(t)) for a in multi_indices(n + 1, order)}
        for k in self._bands(t):
            b = [smooth_band(k, t, self.K, d) for d in range(order + 1)]
            live = np.zeros(len(t), bool)
            for bd in b:
                live |= bd != 0
            if not live.any():
                continue
            inner, pitch = self.grids[k]
            v, g, h = _outer_average(inner, pitch, 2.0 ** -k, x[live], order)
            for alpha in out:
                ax, kt = alpha[:n], alpha[n]
                sx = sum(ax)
                if sx == 0:
                    space = v
                elif sx == 1:
                    space = g[:, ax.index(1)]
                else:
                    idx = [i for i, c in enumerate(ax) for _ in range(c)]
                    space = h[:, idx[0], idx[1]]
                out[alpha][live] += b[kt][live] * space
        return out

    def value(self, x, t):
        return self._collect(x, t, 0)[(0,) * (self.n + 1)]

    def derivatives(self, x, t, order):
        if order > 2:
            return super().derivatives(x, t, order)
        return self._collect(x, t, order)


def extend_smooth(phi: GridFunction, w: Weight | None = None, l: int = 2,
                  spec: MollifierSpec | None = None, K: int | None = None) -> SmoothExtension:
    """Linear extension of order l; the weight only matters for the norms measured later."""
    if spec is None:
        spec = MollifierSpec.build(phi.window.n, l)
    if spec.l != l:
        raise ValueError("mollifier order does not match l")
    return SmoothExtension(phi, spec, K)
