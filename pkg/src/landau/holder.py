"""Parabolic Hoelder seminorms of sampled space-time fields.

Two families of estimators:

* :func:`parabolic_holder` / :func:`holder_1plus` estimate the unweighted
  H^{a,a/2} and H^{1+a,(1+a)/2} norms.  Space quotients compare two nodes at
  one time, time quotients one node at two times.  Suprema are taken over
  every pair of nodes on a common grid line (or only nearest neighbours),
  consecutive snapshots plus whole time lags that fit the budget, and a
  seeded random sample, so the result is a lower bound of the true
  supremum that grows with the budget.
* :func:`weighted_star_norm` evaluates the distance-weighted norm
  ``sup d_P^m |v| + sup d_PQ^(m+a) |v(P) - v(Q)| / |P - Q|^a`` over all pairs
  of nodes on a common grid line at a common time.  For a cylinder
  ``[t0, t1] x B(c, R)`` the distance to the parabolic boundary (lateral
  surface plus bottom) is ``d_P = min(R - |x - c|, 8 sqrt(t - t0))``.

:func:`regularity_verdict` measures the Serrin-type quantity
``sup_t ||f(t)||_{L^q(B)}`` next to the weighted second-order norm of ``f``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .grid import Cylinder, DistributionField, VelocityGrid, gradient, hessian, high_order_gradient, lq_norm_on_ball

DEFAULT_BUDGET = 100_000
EXHAUSTIVE_MAX_N = 17
_CHUNK = 8192


@dataclass(frozen=True)
class SpaceTimeField:
    """Snapshots ``values[k]`` of a scalar field at strictly increasing ``times[k]``."""

    grid: VelocityGrid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != (len(t),) + self.grid.shape:
            raise ValueError("values must have shape (len(times), n, n, n)")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_snapshots(cls, snapshots) -> "SpaceTimeField":
        snaps = list(getattr(snapshots, "snapshots", snapshots))
        if not snaps:
            raise ValueError("no snapshots")
        grid = snaps[0].grid
        if any(s.grid != grid for s in snaps):
            raise ValueError("snapshots live on different grids")
        return cls(grid, np.array([s.time for s in snaps]), np.stack([s.values for s in snaps]))

    @classmethod
    def from_function(cls, grid: VelocityGrid, times, fn) -> "SpaceTimeField":
        """Sample ``fn(t, v1, v2, v3)``."""
        times = np.asarray(times, dtype=float)
        vals = np.stack([np.broadcast_to(fn(t, *grid.mesh), grid.shape) for t in times])
        return cls(grid, times, vals)

    def with_values(self, values) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.times, values)

    def spatial_gradient(self, order: int = 2) -> list:
        """First derivatives; ``order`` 2 uses np.gradient, 4/6/8 the wider stencils."""
        g = np.stack([self._grad(u, order) for u in self.values], axis=1)
        return [self.with_values(g[k]) for k in range(3)]

    def spatial_hessian(self, order: int = 2) -> list:
        if order == 2:
            hs = np.stack([hessian(u, self.grid.h) for u in self.values], axis=2)
        else:
            hs = np.empty((3, 3) + self.values.shape)
            for t, u in enumerate(self.values):
                g = self._grad(u, order)
                for i in range(3):
                    hs[i, :, t] = self._grad(g[i], order)
            hs = 0.5 * (hs + hs.transpose(1, 0, 2, 3, 4, 5))
        return [[self.with_values(hs[i, j]) for j in range(3)] for i in range(3)]

    def _grad(self, u, order):
        return gradient(u, self.grid.h) if order == 2 else high_order_gradient(u, self.grid.h, order)

    def time_derivative(self) -> "SpaceTimeField":
        """Central differences between snapshots, one-sided at the ends."""
        if len(self.times) < 2:
            raise ValueError("need at least two snapshots for a time derivative")
        return self.with_values(np.gradient(self.values, self.times, axis=0))


@dataclass
class HolderReport:
    alpha: float
    cylinder: dict
    sup_abs: float
    space_quotient: float
    time_quotient: float
    derivative_sup: list = field(default_factory=list)
    derivative_space_quotients: list = field(default_factory=list)
    derivative_time_quotients: list = field(default_factory=list)
    weighted_star_norms: dict = field(default_factory=dict)
    pair_sample_size: int = 0
    exhaustive: bool = False
    lower_bound: bool = True

    @property
    def norm(self) -> float:
        """The assembled H^{a,a/2} (or H^{1+a,(1+a)/2}) norm estimate."""
        return (
            self.sup_abs + self.space_quotient + self.time_quotient
            + sum(self.derivative_sup) + sum(self.derivative_space_quotients) + sum(self.derivative_time_quotients)
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["norm"] = self.norm
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- restriction to a cylinder ----------------------------------------------

@dataclass
class _Window:
    """The part of a space-time field inside a cylinder, cropped to a box."""

    times: np.ndarray  # (T,)
    box: tuple  # three index slices
    inside: np.ndarray  # (bx, by, bz) bool
    dist_lateral: np.ndarray  # (bx, by, bz), R - |x - c|
    t_index: np.ndarray


def _window(field: SpaceTimeField, cyl: Cylinder) -> _Window:
    grid = field.grid
    if not grid.contains_ball(cyl.center, cyl.radius):
        raise ValueError("cylinder ball must lie inside the grid cube")
    tol = 1e-12 * max(1.0, abs(cyl.t_end))
    t_index = np.flatnonzero((field.times >= cyl.t_start - tol) & (field.times <= cyl.t_end + tol))
    axis = grid.axis
    box = []
    for c in cyl.center:
        idx = np.flatnonzero(np.abs(axis - c) <= cyl.radius * (1 + 1e-12))
        box.append(slice(idx[0], idx[-1] + 1) if len(idx) else slice(0, 0))
    box = tuple(box)
    inside = grid.ball_mask(cyl.center, cyl.radius)[box]
    if len(t_index) == 0 or not inside.any():
        raise ValueError("cylinder contains no sample points")
    mesh = [m[box] for m in grid.mesh]
    r = np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, cyl.center)))
    return _Window(field.times[t_index], box, inside, np.maximum(cyl.radius - r, 0.0), t_index)


def _crop(field: SpaceTimeField, win: _Window) -> np.ndarray:
    return field.values[(win.t_index,) + win.box]


def _axis_pairs(shape, axis, offset):
    lo = [slice(None)] * len(shape)
    hi = [slice(None)] * len(shape)
    lo[axis] = slice(0, shape[axis] - offset)
    hi[axis] = slice(offset, shape[axis])
    return tuple(lo), tuple(hi)


def _resampled(field: SpaceTimeField, cyl: Cylinder, spacing: float):
    """Cubic-spline values on the lattice ``center + k * spacing`` covering the ball.

    Returns ``(values (T, m, m, m), inside, lateral distance, times)``.
    """
    grid = field.grid
    if not grid.contains_ball(cyl.center, cyl.radius):
        raise ValueError("cylinder ball must lie inside the grid cube")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    tol = 1e-12 * max(1.0, abs(cyl.t_end))
    t_index = np.flatnonzero((field.times >= cyl.t_start - tol) & (field.times <= cyl.t_end + tol))
    if len(t_index) == 0:
        raise ValueError("cylinder contains no sample points")
    K = int(math.floor(cyl.radius / spacing * (1 + 1e-12)))
    k = np.arange(-K, K + 1) * spacing
    pts = np.meshgrid(*(c + k for c in cyl.center), indexing="ij")
    r = np.sqrt(sum((p - c) ** 2 for p, c in zip(pts, cyl.center)))
    inside = r <= cyl.radius * (1 + 1e-12)
    coords = np.stack([(p + grid.L) / grid.h for p in pts])
    vals = np.stack([ndimage.map_coordinates(field.values[i], coords, order=3, mode="nearest") for i in t_index])
    return vals, inside, np.maximum(cyl.radius - r, 0.0), field.times[t_index]


def weighted_star_norm(field: SpaceTimeField, cyl: Cylinder, alpha: float, m: int, unweighted: bool = False, spacing: float | None = None) -> float:
    """``sup d_P^m |v(P)| + sup_{P~Q} d_PQ^(m+a) |v(P) - v(Q)| / |P - Q|^a``.

    ``P ~ Q`` ranges over every pair of distinct sample points in the ball
    that share a time and differ along one coordinate axis, so the pair set
    is exhaustive.  The sample points are the grid nodes, or with
    ``spacing`` a lattice of that spacing centred on the ball, filled by
    cubic-spline interpolation; a fixed spacing makes the estimate
    comparable across grid resolutions.  With ``unweighted=True`` both
    weights are replaced by 1.
    """
    _check_alpha(alpha)
    if m not in (0, 1, 2):
        raise ValueError("m must be 0, 1 or 2")
    if spacing is None:
        win = _window(field, cyl)
        vals, inside3, lateral, times = _crop(field, win), win.inside, win.dist_lateral, win.times
        step = field.grid.h
    else:
        vals, inside3, lateral, times = _resampled(field, cyl, spacing)
        step = spacing
    if unweighted:
        d = np.ones_like(vals)
    else:
        bottom = 8.0 * np.sqrt(np.maximum(times - cyl.t_start, 0.0))
        d = np.minimum(lateral[None], bottom[:, None, None, None])
    inside = np.broadcast_to(inside3[None], vals.shape)
    sup = float(np.max(np.where(inside, d**m * np.abs(vals), 0.0)))
    quot = 0.0
    for k in range(3):
        ax = k + 1
        for s in range(1, vals.shape[ax]):
            lo, hi = _axis_pairs(vals.shape, ax, s)
            ok = inside[lo] & inside[hi]
            if not ok.any():
                continue
            w = np.minimum(d[lo], d[hi]) ** (m + alpha)
            q = w * np.abs(vals[hi] - vals[lo]) / (s * step) ** alpha
            quot = max(quot, float(np.max(np.where(ok, q, 0.0))))
    return sup + quot


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")


# -- unweighted quotients ----------------------------------------------------

def _sample_stream(seed, stream, count, highs):
    """First ``count`` rows of an endless seeded stream of index tuples.

    Rows are generated in fixed-size chunks, so a larger ``count`` extends a
    smaller one and estimates never decrease with the budget.
    """
    rng = np.random.default_rng([seed, stream])
    out = []
    got = 0
    while got < count:
        chunk = np.stack([rng.integers(0, hi, _CHUNK) for hi in highs], axis=1)
        out.append(chunk)
        got += _CHUNK
    if not out:
        return np.zeros((0, len(highs)), dtype=np.int64)
    return np.concatenate(out)[:count]


class _Quotients:
    """Space and time quotients of several fields over one node/time set."""

    def __init__(self, win: _Window, h: float, alpha: float):
        self.win = win
        self.alpha = alpha
        self.nodes = np.argwhere(win.inside)  # (M, 3) box indices
        self.x = self.nodes * h
        self.h = h
        self.pairs = 0

    def flat(self, vals):
        """(T, M) values at the ball nodes."""
        return vals[:, self.nodes[:, 0], self.nodes[:, 1], self.nodes[:, 2]]

    def space_pairs(self, exhaustive, budget, seed, axis_lines=True):
        """(t, a, b) index triples with a != b."""
        T, M = len(self.win.times), len(self.nodes)
        if exhaustive:
            a, b = np.triu_indices(M, 1)
            t = np.repeat(np.arange(T), len(a))
            return t, np.tile(a, T), np.tile(b, T)
        # node pairs along grid lines: all offsets, or nearest neighbours only
        pos = -np.ones(self.win.inside.shape, dtype=np.int64)
        pos[tuple(self.nodes.T)] = np.arange(M)
        na, nb = [], []
        for k in range(3):
            for off in range(1, pos.shape[k] if axis_lines else 2):
                lo, hi = _axis_pairs(pos.shape, k, off)
                p, q = pos[lo].ravel(), pos[hi].ravel()
                ok = (p >= 0) & (q >= 0)
                na.append(p[ok])
                nb.append(q[ok])
        na, nb = np.concatenate(na), np.concatenate(nb)
        t = np.repeat(np.arange(T), len(na))
        a, b = np.tile(na, T), np.tile(nb, T)
        if budget > 0 and M > 1:
            s = _sample_stream(seed, 0, budget, (T, M, M))
            keep = s[:, 1] != s[:, 2]
            t = np.concatenate([t, s[keep, 0]])
            a = np.concatenate([a, s[keep, 1]])
            b = np.concatenate([b, s[keep, 2]])
        return t, a, b

    def time_pairs(self, exhaustive, budget, seed):
        """(node, ta, tb) triples with ta < tb."""
        T, M = len(self.win.times), len(self.nodes)
        if T < 2:
            e = np.zeros(0, dtype=np.int64)
            return e, e, e
        # consecutive snapshots, then whole lags from the longest down while
        # they fit the budget, then the seeded sample
        lags = [1]
        used = M * (T - 1)
        for lag in range(T - 1, 1, -1):
            if exhaustive or used + M * (T - lag) <= budget:
                lags.append(lag)
                used += M * (T - lag)
        ta = np.concatenate([np.arange(T - lag) for lag in lags])
        tb = np.concatenate([np.arange(lag, T) for lag in lags])
        node = np.repeat(np.arange(M), len(ta))
        ta, tb = np.tile(ta, M), np.tile(tb, M)
        if not exhaustive and len(lags) < T - 1 and budget > 0:
            s = _sample_stream(seed, 1, budget, (M, T, T))
            keep = s[:, 1] != s[:, 2]
            node = np.concatenate([node, s[keep, 0]])
            ta = np.concatenate([ta, np.minimum(s[keep, 1], s[keep, 2])])
            tb = np.concatenate([tb, np.maximum(s[keep, 1], s[keep, 2])])
        return node, ta, tb

    def space_sup(self, flat_vals, pairs):
        t, a, b = pairs
        best = 0.0
        for lo in range(0, len(t), 1 << 20):
            sl = slice(lo, lo + (1 << 20))
            dx = np.sqrt(np.sum((self.x[a[sl]] - self.x[b[sl]]) ** 2, axis=1))
            dv = np.abs(flat_vals[t[sl], a[sl]] - flat_vals[t[sl], b[sl]])
            best = max(best, float(np.max(dv / dx**self.alpha, initial=0.0)))
        return best

    def time_sup(self, flat_vals, pairs):
        node, ta, tb = pairs
        if len(node) == 0:
            return 0.0
        times = self.win.times
        dt = times[tb] - times[ta]
        dv = np.abs(flat_vals[tb, node] - flat_vals[ta, node])
        return float(np.max(dv / dt ** (self.alpha / 2)))


def _holder(field, cyl, alpha, budget, seed, exhaustive, derivatives, axis_lines) -> HolderReport:
    _check_alpha(alpha)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if exhaustive and field.grid.n > EXHAUSTIVE_MAX_N:
        raise ValueError(f"exhaustive mode is limited to n <= {EXHAUSTIVE_MAX_N}")
    win = _window(field, cyl)
    qs = _Quotients(win, field.grid.h, alpha)
    if len(qs.nodes) < 2:
        raise ValueError("cylinder contains fewer than two nodes; empty sample")
    sp = qs.space_pairs(exhaustive, budget - budget // 2, seed, axis_lines)
    tp = qs.time_pairs(exhaustive, budget // 2, seed)
    n_pairs = len(sp[0]) + len(tp[0])
    if n_pairs == 0:
        raise ValueError("empty sample")

    def measure(f):
        flat = qs.flat(_crop(f, win))
        return float(np.max(np.abs(flat))), qs.space_sup(flat, sp), qs.time_sup(flat, tp)

    sup, sq, tq = measure(field)
    rep = HolderReport(
        alpha=alpha,
        cylinder=cyl.to_dict(),
        sup_abs=sup,
        space_quotient=sq,
        time_quotient=tq,
        pair_sample_size=n_pairs * (4 if derivatives else 1),
        exhaustive=bool(exhaustive),
    )
    if derivatives:
        for g in field.spatial_gradient():
            s, a, b = measure(g)
            rep.derivative_sup.append(s)
            rep.derivative_space_quotients.append(a)
            rep.derivative_time_quotients.append(b)
    rep.weighted_star_norms = {str(m): weighted_star_norm(field, cyl, alpha, m) for m in (0, 1, 2)}
    return rep


def parabolic_holder(
    field: SpaceTimeField,
    cyl: Cylinder,
    alpha: float,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    exhaustive: bool = False,
    axis_lines: bool = True,
) -> HolderReport:
    """Sampled H^{a,a/2} norm of ``field`` on ``cyl``.

    Without ``exhaustive`` the space pairs are every pair of ball nodes on a
    common grid line at a common time (only nearest neighbours with
    ``axis_lines=False``) plus seeded random pairs.  The time pairs are all
    consecutive snapshots at every node, whole time lags from the longest
    down while they fit half the budget, and seeded random pairs.  The budget is
    split evenly between space and time.  ``exhaustive`` uses every pair and
    is limited to small grids.
    """
    return _holder(field, cyl, alpha, budget, seed, exhaustive, False, axis_lines)


def holder_1plus(
    field: SpaceTimeField,
    cyl: Cylinder,
    alpha: float,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    exhaustive: bool = False,
    axis_lines: bool = True,
) -> HolderReport:
    """As :func:`parabolic_holder`, also measuring the three first derivatives."""
    return _holder(field, cyl, alpha, budget, seed, exhaustive, True, axis_lines)


# -- Serrin monitor ------------------------------------------------------------

@dataclass
class RegularityVerdict:
    q: float
    alpha: float
    outer: dict
    inner: dict
    s0: float
    s0_bound: float
    hypothesis_held: bool
    value: float
    gradient: list
    hessian: list
    time_derivative: float
    snapshots: int

    @property
    def total(self) -> float:
        return self.value + sum(self.gradient) + sum(map(sum, self.hessian)) + self.time_derivative

    def components(self) -> dict:
        """Flat name -> value map of every norm term."""
        out = {"value": self.value, "time_derivative": self.time_derivative}
        for i, g in enumerate(self.gradient):
            out[f"grad_{i + 1}"] = g
        for i in range(3):
            for j in range(3):
                out[f"hess_{i + 1}{j + 1}"] = self.hessian[i][j]
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        if math.isinf(self.s0_bound):
            d["s0_bound"] = None
        return d


def _compactly_inside(inner: Cylinder, outer: Cylinder) -> bool:
    gap = math.dist(inner.center, outer.center) + inner.radius
    return gap < outer.radius and outer.t_start < inner.t_start and inner.t_end <= outer.t_end


def regularity_verdict(
    trajectory,
    outer: Cylinder,
    inner: Cylinder,
    q: float = 4.0,
    alpha: float = 0.5,
    s0_bound: float = math.inf,
    stencil_order: int = 6,
    resolution: int | None = 16,
) -> RegularityVerdict:
    """Measure both sides of the Serrin-type regularity statement.

    ``S0`` is the largest L^q norm on the outer ball over the snapshots in
    the outer time interval; the hypothesis is reported as held when ``S0``
    is finite and at most ``s0_bound``.  The second-order norm on the inner
    cylinder sums :func:`weighted_star_norm` of ``f`` (m=0), its first
    derivatives (m=1), its second derivatives (m=2) and its snapshot time
    derivative (m=2).  Space derivatives use stencils of ``stencil_order``;
    the norms are sampled with spacing ``inner.radius / resolution`` (grid
    nodes when ``resolution`` is None).  Nothing is inferred from one side
    to the other.
    """
    if not q > 3:
        raise ValueError(f"q must exceed 3, got {q!r}")
    _check_alpha(alpha)
    if not _compactly_inside(inner, outer):
        raise ValueError("inner cylinder must lie compactly inside the outer one")
    field = trajectory if isinstance(trajectory, SpaceTimeField) else SpaceTimeField.from_snapshots(trajectory)
    if not (outer.fits(field.grid) and inner.fits(field.grid)):
        raise ValueError("cylinders must lie inside the grid cube")
    in_time = (field.times >= outer.t_start) & (field.times <= outer.t_end * (1 + 1e-12))
    if not in_time.any():
        raise ValueError("no snapshot inside the outer time interval")
    s0 = max(
        lq_norm_on_ball(DistributionField(field.grid, u, t), outer.center, outer.radius, q)
        for u, t in zip(field.values[in_time], field.times[in_time])
    )
    spacing = None if resolution is None else inner.radius / resolution
    star = lambda g, m: weighted_star_norm(g, inner, alpha, m, spacing=spacing)  # noqa: E731
    return RegularityVerdict(
        q=float(q),
        alpha=float(alpha),
        outer=outer.to_dict(),
        inner=inner.to_dict(),
        s0=float(s0),
        s0_bound=float(s0_bound),
        hypothesis_held=bool(math.isfinite(s0) and s0 <= s0_bound),
        value=star(field, 0),
        gradient=[star(g, 1) for g in field.spatial_gradient(stencil_order)],
        hessian=[[star(g, 2) for g in row] for row in field.spatial_hessian(stencil_order)],
        time_derivative=star(field.time_derivative(), 2),
        snapshots=int(np.count_nonzero(in_time)),
    )
