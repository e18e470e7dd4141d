"""Uniform velocity grid, fields over it, quadrature, stencils and norms.

Arrays are indexed ``values[i, j, k]`` with ``i`` running along v1.  The
snapshot format stores them with the first index varying fastest.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class VelocityGrid:
    """Cube [-L, L]^3 sampled by ``n`` nodes per axis (``n`` odd)."""

    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 9 or self.n % 2 == 0:
            raise ValueError(f"n must be an odd integer >= 9, got {self.n!r}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def origin_index(self) -> int:
        return (self.n - 1) // 2

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + np.arange(self.n) * self.h

    @cached_property
    def mesh(self):
        """Coordinate arrays (v1, v2, v3), each of shape ``(n, n, n)``."""
        return np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")

    @cached_property
    def speed_squared(self) -> np.ndarray:
        v1, v2, v3 = self.mesh
        return v1**2 + v2**2 + v3**2

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; faces count 1/2, edges 1/4, corners 1/8."""
        w1 = np.full(self.n, self.h)
        w1[0] = w1[-1] = 0.5 * self.h
        return w1[:, None, None] * w1[None, :, None] * w1[None, None, :]

    def ball_mask(self, center=(0.0, 0.0, 0.0), radius=1.0) -> np.ndarray:
        c = np.asarray(center, dtype=float)
        v1, v2, v3 = self.mesh
        d2 = (v1 - c[0]) ** 2 + (v2 - c[1]) ** 2 + (v3 - c[2]) ** 2
        # nodes exactly on the sphere count as inside
        return d2 <= radius**2 * (1.0 + 1e-12)

    def contains_ball(self, center, radius) -> bool:
        c = np.asarray(center, dtype=float)
        return bool(np.all(np.abs(c) + radius <= self.L * (1.0 + 1e-12)))

    def evaluate(self, fn) -> np.ndarray:
        """Sample ``fn(v1, v2, v3)`` on the nodes."""
        return np.broadcast_to(np.asarray(fn(*self.mesh), dtype=float), self.shape).copy()


@dataclass(frozen=True)
class DistributionField:
    """Samples of f(t, .) on a velocity grid."""

    grid: VelocityGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("distribution values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values, time=None) -> "DistributionField":
        return DistributionField(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class Cylinder:
    """Space-time cylinder (t_start, t_end) x B(center, radius)."""

    t_start: float
    t_end: float
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("cylinder needs t_start < t_end")
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")
        c = tuple(float(x) for x in self.center)
        if len(c) != 3:
            raise ValueError("cylinder center must have three components")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "_c", np.array(c))

    def fits(self, grid: VelocityGrid) -> bool:
        return grid.contains_ball(self.center, self.radius)

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "center": list(self.center),
            "radius": self.radius,
        }


def _values(f):
    return f.values if isinstance(f, DistributionField) else np.asarray(f, dtype=float)


def integrate(f: DistributionField, weight=None) -> float:
    """Trapezoid approximation of the integral of ``f * weight`` over the cube.

    ``weight`` may be ``None`` (identically one), an array on the grid, or a
    callable ``weight(v1, v2, v3)``.
    """
    vals = f.values
    if weight is None:
        return float(np.sum(vals * f.grid.weights))
    if callable(weight):
        weight = f.grid.evaluate(weight)
    return float(np.sum(vals * np.asarray(weight) * f.grid.weights))


def lq_norm_on_ball(f: DistributionField, center, radius, q) -> float:
    """(sum over nodes in the ball of |f|^q h^3)^(1/q); the max for q = inf."""
    if not (q == np.inf or q >= 1):
        raise ValueError(f"q must be >= 1 or inf, got {q!r}")
    grid = f.grid
    if not grid.contains_ball(center, radius):
        raise ValueError("ball must lie inside the grid cube")
    vals = np.abs(f.values[grid.ball_mask(center, radius)])
    if vals.size == 0:
        return 0.0
    if q == np.inf:
        return float(vals.max())
    scale = vals.max()
    if scale == 0.0:
        return 0.0
    return float(scale * (np.sum((vals / scale) ** q) * grid.h**3) ** (1.0 / q))


def gradient(u, h: float) -> np.ndarray:
    """Second-order gradient; central inside, one-sided second order at faces.

    Returns an array of shape ``(3, n, n, n)``.
    """
    return np.stack(np.gradient(_values(u), h, edge_order=2))


def divergence(w, h: float) -> np.ndarray:
    """Divergence of a ``(3, n, n, n)`` vector field with the gradient's stencils.

    On the interior-node inner product (outermost layer excluded) this is the
    exact negative adjoint of :func:`gradient` for ``w`` vanishing on the two
    outermost node layers:  sum_int grad(u).w + sum_int u div(w) = 0.
    """
    w = np.asarray(w, dtype=float)
    return sum(np.gradient(w[k], h, axis=k, edge_order=2) for k in range(3))


def second_derivative(u, h: float, i: int, j: int) -> np.ndarray:
    """d_i d_j u; compact three-point stencil for i == j, nested central otherwise."""
    u = _values(u)
    if i != j:
        return np.gradient(np.gradient(u, h, axis=i, edge_order=2), h, axis=j, edge_order=2)
    out = np.empty_like(u)
    um = np.moveaxis(u, i, 0)
    om = np.moveaxis(out, i, 0)
    om[1:-1] = (um[2:] - 2.0 * um[1:-1] + um[:-2]) / h**2
    om[0] = (2.0 * um[0] - 5.0 * um[1] + 4.0 * um[2] - um[3]) / h**2
    om[-1] = (2.0 * um[-1] - 5.0 * um[-2] + 4.0 * um[-3] - um[-4]) / h**2
    return out


def hessian(u, h: float) -> np.ndarray:
    """All second derivatives, shape ``(3, 3, n, n, n)``."""
    u = _values(u)
    out = np.empty((3, 3) + u.shape)
    for i in range(3):
        for j in range(i, 3):
            out[i, j] = second_derivative(u, h, i, j)
            out[j, i] = out[i, j]
    return out


def hessian_apply(matrix_field, u, h: float) -> np.ndarray:
    """sum_ij M_ij d_i d_j u for a matrix field of shape ``(3, 3, n, n, n)``."""
    m = np.asarray(matrix_field, dtype=float)
    u = _values(u)
    out = np.zeros_like(u)
    for i in range(3):
        for j in range(i, 3):
            d2 = second_derivative(u, h, i, j)
            out += (m[i, j] if i == j else m[i, j] + m[j, i]) * d2
    return out


# -- high-order first derivatives --------------------------------------------

# one-sided coefficients of the symmetric first-derivative stencils, by order
_CENTRAL = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
    8: (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}
STENCIL_ORDERS = tuple(_CENTRAL)


def derivative_matrix(n: int, h: float, order: int = 6) -> np.ndarray:
    """Dense first-derivative matrix on ``n`` equispaced nodes.

    Central stencils of the requested order where they fit, lower-order
    central stencils towards the ends and second-order one-sided rows at the
    two end nodes.  Every row annihilates constants.
    """
    if order not in _CENTRAL:
        raise ValueError(f"stencil order must be one of {STENCIL_ORDERS}")
    d = np.zeros((n, n))
    for i in range(1, n - 1):
        o = order
        while o > 2 and not (o // 2 <= i <= n - 1 - o // 2):
            o -= 2
        for m, c in enumerate(_CENTRAL[o], start=1):
            d[i, i + m] += c / h
            d[i, i - m] -= c / h
    d[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    d[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    return d


def apply_along(mat: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
    """Apply the square matrix ``mat`` along ``axis`` of a cubic array."""
    n = u.shape[0]
    if axis == 0:
        return (mat @ u.reshape(n, -1)).reshape(u.shape)
    if axis == 1:
        return np.matmul(mat, u)
    return u @ mat.T


def high_order_gradient(u, h: float, order: int = 6) -> np.ndarray:
    """Gradient from :func:`derivative_matrix` stencils, shape ``(3, n, n, n)``."""
    u = _values(u)
    d = derivative_matrix(u.shape[0], h, order)
    return np.stack([apply_along(d, u, k) for k in range(3)])


# -- snapshot I/O -----------------------------------------------------------

_HEADER = re.compile(rb"^LANDAU1 n=(\d+) L=(\S+) t=(\S+)$")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(f: DistributionField, path) -> Path:
    path = Path(path)
    header = f"LANDAU1 n={f.grid.n} L={f.grid.L!r} t={float(f.time)!r}\n".encode("ascii")
    payload = np.asarray(f.values, dtype="<f8").ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    return path


def read_snapshot(path) -> DistributionField:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SnapshotFormatError(f"{path}: missing header line")
    m = _HEADER.match(raw[:nl])
    if m is None:
        raise SnapshotFormatError(f"{path}: bad header {raw[:nl][:80]!r}")
    n, L, t = int(m.group(1)), float(m.group(2)), float(m.group(3))
    payload = raw[nl + 1 :]
    if len(payload) != 8 * n**3:
        raise SnapshotFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {8 * n**3} for n={n}"
        )
    vals = np.frombuffer(payload, dtype="<f8").reshape((n, n, n), order="F")
    return DistributionField(VelocityGrid(n, L), vals.astype(float), t)
