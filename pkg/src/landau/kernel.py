"""Closed-form Coulomb Landau kernel, its derivatives, and sphere moments.

All kernel functions accept a single vector of shape ``(3,)`` or a batch of
shape ``(..., 3)`` and broadcast over the leading axes.  Tensor index order
follows the component names: ``a[..., i, j]``, ``grad[..., i, j, k] = d_k a_ij``
and ``hess[..., i, j, k, l] = d_k d_l a_ij``.
"""
from __future__ import annotations

import itertools

import numpy as np

_EYE = np.eye(3)


class KernelDomainError(ValueError):
    """Raised when a kernel is evaluated at the singular point z = 0."""


def _as_vectors(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (3,):
        raise ValueError(f"expected trailing dimension 3, got shape {z.shape}")
    r = np.sqrt(np.einsum("...i,...i->...", z, z))
    if np.any(r == 0.0):
        raise KernelDomainError("Landau kernel is singular at z = 0")
    return z, r


def pi_matrix(z):
    """Projection onto the plane orthogonal to ``z``."""
    z, r = _as_vectors(z)
    u = z / r[..., None]
    return _EYE - u[..., :, None] * u[..., None, :]


def a_kernel(z):
    """a_ij(z) = (delta_ij - z_i z_j / |z|^2) / |z|."""
    z, r = _as_vectors(z)
    return pi_matrix(z) / r[..., None, None]


def b_kernel(z):
    """Divergence of the a-kernel, b_i(z) = sum_j d_j a_ij(z) = -2 z_i / |z|^3."""
    z, r = _as_vectors(z)
    return -2.0 * z / r[..., None] ** 3


def grad_a_kernel(z):
    """Exact first derivatives ``g[..., i, j, k] = d_k a_ij(z)``."""
    z, r = _as_vectors(z)
    r3 = r[..., None, None, None] ** 3
    r5 = r3 * r[..., None, None, None] ** 2
    zi = z[..., :, None, None]
    zj = z[..., None, :, None]
    zk = z[..., None, None, :]
    d_ij = _EYE[:, :, None]
    d_ik = _EYE[:, None, :]
    d_jk = _EYE[None, :, :]
    # z_i z_j first keeps the (i, j) symmetry exact in floating point
    return (-(d_ij * zk) - (d_ik * zj + d_jk * zi)) / r3 + 3.0 * (zi * zj) * zk / r5


def hess_a_kernel(z):
    """Exact second derivatives ``H[..., i, j, k, l] = d_k d_l a_ij(z)``.

    The result is homogeneous of degree -3: ``H(z) = mu(z / |z|) / |z|**3``
    with an even angular part ``mu``.
    """
    z, r = _as_vectors(z)
    rr = r[..., None, None, None, None]
    u = z / r[..., None]
    ui = u[..., :, None, None, None]
    uj = u[..., None, :, None, None]
    uk = u[..., None, None, :, None]
    ul = u[..., None, None, None, :]
    d = _EYE
    d_ij = d[:, :, None, None]
    d_ik = d[:, None, :, None]
    d_il = d[:, None, None, :]
    d_jk = d[None, :, :, None]
    d_jl = d[None, :, None, :]
    d_kl = d[None, None, :, :]
    mu = (
        -d_ij * d_kl
        - d_ik * d_jl
        - d_jk * d_il
        + 3.0 * d_ij * uk * ul
        + 3.0 * (d_ik * uj + d_jk * ui) * ul
        + 3.0 * (d_il * uj * uk + d_jl * ui * uk + d_kl * ui * uj)
        - 15.0 * ui * uj * uk * ul
    )
    return mu / rr**3


def mu_angular(u):
    """Degree-0 angular part of the Hessian, evaluated on unit vectors ``u``."""
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u, axis=-1, keepdims=True)
    return hess_a_kernel(u / norm)


def sphere_quadrature(nodes: int):
    """Product Gauss-Legendre (in cos theta) x trapezoid (in phi) rule on S^2.

    Returns ``(points, weights)`` with ``points`` of shape ``(nodes**2, 3)``.
    Polynomials in the Cartesian coordinates of degree below ``nodes`` are
    integrated exactly.
    """
    if nodes < 1:
        raise ValueError("nodes must be a positive integer")
    x, wx = np.polynomial.legendre.leggauss(nodes)
    phi = 2.0 * np.pi * np.arange(nodes) / nodes
    wphi = np.full(nodes, 2.0 * np.pi / nodes)
    sin_t = np.sqrt(1.0 - x**2)
    pts = np.stack(
        [
            np.outer(sin_t, np.cos(phi)),
            np.outer(sin_t, np.sin(phi)),
            np.outer(x, np.ones(nodes)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    w = np.outer(wx, wphi).reshape(-1)
    return pts, w


def sphere_moment(order: int, indices, nodes: int = 32) -> float:
    """Surface integral over S^2 of a product of coordinate projections.

    ``order`` is 2 or 4 and ``indices`` holds that many 0-based axis indices,
    e.g. ``sphere_moment(2, (0, 0))`` is the integral of x^2 over the unit
    sphere, 4*pi/3.
    """
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order!r}")
    idx = tuple(indices)
    if len(idx) != order or any(not isinstance(i, (int, np.integer)) or not 0 <= i < 3 for i in idx):
        raise ValueError(f"need {order} axis indices in {{0, 1, 2}}, got {indices!r}")
    pts, w = sphere_quadrature(nodes)
    integrand = np.prod(pts[:, list(idx)], axis=1)
    return float(np.dot(w, integrand))


def isotropic_fourth_moment(i, j, k, l) -> float:
    """Closed form (4 pi / 15)(d_ij d_kl + d_ik d_jl + d_il d_jk)."""
    d = _EYE
    return 4.0 * np.pi / 15.0 * (d[i, j] * d[k, l] + d[i, k] * d[j, l] + d[i, l] * d[j, k])


def mu_surface_integrals(nodes: int = 64) -> np.ndarray:
    """Integrals over S^2 of every component mu[i, j, k, l]."""
    if nodes < 1:
        raise ValueError("nodes must be a positive integer")
    pts, w = sphere_quadrature(nodes)
    return np.einsum("n,nijkl->ijkl", w, mu_angular(pts))


def mu_mean_zero_check(nodes: int = 64) -> float:
    """Largest |integral over S^2 of mu_kl,ij| across all 81 index tuples."""
    return float(np.max(np.abs(mu_surface_integrals(nodes))))


def all_index_tuples(order: int):
    return list(itertools.product(range(3), repeat=order))
