"""Nonlocal Landau coefficients abar = a * f and bbar = b * f on the grid.

Two evaluation paths share one kernel table on the difference lattice:
``convolve_direct`` sums over source nodes (the reference) and
``convolve_fast`` multiplies spectra on a zero-padded grid.  The node that
coincides with the target is replaced by the analytic integral of the kernel
over the ball of the same volume as a grid cell; for ``a`` that is
(4 pi / 3) r_c^2 delta_ij with r_c = h (3 / 4 pi)^(1/3), for ``b`` it is zero
by oddness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .grid import DistributionField, VelocityGrid, divergence, lq_norm_on_ball, integrate
from .kernel import a_kernel, b_kernel
from .sym3 import eigvalsh3

PATHS = ("direct", "fast")


def singular_cell_radius(h: float) -> float:
    return h * (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)


def singular_cell_a(h: float) -> float:
    """Isotropic weight of the self-cell in the a-convolution."""
    return 4.0 * math.pi / 3.0 * singular_cell_radius(h) ** 2


@dataclass(frozen=True)
class CoefficientFields:
    """abar of shape ``(3, 3, n, n, n)`` and bbar of shape ``(3, n, n, n)``."""

    grid: VelocityGrid
    abar: np.ndarray
    bbar: np.ndarray
    provenance: str = "fast"


@dataclass(frozen=True)
class EllipticityReport:
    time: float
    center: tuple
    radius: float
    c_min: float
    C_max: float
    argmin: tuple
    argmax: tuple


def _kernel_values(offsets: np.ndarray, which: str, h: float) -> np.ndarray:
    """Kernel times h^3 at lattice offsets ``(..., 3)``, self-cell included.

    Returns ``(..., 3, 3)`` for ``a`` and ``(..., 3)`` for ``b``.
    """
    z = offsets * h
    zero = np.all(offsets == 0, axis=-1)
    zs = np.where(zero[..., None], 1.0, z)
    if which == "a":
        out = a_kernel(zs) * h**3
        out[zero] = singular_cell_a(h) * np.eye(3)
    elif which == "b":
        out = b_kernel(zs) * h**3
        out[zero] = 0.0
    else:
        raise ValueError(f"which must be 'a' or 'b', got {which!r}")
    return out


def _sources(f: DistributionField):
    vals = f.values
    idx = np.argwhere(vals != 0.0)
    return idx, vals[tuple(idx.T)]


def convolve_direct(f: DistributionField, which: str, targets=None, chunk: int = 64) -> np.ndarray:
    """Quadrature sum over source nodes for the a- or b-coefficient.

    ``targets`` optionally restricts evaluation to an ``(m, 3)`` array of node
    indices; the result then has leading shape ``(m,)`` instead of the grid
    shape, with the tensor axes last.  Without ``targets`` the tensor axes come
    first, matching :class:`CoefficientFields`.
    """
    grid = f.grid
    tail = (3, 3) if which == "a" else (3,)
    if which not in ("a", "b"):
        raise ValueError(f"which must be 'a' or 'b', got {which!r}")
    src_idx, src_val = _sources(f)
    if targets is None:
        tgt = np.indices(grid.shape).reshape(3, -1).T
    else:
        tgt = np.atleast_2d(np.asarray(targets, dtype=int))
    out = np.zeros((len(tgt),) + tail)
    if len(src_idx):
        for start in range(0, len(tgt), chunk):
            t = tgt[start : start + chunk]
            off = t[:, None, :] - src_idx[None, :, :]
            k = _kernel_values(off, which, grid.h)
            if which == "a":
                out[start : start + chunk] = np.einsum("tsij,s->tij", k, src_val)
            else:
                out[start : start + chunk] = np.einsum("tsi,s->ti", k, src_val)
    if targets is not None:
        return out
    out = out.reshape(grid.shape + tail)
    return np.moveaxis(out, (3, 4), (0, 1)) if which == "a" else np.moveaxis(out, 3, 0)


def padded_size(n: int) -> int:
    """FFT length per axis; at least 2n - 1 so lattice offsets never alias."""
    return scipy.fft.next_fast_len(2 * n - 1, real=True)


@lru_cache(maxsize=8)
def _kernel_spectra(grid: VelocityGrid, which: str):
    n = grid.n
    size = padded_size(n)
    d = np.arange(-(n - 1), n)
    off = np.stack(np.meshgrid(d, d, d, indexing="ij"), axis=-1)
    table = _kernel_values(off, which, grid.h)
    comps = [(i, j) for i in range(3) for j in range(i, 3)] if which == "a" else [(i,) for i in range(3)]
    spectra = {}
    for c in comps:
        padded = np.zeros((size,) * 3)
        vals = table[(Ellipsis,) + c]
        # offset d lives at index d mod size
        padded[np.ix_(d % size, d % size, d % size)] = vals
        spectra[c] = scipy.fft.rfftn(padded)
    return size, spectra


def convolve_fast(f: DistributionField, which: str, workers=None) -> np.ndarray:
    """Spectral evaluation of the same lattice sum as :func:`convolve_direct`."""
    if which not in ("a", "b"):
        raise ValueError(f"which must be 'a' or 'b', got {which!r}")
    grid = f.grid
    n = grid.n
    size, spectra = _kernel_spectra(grid, which)
    fhat = scipy.fft.rfftn(f.values, s=(size,) * 3, workers=workers)
    if which == "a":
        out = np.empty((3, 3) + grid.shape)
        for (i, j), kh in spectra.items():
            out[i, j] = scipy.fft.irfftn(kh * fhat, s=(size,) * 3, workers=workers)[:n, :n, :n]
            out[j, i] = out[i, j]
    else:
        out = np.empty((3,) + grid.shape)
        for (i,), kh in spectra.items():
            out[i] = scipy.fft.irfftn(kh * fhat, s=(size,) * 3, workers=workers)[:n, :n, :n]
    return out


def compute_coefficients(f: DistributionField, path: str = "fast", workers=None) -> CoefficientFields:
    if path == "fast":
        abar = convolve_fast(f, "a", workers)
        bbar = convolve_fast(f, "b", workers)
    elif path == "direct":
        abar = convolve_direct(f, "a")
        bbar = convolve_direct(f, "b")
    else:
        raise ValueError(f"coefficient path must be one of {PATHS}, got {path!r}")
    return CoefficientFields(f.grid, abar, bbar, path)


def max_relative_deviation(x, ref) -> float:
    """max |x - ref| / max |ref| (0 when both vanish)."""
    x = np.asarray(x)
    ref = np.asarray(ref)
    scale = np.max(np.abs(ref))
    dev = np.max(np.abs(x - ref))
    if scale == 0.0:
        return 0.0 if dev == 0.0 else math.inf
    return float(dev / scale)


def divergence_identity_residual(f: DistributionField, coeff: CoefficientFields) -> float:
    """||div bbar + 8 pi f|| / ||8 pi f|| in L^2 over interior nodes."""
    src = 8.0 * math.pi * f.values
    inner = (slice(1, -1),) * 3
    denom = np.sqrt(np.sum(src[inner] ** 2))
    if denom == 0.0:
        return 0.0
    res = divergence(coeff.bbar, f.grid.h) + src
    return float(np.sqrt(np.sum(res[inner] ** 2)) / denom)


def ellipticity_bounds(coeff: CoefficientFields, center, radius, time: float = 0.0) -> EllipticityReport:
    """Extreme eigenvalues of abar over the grid nodes inside a ball."""
    mask = coeff.grid.ball_mask(center, radius)
    idx = np.argwhere(mask)
    if len(idx) == 0:
        raise ValueError("no grid nodes inside the requested ball")
    mats = np.moveaxis(coeff.abar[:, :, mask], -1, 0)
    ev = eigvalsh3(mats)
    lo = int(np.argmin(ev[:, 0]))
    hi = int(np.argmax(ev[:, 2]))
    return EllipticityReport(
        time=float(time),
        center=tuple(float(c) for c in center),
        radius=float(radius),
        c_min=float(ev[lo, 0]),
        C_max=float(ev[hi, 2]),
        argmin=tuple(int(i) for i in idx[lo]),
        argmax=tuple(int(i) for i in idx[hi]),
    )


def holder_constant(q: float) -> float:
    """A(q) = 2 || 1/|z| ||_{L^{q'}(B_1)}, finite for q > 3/2."""
    if q == np.inf:
        qp = 1.0
    else:
        if not q > 1.5:
            raise ValueError("the bound needs q > 3/2")
        qp = q / (q - 1.0)
    return 2.0 * (4.0 * math.pi / (3.0 - qp)) ** (1.0 / qp)


def ellipticity_upper_bound(f: DistributionField, center, radius, q: float):
    """Right-hand side A(q) S0 + 2 M0 of the upper ellipticity estimate.

    S0 is the L^q norm over the ball enlarged by one unit, which contains
    every v - z with v in the ball and |z| < 1.  Returns ``(A, S0, M0, bound)``.
    """
    grid = f.grid
    r = radius + 1.0
    if not grid.contains_ball(center, r):
        raise ValueError("enlarged ball B(center, radius + 1) must lie inside the grid")
    A = holder_constant(q)
    s0 = lq_norm_on_ball(f, center, r, q)
    m0 = integrate(f)
    return A, s0, m0, A * s0 + 2.0 * m0
