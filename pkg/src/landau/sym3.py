"""Batched eigenvalues of symmetric 3x3 matrices."""
from __future__ import annotations

import numpy as np

# |r| above this is treated as a (near-)double root and handed to Jacobi
_DEGENERATE = 1.0 - 1e-6


def _jacobi(a: np.ndarray, sweeps: int = 12) -> np.ndarray:
    """Cyclic Jacobi on a batch ``(m, 3, 3)``; returns ascending eigenvalues."""
    a = a.copy()
    m = a.shape[0]
    rows = np.arange(m)
    for _ in range(sweeps):
        off = a[:, 0, 1] ** 2 + a[:, 0, 2] ** 2 + a[:, 1, 2] ** 2
        scale = np.einsum("mii->m", a * a)
        if np.all(off <= 1e-32 * np.maximum(scale, 1e-300)):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[:, p, q]
            app = a[:, p, p]
            aqq = a[:, q, q]
            # rotations for negligible off-diagonals would overflow theta
            active = np.abs(apq) > 1e-30 * np.sqrt(scale)
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(active, np.sign(theta + (theta == 0)) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(t**2 + 1.0)
            s = t * c
            rot = np.broadcast_to(np.eye(3), (m, 3, 3)).copy()
            rot[rows, p, p] = c
            rot[rows, q, q] = c
            rot[rows, p, q] = s
            rot[rows, q, p] = -s
            a = np.einsum("mji,mjk,mkl->mil", rot, a, rot)
    return np.sort(np.einsum("mii->mi", a), axis=1)


def eigvalsh3(a) -> np.ndarray:
    """Ascending eigenvalues of symmetric matrices of shape ``(..., 3, 3)``.

    Uses the trigonometric solution of the characteristic cubic; batches whose
    discriminant is close to zero (repeated eigenvalues) are recomputed with a
    cyclic Jacobi sweep.
    """
    a = np.asarray(a, dtype=float)
    batch = a.shape[:-2]
    a = a.reshape(-1, 3, 3)
    q = np.einsum("mii->m", a) / 3.0
    p1 = a[:, 0, 1] ** 2 + a[:, 0, 2] ** 2 + a[:, 1, 2] ** 2
    d0 = a[:, 0, 0] - q
    d1 = a[:, 1, 1] - q
    d2 = a[:, 2, 2] - q
    p2 = d0**2 + d1**2 + d2**2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    b00, b11, b22 = d0 / safe_p, d1 / safe_p, d2 / safe_p
    b01, b02, b12 = a[:, 0, 1] / safe_p, a[:, 0, 2] / safe_p, a[:, 1, 2] / safe_p
    det_b = b00 * (b11 * b22 - b12**2) - b01 * (b01 * b22 - b12 * b02) + b02 * (b01 * b12 - b11 * b02)
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    out = np.stack([lo, mid, hi], axis=1)
    scale = np.abs(q) + p
    isotropic = p <= 1e-14 * np.maximum(scale, 1e-300)
    out[isotropic] = q[isotropic, None]
    near = (np.abs(r) > _DEGENERATE) & ~isotropic
    if np.any(near):
        out[near] = _jacobi(a[near])
    return out.reshape(batch + (3,))
