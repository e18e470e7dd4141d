"""Initial-data profiles sampled on a velocity grid."""
from __future__ import annotations

import numpy as np

from .grid import DistributionField, VelocityGrid


def maxwellian_values(grid: VelocityGrid, mass=1.0, temperature=1.0, mean=(0.0, 0.0, 0.0)):
    """Analytically normalized Gaussian M(v) = mass (2 pi T)^(-3/2) exp(-|v-u|^2 / 2T)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    u = np.asarray(mean, dtype=float)
    v1, v2, v3 = grid.mesh
    d2 = (v1 - u[0]) ** 2 + (v2 - u[1]) ** 2 + (v3 - u[2]) ** 2
    return mass * (2.0 * np.pi * temperature) ** -1.5 * np.exp(-d2 / (2.0 * temperature))


def maxwellian(grid, mass=1.0, temperature=1.0, mean=(0.0, 0.0, 0.0), time=0.0):
    return DistributionField(grid, maxwellian_values(grid, mass, temperature, mean), time)


def maxwellian_mixture(grid, components, time=0.0):
    """Sum of Maxwellians; ``components`` is an iterable of dicts with keys
    ``mass``, ``temperature`` and ``mean``."""
    vals = np.zeros(grid.shape)
    for c in components:
        vals += maxwellian_values(grid, c["mass"], c["temperature"], c.get("mean", (0.0, 0.0, 0.0)))
    return DistributionField(grid, vals, time)


def compact_bump(grid, center=(0.0, 0.0, 0.0), radius=1.0, height=1.0, power=3, time=0.0):
    """height * (1 - |v - c|^2 / r^2)^power inside the ball, zero outside."""
    c = np.asarray(center, dtype=float)
    v1, v2, v3 = grid.mesh
    s = 1.0 - ((v1 - c[0]) ** 2 + (v2 - c[1]) ** 2 + (v3 - c[2]) ** 2) / radius**2
    vals = height * np.where(s > 0.0, np.maximum(s, 0.0) ** power, 0.0)
    return DistributionField(grid, vals, time)


def point_mass(grid, index, mass=1.0, time=0.0):
    """Single-node spike of the given mass (value mass / h^3)."""
    vals = np.zeros(grid.shape)
    vals[tuple(index)] = mass / grid.h**3
    return DistributionField(grid, vals, time)
