"""Functionals of a distribution: moments, entropy, Fisher information, monitors.

The per-step :class:`DiagnosticsRecord` and its CSV encoding live here, as
does the empirical Hoelder-1/2 constant of moments along a trajectory.
Space-time Hoelder norms are in :mod:`landau.holder`.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .coefficients import CoefficientFields, ellipticity_bounds
from .grid import DistributionField, high_order_gradient, integrate, lq_norm_on_ball

CSV_HEADER = (
    "time", "mass", "px", "py", "pz", "energy", "entropy", "fisher", "lq",
    "ellip_c", "ellip_C", "negativity", "trunc_mass", "lin_res",
)


def conserved_moments(f: DistributionField):
    """Mass, momentum (3-vector) and kinetic energy |v|^2 / 2."""
    v1, v2, v3 = f.grid.mesh
    mass = integrate(f)
    momentum = np.array([integrate(f, v1), integrate(f, v2), integrate(f, v3)])
    energy = integrate(f, 0.5 * f.grid.speed_squared)
    return mass, momentum, energy


def entropy(f: DistributionField) -> float:
    """Integral of f log f with nodes f <= 0 contributing nothing."""
    vals = f.values
    pos = vals > 0
    flogf = np.zeros_like(vals)
    flogf[pos] = vals[pos] * np.log(vals[pos])
    return float(np.sum(flogf * f.grid.weights))


def weighted_fisher(f: DistributionField, order: int = 6) -> float:
    """Integral of |grad sqrt(f+)|^2 (1 + |v|^2)^(-3/2).

    The gradient uses the solver's central stencils of the given order; the
    second-order one underestimates a unit Maxwellian by 8% at h = 0.5.
    """
    root = np.sqrt(np.maximum(f.values, 0.0))
    g = high_order_gradient(root, f.grid.h, order)
    dens = np.sum(g**2, axis=0) * (1.0 + f.grid.speed_squared) ** -1.5
    return float(np.sum(dens * f.grid.weights))


def negativity(f: DistributionField) -> float:
    """L^1 norm of the negative part."""
    return float(np.sum(np.maximum(-f.values, 0.0) * f.grid.weights))


def truncated_mass_estimate(f: DistributionField) -> float:
    """Mass a Maxwellian with the same moments would place outside the cube."""
    mass, mom, energy = conserved_moments(f)
    if mass <= 0:
        return 0.0
    u = mom / mass
    temp = (2.0 * energy / mass - float(u @ u)) / 3.0
    if not temp > 0:
        return 0.0
    L = f.grid.L
    s = math.sqrt(2.0 * temp)
    inside = 1.0
    for uk in u:
        inside *= 0.5 * (math.erf((L - uk) / s) + math.erf((L + uk) / s))
    return float(mass * (1.0 - inside))


def fisher_time_integral(times, values) -> float:
    """Trapezoid rule in time for a sequence of weighted Fisher values."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


@dataclass(frozen=True)
class Monitor:
    """Where the L^q and ellipticity monitors look."""

    q: float = 4.0
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 2.0


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    px: float
    py: float
    pz: float
    energy: float
    entropy: float
    fisher: float
    lq: float
    ellip_c: float
    ellip_C: float
    negativity: float
    trunc_mass: float
    lin_res: float

    @property
    def momentum(self):
        return np.array([self.px, self.py, self.pz])

    def row(self):
        return [f"{x:.17g}" for x in astuple(self)]

    @classmethod
    def from_row(cls, row):
        return cls(*(float(x) for x in row))


assert tuple(f.name for f in fields(DiagnosticsRecord)) == CSV_HEADER


def diagnose(f: DistributionField, coeff: CoefficientFields, monitor: Monitor, linear_residual: float = 0.0) -> DiagnosticsRecord:
    mass, mom, energy = conserved_moments(f)
    ell = ellipticity_bounds(coeff, monitor.center, monitor.radius, f.time)
    return DiagnosticsRecord(
        time=float(f.time),
        mass=mass,
        px=float(mom[0]),
        py=float(mom[1]),
        pz=float(mom[2]),
        energy=energy,
        entropy=entropy(f),
        fisher=weighted_fisher(f),
        lq=lq_norm_on_ball(f, monitor.center, monitor.radius, monitor.q),
        ellip_c=ell.c_min,
        ellip_C=ell.C_max,
        negativity=negativity(f),
        trunc_mass=truncated_mass_estimate(f),
        lin_res=float(linear_residual),
    )


class DiagnosticsWriter:
    """Appends records to a CSV file, flushing after every row."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_HEADER)
        self._fh.flush()

    def write(self, rec: DiagnosticsRecord):
        self._w.writerow(rec.row())
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path):
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected diagnostics header")
    return [DiagnosticsRecord.from_row(r) for r in rows[1:]]


def moment_time_holder(snapshots, phi) -> float:
    """max over snapshot pairs of |int f phi (t) - int f phi (s)| / |t - s|^(1/2).

    ``snapshots`` is a sequence of :class:`DistributionField` (or anything
    with a ``snapshots`` attribute holding one); ``phi`` is a callable of
    ``(v1, v2, v3)`` or an array on the grid.
    """
    snaps = list(getattr(snapshots, "snapshots", snapshots))
    if len(snaps) < 2:
        raise ValueError("need at least two snapshots")
    weight = snaps[0].grid.evaluate(phi) if callable(phi) else np.asarray(phi)
    times = np.array([s.time for s in snaps])
    moments = np.array([integrate(s, weight) for s in snaps])
    best = 0.0
    for a, b in itertools.combinations(range(len(snaps)), 2):
        dt = abs(times[b] - times[a])
        if dt > 0:
            best = max(best, abs(moments[b] - moments[a]) / math.sqrt(dt))
    return float(best)
