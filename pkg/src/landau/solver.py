"""Conservative time stepping for d_t f = d_j(abar_ij d_i f) - d_i(bbar_i f).

The divergence form is discretized in weak form on the grid nodes (see
:class:`LandauDiscretization`); the diffusion is taken implicitly with
coefficients frozen at the start of the step and the drift explicitly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import PATHS, CoefficientFields, compute_coefficients
from .diagnostics import DiagnosticsRecord, Monitor, diagnose
from .grid import STENCIL_ORDERS, DistributionField, VelocityGrid, apply_along, derivative_matrix, hessian_apply

log = logging.getLogger(__name__)

SCHEMES = ("semi_implicit", "crank_nicolson", "explicit")
DRIFTS = ("abar_divergence", "bbar")


class StepError(RuntimeError):
    """A time step failed; ``residual`` holds the last linear residual."""

    def __init__(self, message, residual=float("nan"), time=None):
        super().__init__(message)
        self.residual = residual
        self.time = time
        self.partial = None


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_final: float = 0.1
    scheme: str = "semi_implicit"
    linear_tol: float = 1e-10
    coefficient_path: str = "fast"
    boundary: str = "zero_flux"
    picard: bool = False
    blowup_factor: float = 2.0
    stencil_order: int = 6
    drift: str = "abar_divergence"
    workers: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not 0 < self.linear_tol <= 1e-4:
            raise ValueError("linear_tol must lie in (0, 1e-4]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.coefficient_path not in PATHS:
            raise ValueError(f"coefficient_path must be one of {PATHS}")
        if self.stencil_order not in STENCIL_ORDERS:
            raise ValueError(f"stencil_order must be one of {STENCIL_ORDERS}")
        if self.drift not in DRIFTS:
            raise ValueError(f"drift must be one of {DRIFTS}")
        if self.picard and self.scheme != "semi_implicit":
            raise ValueError("picard re-assembly is only available for the semi_implicit scheme")
        if self.boundary != "zero_flux":
            raise ValueError("only the zero_flux boundary is supported")

    @property
    def n_steps(self) -> int:
        ratio = self.t_final / self.dt
        k = round(ratio)
        return int(k) if abs(ratio - k) < 1e-9 * max(1.0, ratio) else int(math.ceil(ratio))


# -- collocated difference operators ---------------------------------------

class DifferenceOperators:
    """Nodal gradient ``G`` (one dense matrix per axis) and its transpose."""

    def __init__(self, grid: VelocityGrid, order: int = 6):
        self.grid = grid
        self.order = order
        self.d = derivative_matrix(grid.n, grid.h, order)
        self.dt_ = np.ascontiguousarray(self.d.T)
        self.d_sq_t = np.ascontiguousarray((self.d**2).T)
        self.d_diag = np.diag(self.d).copy()

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return np.stack([apply_along(self.d, u, k) for k in range(3)])

    def gradient_t(self, flux: np.ndarray) -> np.ndarray:
        return sum(apply_along(self.dt_, flux[k], k) for k in range(3))

    def divergence_rows(self, tensor: np.ndarray) -> np.ndarray:
        """(sum_j d_j T_ij)_i for a ``(3, 3, n, n, n)`` tensor field."""
        return np.stack([sum(apply_along(self.d, tensor[i, j], j) for j in range(3)) for i in range(3)])

    def weighted_diagonal(self, tensor: np.ndarray) -> np.ndarray:
        """Diagonal of G^T diag(T) G for a nodal tensor field ``T``."""
        out = sum(apply_along(self.d_sq_t, tensor[k, k], k) for k in range(3))
        n = self.grid.n
        dd = [self.d_diag.reshape(shape) for shape in ((n, 1, 1), (1, n, 1), (1, 1, n))]
        for i in range(3):
            for j in range(3):
                if i != j:
                    out = out + tensor[i, j] * dd[i] * dd[j]
        return out


class LandauDiscretization:
    """Discrete operators for one frozen set of coefficients.

    With nodal trapezoid weights ``W`` the semi-discrete equation is

        W df/dt = G^T W (B f) - G^T W abar G f,

    where ``B`` is the drift coefficient.  The stiffness G^T W abar G is
    symmetric positive semidefinite whenever abar is, and ``G 1 = 0`` makes
    both terms sum to zero, so trapezoid mass is conserved.  Leaving boundary
    fluxes out of the weak form is the zero-flux condition.

    ``drift="abar_divergence"`` takes B_i = sum_j d_j abar_ij with the same
    stencils, which equals the convolution bbar in the continuum and keeps the
    local quadrature error of abar from unbalancing the Maxwellian flux;
    ``drift="bbar"`` uses the convolution field directly.
    """

    def __init__(self, coeff: CoefficientFields, ops: DifferenceOperators | None = None, drift: str = "abar_divergence"):
        self.grid = coeff.grid
        self.coeff = coeff
        self.ops = ops if ops is not None else DifferenceOperators(coeff.grid)
        self.mass = coeff.grid.weights
        self.wabar = coeff.abar * self.mass
        if drift == "abar_divergence":
            self.drift_field = self.ops.divergence_rows(coeff.abar)
        elif drift == "bbar":
            self.drift_field = coeff.bbar
        else:
            raise ValueError(f"drift must be one of {DRIFTS}")

    def stiffness(self, u: np.ndarray) -> np.ndarray:
        g = self.ops.gradient(u)
        w = self.wabar
        flux = np.stack([w[i, 0] * g[0] + w[i, 1] * g[1] + w[i, 2] * g[2] for i in range(3)])
        return self.ops.gradient_t(flux)

    def drift(self, f: np.ndarray) -> np.ndarray:
        return self.ops.gradient_t(self.drift_field * (self.mass * f)[None])

    def stiffness_diagonal(self) -> np.ndarray:
        return self.ops.weighted_diagonal(self.wabar)

    def rate(self, f: np.ndarray) -> np.ndarray:
        """Semi-discrete time derivative W^{-1}(drift - stiffness)."""
        return (self.drift(f) - self.stiffness(f)) / self.mass


def pcg(apply, b, x0, diag, tol, maxiter):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ||b - A x||_1 <= tol ||b||_1.  Returns ``(x, residual, iters,
    converged)`` with the relative l1 residual.
    """
    bnorm = np.sum(np.abs(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0, True
    x = x0.copy()
    r = b - apply(x)
    res = np.sum(np.abs(r)) / bnorm
    if res <= tol:
        return x, res, 0, True
    z = r / diag
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, maxiter + 1):
        ap = apply(p)
        pap = np.vdot(p, ap)
        if pap <= 0.0:
            return x, res, it, False
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = np.sum(np.abs(r)) / bnorm
        if res <= tol:
            return x, res, it, True
        z = r / diag
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, res, maxiter, False


@dataclass
class StepResult:
    """Outcome of one step.

    ``history`` carries what the next Crank-Nicolson step needs: the
    coefficients of the field this step started from and its drift vector.
    """

    field: DistributionField
    linear_residual: float
    iterations: int
    history: tuple | None = None


def _solve(w, disc, theta_dt, rhs, x0, cfg, t_next):
    diag = w + theta_dt * disc.stiffness_diagonal()
    new, res, iters, ok = pcg(lambda u: w * u + theta_dt * disc.stiffness(u), rhs, x0, diag, cfg.linear_tol, 10 * disc.grid.n)
    if not ok:
        raise StepError(
            f"linear solve stalled at t={t_next:g} with residual {res:.3e} after {iters} iterations",
            residual=res,
            time=t_next,
        )
    return new, res, iters


def _advance(f: DistributionField, coeff: CoefficientFields, cfg: SolverConfig, ops, history=None) -> StepResult:
    disc = LandauDiscretization(coeff, ops, cfg.drift)
    fn = f.values
    dt = cfg.dt
    t_next = f.time + dt
    w = disc.mass
    drift_now = disc.drift(fn)
    if cfg.scheme == "explicit":
        new = fn + dt * (drift_now - disc.stiffness(fn)) / w
        res, iters = 0.0, 0
    elif cfg.scheme == "semi_implicit" or history is None:
        new, res, iters = _solve(w, disc, dt, w * fn + dt * drift_now, fn, cfg, t_next)
    else:
        coeff_prev, drift_prev = history
        # abar is linear in f, so this is the coefficient of the extrapolated half-step field
        half = CoefficientFields(
            coeff.grid,
            1.5 * coeff.abar - 0.5 * coeff_prev.abar,
            1.5 * coeff.bbar - 0.5 * coeff_prev.bbar,
            coeff.provenance,
        )
        dhalf = LandauDiscretization(half, ops, cfg.drift)
        rhs = w * fn - 0.5 * dt * dhalf.stiffness(fn) + dt * (1.5 * drift_now - 0.5 * drift_prev)
        new, res, iters = _solve(w, dhalf, 0.5 * dt, rhs, fn, cfg, t_next)
    if not np.all(np.isfinite(new)):
        raise StepError(f"non-finite values at t={t_next:g}", residual=res, time=t_next)
    old_max = np.max(np.abs(fn))
    new_max = np.max(np.abs(new))
    if old_max > 0 and new_max > cfg.blowup_factor * old_max:
        raise StepError(
            f"max norm grew from {old_max:.3e} to {new_max:.3e} at t={t_next:g}; dt is likely above the stability limit",
            residual=res,
            time=t_next,
        )
    return StepResult(DistributionField(f.grid, new, t_next), float(res), iters, (coeff, drift_now))


def step(f: DistributionField, cfg: SolverConfig, coeff: CoefficientFields | None = None, ops=None, history=None) -> StepResult:
    """Advance one time step.

    ``semi_implicit``: diffusion implicit with coefficients frozen at ``f``,
    drift explicit, (W + dt K) f_new = W f + dt * drift(f).  With
    ``cfg.picard`` the coefficients are re-assembled once at the average of
    ``f`` and the first-pass result and the step is repeated.

    ``crank_nicolson``: the diffusion is averaged over the two time levels
    with coefficients extrapolated to the half step from ``f`` and the
    previous field, and the drift is extrapolated the same way (second
    order).  ``history`` is ``StepResult.history`` of the previous step;
    without it the step falls back to ``semi_implicit``.

    ``explicit``: forward Euler.
    """
    if ops is None or ops.grid != f.grid or ops.order != cfg.stencil_order:
        ops = DifferenceOperators(f.grid, cfg.stencil_order)
    if coeff is None:
        coeff = compute_coefficients(f, cfg.coefficient_path, cfg.workers)
    out = _advance(f, coeff, cfg, ops, history)
    if cfg.picard:
        mid = DistributionField(f.grid, 0.5 * (f.values + out.field.values), f.time)
        coeff_mid = compute_coefficients(mid, cfg.coefficient_path, cfg.workers)
        out = _advance(f, coeff_mid, cfg, ops)
        out.history = None
    return out


def nondivergence_residual(f_prev: DistributionField, f_next: DistributionField, coeff: CoefficientFields) -> float:
    """Relative L^2 defect of d_t f - abar_ij d_ij f - 8 pi f^2 over interior nodes.

    ``coeff`` belongs to ``f_prev``; the time derivative is the forward
    difference between the two snapshots.  The normalization is the sum of
    the L^2 norms of the diffusion and source terms.
    """
    dt = f_next.time - f_prev.time
    if dt <= 0:
        raise ValueError("f_next must be later than f_prev")
    h = f_prev.grid.h
    u = f_prev.values
    dtf = (f_next.values - u) / dt
    diff = hessian_apply(coeff.abar, u, h)
    src = 8.0 * math.pi * u**2
    inner = (slice(2, -2),) * 3
    norm = lambda a: np.sqrt(np.sum(a[inner] ** 2))  # noqa: E731
    denom = norm(diff) + norm(src)
    if denom == 0.0:
        return 0.0
    return float(norm(dtf - diff - src) / denom)


@dataclass
class Trajectory:
    """Snapshots at a fixed stride plus one diagnostics record per step.

    ``initial`` is the record of the initial data; ``records[k]`` belongs to
    step ``k + 1``.  Snapshot times are strictly increasing and always
    include the initial and the last completed step.
    """

    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    initial: DiagnosticsRecord | None = None
    stride: int = 1

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def _add_snapshot(self, f: DistributionField):
        if self.snapshots and not f.time > self.snapshots[-1].time:
            raise ValueError("snapshot times must increase strictly")
        self.snapshots.append(f)


def run(f0: DistributionField, cfg: SolverConfig, monitor: Monitor | None = None, snapshot_stride: int = 1, on_record=None, on_snapshot=None) -> Trajectory:
    """Iterate :func:`step` to ``cfg.t_final``.

    The coefficients assembled for each field serve both its diagnostics
    record and the following step.  ``on_record(rec)`` is called for every
    step record (not the initial one) and ``on_snapshot(index, field)`` for
    every stored snapshot, so callers can stream output.  On a
    :class:`StepError` the partial trajectory is attached as ``err.partial``
    before re-raising.
    """
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    if np.any(f0.values < 0):
        raise ValueError("initial data must be nonnegative")
    monitor = monitor or Monitor()
    ops = DifferenceOperators(f0.grid, cfg.stencil_order)
    traj = Trajectory(stride=snapshot_stride)
    n_steps = cfg.n_steps

    def snapshot(f):
        if on_snapshot is not None:
            on_snapshot(len(traj.snapshots), f)
        traj._add_snapshot(f)

    f = DistributionField(f0.grid, f0.values, 0.0) if f0.time != 0.0 else f0
    coeff = compute_coefficients(f, cfg.coefficient_path, cfg.workers)
    traj.initial = diagnose(f, coeff, monitor)
    snapshot(f)
    history = None
    for k in range(1, n_steps + 1):
        try:
            out = step(f, cfg, coeff, ops, history)
        except StepError as err:
            if traj.snapshots[-1] is not f:
                snapshot(f)
            err.partial = traj
            raise
        f, history = out.field, out.history
        coeff = compute_coefficients(f, cfg.coefficient_path, cfg.workers)
        rec = diagnose(f, coeff, monitor, out.linear_residual)
        traj.records.append(rec)
        if on_record is not None:
            on_record(rec)
        if k % snapshot_stride == 0 or k == n_steps:
            snapshot(f)
        log.debug("step %d/%d t=%.6g iters=%d res=%.2e", k, n_steps, f.time, out.iterations, out.linear_residual)
    return traj
