"""Acceptance criteria 1-10, one PASS/FAIL line each.

Criteria with two independent clauses are split (7a/7b, 8a/8b) so that each
clause reports on its own.  Every line is printed and collected for the
end-of-session summary before the assertion runs.
"""
import math
import time

import numpy as np
import pytest

from _runs import mixture_run, maxwellian_run
from conftest import ACCEPTANCE_LINES
from landau.coefficients import (
    compute_coefficients,
    convolve_direct,
    convolve_fast,
    divergence_identity_residual,
    ellipticity_bounds,
    ellipticity_upper_bound,
    max_relative_deviation,
)
from landau.diagnostics import moment_time_holder
from landau.grid import Cylinder, VelocityGrid
from landau.holder import SpaceTimeField, holder_1plus, regularity_verdict
from landau.kernel import (
    a_kernel,
    all_index_tuples,
    grad_a_kernel,
    hess_a_kernel,
    isotropic_fourth_moment,
    mu_surface_integrals,
    sphere_moment,
)
from landau.profiles import maxwellian, maxwellian_mixture
from test_kernel import fd_grad, fd_hess

OUTER = Cylinder(0.0, 0.1, (0.0, 0.0, 0.0), 2.0)
INNER = Cylinder(0.02, 0.1, (0.0, 0.0, 0.0), 1.5)
PHIS = {
    "1": lambda v1, v2, v3: np.ones_like(v1),
    "v1": lambda v1, v2, v3: v1,
    "|v|^2": lambda v1, v2, v3: v1**2 + v2**2 + v3**2,
}


def report(cid, ok, detail):
    line = f"C{cid:<3} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def rel_change(a, b):
    return abs(a - b) / abs(b) if b else abs(a - b)


def random_points(count, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    return d * 10 ** rng.uniform(-2, 2, size=count)[:, None]


# -- 1 -----------------------------------------------------------------------

def test_c1_kernel_algebra():
    t0 = time.perf_counter()
    z = random_points(1000)
    r = np.linalg.norm(z, axis=1)
    a = a_kernel(z)
    null = np.max(np.linalg.norm(np.einsum("nij,nj->ni", a, z), axis=1) / (np.linalg.norm(a, axis=(1, 2)) * r))
    trace = np.max(np.abs(np.trace(a, axis1=1, axis2=2) * r / 2 - 1))
    g_ref = np.stack([fd_grad(zi, 1e-5 * ri) for zi, ri in zip(z, r)])
    h_ref = np.stack([fd_hess(zi, 1e-3 * ri) for zi, ri in zip(z, r)])
    g = grad_a_kernel(z)
    h = hess_a_kernel(z)
    gerr = np.max(np.abs(g - g_ref).reshape(1000, -1).max(1) / np.abs(g).reshape(1000, -1).max(1))
    herr = np.max(np.abs(h - h_ref).reshape(1000, -1).max(1) / np.abs(h).reshape(1000, -1).max(1))
    dt = time.perf_counter() - t0
    ok = null < 1e-12 and trace < 1e-12 and gerr < 1e-5 and herr < 1e-5 and dt < 5
    report(1, ok, f"a z: {null:.1e}, trace: {trace:.1e}, grad FD: {gerr:.1e}, hess FD: {herr:.1e}, {dt:.2f} s")


# -- 2 -----------------------------------------------------------------------

def test_c2_sphere_identities():
    t0 = time.perf_counter()
    nodes = 64
    second = max(abs(sphere_moment(2, t, nodes) - (4 * math.pi / 3) * (t[0] == t[1])) for t in all_index_tuples(2))
    fourth = max(abs(sphere_moment(4, t, nodes) - isotropic_fourth_moment(*t)) for t in all_index_tuples(4))
    mu = float(np.max(np.abs(mu_surface_integrals(nodes))))
    dt = time.perf_counter() - t0
    ok = second < 1e-8 and fourth < 1e-8 and mu < 1e-8 and dt < 10
    report(2, ok, f"P_iP_j: {second:.1e}, fourth moment: {fourth:.1e}, max |int mu|: {mu:.1e}, {dt:.2f} s")


# -- 3 -----------------------------------------------------------------------

def test_c3_convolution_paths():
    t0 = time.perf_counter()
    g = VelocityGrid(17, 8.0)
    fields = {
        "maxwellian": maxwellian(g),
        "two-bump": maxwellian_mixture(
            g,
            [
                {"mass": 0.7, "temperature": 0.6, "mean": (-1.5, 0.0, 0.5)},
                {"mass": 0.3, "temperature": 0.4, "mean": (1.5, 1.0, 0.0)},
            ],
        ),
    }
    dev = max(
        max_relative_deviation(convolve_fast(f, w), convolve_direct(f, w)) for f in fields.values() for w in ("a", "b")
    )
    dt = time.perf_counter() - t0
    report(3, dev < 1e-6 and dt < 30, f"max rel deviation fast vs direct: {dev:.1e}, {dt:.1f} s")


# -- 4 -----------------------------------------------------------------------

def test_c4_divergence_identity():
    t0 = time.perf_counter()
    res = {}
    for n in (33, 65):
        f = maxwellian(VelocityGrid(n, 8.0))
        res[n] = divergence_identity_residual(f, compute_coefficients(f))
    ratio = res[33] / res[65]
    dt = time.perf_counter() - t0
    ok = res[33] < 0.1 and ratio >= 1.8 and dt < 300
    report(4, ok, f"residual n=33: {res[33]:.4f}, n=65: {res[65]:.4f}, contraction {ratio:.2f}, {dt:.1f} s")


# -- 5 -----------------------------------------------------------------------

def test_c5_ellipticity_sandwich():
    out = {}
    for n in (33, 65):
        f = maxwellian(VelocityGrid(n, 8.0))
        rep = ellipticity_bounds(compute_coefficients(f), (0, 0, 0), 3.0)
        A, s0, m0, bound = ellipticity_upper_bound(f, (0, 0, 0), 3.0, 4.0)
        out[n] = (rep.c_min, rep.C_max, bound)
    c33, C33, b33 = out[33]
    c65, C65, _ = out[65]
    drift = max(rel_change(c65, c33), rel_change(C65, C33))
    ok = 0 < c33 and C33 <= b33 and drift < 0.05
    report(5, ok, f"c_min {c33:.4f}, C_max {C33:.4f} <= A S0 + 2 M0 = {b33:.4f}, n=33 vs 65 drift {drift:.2%}")


# -- 6 -----------------------------------------------------------------------

def test_c6_conservation_and_monotonicity():
    t0 = time.perf_counter()
    traj = mixture_run(33, 1e-3)
    dt = time.perf_counter() - t0
    recs = [traj.initial] + traj.records
    m0, e0 = recs[0].mass, recs[0].energy
    mass = max(abs(r.mass - m0) for r in recs) / m0
    energy = max(abs(r.energy - e0) for r in recs) / e0
    dh = np.diff([r.entropy for r in recs])
    neg = max(r.negativity / r.mass for r in recs)
    ok = mass < 1e-6 and energy < 0.01 and np.all(dh <= 0) and neg < 1e-3 and dt < 600
    report(
        6,
        ok,
        f"mass drift {mass:.1e}, energy drift {energy:.1e}, max entropy step {dh.max():.1e}, negativity {neg:.1e}, {dt:.1f} s",
    )


# -- 7 -----------------------------------------------------------------------

def _equilibrium_change(traj):
    f0, f1 = traj.snapshots[0], traj.snapshots[-1]
    w = f0.grid.weights
    return float(np.sum(np.abs(f1.values - f0.values) * w) / np.sum(np.abs(f0.values) * w))


def test_c7a_equilibrium_fidelity():
    change = _equilibrium_change(maxwellian_run(33, 1e-3))
    report("7a", change < 1e-3, f"Maxwellian relative L1 change over t_final at n=33, dt=1e-3: {change:.2e}")


def test_c7b_equilibrium_change_halves_under_refinement():
    coarse = _equilibrium_change(maxwellian_run(33, 1e-3))
    fine = _equilibrium_change(maxwellian_run(65, 5e-4))
    ratio = fine / coarse
    report("7b", 0.35 <= ratio <= 0.65, f"change ratio n=65,dt=5e-4 over n=33,dt=1e-3: {ratio:.3f} (band 0.5 +- 30%)")


# -- 8 -----------------------------------------------------------------------

def _moment_constants(dt):
    traj = mixture_run(33, dt)
    return {k: moment_time_holder(traj, phi) for k, phi in PHIS.items()}


def test_c8a_moment_holder_constants_finite():
    c = {dt: _moment_constants(dt) for dt in (1e-3, 5e-4)}
    ok = all(math.isfinite(v) for d in c.values() for v in d.values())
    detail = ", ".join(f"{k}: {c[1e-3][k]:.2e}" for k in PHIS)
    report("8a", ok, f"constants at dt=1e-3: {detail}")


def test_c8b_moment_holder_constants_stable_under_dt_halving():
    a, b = _moment_constants(1e-3), _moment_constants(5e-4)
    changes = {k: rel_change(b[k], a[k]) for k in PHIS}
    detail = ", ".join(f"{k}: {a[k]:.2e} -> {b[k]:.2e}" for k in PHIS)
    report("8b", max(changes.values()) <= 0.2, f"dt 1e-3 -> 5e-4: {detail}")


# -- 9 -----------------------------------------------------------------------

def test_c9_serrin_monitor_end_to_end():
    v = {}
    for n, dt in ((33, 1e-3), (65, 5e-4)):
        v[n] = regularity_verdict(mixture_run(n, dt).snapshots, OUTER, INNER, q=4, alpha=0.5)
    a, b = v[33].components(), v[65].components()
    changes = {k: rel_change(b[k], a[k]) for k in a}
    worst = max(changes, key=changes.get)
    finite = all(math.isfinite(x) for x in list(a.values()) + list(b.values()))
    ok = v[33].hypothesis_held and v[65].hypothesis_held and finite and changes[worst] <= 0.2
    report(
        9,
        ok,
        f"S0 {v[33].s0:.4f}, flag held, {len(a)} components, largest change {worst} {changes[worst]:.1%}",
    )


# -- 10 ----------------------------------------------------------------------

def test_c10_holder_estimators_against_exhaustive():
    g = VelocityGrid(17, 3.0)
    times = np.linspace(0.0, 1.0, 11)
    cyl = Cylinder(0.0, 1.0, (0.0, 0.0, 0.0), 2.5)
    fields = {
        "sin(v1 + v2/2)e^-t + v3^2/10": lambda t, a, b, c: np.sin(a + 0.5 * b) * np.exp(-t) + 0.1 * c**2,
        "moving Gaussian": lambda t, a, b, c: np.exp(-((a - 0.5 * t) ** 2 + b**2 + c**2)),
    }
    worst = 0.0
    for fn in fields.values():
        f = SpaceTimeField.from_function(g, times, fn)
        s = holder_1plus(f, cyl, 0.5)
        e = holder_1plus(f, cyl, 0.5, exhaustive=True)
        pairs = [(s.space_quotient, e.space_quotient), (s.time_quotient, e.time_quotient)]
        pairs += list(zip(s.derivative_space_quotients, e.derivative_space_quotients))
        pairs += list(zip(s.derivative_time_quotients, e.derivative_time_quotients))
        for x, y in pairs:
            if y > 1e-12:
                worst = max(worst, rel_change(x, y))
    report(10, worst <= 0.1, f"largest sampled vs exhaustive gap over {len(fields)} fields: {worst:.1%}")
