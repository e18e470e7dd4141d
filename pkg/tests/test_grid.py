import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from landau.grid import (
    Cylinder,
    DistributionField,
    SnapshotFormatError,
    VelocityGrid,
    derivative_matrix,
    divergence,
    gradient,
    hessian,
    hessian_apply,
    high_order_gradient,
    integrate,
    lq_norm_on_ball,
    read_snapshot,
    write_snapshot,
)
from landau.profiles import maxwellian

G33 = VelocityGrid(33, 8.0)
INNER = (slice(1, -1),) * 3


def monte_carlo_lq(q, radius, samples=1_000_000, seed=0):
    """L^q norm of the unit Maxwellian over B(0, radius) by uniform ball sampling."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(samples, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    x *= radius * rng.random(samples)[:, None] ** (1.0 / 3.0)
    f = (2 * np.pi) ** -1.5 * np.exp(-np.sum(x**2, axis=1) / 2)
    return (4.0 / 3.0 * np.pi * radius**3 * np.mean(f**q)) ** (1.0 / q)


# -- construction ------------------------------------------------------------

@pytest.mark.parametrize("n", [8, 10, 7, 2.0])
def test_grid_rejects_bad_n(n):
    with pytest.raises(ValueError):
        VelocityGrid(n, 1.0)


def test_grid_rejects_bad_L():
    with pytest.raises(ValueError):
        VelocityGrid(9, 0.0)


def test_origin_is_a_node():
    g = VelocityGrid(17, 3.0)
    assert g.axis[g.origin_index] == 0.0
    assert g.h == pytest.approx(6.0 / 16)
    assert g.axis[-1] == pytest.approx(3.0)


def test_field_is_immutable_copy():
    g = VelocityGrid(9, 1.0)
    src = np.ones(g.shape)
    f = DistributionField(g, src)
    src[0, 0, 0] = 5.0
    assert f.values[0, 0, 0] == 1.0
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2.0


def test_field_rejects_shape_and_nan():
    g = VelocityGrid(9, 1.0)
    with pytest.raises(ValueError):
        DistributionField(g, np.ones((9, 9, 8)))
    bad = np.ones(g.shape)
    bad[1, 2, 3] = np.nan
    with pytest.raises(ValueError):
        DistributionField(g, bad)


def test_cylinder_invariants():
    with pytest.raises(ValueError):
        Cylinder(1.0, 1.0)
    with pytest.raises(ValueError):
        Cylinder(0.0, 1.0, radius=0.0)
    with pytest.raises(ValueError):
        Cylinder(0.0, 1.0, center=(0.0, 0.0))
    c = Cylinder(0.0, 1.0, (1, 2, 3), 2.0)
    assert c.center == (1.0, 2.0, 3.0)
    assert c.fits(G33)
    assert not Cylinder(0.0, 1.0, (7.0, 0.0, 0.0), 2.0).fits(G33)


# -- quadrature --------------------------------------------------------------

def test_maxwellian_mass():
    assert integrate(maxwellian(G33)) == pytest.approx(1.0, abs=1e-6)


def test_maxwellian_energy():
    e = integrate(maxwellian(G33), lambda v1, v2, v3: 0.5 * (v1**2 + v2**2 + v3**2))
    assert e == pytest.approx(1.5, abs=1e-4)


def test_zero_field_integrates_to_zero():
    f = DistributionField(G33, np.zeros(G33.shape))
    assert integrate(f) == 0.0
    assert integrate(f, lambda v1, v2, v3: np.exp(v1)) == 0.0


def test_weight_array_and_callable_agree():
    f = maxwellian(G33, mean=(0.5, 0.0, 0.0))
    v1 = G33.mesh[0]
    assert integrate(f, v1) == integrate(f, lambda a, b, c: a)


def test_gaussian_quadrature_converges_at_least_second_order():
    # narrow anisotropic Gaussian on a small cube: the tails are not negligible,
    # so the error is that of the trapezoid rule itself
    def err(n):
        g = VelocityGrid(n, 1.0)
        v1, v2, v3 = g.mesh
        f = DistributionField(g, np.exp(-(v1**2) / 0.3 - v2**2 / 0.5 - (v3 - 0.2) ** 2 / 0.4))
        exact = 1.0
        for s, c in ((0.3, 0.0), (0.5, 0.0), (0.4, 0.2)):
            r = math.sqrt(s)
            exact *= 0.5 * math.sqrt(math.pi * s) * (math.erf((1 - c) / r) + math.erf((1 + c) / r))
        return abs(integrate(f) - exact)

    e1, e2, e3 = err(17), err(33), err(65)
    assert e1 / e2 > 3.5 and e2 / e3 > 3.5


# -- L^q norms on balls ------------------------------------------------------

def test_lq_ball_volume():
    g = VelocityGrid(65, 4.0)
    ones = DistributionField(g, np.ones(g.shape))
    r = 2.0
    vol = lq_norm_on_ball(ones, (0, 0, 0), r, 1)
    # node counting has an O(h) surface error: 4 pi r^2 h
    assert abs(vol - 4.0 / 3.0 * math.pi * r**3) < 4 * math.pi * r**2 * g.h


def test_lq_inf_is_max_over_ball():
    rng = np.random.default_rng(1)
    g = VelocityGrid(17, 2.0)
    vals = rng.normal(size=g.shape)
    f = DistributionField(g, vals)
    mask = g.ball_mask((0.5, 0.0, 0.0), 1.0)
    assert lq_norm_on_ball(f, (0.5, 0.0, 0.0), 1.0, np.inf) == np.max(np.abs(vals[mask]))


def test_lq_maxwellian_matches_monte_carlo():
    got = lq_norm_on_ball(maxwellian(G33), (0, 0, 0), 1.0, 4)
    assert got == pytest.approx(monte_carlo_lq(4, 1.0), rel=0.01)


def test_lq_rejects_small_q_and_outside_ball():
    f = maxwellian(G33)
    with pytest.raises(ValueError):
        lq_norm_on_ball(f, (0, 0, 0), 1.0, 0.5)
    with pytest.raises(ValueError):
        lq_norm_on_ball(f, (7.5, 0, 0), 1.0, 2)


def test_lq_of_zero_field():
    f = DistributionField(G33, np.zeros(G33.shape))
    assert lq_norm_on_ball(f, (0, 0, 0), 2.0, 4) == 0.0


# -- stencils ----------------------------------------------------------------

def test_gradient_of_linear_field_is_exact():
    g = VelocityGrid(17, 2.0)
    grad = gradient(g.mesh[0], g.h)
    np.testing.assert_allclose(grad[0][INNER], 1.0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(grad[1:][(slice(None),) + INNER], 0.0, atol=1e-13)


def test_laplacian_of_quadratic_is_six():
    g = VelocityGrid(17, 2.0)
    lap = divergence(gradient(g.speed_squared, g.h), g.h)
    np.testing.assert_allclose(lap[INNER], 6.0, rtol=0, atol=1e-11)


def test_hessian_apply_identity_converges_second_order():
    errs = []
    for n in (17, 33, 65):
        g = VelocityGrid(n, 2.0)
        u = np.sin(math.pi * g.mesh[0] / g.L)
        ident = np.zeros((3, 3) + g.shape)
        for i in range(3):
            ident[i, i] = 1.0
        lap = hessian_apply(ident, u, g.h)
        exact = -((math.pi / g.L) ** 2) * u
        errs.append(np.max(np.abs(lap - exact)[INNER]))
    rates = [math.log2(errs[k] / errs[k + 1]) for k in range(2)]
    assert min(rates) == pytest.approx(2.0, abs=0.15)


def test_hessian_is_symmetric_and_exact_on_quadratics():
    g = VelocityGrid(13, 1.5)
    v1, v2, v3 = g.mesh
    u = 3 * v1 * v2 - v3**2 + 0.5 * v1 * v3
    hs = hessian(u, g.h)
    expect = np.array([[0, 3, 0.5], [3, 0, 0], [0.5, 0, -2]], dtype=float)
    for i in range(3):
        for j in range(3):
            np.testing.assert_allclose(hs[i, j], expect[i, j], atol=1e-10)


def test_gradient_divergence_duality():
    rng = np.random.default_rng(2)
    g = VelocityGrid(15, 1.0)
    u = rng.normal(size=g.shape)
    w = np.zeros((3,) + g.shape)
    inside = (slice(None),) + (slice(2, -2),) * 3
    w[inside] = rng.normal(size=w[inside].shape)
    lhs = np.sum((gradient(u, g.h) * w)[(slice(None),) + INNER])
    rhs = np.sum((u * divergence(w, g.h))[INNER])
    assert abs(lhs + rhs) < 1e-10 * (abs(lhs) + 1)


@given(st.integers(0, 2), st.integers(-1, 1).filter(lambda s: s != 0))
def test_stencils_are_translation_equivariant(axis, shift):
    rng = np.random.default_rng(axis)
    g = VelocityGrid(13, 1.0)
    u = rng.normal(size=g.shape)
    us = np.roll(u, shift, axis=axis)
    # the 6th-order stencil drops order within three nodes of a face, one more is shifted in
    for op in (lambda x: gradient(x, g.h), lambda x: hessian(x, g.h), lambda x: high_order_gradient(x, g.h)):
        a = np.roll(op(u), shift, axis=axis - 3)
        b = op(us)
        np.testing.assert_allclose(a[..., 4:-4, 4:-4, 4:-4], b[..., 4:-4, 4:-4, 4:-4], atol=1e-9)


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_derivative_matrix_annihilates_constants_and_is_exact_for_polynomials(order):
    n, h = 21, 0.1
    d = derivative_matrix(n, h, order)
    x = np.arange(n) * h
    np.testing.assert_allclose(d @ np.ones(n), 0.0, atol=1e-10)
    half = order // 2
    body = slice(half, n - half)
    for p in range(1, order + 1):
        np.testing.assert_allclose((d @ x**p)[body], p * x[body] ** (p - 1), rtol=1e-8, atol=1e-8)


def test_derivative_matrix_rejects_unknown_order():
    with pytest.raises(ValueError):
        derivative_matrix(9, 1.0, 5)


def test_high_order_gradient_is_more_accurate():
    g = VelocityGrid(33, 3.0)
    u = np.exp(-g.speed_squared / 2)
    exact = -g.mesh[0] * u
    core = (slice(3, -3),) * 3
    e2 = np.max(np.abs(gradient(u, g.h)[0] - exact)[core])
    e6 = np.max(np.abs(high_order_gradient(u, g.h)[0] - exact)[core])
    assert e6 < e2 / 20


# -- snapshots ---------------------------------------------------------------

def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    g = VelocityGrid(9, 1.25)
    f = DistributionField(g, rng.normal(size=g.shape), 0.123456789)
    p = write_snapshot(f, tmp_path / "s.bin")
    back = read_snapshot(p)
    assert back.grid == g and back.time == f.time
    assert np.array_equal(back.values, f.values)


def test_snapshot_layout_is_first_index_fastest(tmp_path):
    g = VelocityGrid(9, 1.0)
    vals = np.zeros(g.shape)
    vals[1, 0, 0] = 1.0
    vals[0, 1, 0] = 2.0
    p = write_snapshot(DistributionField(g, vals), tmp_path / "s.bin")
    raw = p.read_bytes()
    header, payload = raw.split(b"\n", 1)
    assert header == b"LANDAU1 n=9 L=1.0 t=0.0"
    data = np.frombuffer(payload, dtype="<f8")
    assert data[1] == 1.0 and data[9] == 2.0


def test_snapshot_rejects_truncated_payload(tmp_path):
    g = VelocityGrid(9, 1.0)
    p = write_snapshot(DistributionField(g, np.ones(g.shape)), tmp_path / "s.bin")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)


def test_snapshot_rejects_bad_header(tmp_path):
    p = tmp_path / "s.bin"
    p.write_bytes(b"LANDAU2 n=9 L=1 t=0\n" + b"\0" * 8 * 729)
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)
    p.write_bytes(b"no newline")
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)
