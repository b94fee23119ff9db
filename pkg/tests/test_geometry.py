from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpflow.errors import (
    ConfigurationError,
    DegenerateMetricError,
    ShapeError,
    UnsupportedDimensionError,
)
from warpflow.geometry import (
    Profile,
    arclength,
    brown_york_mass,
    build_grid,
    check_origin_slope,
    class_membership,
    curvature,
    d_ds,
    mean_curvature,
    ricci_xform,
    sphere_volume,
    unit_sphere_volume,
)


def hyperbolic(M, L=6.0, n=2, stretch=0.0):
    g = build_grid(L, M, stretch)
    return Profile(g, np.ones(M + 1), np.sinh(g.nodes), n)


def flat(M, L=6.0, n=2):
    g = build_grid(L, M)
    return Profile(g, np.ones(M + 1), g.nodes.copy(), n)


def bumped(M, eps, xc, width, L=6.0, n=2, phi_amp=0.0):
    g = build_grid(L, M)
    x = g.nodes
    psi = np.sinh(x) * (1 + eps * x**2 * np.exp(-((x - xc) / width) ** 2))
    phi = 1 + phi_amp * x**2 * np.exp(-x**2)
    return Profile(g, phi, psi, n)


def refine_ratio(err_fn, M=64):
    return err_fn(M) / err_fn(2 * M)


# grids -------------------------------------------------------------------


def test_uniform_grid_unit_interval():
    g = build_grid(1.0, 10)
    assert np.allclose(g.nodes, np.linspace(0, 1, 11), atol=1e-15)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0


def test_uniform_grid_spacing():
    g = build_grid(6.0, 512)
    assert g.nodes.size == 513
    assert np.allclose(np.diff(g.nodes), 6 / 512, rtol=1e-12)


def test_stretched_grid_ratio_bounded():
    g = build_grid(6.0, 512, stretch=2.0)
    assert g.spacing_ratio <= 10.0
    assert np.all(np.diff(g.nodes) > 0)


@pytest.mark.parametrize("L,M,stretch,key", [
    (0.0, 16, 0.0, "L"), (math.inf, 16, 0.0, "L"), (1.0, 7, 0.0, "M"),
    (1.0, 16, -1.0, "stretch"), (1.0, 16, 5.0, "stretch"),
])
def test_bad_grid_inputs(L, M, stretch, key):
    with pytest.raises(ConfigurationError) as exc:
        build_grid(L, M, stretch)
    assert exc.value.key == key


@given(L=st.floats(0.5, 20), M=st.integers(8, 400), stretch=st.floats(0, 2.2))
def test_grid_invariants(L, M, stretch):
    g = build_grid(L, M, stretch)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == L and g.M == M
    assert np.all(np.diff(g.nodes) > 0)
    assert g.spacing_ratio <= 10.0 * (1 + 1e-12)


# profiles ----------------------------------------------------------------


def test_profile_rejects_nonzero_origin_and_bad_values():
    g = build_grid(1.0, 10)
    x = g.nodes
    with pytest.raises(DegenerateMetricError):
        Profile(g, np.ones(11), x + 0.1, 2)
    with pytest.raises(DegenerateMetricError):
        Profile(g, -np.ones(11), x, 2)
    with pytest.raises(ShapeError):
        Profile(g, np.ones(10), x, 2)
    with pytest.raises(UnsupportedDimensionError):
        Profile(g, np.ones(11), x, 1)


def test_origin_slope_of_cone_flagged():
    g = build_grid(1.0, 16)
    cone = Profile(g, np.ones(17), 0.5 * g.nodes, 2)
    with pytest.raises(DegenerateMetricError):
        check_origin_slope(cone)
    assert check_origin_slope(hyperbolic(64)) < 10 * (6 / 64) ** 2


# derivatives ---------------------------------------------------------------


def test_d_ds_sinh_is_cosh_second_order():
    def err(M):
        p = hyperbolic(M)
        return np.max(np.abs(d_ds(p.psi, p) - np.cosh(p.x)) / np.cosh(p.x))
    assert err(256) < 1e-3
    assert refine_ratio(err) > 3.5


def test_d_ds_constant_is_zero():
    p = hyperbolic(64)
    assert np.max(np.abs(d_ds(np.full(65, 3.7), p))) < 1e-12


def test_d_ds_chain_rule():
    g = build_grid(2.0, 64)
    p = Profile(g, np.full(65, 2.0), g.nodes.copy(), 2)
    assert np.allclose(d_ds(g.nodes, p)[1:-1], 0.5, atol=1e-12)


def test_d_ds_shape_error():
    p = hyperbolic(32)
    with pytest.raises(ShapeError):
        d_ds(np.zeros(10), p)


def test_arclength_examples():
    g = build_grid(3.0, 60)
    x = g.nodes
    assert np.array_equal(arclength(Profile(g, np.ones(61), np.sinh(x), 2)), x)
    assert np.allclose(arclength(Profile(g, np.full(61, 2.0), np.sinh(x), 2)), 2 * x, rtol=1e-14)

    def err(M):
        gg = build_grid(3.0, M)
        s = arclength(Profile(gg, np.cosh(gg.nodes), np.sinh(gg.nodes), 2))
        return np.max(np.abs(s - np.sinh(gg.nodes)))
    assert err(256) < 1e-3
    assert refine_ratio(err) > 3.9


# curvature -----------------------------------------------------------------


def test_hyperbolic_curvatures():
    fld = curvature(hyperbolic(512))
    assert np.max(np.abs(fld.K0 + 1)) < 1e-3
    assert np.max(np.abs(fld.K1 + 1)) < 1e-3
    assert np.max(np.abs(fld.R + 6)) < 1e-2


def test_flat_curvatures():
    fld = curvature(flat(128))
    for k in (fld.K0, fld.K1, fld.R):
        assert np.max(np.abs(k)) < 1e-10


def test_curvature_convergence():
    def err(M):
        fld = curvature(hyperbolic(M))
        return max(np.max(np.abs(fld.K0 + 1)), np.max(np.abs(fld.K1 + 1)))
    assert refine_ratio(err) > 3.5


def test_degenerate_psi_rejected():
    g = build_grid(1.0, 10)
    psi = g.nodes.copy()
    psi[4] = 0.0
    with pytest.raises(DegenerateMetricError):
        Profile(g, np.ones(11), psi, 2)


@st.composite
def profiles(draw):
    M = draw(st.sampled_from([64, 128]))
    xc = draw(st.floats(0.5, 4.0))
    width = draw(st.floats(0.3, 1.5))
    # keep 1 + eps x^2 exp(...) >= 1/2 so psi stays positive
    peak = (xc + width) ** 2
    eps = draw(st.floats(max(-0.19, -0.5 / peak), 0.19))
    return bumped(M, eps, xc, width, n=draw(st.integers(2, 5)),
                  phi_amp=draw(st.floats(0, 0.5)))


@given(profiles())
def test_algebraic_identities_to_roundoff(p):
    fld = curvature(p)
    n = p.n
    scale = np.abs(fld.K0) + np.abs(fld.K1) + 1
    assert np.all(np.abs(fld.R - (n * fld.K0 + n * (fld.K0 + (n - 1) * fld.K1))) <= 1e-13 * n * n * scale)
    assert np.all(np.abs(fld.R - (2 * n * fld.K0 + n * (n - 1) * fld.K1)) <= 1e-13 * n * n * scale)
    assert np.array_equal(fld.Rc_radial, n * fld.K0)
    assert np.array_equal(fld.Rc_sphere, fld.K0 + (n - 1) * fld.K1)
    assert fld.s[0] == 0.0 and np.all(np.diff(fld.s) >= 0)


@given(profiles())
def test_origin_regularity(p):
    fld = curvature(p)
    assert fld.K0[0] == fld.K1[0]
    # K1 at the first node tracks the origin limit as x_1 -> 0
    dx = p.grid.nodes[1]
    assert abs(fld.K1[1] - fld.K0[1]) < 50 * dx * (1 + abs(fld.K0[1]))


def test_origin_limits_agree_under_refinement():
    def err(M):
        fld = curvature(bumped(M, 0.1, 1.0, 0.5))
        # K0(0) = K1(0) = -psi_sss(0); compare with neighbor-extrapolated K1
        return abs(fld.K1[1] - fld.K0[0])
    assert err(512) < err(128)


# ricci in x-coordinates ----------------------------------------------------


def test_ricci_xform_hyperbolic():
    p = hyperbolic(512)
    xx, gg = ricci_xform(p)
    x = p.x
    assert np.max(np.abs(xx + 2)) < 1e-3
    assert np.max(np.abs(gg[1:-1] + 2 * np.sinh(x[1:-1]) ** 2) / np.sinh(x[1:-1]) ** 2) < 1e-3


def test_ricci_xform_flat():
    xx, gg = ricci_xform(flat(128))
    assert np.max(np.abs(xx)) < 1e-10 and np.max(np.abs(gg)) < 1e-10


def test_ricci_xform_printed_form_fails_on_model():
    p = hyperbolic(256)
    xx, _ = ricci_xform(p, printed=True)
    assert np.max(np.abs(xx[1:-1] + 2)) > 0.5


def test_ricci_xform_matches_k_form():
    def err(M):
        p = bumped(M, 0.15, 2.0, 0.7, phi_amp=0.3)
        fld = curvature(p)
        xx, gg = ricci_xform(p)
        i = slice(2, -2)
        e1 = np.abs(xx[i] - fld.Rc_radial[i] * p.phi[i] ** 2)
        e2 = np.abs(gg[i] - fld.Rc_sphere[i] * p.psi[i] ** 2) / p.psi[i] ** 2
        return max(e1.max(), e2.max())
    assert err(512) < 1e-2
    assert refine_ratio(err, 128) > 3.0


# mean curvature and volume --------------------------------------------------


def test_mean_curvature_examples():
    p = hyperbolic(512)
    H = mean_curvature(p)
    assert H[0] == math.inf
    x = p.x[1:]
    assert np.max(np.abs(H[1:] - 2 * np.cosh(x) / np.sinh(x)) / (2 / np.tanh(x))) < 1e-4
    f = flat(64)
    assert np.allclose(mean_curvature(f)[1:], 2 / f.x[1:], rtol=1e-12)


def test_mean_curvature_is_log_derivative_of_volume():
    def err(M):
        p = bumped(M, 0.1, 2.0, 0.5, phi_amp=0.2)
        H = mean_curvature(p)
        V = sphere_volume(p)
        i = slice(4, -2)
        return np.max(np.abs(H[i] - d_ds(V, p)[i] / V[i]) / H[i])
    assert err(512) < 1e-3
    assert refine_ratio(err, 128) > 3.5


def test_sphere_volume_examples():
    p = hyperbolic(64)
    assert np.allclose(sphere_volume(p), 4 * np.pi * np.sinh(p.x) ** 2, rtol=1e-14)
    assert sphere_volume(p)[0] == 0.0
    assert unit_sphere_volume(3) == pytest.approx(2 * np.pi**2, rel=1e-15)
    g = build_grid(1.0, 10)
    psi = np.ones(11)
    psi[0] = 0.0
    prof = Profile(g, np.ones(11), psi, 3)
    assert np.allclose(sphere_volume(prof)[1:], 2 * np.pi**2, rtol=1e-15)


# brown-york mass -------------------------------------------------------------


def test_mass_vanishes_on_hyperbolic():
    p = hyperbolic(512)
    m = brown_york_mass(p)
    V = sphere_volume(p)
    assert np.max(np.abs(m[1:]) / V[1:]) < 1e-4


def test_mass_flat_closed_form():
    p = flat(512)
    m = brown_york_mass(p)
    r = p.x[1:]
    exact = (2 / np.tanh(r) - 2 / r) * 4 * np.pi * r**2
    assert np.max(np.abs(m[1:] - exact) / exact) < 1e-10


def test_mass_uses_arclength_not_x():
    g = build_grid(4.0, 256)
    p = Profile(g, np.full(257, 2.0), 2 * np.sinh(g.nodes), 2)
    fld = curvature(p)
    m = brown_york_mass(p, fld)
    s = fld.s[1:]
    expected = (2 / np.tanh(s) - fld.H[1:]) * fld.V[1:]
    assert np.allclose(m[1:], expected, rtol=1e-14)


def test_mass_requires_n2():
    with pytest.raises(UnsupportedDimensionError):
        brown_york_mass(hyperbolic(32, n=3))


# class membership ------------------------------------------------------------


def test_class_phi_one_fails_literal_reading():
    p = hyperbolic(128)
    cm = class_membership(p, tail_start=3.0, c_bounds=(0.5, 2.0), phi_reference="x")
    assert not cm.within_class and not cm.phi_within and cm.psi_within
    assert class_membership(p, 3.0, (0.5, 2.0), phi_reference="one").within_class


def test_class_phi_x_passes():
    g = build_grid(6.0, 128)
    x = g.nodes
    phi = np.where(x > 0, x, x[1])
    p = Profile(g, phi, np.sinh(x), 2)
    assert class_membership(p, 3.0, (0.5, 2.0), phi_reference="x").within_class


def test_class_fast_growth_fails():
    g = build_grid(10.0, 128)
    x = g.nodes
    p = Profile(g, np.ones(129), np.expm1(2 * x), 2)
    assert not class_membership(p, 5.0, (0.5, 100.0), phi_reference="one").within_class


def test_class_empty_tail():
    with pytest.raises(ConfigurationError):
        class_membership(hyperbolic(32), tail_start=7.0)
