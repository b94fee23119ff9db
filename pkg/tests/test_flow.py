from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow.errors import BlowUpError, ConfigurationError, ContractError
from warpflow.flow import (
    BoundaryModel,
    FlowConfig,
    FlowState,
    apply_origin_bc,
    apply_outer_bc,
    evolve,
    initial_state,
    modified_rhs,
    modified_time_to_tau,
    reparameterization_residual,
    reparameterize_modified,
    rhs_xt,
    stable_dt,
    step,
)
from warpflow.geometry import (
    Profile,
    build_grid,
    check_origin_slope,
    curvature,
    d2_ds2,
)
from warpflow.presets import exact_hyperbolic_profile, hyperbolic_scale


def state_of(psi_fn, phi_fn, M=128, L=6.0, n=2, t=0.0):
    g = build_grid(L, M)
    x = g.nodes
    return FlowState(t, Profile(g, phi_fn(x), psi_fn(x), n))


def hyper_state(M=128, t=0.0, n=2):
    g = build_grid(6.0, M)
    return FlowState(t, exact_hyperbolic_profile(g, n, t))


def flat_state(M=64):
    return state_of(lambda x: x.copy(), np.ones_like, M=M)


# config --------------------------------------------------------------------


def test_config_defaults():
    c = FlowConfig()
    assert c.cfl == 0.2 and c.outer_bc == "dirichlet_exact_hyperbolic"


@pytest.mark.parametrize("kw,key", [
    ({"n": 1}, "n"), ({"cfl": 0.9}, "cfl"), ({"cfl": 0.0}, "cfl"), ({"t_end": 0.0}, "t_end"),
    ({"outer_bc": "periodic"}, "outer_bc"), ({"M": 4}, "M"), ({"record_every": 0}, "record_every"),
])
def test_config_constraints(kw, key):
    with pytest.raises(ConfigurationError) as exc:
        FlowConfig(**kw)
    assert exc.value.key == key


# right-hand sides -----------------------------------------------------------


def test_rhs_flat_is_zero():
    dpsi, dphi = rhs_xt(flat_state())
    assert np.max(np.abs(dpsi)) < 1e-12 and np.max(np.abs(dphi)) < 1e-12


@pytest.mark.parametrize("t", [0.0, 0.7])
def test_rhs_on_self_similar_family(t):
    n = 2

    def err(M):
        stt = hyper_state(M, t)
        c = math.sqrt(1 + 2 * n * t)
        x = stt.profile.x
        dpsi, dphi = rhs_xt(stt)
        i = slice(0, -1)
        e1 = np.max(np.abs(dpsi[i] - n * np.sinh(x[i]) / c) / (n * np.cosh(x[i]) / c))
        e2 = np.max(np.abs(dphi[i] - n / c)) / (n / c)
        return max(e1, e2)
    assert err(512) < 1e-3
    assert err(128) / err(256) > 3.0


def test_rhs_matches_s_form():
    def err(M):
        stt = state_of(lambda x: np.sinh(x) * (1 + 0.1 * x**2 * np.exp(-(x - 2) ** 2 / 0.25)),
                       lambda x: 1 + 0.2 * x**2 * np.exp(-x**2), M=M)
        fld = curvature(stt.profile)
        dpsi, dphi = rhs_xt(stt)
        n = 2
        psi_t = fld.psi_ss - (n - 1) * fld.K1 * stt.profile.psi
        phi_t = -n * fld.K0 * stt.profile.phi
        i = slice(1, -1)
        return max(np.max(np.abs(dpsi[i] - psi_t[i])), np.max(np.abs(dphi[i] - phi_t[i])))
    assert err(512) < 1e-3
    assert err(128) / err(256) > 3.0


def test_modified_rhs_hyperbolic_stationary():
    dpsi, dphi = modified_rhs(hyper_state(512))
    i = slice(0, -1)
    x = hyper_state(512).profile.x
    assert np.max(np.abs(dpsi[i]) / np.cosh(x[i])) < 1e-3 and np.max(np.abs(dphi[i])) < 1e-3


def test_modified_rhs_flat():
    stt = flat_state()
    dpsi, dphi = modified_rhs(stt)
    assert np.allclose(dpsi, -2 * stt.profile.x, atol=1e-12)
    assert np.allclose(dphi, -2.0, atol=1e-12)


def test_modified_minus_plain_is_definitional():
    stt = hyper_state(64, 0.3)
    a = modified_rhs(stt)
    b = rhs_xt(stt)
    n = stt.profile.n
    assert np.max(np.abs(a[0] + n * stt.profile.psi - b[0])) < 1e-12 * np.max(np.abs(b[0]))
    assert np.max(np.abs(a[1] + n * stt.profile.phi - b[1])) < 1e-13


# boundary conditions ----------------------------------------------------------


def test_origin_ghosts_have_parity():
    g = build_grid(1.0, 16)
    x = g.nodes
    p = apply_origin_bc(Profile(g, np.cosh(x), np.sinh(x), 2))
    assert p.ghost_psi == -math.sinh(x[1]) and p.ghost_x == -x[1]
    assert p.ghost_phi == pytest.approx(math.cosh(x[1]), rel=1e-15)
    assert p.psi[0] == 0.0
    assert d2_ds2(p.psi, p, parity="odd")[0] == 0.0


def test_outer_dirichlet_pins_exact_value():
    cfg = FlowConfig(M=64)
    stt = hyper_state(64, 0.0)
    out = apply_outer_bc(FlowState(0.4, stt.profile), cfg)
    assert out.psi[-1] == pytest.approx(math.sqrt(1 + 4 * 0.4) * math.sinh(6.0), rel=1e-15)


def test_outer_extrapolate_keeps_flat():
    cfg = FlowConfig(M=64, preset="flat", outer_bc="extrapolate_zero_curvature_gradient")
    stt = flat_state()
    out = apply_outer_bc(stt, cfg)
    assert np.array_equal(out.psi, stt.profile.psi)
    nxt = step(stt, 1e-3, cfg)
    assert np.max(np.abs(nxt.profile.psi - stt.profile.psi)) < 1e-13


def test_boundary_mismatch_flagged():
    traj = evolve(FlowConfig(preset="flat", M=32, t_end=0.01))
    assert traj.meta["boundary_mismatch"] is True
    traj = evolve(FlowConfig(preset="hyperbolic", M=32, t_end=0.01))
    assert traj.meta["boundary_mismatch"] is False


def test_unknown_outer_model():
    with pytest.raises(ConfigurationError):
        apply_outer_bc(hyper_state(32), BoundaryModel("reflecting", 2))


# time step ------------------------------------------------------------------


def test_stable_dt_examples():
    g = build_grid(1.0, 100)
    x = g.nodes
    one = FlowState(0.0, Profile(g, np.ones(101), np.sinh(x), 2))
    two = FlowState(0.0, Profile(g, np.full(101, 2.0), np.sinh(x), 2))
    assert stable_dt(one, 0.2) == pytest.approx(2e-5, rel=1e-12)
    assert stable_dt(two, 0.2) == pytest.approx(8e-5, rel=1e-12)
    gs = build_grid(1.0, 100, stretch=1.5)
    s = FlowState(0.0, Profile(gs, np.ones(101), np.sinh(gs.nodes), 2))
    assert stable_dt(s, 0.2) == pytest.approx(0.2 * np.min(np.diff(gs.nodes)) ** 2, rel=1e-12)


# stepping --------------------------------------------------------------------


def test_flat_step_is_fixed_point():
    cfg = FlowConfig(preset="flat", outer_bc="extrapolate_zero_curvature_gradient", M=64)
    stt = flat_state()
    nxt = step(stt, stable_dt(stt, 0.5), cfg)
    assert np.max(np.abs(nxt.profile.psi - stt.profile.psi)) < 1e-13


def test_hyperbolic_one_step():
    stt = hyper_state(256)
    dt = stable_dt(stt, 0.2)
    nxt = step(stt, dt)
    exact = exact_hyperbolic_profile(stt.profile.grid, 2, dt)
    x = stt.profile.x
    err = np.max(np.abs(nxt.profile.psi - exact.psi) / np.cosh(x))
    # local error O(dt^5 + dt dx^2)
    assert err < 10 * dt * (6 / 256) ** 2


def test_unstable_dt_blows_up_with_partial_trajectory():
    cfg = FlowConfig(M=64, t_end=1.0, record_every=1)
    with pytest.raises(BlowUpError) as exc:
        evolve(cfg, fixed_dt=50 * stable_dt(initial_state(cfg), 0.2))
    assert exc.value.trajectory is not None
    assert exc.value.trajectory.meta["completed"] is False
    assert exc.value.node is not None and exc.value.t is not None


def test_step_rejects_nonpositive_dt():
    with pytest.raises(ContractError):
        step(hyper_state(32), 0.0)


# evolve -----------------------------------------------------------------------


def test_evolve_hyperbolic_tracks_exact_solution():
    # psi error scaled by psi_x = c cosh x, which stays O(1) at the origin
    def err(M):
        traj = evolve(FlowConfig(M=M, t_end=0.25, record_every=10**6))
        st_ = traj.states[-1]
        x = st_.profile.x
        c = math.sqrt(1 + 4 * st_.t)
        return np.max(np.abs(st_.profile.psi - c * np.sinh(x)) / (c * np.cosh(x)))
    e = [err(M) for M in (64, 128, 256)]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(orders >= 1.8), (e, orders)


def test_evolve_flat_fixed_point(flat_traj):
    last = flat_traj.states[-1]
    assert last.t == pytest.approx(1.0)
    assert np.max(np.abs(last.profile.psi - last.profile.x)) < 1e-8


def test_trajectory_invariants(hyper_traj):
    t = hyper_traj.times
    assert t[0] == 0 and np.all(np.diff(t) > 0)
    assert t[-1] == pytest.approx(0.5)
    g = hyper_traj.grid
    assert all(s.profile.grid is g for s in hyper_traj.states)


def test_perturbed_completes(perturbed_traj):
    assert perturbed_traj.meta["completed"]
    for s in perturbed_traj.states:
        assert np.all(s.profile.phi > 0) and np.all(s.profile.psi[1:] > 0)


@settings(max_examples=6, deadline=None)
@given(eps=st.floats(-0.05, 0.19), xc=st.floats(1.0, 3.0), width=st.floats(0.4, 1.0))
def test_origin_pinning_along_flow(eps, xc, width):
    cfg = FlowConfig(preset=f"perturbed_hyperbolic({eps!r},{xc!r},{width!r})", M=64,
                     t_end=0.05, record_every=20)
    traj = evolve(cfg)
    h = traj.grid.nodes[1]
    for s in traj.states:
        assert s.profile.psi[0] == 0.0
        assert abs(s.profile.origin_slope() - 1) <= 10 * h * h
        check_origin_slope(s.profile)


def test_scale_commutation():
    # lam2 g0 evolved for lam2 t equals lam2 (g0 evolved for t)
    lam2, t = 2.0, 0.2
    base = FlowConfig(M=128, t_end=t, record_every=10**6)
    a = evolve(base).states[-1].profile
    b = evolve(replace(base, preset=f"scaled_hyperbolic({lam2})", t_end=lam2 * t)).states[-1].profile
    scale = math.sqrt(lam2)
    x = a.x
    assert np.max(np.abs(b.psi - scale * a.psi) / np.cosh(x)) < 1e-4
    assert np.max(np.abs(b.phi - scale * a.phi)) < 1e-4


def test_modified_flow_stationary_on_hyperbolic():
    traj = evolve(FlowConfig(M=128, t_end=0.5, modified=True, record_every=10**6))
    p = traj.states[-1].profile
    assert np.max(np.abs(p.psi - np.sinh(p.x)) / np.cosh(p.x)) < 1e-4


# reparameterization -------------------------------------------------------------


def test_chain_rule_selects_verified_pair():
    assert reparameterization_residual(2, "verified") < 1e-6
    assert reparameterization_residual(2, "printed") > 1.0
    for n in (3, 4):
        assert reparameterization_residual(n, "verified") < 1e-6


def test_reparameterize_identity_at_zero():
    traj = evolve(FlowConfig(M=64, t_end=0.1, modified=True, record_every=5))
    out = reparameterize_modified(traj, taus=[0.0])
    assert np.array_equal(out.states[0].profile.psi, traj.states[0].profile.psi)
    assert np.array_equal(out.states[0].profile.phi, traj.states[0].profile.phi)


def test_reparameterized_matches_exact_family():
    traj = evolve(FlowConfig(M=128, t_end=0.3, modified=True, record_every=20))
    out = reparameterize_modified(traj)
    for s in out.states:
        c = float(hyperbolic_scale(s.t, 2))
        x = s.profile.x
        assert np.max(np.abs(s.profile.psi - c * np.sinh(x)) / (c * np.cosh(x))) < 1e-3
    assert out.times[-1] == pytest.approx(float(modified_time_to_tau(0.3, 2)))


def test_reparameterize_requires_modified(hyper_traj):
    with pytest.raises(ContractError):
        reparameterize_modified(hyper_traj)
