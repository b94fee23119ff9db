"""Ricci flow of warped-product metrics in (x, t) coordinates.

The state is the pair (psi, phi) on a fixed x-grid, evolved by

    psi_t = psi_ss - (n-1)(1 - psi_s^2)/psi
    phi_t = n phi psi_ss / psi

with s-derivatives ``(1/phi) d/dx``, or by the modified flow
``dg/dt = -2 Rc - 2 n g`` which subtracts ``(n psi, n phi)``.
Time stepping is classical RK4 with a diffusive step limit recomputed
every step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    BlowUpError,
    ConfigurationError,
    ContractError,
    DegenerateMetricError,
)
from .geometry import (
    Grid,
    Profile,
    build_grid,
    check_origin_slope,
    d_dx,
    psi_derivatives,
    sectional_curvatures,
)
from .presets import (
    hyperbolic_scale,
    hyperbolic_scale_rate,
    parse_preset,
)

logger = logging.getLogger(__name__)

OUTER_BCS = ("dirichlet_exact_hyperbolic", "extrapolate_zero_curvature_gradient")
CURVATURE_BLOWUP = 1e6


@dataclass(frozen=True)
class FlowConfig:
    n: int = 2
    L: float = 6.0
    M: int = 512
    stretch: float = 0.0
    t_end: float = 1.0
    cfl: float = 0.2
    outer_bc: str = "dirichlet_exact_hyperbolic"
    preset: str = "hyperbolic"
    psi_csv: str | None = None
    modified: bool = False
    record_every: int = 100
    out_dir: str = "out"

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"must be an integer >= 2, got {self.n}", "n")
        if not (0 < self.cfl <= 0.5):
            raise ConfigurationError(f"must satisfy 0 < cfl <= 0.5, got {self.cfl}", "cfl")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigurationError(f"must be positive and finite, got {self.t_end}", "t_end")
        if self.outer_bc not in OUTER_BCS:
            raise ConfigurationError(f"unknown boundary model {self.outer_bc!r}", "outer_bc")
        if isinstance(self.record_every, bool) or int(self.record_every) != self.record_every \
                or self.record_every < 1:
            raise ConfigurationError(f"must be a positive integer, got {self.record_every}",
                                     "record_every")
        # grid and preset validate themselves; fail early on bad values
        build_grid(self.L, self.M, self.stretch)
        parse_preset(self.preset, self.psi_csv)

    @property
    def preset_spec(self):
        return parse_preset(self.preset, self.psi_csv)

    def grid(self) -> Grid:
        return build_grid(self.L, self.M, self.stretch)


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    profile: Profile

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ContractError(f"flow time must be finite and >= 0, got {self.t}")


@dataclass(eq=False)
class Trajectory:
    """Recorded states of one integration, in increasing time."""

    states: list
    config: FlowConfig
    meta: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return self.states[0].profile.grid

    @property
    def times(self) -> np.ndarray:
        return np.array([st.t for st in self.states])

    def psi(self) -> np.ndarray:
        return np.stack([st.profile.psi for st in self.states])

    def phi(self) -> np.ndarray:
        return np.stack([st.profile.phi for st in self.states])

    def __len__(self):
        return len(self.states)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------


def _ricci_rates(profile: Profile):
    """Interior rates; the phi equation upwinds its hidden advection term.

    Expanding psi_ss in x gives

        phi_t = n psi_xx / (phi psi) - (H / phi) phi_x,   H = n psi_x / (phi psi),

    i.e. outward transport of phi at speed H/phi ~ n/x.  Central
    differencing of that term is unstable next to the origin, so phi_x is
    taken from the second-order backward stencil (even ghost at node 1).
    """
    n = profile.n
    grid = profile.grid
    st = grid.stencils
    psi, phi = profile.psi, profile.phi
    psi_s, psi_ss, psi_sss0 = psi_derivatives(profile)
    K0, K1 = sectional_curvatures(profile, psi_s, psi_ss, psi_sss0)

    dpsi = np.empty_like(psi)
    dpsi[0] = 0.0
    dpsi[1:] = psi_ss[1:] - (n - 1) * (1.0 - psi_s[1:] ** 2) / psi[1:]

    psi_x = d_dx(psi, grid, parity="odd")
    psi_xx = st["xx_minus"] * psi[:-2] + st["xx_mid"] * psi[1:-1] + st["xx_plus"] * psi[2:]
    phi_x = np.empty(psi.size - 1)
    phi_x[0] = 2.0 * (phi[1] - phi[0]) / grid.nodes[1]
    up = st["up"]
    phi_x[1:] = up[:, 0] * phi[:-2] + up[:, 1] * phi[1:-1] + up[:, 2] * phi[2:]
    dphi = np.empty_like(phi)
    dphi[0] = -n * K0[0] * phi[0]
    inner = slice(1, -1)
    dphi[inner] = n * (psi_xx / phi[inner]
                       - phi_x[:-1] * psi_x[inner] / phi[inner] ** 2) / psi[inner]
    dphi[-1] = -n * K0[-1] * phi[-1]
    return dpsi, dphi, K0, K1


def origin_phi(psi: np.ndarray, grid: Grid) -> float:
    """phi(0) = psi_x(0), the smoothness condition psi_s(0) = 1.

    Uses the fourth-order slope of the odd extension of psi.
    """
    w1, w2 = grid.stencils["odd_slope"]
    return float(w1 * psi[1] + w2 * psi[2])


def rhs_xt(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """(psi_t, phi_t) of the Ricci flow; origin via parity limits.

    The outer node uses one-sided stencils here; boundary models are applied
    by :func:`step`.
    """
    dpsi, dphi, _, _ = _ricci_rates(state.profile)
    return dpsi, dphi


def modified_rhs(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """Rates of dg/dt = -2 Rc - 2 n g: the Ricci rates minus (n psi, n phi)."""
    dpsi, dphi = rhs_xt(state)
    n = state.profile.n
    return dpsi - n * state.profile.psi, dphi - n * state.profile.phi


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------


def apply_origin_bc(profile: Profile) -> Profile:
    """Pin psi(0) = 0 and close phi(0) by the regularity constraint.

    The ghost node at -x_1 carries psi odd and phi even (``ghost_psi``,
    ``ghost_phi`` on the profile).  phi(0) is not integrated: evolving it
    by its parity-limit rate lets grid-scale modes break psi_s(0) = 1,
    which is unstable, so it is reset to psi_x(0) instead.
    """
    psi = profile.psi.copy()
    psi[0] = 0.0
    phi = profile.phi.copy()
    phi[0] = origin_phi(psi, profile.grid)
    return profile.with_values(phi=phi, psi=psi)


@dataclass(frozen=True)
class BoundaryModel:
    """Outer boundary treatment resolved from a config and its preset."""

    kind: str
    n: int
    lam2: float = 1.0
    modified: bool = False

    @classmethod
    def from_config(cls, config: FlowConfig) -> "BoundaryModel":
        lam2 = config.preset_spec.lam2
        return cls(config.outer_bc, config.n, 1.0 if lam2 is None else lam2, config.modified)

    def exact_values(self, L: float, t: float) -> tuple[float, float]:
        c = float(hyperbolic_scale(t, self.n, self.lam2, self.modified))
        return c * math.sinh(L), c

    def exact_rates(self, L: float, t: float) -> tuple[float, float]:
        dc = float(hyperbolic_scale_rate(t, self.n, self.lam2, self.modified))
        return dc * math.sinh(L), dc

    def mismatch(self, profile: Profile, t: float = 0.0, rtol: float = 1e-8) -> bool:
        """True when Dirichlet data disagrees with the profile at time t."""
        if self.kind != "dirichlet_exact_hyperbolic":
            return False
        psi_L, phi_L = self.exact_values(profile.grid.L, t)
        return bool(abs(profile.psi[-1] - psi_L) > rtol * abs(psi_L)
                    or abs(profile.phi[-1] - phi_L) > rtol * abs(phi_L))


def apply_outer_bc(state: FlowState, config: FlowConfig | BoundaryModel) -> Profile:
    """Impose the outer boundary model on the values of ``state``.

    Dirichlet pins the last node to the exact self-similar family at
    ``(L, t)``.  The zero-curvature-gradient model acts on the rates (the
    last node evolves by ``d log psi/dt = -(K0 + (n-1)K1)``,
    ``d log phi/dt = -n K0`` with curvatures copied from the neighbour),
    so its value map is the identity.
    """
    model = config if isinstance(config, BoundaryModel) else BoundaryModel.from_config(config)
    if model.kind not in OUTER_BCS:
        raise ConfigurationError(f"unknown boundary model {model.kind!r}", "outer_bc")
    profile = state.profile
    if model.kind == "extrapolate_zero_curvature_gradient":
        return profile
    psi_L, phi_L = model.exact_values(profile.grid.L, state.t)
    psi = profile.psi.copy()
    phi = profile.phi.copy()
    psi[-1], phi[-1] = psi_L, phi_L
    return profile.with_values(phi=phi, psi=psi)


def _rates(profile: Profile, t: float, model: BoundaryModel):
    dpsi, dphi, K0, K1 = _ricci_rates(profile)
    n = profile.n
    if model.modified:
        dpsi -= n * profile.psi
        dphi -= n * profile.phi
    if model.kind == "dirichlet_exact_hyperbolic":
        dpsi[-1], dphi[-1] = model.exact_rates(profile.grid.L, t)
    else:
        shift = n if model.modified else 0.0
        dpsi[-1] = -(K0[-2] + (n - 1) * K1[-2] + shift) * profile.psi[-1]
        dphi[-1] = -(n * K0[-2] + shift) * profile.phi[-1]
    kmax = np.abs(K0)
    worst = int(np.argmax(kmax))
    if not np.isfinite(kmax[worst]) or kmax[worst] > CURVATURE_BLOWUP:
        raise BlowUpError(f"|K0| = {kmax[worst]:.3g} exceeds {CURVATURE_BLOWUP:g}", worst, t)
    return dpsi, dphi


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def stable_dt(state: FlowState, cfl: float) -> float:
    """cfl * min over cells of (phi dx)^2, the explicit diffusion scale."""
    phi = state.profile.phi
    dx = state.profile.grid.dx
    local = np.minimum(phi[:-1], phi[1:]) * dx
    dt = cfl * float(np.min(local)) ** 2
    if not (dt > 0 and math.isfinite(dt)):
        raise DegenerateMetricError(f"nonpositive stable time step {dt}")
    return dt


def _build(profile: Profile, psi: np.ndarray, phi: np.ndarray, t: float) -> Profile:
    bad = ~(np.isfinite(psi) & np.isfinite(phi))
    bad[1:] |= psi[1:] <= 0
    bad |= phi <= 0
    if np.any(bad):
        node = int(np.flatnonzero(bad)[0])
        raise BlowUpError("non-finite or nonpositive metric value", node, t)
    psi[0] = 0.0
    phi[0] = origin_phi(psi, profile.grid)
    if not phi[0] > 0:
        raise BlowUpError("origin closure produced phi(0) <= 0", 0, t)
    return Profile(profile.grid, phi, psi, profile.n)


def _rk4(state: FlowState, dt: float, model: BoundaryModel, k1=None) -> FlowState:
    prof, t = state.profile, state.t
    dirichlet = model.kind == "dirichlet_exact_hyperbolic"
    L = prof.grid.L

    def stage(base: FlowState, k, a):
        ts = t + a * dt
        psi = prof.psi + a * dt * k[0]
        phi = prof.phi + a * dt * k[1]
        if dirichlet:
            psi[-1], phi[-1] = model.exact_values(L, ts)
        return _build(prof, psi, phi, ts), ts

    if k1 is None:
        k1 = _rates(prof, t, model)
    p2, t2 = stage(state, k1, 0.5)
    k2 = _rates(p2, t2, model)
    p3, t3 = stage(state, k2, 0.5)
    k3 = _rates(p3, t3, model)
    p4, t4 = stage(state, k3, 1.0)
    k4 = _rates(p4, t4, model)
    psi = prof.psi + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    phi = prof.phi + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    t_new = t + dt
    if dirichlet:
        psi[-1], phi[-1] = model.exact_values(L, t_new)
    return FlowState(t_new, _build(prof, psi, phi, t_new))


def step(state: FlowState, dt: float, config: FlowConfig | BoundaryModel | None = None) -> FlowState:
    """One classical RK4 step; boundary models are enforced at every stage.

    Without ``config`` the plain Ricci flow with the Dirichlet hyperbolic
    boundary (lam2 = 1) is used.
    """
    if config is None:
        model = BoundaryModel("dirichlet_exact_hyperbolic", state.profile.n)
    elif isinstance(config, BoundaryModel):
        model = config
    else:
        model = BoundaryModel.from_config(config)
    if not (dt > 0 and math.isfinite(dt)):
        raise ContractError(f"time step must be positive, got {dt}")
    return _rk4(state, dt, model)


def initial_state(config: FlowConfig) -> FlowState:
    preset = config.preset_spec
    if preset.name == "from_csv":
        from .io import load_profile_csv

        profile = load_profile_csv(preset.path, n=config.n)
    else:
        profile = preset.profile(config.grid(), config.n)
    return FlowState(0.0, profile)


def evolve(config: FlowConfig, *, initial: FlowState | None = None,
           fixed_dt: float | None = None,
           on_record: Callable[[int, FlowState], None] | None = None) -> Trajectory:
    """Integrate from the preset (or ``initial``) to ``config.t_end``.

    States are recorded at t = 0, every ``record_every`` steps, and at the
    final time.  ``fixed_dt`` bypasses the adaptive stability limit (used
    to provoke blow-up on purpose).  On blow-up the raised
    :class:`BlowUpError` carries the partial trajectory.
    """
    state = initial if initial is not None else initial_state(config)
    check_origin_slope(state.profile)
    state = FlowState(state.t, apply_origin_bc(state.profile))
    model = BoundaryModel.from_config(config)
    traj = Trajectory([state], config)
    traj.meta["boundary_mismatch"] = model.mismatch(state.profile, state.t)
    traj.meta["steps"] = 0
    if traj.meta["boundary_mismatch"]:
        logger.warning("initial data does not match the Dirichlet hyperbolic boundary model")
    if on_record is not None:
        on_record(0, state)

    t_end = config.t_end
    nstep = 0
    try:
        while state.t < t_end * (1 - 1e-14):
            dt = fixed_dt if fixed_dt is not None else stable_dt(state, config.cfl)
            dt = min(dt, t_end - state.t)
            state = _rk4(state, dt, model)
            nstep += 1
            if nstep % config.record_every == 0 or state.t >= t_end * (1 - 1e-14):
                traj.states.append(state)
                if on_record is not None:
                    on_record(len(traj.states) - 1, state)
    except BlowUpError as exc:
        traj.meta["steps"] = nstep
        traj.meta["completed"] = False
        exc.trajectory = traj
        raise
    traj.meta["steps"] = nstep
    traj.meta["completed"] = True
    return traj


# ---------------------------------------------------------------------------
# modified flow <-> Ricci flow
# ---------------------------------------------------------------------------


def _printed_pair(n):
    return (lambda tau: 1.0 + n * tau,
            lambda tau: np.log1p(n * tau) / n)


def _verified_pair(n):
    return (lambda tau: 1.0 + 2.0 * n * tau,
            lambda tau: np.log1p(2.0 * n * tau) / (2.0 * n))


REPARAMETERIZATIONS = {
    "printed": _printed_pair,
    "verified": _verified_pair,
}


def reparameterization_residual(n: int, pair: str = "verified",
                                taus=None, h: float = 1e-3) -> float:
    """Chain-rule defect of gbar(tau) = c(tau) g(t(tau)).

    With dg/dt = -2Rc - 2ng and Rc invariant under constant scaling,
    dgbar/dtau = -2 Rc(gbar) holds iff c t' = 1 and c' = 2n c t'.
    Derivatives are fourth-order central differences of step ``h``; the
    returned value is the max of both defects over ``taus``.
    """
    c, t_of = REPARAMETERIZATIONS[pair](n)
    taus = np.linspace(0.0, 5.0, 51) if taus is None else np.asarray(taus, dtype=float)
    taus = np.maximum(taus, 2 * h)

    def deriv(f):
        return (f(taus - 2 * h) - 8 * f(taus - h) + 8 * f(taus + h) - f(taus + 2 * h)) / (12 * h)

    dc = deriv(c)
    dt = deriv(t_of)
    r1 = np.abs(c(taus) * dt - 1.0)
    r2 = np.abs(dc - 2.0 * n * c(taus) * dt)
    return float(max(r1.max(), r2.max()))


def modified_time_to_tau(t, n: int):
    """Inverse of the verified t(tau): tau = (exp(2nt) - 1) / (2n)."""
    return np.expm1(2.0 * n * np.asarray(t, dtype=float)) / (2.0 * n)


def reparameterize_modified(traj: Trajectory, taus=None, pair: str = "verified") -> Trajectory:
    """Map a modified-flow trajectory to the Ricci flow gbar(tau) = c g(t(tau)).

    States are interpolated in t with a cubic spline through the recorded
    states, then scaled by sqrt(c) in both psi and phi.  Default ``taus``
    are the images of the recorded times.
    """
    if not traj.config.modified:
        raise ContractError("reparameterize_modified needs a modified-flow trajectory")
    n = traj.config.n
    c, t_of = REPARAMETERIZATIONS[pair](n)
    times = traj.times
    if taus is None:
        taus = modified_time_to_tau(times, n) if pair == "verified" else np.expm1(n * times) / n
    taus = np.asarray(taus, dtype=float)
    tq = np.asarray(t_of(taus), dtype=float)
    if np.any(tq < times[0] - 1e-12) or np.any(tq > times[-1] * (1 + 1e-12)):
        raise ContractError("requested tau maps outside the recorded time range")
    tq = np.clip(tq, times[0], times[-1])
    grid = traj.grid
    if len(times) >= 3:
        psi_i = CubicSpline(times, traj.psi(), axis=0)(tq)
        phi_i = CubicSpline(times, traj.phi(), axis=0)(tq)
    else:
        psi_i = np.array([np.interp(tq, times, col) for col in traj.psi().T]).T
        phi_i = np.array([np.interp(tq, times, col) for col in traj.phi().T]).T
    scale = np.sqrt(c(taus))
    states = []
    for k, tau in enumerate(taus):
        psi = psi_i[k] * scale[k]
        psi[0] = 0.0
        states.append(FlowState(float(tau), Profile(grid, phi_i[k] * scale[k], psi, n)))
    return Trajectory(states, replace(traj.config, modified=False),
                      meta={"reparameterized_from_modified": True, "pair": pair})
