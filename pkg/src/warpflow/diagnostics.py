"""Monitors for the invariants of the flow: sign conditions, the scalar
curvature lower bound, class persistence, tail factorization, decay to
flatness, the pinching quantity and quasi-local mass.

Check records carry a signed margin (positive means the condition holds).
Open conditions that hold with equality up to roundoff, such as psi_s > 1
on flat data, get status ``"boundary"`` instead of ``"fail"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ConfigurationError,
    ContractError,
    InsufficientDataError,
    UnsupportedDimensionError,
)
from .geometry import (
    CurvatureField,
    class_membership,
    curvature,
    hyperbolic_mean_curvature,
)

EPS = np.finfo(float).eps
BOUNDARY_FACTOR = 10.0
DIMENSION_CONSTANTS = ("paper_n", "corrected_n_plus_1")
SERIES_COLUMNS = ("t", "sup_abs_K0", "sup_abs_K1", "inf_R", "sup_R", "min_psi_s", "min_psi_ss")


@dataclass(frozen=True)
class CheckRecord:
    name: str
    passed: bool
    margin: float
    worst_node: int | None
    status: str = ""
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            object.__setattr__(self, "status", "pass" if self.passed else "fail")

    @property
    def ok(self) -> bool:
        """True unless the check genuinely failed (boundary cases are ok)."""
        return self.status != "fail"

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "pass": bool(self.passed),
            "status": self.status,
            "margin": _json_float(self.margin),
            "worst_node": self.worst_node,
        }
        if self.detail:
            out["detail"] = {k: _json_value(v) for k, v in self.detail.items()}
        return out


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _json_float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    return v


def _interior(fld: CurvatureField) -> np.ndarray:
    return np.arange(1, fld.x.size - 1)


def _roundoff_tol(fld: CurvatureField, order: int) -> float:
    """Roundoff floor of an ``order``-th s-derivative of psi on this grid."""
    ds = float(np.min(np.diff(fld.s)))
    return BOUNDARY_FACTOR * EPS * float(np.max(np.abs(fld.psi))) / ds**order


def _sign_check(name: str, values: np.ndarray, nodes: np.ndarray, tol: float) -> CheckRecord:
    """Record for the open condition ``values > 0`` on ``nodes``."""
    k = int(np.argmin(values))
    margin = float(values[k])
    worst = int(nodes[k])
    if margin > tol:
        return CheckRecord(name, True, margin, worst)
    if abs(margin) <= tol:
        return CheckRecord(name, False, margin, worst, status="boundary",
                           detail={"roundoff_tol": tol})
    return CheckRecord(name, False, margin, worst, detail={"roundoff_tol": tol})


def check_psi_monotone(fld: CurvatureField) -> CheckRecord:
    """psi_s > 1 on interior nodes; margin = min psi_s - 1."""
    idx = _interior(fld)
    return _sign_check("psi_monotone", fld.psi_s[idx] - 1.0, idx, _roundoff_tol(fld, 1))


def check_psi_convex(fld: CurvatureField) -> CheckRecord:
    """psi_ss > 0 on interior nodes; margin = min psi_ss."""
    idx = _interior(fld)
    return _sign_check("psi_convex", fld.psi_ss[idx], idx, _roundoff_tol(fld, 2))


def check_negative_curvature(fld: CurvatureField) -> CheckRecord:
    """K0 < 0 and K1 < 0 on interior nodes; margin = -max(K0, K1)."""
    idx = _interior(fld)
    kmax = np.maximum(fld.K0[idx], fld.K1[idx])
    tol = _roundoff_tol(fld, 2) / float(fld.psi[1])
    return _sign_check("negative_curvature", -kmax, idx, tol)


def scalar_bound(t: float, R0_inf: float, d: float) -> float:
    """Solution of R' = (2/d) R^2 from R(0) = R0_inf: -1/(2t/d - 1/R0_inf)."""
    return -1.0 / (2.0 * t / d - 1.0 / R0_inf)


def check_scalar_bound(fld: CurvatureField, t: float, R0_inf: float,
                       dimension_constant: str = "corrected_n_plus_1",
                       rtol: float = 0.0) -> CheckRecord:
    """min R(t) >= comparison bound, with d = n or d = n + 1.

    Both variants are evaluated and stored in ``detail``; the configured
    one gates. ``rtol`` is a relative allowance for discretization error,
    meaningful when the bound is saturated (exact Einstein data); margins
    inside it give status ``"boundary"``.
    """
    if not R0_inf < 0:
        raise ContractError(f"scalar bound needs a negative initial infimum, got {R0_inf}")
    if dimension_constant not in DIMENSION_CONSTANTS:
        raise ConfigurationError(f"unknown dimension constant {dimension_constant!r}",
                                 "dimension_constant")
    if not t > 0:
        raise ContractError(f"scalar bound is checked for t > 0, got {t}")
    idx = np.arange(fld.x.size)
    k = int(np.argmin(fld.R[idx]))
    Rmin = float(fld.R[k])
    detail = {"min_R": Rmin, "t": t, "R0_inf": R0_inf}
    for name, d in (("paper_n", fld.n), ("corrected_n_plus_1", fld.n + 1)):
        b = scalar_bound(t, R0_inf, d)
        detail[f"bound_{name}"] = b
        detail[f"margin_{name}"] = Rmin - b
        detail[f"relative_margin_{name}"] = (Rmin - b) / abs(b)
    margin = detail[f"margin_{dimension_constant}"]
    rel = detail[f"relative_margin_{dimension_constant}"]
    detail["gating"] = dimension_constant
    name = f"scalar_bound[{dimension_constant}]"
    if margin >= 0:
        return CheckRecord(name, True, margin, k, detail=detail)
    if -rel <= rtol:
        return CheckRecord(name, False, margin, k, status="boundary", detail=detail)
    return CheckRecord(name, False, margin, k, detail=detail)


def pinching(fld: CurvatureField) -> np.ndarray:
    """a = psi^2 (K1 - K0); zero at the origin where K0 = K1."""
    return fld.psi**2 * (fld.K1 - fld.K0)


def check_pinching(fld: CurvatureField, a0_sup: float | None = None) -> CheckRecord:
    """sup |a| recorded; gated only by finiteness.

    With ``a0_sup`` (the initial value) the record also notes whether
    sup |a| has not grown, as an observation.
    """
    a = pinching(fld)
    k = int(np.argmax(np.abs(a)))
    sup = float(abs(a[k]))
    finite = bool(np.all(np.isfinite(a)))
    detail = {"sup_abs_a": sup}
    if a0_sup is not None:
        detail["non_expanding"] = bool(sup <= a0_sup * (1 + 1e-9) + 1e-14)
    return CheckRecord("pinching", finite, sup if finite else -math.inf, k, detail=detail)


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------


def _fields(traj) -> list:
    return [curvature(st.profile) for st in traj.states]


def check_asymptotic_factorization(traj, tail_start: float | None = None,
                                   tol: float = 1e-2, fields=None) -> CheckRecord:
    """psi and phi on the tail against exp of time-integrated curvatures.

        psi(x,t) ~ psi(x,0) exp(-int_0^t [K0 + (n-1) K1])
        phi(x,t) ~ phi(x,0) exp(-n int_0^t K0)

    Time integrals are trapezoid sums over the recorded states.
    """
    if len(traj) < 3:
        raise InsufficientDataError("factorization needs at least 3 recorded states")
    fields = fields if fields is not None else _fields(traj)
    x = traj.grid.nodes
    if tail_start is None:
        tail_start = 0.5 * traj.grid.L
    tail = np.flatnonzero((x >= tail_start) & (x > 0))
    if tail.size == 0:
        raise ConfigurationError("empty tail region", "tail_start")
    n = traj.config.n
    t = traj.times
    k_psi = np.stack([f.K0[tail] + (n - 1) * f.K1[tail] for f in fields])
    k_phi = np.stack([n * f.K0[tail] for f in fields])
    dt = np.diff(t)[:, None]
    int_psi = np.vstack([np.zeros(tail.size), np.cumsum(0.5 * dt * (k_psi[1:] + k_psi[:-1]), axis=0)])
    int_phi = np.vstack([np.zeros(tail.size), np.cumsum(0.5 * dt * (k_phi[1:] + k_phi[:-1]), axis=0)])
    psi = traj.psi()[:, tail]
    phi = traj.phi()[:, tail]
    dev_psi = np.abs(psi - psi[0] * np.exp(-int_psi)) / psi
    dev_phi = np.abs(phi - phi[0] * np.exp(-int_phi)) / phi
    dev = np.maximum(dev_psi, dev_phi)
    i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
    worst = float(dev[i, j])
    return CheckRecord("asymptotic_factorization", worst <= tol, tol - worst, int(tail[j]),
                       detail={"max_deviation_psi": float(dev_psi.max()),
                               "max_deviation_phi": float(dev_phi.max()),
                               "worst_time": float(t[i]), "tolerance": tol})


def check_class_persistence(traj, c_bounds=(0.5, 2.0), tail_start: float | None = None,
                            phi_reference: str = "one") -> CheckRecord:
    """class_membership at every recorded state with fixed bounds.

    Margin is the smallest distance of the tail ratios to the band,
    ``min(c1 - C1, C2 - c2)`` over time; worst_node is the first failing
    state index (not a grid node).
    """
    margins = []
    first_fail = None
    for k, st in enumerate(traj.states):
        cm = class_membership(st.profile, tail_start, c_bounds, phi_reference)
        ratios = np.concatenate([cm.ratio_psi, cm.ratio_phi])
        margins.append(min(ratios.min() - cm.bounds[0], cm.bounds[1] - ratios.max()))
        if not cm.within_class and first_fail is None:
            first_fail = k
    margin = float(min(margins))
    return CheckRecord("class_persistence", first_fail is None, margin, first_fail,
                       detail={"bounds": list(c_bounds), "phi_reference": phi_reference,
                               "first_failing_state": first_fail})


def decay_series(fields) -> tuple[np.ndarray, np.ndarray]:
    """D = sup interior (|K0| + |K1|) and sup |R| per state."""
    D = np.array([np.max(np.abs(f.K0[1:-1]) + np.abs(f.K1[1:-1])) for f in fields])
    Rs = np.array([np.max(np.abs(f.R[1:-1])) for f in fields])
    return D, Rs


def check_flat_convergence(traj, tol: float = 0.1, step_tol: float = 1e-3,
                           fields=None) -> CheckRecord:
    """Eventual decay of D(t) and the rate t sup|R| <= (n+1)/2 (1 + tol).

    Both are tested on the final half of the recorded states; D may grow
    by at most ``step_tol`` (relative) between consecutive states. The
    rate constant is inferred from the scalar bound with d = n + 1; it is
    a heuristic limit, not a proven one.
    """
    t = traj.times
    if t[-1] < 1.0:
        raise ContractError(f"flat convergence needs t_end >= 1, trajectory ends at {t[-1]}")
    fields = fields if fields is not None else _fields(traj)
    n = traj.config.n
    D, Rs = decay_series(fields)
    half = np.flatnonzero(t >= 0.5 * t[-1])
    Dh = D[half]
    growth = Dh[1:] - Dh[:-1] * (1 + step_tol)
    nonincreasing = bool(np.all(growth <= 0)) if growth.size else True
    rate = t[half] * Rs[half]
    limit = 0.5 * (n + 1) * (1 + tol)
    k = int(np.argmax(rate))
    margin = float(limit - rate[k])
    if growth.size:
        margin = min(margin, float(-growth.max()))
    passed = nonincreasing and bool(rate.max() <= limit)
    return CheckRecord("flat_convergence", passed, margin, int(half[k]),
                       detail={"D": D.tolist(), "t_sup_abs_R": (t * Rs).tolist(),
                               "D_nonincreasing": nonincreasing,
                               "rate_limit": limit, "max_rate": float(rate.max()),
                               "rate_source": "inferred from the scalar bound with d = n + 1"})


# ---------------------------------------------------------------------------
# mass
# ---------------------------------------------------------------------------


@dataclass
class MassProbe:
    """Brown-York mass at fixed arclength radii over recorded times."""

    radii: tuple
    times: list = field(default_factory=list)
    masses: list = field(default_factory=list)

    def __post_init__(self):
        self.radii = tuple(float(r) for r in self.radii)
        if not self.radii:
            raise ConfigurationError("at least one probe radius is needed", "probes")
        if any(not (r > 0 and math.isfinite(r)) for r in self.radii):
            raise ConfigurationError(f"probe radii must be positive, got {self.radii}", "probes")

    def table(self) -> np.ndarray:
        return np.array(self.masses, dtype=float).reshape(len(self.times), len(self.radii))

    def monotone_in_time(self) -> list:
        """Per probe: 'nonincreasing', 'nondecreasing' or 'neither' (observation only)."""
        m = self.table()
        out = []
        for j in range(m.shape[1]):
            d = np.diff(m[:, j])
            if np.all(d <= 0):
                out.append("nonincreasing")
            elif np.all(d >= 0):
                out.append("nondecreasing")
            else:
                out.append("neither")
        return out


def mass_at_radii(fld: CurvatureField, radii) -> np.ndarray:
    """m(r) = (H0(r) - H(r)) V(r) with H, V cubic-interpolated in s."""
    if fld.n != 2:
        raise UnsupportedDimensionError("Brown-York mass is defined here for n = 2 only")
    radii = np.asarray(radii, dtype=float)
    s = fld.s
    if np.any(radii <= 0) or np.any(radii >= s[-1]):
        raise ConfigurationError(f"probe radii {radii.tolist()} outside (0, {s[-1]:.6g})", "probes")
    H = CubicSpline(s[1:], fld.H[1:])(radii)
    V = CubicSpline(s, fld.V)(radii)
    return (hyperbolic_mean_curvature(radii, 2) - H) * V


def track_mass(traj, probes: MassProbe, fields=None) -> MassProbe:
    if traj.config.n != 2:
        raise UnsupportedDimensionError("Brown-York mass is defined here for n = 2 only")
    fields = fields if fields is not None else _fields(traj)
    out = MassProbe(probes.radii)
    for st, f in zip(traj.states, fields):
        out.times.append(st.t)
        out.masses.append(mass_at_radii(f, probes.radii).tolist())
    return out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    t: float
    checks: list
    series_row: dict

    def check(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name or c.name.startswith(name + "["):
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"t": self.t, "checks": [c.to_dict() for c in self.checks]}


def series_row(fld: CurvatureField, t: float, masses=None) -> dict:
    idx = _interior(fld)
    row = {
        "t": t,
        "sup_abs_K0": float(np.max(np.abs(fld.K0))),
        "sup_abs_K1": float(np.max(np.abs(fld.K1))),
        "inf_R": float(np.min(fld.R)),
        "sup_R": float(np.max(fld.R)),
        "min_psi_s": float(np.min(fld.psi_s[idx])),
        "min_psi_ss": float(np.min(fld.psi_ss[idx])),
    }
    if masses is not None:
        for r, m in masses:
            row[f"mass_r={r:g}"] = float(m)
    return row


def diagnose_state(fld: CurvatureField, t: float, R0_inf: float, a0_sup: float | None = None,
                   dimension_constant: str = "corrected_n_plus_1", scalar_rtol: float = 0.0,
                   probe_radii=None) -> DiagnosticsReport:
    """All per-state checks. At t = 0 the scalar bound is skipped (it holds
    with equality by construction)."""
    checks = [check_psi_monotone(fld), check_psi_convex(fld), check_negative_curvature(fld)]
    if t > 0 and R0_inf < 0:
        checks.append(check_scalar_bound(fld, t, R0_inf, dimension_constant, scalar_rtol))
    checks.append(check_pinching(fld, a0_sup))
    masses = None
    if probe_radii is not None and fld.n == 2:
        masses = list(zip(probe_radii, mass_at_radii(fld, probe_radii)))
    return DiagnosticsReport(t, checks, series_row(fld, t, masses))


@dataclass
class TrajectoryDiagnostics:
    reports: list
    trajectory_checks: list
    mass: MassProbe | None = None

    def failures(self, t_min: float = 0.0) -> list:
        """(t, check) pairs with status 'fail' at recorded times >= t_min."""
        out = [(r.t, c) for r in self.reports if r.t >= t_min for c in r.checks if not c.ok]
        out += [(None, c) for c in self.trajectory_checks if not c.ok]
        return out

    def to_json(self) -> str:
        doc = {
            "states": [r.to_dict() for r in self.reports],
            "trajectory_checks": [c.to_dict() for c in self.trajectory_checks],
        }
        if self.mass is not None:
            doc["mass_monotonicity_observation"] = dict(
                zip([f"{r:g}" for r in self.mass.radii], self.mass.monotone_in_time()))
        return json.dumps(doc, indent=2)


def diagnose_trajectory(traj, dimension_constant: str = "corrected_n_plus_1",
                        scalar_rtol: float | None = None, probe_radii=(1.0, 2.0, 3.0),
                        c_bounds=(0.5, 2.0), phi_reference: str = "one",
                        factorization_tol: float = 1e-2) -> TrajectoryDiagnostics:
    """Per-state reports plus trajectory-level checks.

    Trajectory checks that need more data than recorded (fewer than three
    states, or t_end < 1 for flat convergence) are skipped, not failed.

    ``scalar_rtol`` defaults to max(dx)^2: the exact Einstein family sits
    on the comparison bound, so only the discretization decides the sign
    of its margin there.
    """
    if scalar_rtol is None:
        scalar_rtol = float(np.max(traj.grid.dx)) ** 2
    fields = _fields(traj)
    R0_inf = float(np.min(fields[0].R))
    # the bound is for negative curvature; flat data gives R0_inf ~ -roundoff
    if R0_inf >= -_roundoff_tol(fields[0], 2) / float(fields[0].psi[1]):
        R0_inf = 0.0
    a0 = float(np.max(np.abs(pinching(fields[0]))))
    n = traj.config.n
    radii = None
    if n == 2 and probe_radii:
        s_max = min(f.s[-1] for f in fields)
        radii = tuple(r for r in probe_radii if 0 < r < s_max)
    reports = [diagnose_state(f, st.t, R0_inf, a0, dimension_constant, scalar_rtol, radii)
               for st, f in zip(traj.states, fields)]
    checks = []
    if len(traj) >= 3:
        checks.append(check_asymptotic_factorization(traj, tol=factorization_tol, fields=fields))
    checks.append(check_class_persistence(traj, c_bounds, phi_reference=phi_reference))
    if traj.times[-1] >= 1.0:
        checks.append(check_flat_convergence(traj, fields=fields))
    mass = track_mass(traj, MassProbe(radii), fields) if radii else None
    return TrajectoryDiagnostics(reports, checks, mass)
