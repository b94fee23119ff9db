"""Grids, finite differences in x and s, and pointwise warped-product geometry.

The metric is ``g = phi(x)^2 dx^2 + psi(x)^2 ghat`` on ``[0, L] x S^n``.
Derivatives along the unit-speed radial direction are ``d/ds = (1/phi) d/dx``.

At the origin the metric is smooth only if psi is odd and phi is even in
the radial variable, so every stencil touching ``x = 0`` uses a mirrored
ghost node with that parity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateMetricError,
    ShapeError,
    UnsupportedDimensionError,
)

DEFAULT_SPACING_RATIO = 10.0


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes ``x_0 = 0 < x_1 < ... < x_M``."""

    nodes: np.ndarray
    max_spacing_ratio: float = DEFAULT_SPACING_RATIO

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        if x.ndim != 1 or x.size < 9:
            raise ConfigurationError("grid needs at least 9 nodes (M >= 8)", "M")
        if not np.all(np.isfinite(x)):
            raise ConfigurationError("grid nodes must be finite", "nodes")
        if x[0] != 0.0:
            raise ConfigurationError("first node must be x = 0", "nodes")
        dx = np.diff(x)
        if np.any(dx <= 0):
            raise ConfigurationError("nodes must be strictly increasing", "nodes")
        ratio = dx.max() / dx.min()
        if ratio > self.max_spacing_ratio * (1 + 1e-12):
            raise ConfigurationError(
                f"spacing ratio {ratio:.3g} exceeds bound {self.max_spacing_ratio}", "stretch"
            )

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def dx(self) -> np.ndarray:
        """Cell widths, length M."""
        return np.diff(self.nodes)

    @property
    def spacing_ratio(self) -> float:
        dx = self.dx
        return float(dx.max() / dx.min())

    @cached_property
    def stencils(self) -> dict:
        """Precomputed difference weights (interior first derivative, one-sided ends)."""
        x = self.nodes
        h = np.diff(x)
        h1, h2 = h[:-1], h[1:]
        return {
            "h": h,
            "dmid": 0.5 * (h1 + h2),
            "c_minus": -h2 / (h1 * (h1 + h2)),
            "c_mid": (h2 - h1) / (h1 * h2),
            "c_plus": h1 / (h2 * (h1 + h2)),
            "d1_left": fd_weights(x[0], x[:3], 1),
            "d1_right": fd_weights(x[-1], x[-3:], 1),
            "d2_left": fd_weights(x[0], x[:4], 2),
            "d2_right": fd_weights(x[-1], x[-4:], 2),
            "xx_minus": 2.0 / (h1 * (h1 + h2)),
            "xx_mid": -2.0 / (h1 * h2),
            "xx_plus": 2.0 / (h2 * (h1 + h2)),
            # backward (upwind) first derivative at nodes 2..M from nodes i-2, i-1, i
            "up": np.array([fd_weights(x[i], x[i - 2:i + 1], 1) for i in range(2, x.size)]),
            # odd-extension slope at the origin from +-x1, +-x2
            "odd_slope": _odd_slope_weights(x[1], x[2]),
            # five-point first derivative at nodes 1..M-2, mirrored (odd) ghosts
            "c4": _five_point_odd(x),
        }

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        dx = self.dx
        return bool(np.ptp(dx) <= rtol * dx.mean())


def build_grid(L: float, M: int, stretch: float = 0.0,
               max_spacing_ratio: float = DEFAULT_SPACING_RATIO) -> Grid:
    """Uniform grid on [0, L], or exponentially clustered toward x = 0.

    For ``stretch > 0`` the nodes are ``L (exp(stretch*xi) - 1)/(exp(stretch) - 1)``
    with ``xi`` uniform on [0, 1]; the largest-to-smallest spacing ratio is
    then close to ``exp(stretch)``.
    """
    try:
        L = float(L)
        stretch = float(stretch)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    if not math.isfinite(L) or L <= 0:
        raise ConfigurationError(f"must be positive and finite, got {L}", "L")
    if isinstance(M, bool) or int(M) != M or M < 8:
        raise ConfigurationError(f"must be an integer >= 8, got {M}", "M")
    if not math.isfinite(stretch) or stretch < 0:
        raise ConfigurationError(f"must be finite and >= 0, got {stretch}", "stretch")
    M = int(M)
    # below 1e-8 the clustered nodes differ from uniform by < stretch*L/8, and
    # stretch*xi would lose precision in the subnormal range
    if stretch < 1e-8:
        x = L * (np.arange(M + 1) / M)
    else:
        xi = np.arange(M + 1) / M
        x = L * np.expm1(stretch * xi) / math.expm1(stretch)
    x[0] = 0.0
    x[-1] = L
    return Grid(x, max_spacing_ratio=max_spacing_ratio)


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Profile:
    """Values of (phi, psi) on a grid for a metric over S^n, n >= 2.

    Construction checks positivity; the origin slope condition psi_s(0) = 1
    is a property of admissible flow data and is checked separately by
    :meth:`origin_slope` / :func:`check_origin_slope`, because some
    geometric test profiles (cones) deliberately violate it.
    """

    grid: Grid
    phi: np.ndarray
    psi: np.ndarray
    n: int

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        psi = np.array(self.psi, dtype=float)
        size = self.grid.nodes.size
        if phi.shape != (size,) or psi.shape != (size,):
            raise ShapeError(
                f"phi/psi shapes {phi.shape}/{psi.shape} do not match grid of {size} nodes"
            )
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise UnsupportedDimensionError(f"sphere dimension n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
            bad = int(np.flatnonzero(~(np.isfinite(phi) & np.isfinite(psi)))[0])
            raise DegenerateMetricError(f"non-finite metric value at node {bad}")
        if psi[0] != 0.0:
            raise DegenerateMetricError(f"psi(0) must be exactly 0, got {psi[0]!r}")
        if np.any(psi[1:] <= 0):
            bad = int(np.flatnonzero(psi[1:] <= 0)[0]) + 1
            raise DegenerateMetricError(f"psi <= 0 at interior node {bad}")
        if np.any(phi <= 0):
            bad = int(np.flatnonzero(phi <= 0)[0])
            raise DegenerateMetricError(f"phi <= 0 at node {bad}")
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    # mirrored node at x = -x_1
    @property
    def ghost_x(self) -> float:
        return -float(self.grid.nodes[1])

    @property
    def ghost_psi(self) -> float:
        return -float(self.psi[1])

    @property
    def ghost_phi(self) -> float:
        return float(self.phi[1])

    def origin_slope(self) -> float:
        """Discrete psi_s at x = 0 from the odd extension."""
        return float(self.psi[1] / (self.grid.nodes[1] * self.phi[0]))

    def with_values(self, phi=None, psi=None) -> "Profile":
        return Profile(self.grid,
                       self.phi if phi is None else phi,
                       self.psi if psi is None else psi,
                       self.n)


def check_origin_slope(profile: Profile, tol: float | None = None) -> float:
    """Return |psi_s(0) - 1|, raising if it exceeds ``tol`` (default 10*dx_1^2)."""
    h1 = float(profile.grid.nodes[1])
    if tol is None:
        tol = 10.0 * h1 * h1
    defect = abs(profile.origin_slope() - 1.0)
    if defect > tol:
        raise DegenerateMetricError(
            f"psi_s(0) = {profile.origin_slope():.6g} differs from 1 by more than {tol:.3g}"
        )
    return defect


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def fd_weights(x0: float, xs, order: int) -> np.ndarray:
    """Weights of the ``order``-th derivative at ``x0`` on nodes ``xs`` (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    npts = xs.size
    c = np.zeros((npts, order + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _odd_slope_weights(x1: float, x2: float) -> tuple[float, float]:
    w = fd_weights(0.0, [-x2, -x1, 0.0, x1, x2], 1)
    return float(w[3] - w[1]), float(w[4] - w[0])


def _five_point_odd(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights and node indices of a fourth-order first derivative.

    Row ``i - 1`` serves node ``i`` for ``1 <= i <= M - 2``.  Nodes left of
    the origin are mirror images ``-x_k``; the sign of the odd extension is
    folded into the weight, so ``(w * f[idx]).sum(axis=1)`` is the derivative.
    """
    rows, idx = [], []
    for i in range(1, x.size - 2):
        ks = np.arange(i - 2, i + 3)
        pos = np.where(ks < 0, -x[np.abs(ks)], x[np.abs(ks)])
        w = fd_weights(x[i], pos, 1)
        w = np.where(ks < 0, -w, w)
        rows.append(w)
        idx.append(np.abs(ks))
    return np.array(rows), np.array(idx)


def _check_field(f, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.nodes.shape:
        raise ShapeError(f"field of shape {f.shape} on grid of {grid.nodes.size} nodes")
    return f


def d_dx(f, grid: Grid, parity: str | None = None) -> np.ndarray:
    """Second-order first x-derivative on a (possibly nonuniform) grid.

    ``parity`` selects the origin closure: ``None`` one-sided, ``"odd"`` or
    ``"even"`` a mirrored ghost node.  The outer end is always one-sided.
    """
    f = _check_field(f, grid)
    st = grid.stencils
    out = np.empty_like(f)
    out[1:-1] = st["c_minus"] * f[:-2] + st["c_mid"] * f[1:-1] + st["c_plus"] * f[2:]
    if parity == "odd":
        out[0] = f[1] / grid.nodes[1]
    elif parity == "even":
        out[0] = 0.0
    elif parity is None:
        out[0] = st["d1_left"] @ f[:3]
    else:
        raise ValueError(f"unknown parity {parity!r}")
    out[-1] = st["d1_right"] @ f[-3:]
    return out


def d_dx_odd4(f, grid: Grid) -> np.ndarray:
    """First x-derivative of an odd field, fourth order away from x = L.

    ``1 - psi_s^2`` is O(x^2) near the origin, so a second-order psi_s
    leaves an O(1) relative error in K1 at the first nodes on every grid.
    The last two nodes keep the second-order stencils.
    """
    f = _check_field(f, grid)
    w, idx = grid.stencils["c4"]
    out = d_dx(f, grid, parity="odd")
    out[1:-2] = (w * f[idx]).sum(axis=1)
    w1, w2 = grid.stencils["odd_slope"]
    out[0] = w1 * f[1] + w2 * f[2]
    return out


def d_ds(field, profile: Profile, parity: str | None = None) -> np.ndarray:
    """Second-order discrete ``(1/phi) d/dx`` of a nodal field."""
    return d_dx(field, profile.grid, parity) / profile.phi


def d2_ds2(field, profile: Profile, parity: str | None = None) -> np.ndarray:
    """Second-order discrete ``(1/phi) d/dx ((1/phi) d/dx f)``.

    Interior nodes use the compact flux form with midpoint-averaged phi.
    Ends without a ghost node use the chain rule
    ``(f_xx - phi_x f_x / phi) / phi^2`` with one-sided stencils.
    """
    grid = profile.grid
    f = _check_field(field, grid)
    st = grid.stencils
    phi = profile.phi
    h = st["h"]
    phi_half = 0.5 * (phi[:-1] + phi[1:])
    flux = np.diff(f) / (h * phi_half)
    out = np.empty_like(f)
    out[1:-1] = (flux[1:] - flux[:-1]) / (st["dmid"] * phi[1:-1])

    if parity in ("odd", "even"):
        sign = -1.0 if parity == "odd" else 1.0
        ghost_flux = (f[0] - sign * f[1]) / (h[0] * phi_half[0])
        out[0] = (flux[0] - ghost_flux) / (h[0] * phi[0])
    elif parity is None:
        fx = st["d1_left"] @ f[:3]
        px = st["d1_left"] @ phi[:3]
        fxx = st["d2_left"] @ f[:4]
        out[0] = (fxx - px * fx / phi[0]) / phi[0] ** 2
    else:
        raise ValueError(f"unknown parity {parity!r}")

    fx = st["d1_right"] @ f[-3:]
    px = st["d1_right"] @ phi[-3:]
    fxx = st["d2_right"] @ f[-4:]
    out[-1] = (fxx - px * fx / phi[-1]) / phi[-1] ** 2
    return out


def arclength(profile: Profile) -> np.ndarray:
    """Cumulative trapezoid integral of phi, with s[0] = 0."""
    x = profile.grid.nodes
    s = np.zeros_like(x)
    s[1:] = np.cumsum(0.5 * (profile.phi[1:] + profile.phi[:-1]) * np.diff(x))
    return s


# ---------------------------------------------------------------------------
# pointwise geometry
# ---------------------------------------------------------------------------


def unit_sphere_volume(n: int) -> float:
    """Volume of the round unit n-sphere, 2 pi^((n+1)/2) / Gamma((n+1)/2)."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Derived per-node quantities of one profile.

    ``Rc_radial`` multiplies ``ds^2`` and ``Rc_sphere`` multiplies
    ``psi^2 ghat``.  ``H[0]`` is ``+inf``: the sphere through the origin is
    a point.
    """

    x: np.ndarray
    s: np.ndarray
    psi_s: np.ndarray
    psi_ss: np.ndarray
    K0: np.ndarray
    K1: np.ndarray
    R: np.ndarray
    H: np.ndarray
    V: np.ndarray
    Rc_radial: np.ndarray
    Rc_sphere: np.ndarray
    n: int
    psi: np.ndarray
    phi: np.ndarray
    psi_sss_origin: float = field(default=float("nan"))

    CSV_COLUMNS = ("x", "s", "psi_s", "psi_ss", "K0", "K1", "R", "H", "V")

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in self.CSV_COLUMNS}


def psi_derivatives(profile: Profile) -> tuple[np.ndarray, np.ndarray, float]:
    """(psi_s, psi_ss, psi_sss at the origin) using the odd extension of psi."""
    psi_s = d_dx_odd4(profile.psi, profile.grid) / profile.phi
    psi_ss = d2_ds2(profile.psi, profile, parity="odd")
    # psi_ss is odd, so its central derivative at 0 reduces to psi_ss[1] / (phi_0 x_1)
    psi_sss0 = float(psi_ss[1] / (profile.grid.nodes[1] * profile.phi[0]))
    return psi_s, psi_ss, psi_sss0


def sectional_curvatures(profile: Profile, psi_s=None, psi_ss=None, psi_sss0=None):
    """K0 = -psi_ss/psi and K1 = (1 - psi_s^2)/psi^2, regularized at x = 0.

    Both limits at the origin equal -psi_sss(0) for an odd psi.
    """
    if psi_s is None:
        psi_s, psi_ss, psi_sss0 = psi_derivatives(profile)
    psi = profile.psi
    K0 = np.empty_like(psi)
    K1 = np.empty_like(psi)
    K0[1:] = -psi_ss[1:] / psi[1:]
    K1[1:] = (1.0 - psi_s[1:] ** 2) / psi[1:] ** 2
    K0[0] = K1[0] = -psi_sss0
    return K0, K1


def curvature(profile: Profile) -> CurvatureField:
    n = profile.n
    psi_s, psi_ss, psi_sss0 = psi_derivatives(profile)
    K0, K1 = sectional_curvatures(profile, psi_s, psi_ss, psi_sss0)
    Rc_radial = n * K0
    Rc_sphere = K0 + (n - 1) * K1
    R = Rc_radial + n * Rc_sphere
    return CurvatureField(
        x=profile.grid.nodes,
        s=arclength(profile),
        psi_s=psi_s,
        psi_ss=psi_ss,
        K0=K0,
        K1=K1,
        R=R,
        H=_mean_curvature(profile, psi_s),
        V=sphere_volume(profile),
        Rc_radial=Rc_radial,
        Rc_sphere=Rc_sphere,
        n=n,
        psi=profile.psi,
        phi=profile.phi,
        psi_sss_origin=psi_sss0,
    )


def ricci_xform(profile: Profile, printed: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of dx^2 and ghat in Rc, straight from x-derivatives.

    The correct coordinate expression is

        Rc_xx = -n (phi psi_xx - phi_x psi_x) / (phi psi)
        Rc_gg = -(phi psi psi_xx - psi phi_x psi_x + (n-1) phi psi_x^2) / phi^3 + (n-1)

    ``printed=True`` evaluates the literature formula with its typos
    (``psi_xx psi + psi_x phi_x`` etc.), kept only so tests can show that it
    fails on the hyperbolic model.
    """
    n = profile.n
    phi, psi = profile.phi, profile.psi
    grid = profile.grid
    psi_x = d_dx_odd4(psi, grid)
    phi_x = d_dx(phi, grid, parity="even")
    psi_xx = d2_ds2(psi, Profile(grid, np.ones_like(phi), psi, n), parity="odd")
    with np.errstate(divide="ignore", invalid="ignore"):
        if printed:
            rc_xx = n * (-(psi_xx * psi + psi_x * phi_x) / (psi * phi))
            rc_gg = -(phi * psi_x * psi_xx - (n - 1) * phi * psi_x**2
                      + psi * phi_x * psi_x) / phi**3 + (n - 1)
        else:
            rc_xx = -n * (phi * psi_xx - phi_x * psi_x) / (phi * psi)
            rc_gg = -(phi * psi * psi_xx - psi * phi_x * psi_x
                      + (n - 1) * phi * psi_x**2) / phi**3 + (n - 1)
    if not printed:
        # origin: Rc_xx -> n K0(0) phi0^2 with K0(0) = -psi_sss(0)
        _, _, psi_sss0 = psi_derivatives(profile)
        rc_xx[0] = -n * psi_sss0 * phi[0] ** 2
    return rc_xx, rc_gg


def _mean_curvature(profile: Profile, psi_s: np.ndarray) -> np.ndarray:
    H = np.empty_like(psi_s)
    H[0] = np.inf
    H[1:] = profile.n * psi_s[1:] / profile.psi[1:]
    return H


def mean_curvature(profile: Profile) -> np.ndarray:
    """H = n psi_s / psi; ``+inf`` sentinel at the origin."""
    return _mean_curvature(profile, d_dx_odd4(profile.psi, profile.grid) / profile.phi)


def sphere_volume(profile: Profile) -> np.ndarray:
    return profile.psi ** profile.n * unit_sphere_volume(profile.n)


def hyperbolic_mean_curvature(r, n: int = 2):
    """Mean curvature n coth(r) of a geodesic sphere of radius r in H^{n+1}."""
    r = np.asarray(r, dtype=float)
    return n / np.tanh(r)


def brown_york_mass(profile: Profile, field: CurvatureField | None = None) -> np.ndarray:
    """m = (H0(s) - H) V at every node, with H0 evaluated at arclength s.

    The origin value is the limit 0.
    """
    if profile.n != 2:
        raise UnsupportedDimensionError("Brown-York mass is defined here for n = 2 only")
    if field is None:
        field = curvature(profile)
    m = np.zeros_like(field.s)
    s = field.s[1:]
    m[1:] = (hyperbolic_mean_curvature(s, 2) - field.H[1:]) * field.V[1:]
    return m


# ---------------------------------------------------------------------------
# hyperbolic class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassMembership:
    """Tail ratios of phi and psi against the hyperbolic reference.

    ``phi_reference`` records which normalization of phi was used: ``"x"``
    (phi/x, the literal class definition) or ``"one"`` (phi/1, which the
    model metric dx^2 + sinh^2 x ghat satisfies).
    """

    x: np.ndarray
    ratio_phi: np.ndarray
    ratio_psi: np.ndarray
    c1: float
    c2: float
    bounds: tuple[float, float]
    phi_reference: str
    phi_within: bool
    psi_within: bool

    @property
    def within_class(self) -> bool:
        return self.phi_within and self.psi_within


def class_membership(profile: Profile, tail_start: float | None = None,
                     c_bounds: tuple[float, float] = (0.5, 2.0),
                     phi_reference: str = "x") -> ClassMembership:
    x = profile.grid.nodes
    if tail_start is None:
        tail_start = 0.5 * profile.grid.L
    C1, C2 = c_bounds
    if not (0 < C1 <= C2):
        raise ConfigurationError(f"need 0 < C1 <= C2, got {c_bounds}", "c_bounds")
    if not tail_start < profile.grid.L:
        raise ConfigurationError("tail_start must be below L", "tail_start")
    tail = (x >= tail_start) & (x > 0)
    if not np.any(tail):
        raise ConfigurationError("empty tail region", "tail_start")
    xt = x[tail]
    if phi_reference == "x":
        ratio_phi = profile.phi[tail] / xt
    elif phi_reference == "one":
        ratio_phi = profile.phi[tail].copy()
    else:
        raise ConfigurationError(f"unknown phi_reference {phi_reference!r}", "phi_reference")
    ratio_psi = profile.psi[tail] / np.sinh(xt)
    both = np.concatenate([ratio_phi, ratio_psi])
    return ClassMembership(
        x=xt,
        ratio_phi=ratio_phi,
        ratio_psi=ratio_psi,
        c1=float(both.min()),
        c2=float(both.max()),
        bounds=(float(C1), float(C2)),
        phi_reference=phi_reference,
        phi_within=bool(ratio_phi.min() >= C1 and ratio_phi.max() <= C2),
        psi_within=bool(ratio_psi.min() >= C1 and ratio_psi.max() <= C2),
    )
