"""Evolution identities checked as residuals along computed trajectories.

Time derivatives are taken at fixed x by centered differences over the
neighbouring recorded states (three-point, nonuniform in t); spatial
s-derivatives use the same stencils as the geometry module.  Each identity
is shipped in the form re-derived from the (psi, phi) system and, where the
literature prints something different, in the printed form too, so that a
refinement study can tell which one is an identity.

Forms:
    derived            re-derived, verified symbolically before coding
    printed            as printed, when it differs from the derived form
    *_laplacian        the same identity with Delta f = f_ss + n (psi_s/psi) f_s
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InsufficientDataError
from .geometry import (
    curvature,
    d2_ds2,
    d_ds,
    fd_weights,
    unit_sphere_volume,
)

logger = logging.getLogger(__name__)

DEFAULT_MASK_WIDTH = 3
DEFAULT_ORIGIN_BAND = 1.0
DEFAULT_OUTER_BAND = 0.5
PASS_ORDER = 1.8
PASS_TOLERANCE = 1e-3
EXACT_FLOOR = 1e-10


@dataclass(frozen=True)
class ResidualReport:
    name: str
    form: str
    t: float
    max_residual: float
    rms_residual: float
    refinement_order: float | None = None
    worst_node: int | None = None


class ResidualContext:
    """Per-state quantities and their derivatives, computed lazily and cached.

    ``first_order=True`` swaps the generic first s-derivative for a forward
    difference; it exists only as a negative control for the refinement
    study.
    """

    def __init__(self, traj, k: int = 2, first_order: bool = False):
        self.traj = traj
        self.n = traj.config.n
        self.k = k
        self.first_order = first_order
        self._cache: dict = {}
        self.VN = unit_sphere_volume(self.n)

    # -- per-state values ---------------------------------------------------

    def profile(self, idx):
        return self.traj.states[idx].profile

    def field(self, idx):
        key = ("field", idx)
        if key not in self._cache:
            self._cache[key] = curvature(self.profile(idx))
        return self._cache[key]

    def value(self, idx: int, name: str) -> np.ndarray:
        key = (name, idx)
        if key in self._cache:
            return self._cache[key]
        f = self.field(idx)
        psi = f.psi
        if name == "psi":
            out = psi
        elif name == "psi_s":
            out = f.psi_s
        elif name == "w":
            out = f.psi_ss
        elif name == "K0":
            out = f.K0
        elif name == "K1":
            out = f.K1
        elif name == "K":
            out = -f.K0
        elif name == "H":
            out = f.H.copy()
            out[0] = np.nan
        elif name == "V":
            out = f.V
        elif name == "s":
            out = f.s
        elif name == "psi2":
            out = psi**2
        elif name == "a":
            out = psi**2 * (f.K1 - f.K0)
        elif name == "u":
            with np.errstate(divide="ignore"):
                out = psi ** float(self.k)
        else:
            raise KeyError(name)
        self._cache[key] = out
        return out

    def ds_array(self, idx: int, arr: np.ndarray) -> np.ndarray:
        prof = self.profile(idx)
        if self.first_order:
            out = np.empty_like(arr)
            out[:-1] = np.diff(arr) / np.diff(prof.grid.nodes)
            out[-1] = out[-2]
            return out / prof.phi
        with np.errstate(invalid="ignore"):
            return d_ds(arr, prof)

    def ds(self, idx: int, name: str) -> np.ndarray:
        key = ("_s" + name, idx)
        if key not in self._cache:
            self._cache[key] = self.ds_array(idx, self.value(idx, name))
        return self._cache[key]

    def dss(self, idx: int, name: str) -> np.ndarray:
        key = ("_ss" + name, idx)
        if key not in self._cache:
            with np.errstate(invalid="ignore"):
                self._cache[key] = d2_ds2(self.value(idx, name), self.profile(idx))
        return self._cache[key]

    def lap(self, idx: int, name: str) -> np.ndarray:
        p, q = self.value(idx, "psi_s"), self.value(idx, "psi")
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.dss(idx, name) + self.n * p / q * self.ds(idx, name)

    # -- time derivatives at fixed x -----------------------------------------

    def time_weights(self, idx: int) -> np.ndarray:
        if len(self.traj) < 3:
            raise InsufficientDataError("residuals need at least 3 recorded states")
        if not 1 <= idx <= len(self.traj) - 2:
            raise InsufficientDataError(f"state {idx} has no neighbours on both sides")
        t = [self.traj.states[j].t for j in (idx - 1, idx, idx + 1)]
        return fd_weights(t[1], t, 1)

    def dt_array(self, idx: int, getter: Callable[[int], np.ndarray]) -> np.ndarray:
        w = self.time_weights(idx)
        with np.errstate(invalid="ignore"):
            return w[0] * getter(idx - 1) + w[1] * getter(idx) + w[2] * getter(idx + 1)

    def dt(self, idx: int, name: str) -> np.ndarray:
        key = ("_t" + name, idx)
        if key not in self._cache:
            self._cache[key] = self.dt_array(idx, lambda j: self.value(j, name))
        return self._cache[key]

    # -- masks --------------------------------------------------------------

    def mask(self, idx: int, width: int, origin_band: float, outer_band: float) -> np.ndarray:
        x = self.traj.grid.nodes
        m = np.zeros(x.size, dtype=bool)
        m[width:x.size - width] = True
        m &= (x >= origin_band) & (x <= x[-1] - outer_band)
        return m


# ---------------------------------------------------------------------------
# identities: each returns lhs - rhs on all nodes
# ---------------------------------------------------------------------------


def _pq(c: ResidualContext, i: int):
    return c.value(i, "psi_s"), c.value(i, "psi")


def _commutator(c, i, form):
    p = c.value(i, "psi_s")
    psi_t = c.dt(i, "psi")
    return c.dt(i, "psi_s") - c.ds_array(i, psi_t) - c.n * c.value(i, "K0") * p


def _arclength(c, i, form):
    # s_t = n int_0^s psi_ss/psi ds, integrand -K0 (regularized at 0)
    s = c.value(i, "s")
    g = -c.value(i, "K0")
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(s))])
    return c.dt(i, "s") - c.n * integral


def _vol_source(c, i, coef):
    n = c.n
    V = c.value(i, "V")
    return coef * c.VN ** (2.0 / n) * V ** ((n - 2.0) / n)


def _volume(c, i, form):
    n = c.n
    p, q = _pq(c, i)
    coef = {"derived": n * (n - 1), "printed": n - 1,
            "derived_laplacian": n * (n - 1), "printed_laplacian": n - 1}.get(form)
    if form == "printed_n2":
        # "when n = 2": V_t = V_ss - V(N)
        return c.dt(i, "V") - c.dss(i, "V") + c.VN
    if form.endswith("laplacian"):
        return (c.dt(i, "V") - c.lap(i, "V")
                + n * p / q * c.ds(i, "V") + _vol_source(c, i, coef))
    return c.dt(i, "V") - c.dss(i, "V") + _vol_source(c, i, coef)


def _psi_heat(c, i, form):
    p, q = _pq(c, i)
    w = c.value(i, "w")
    lap_psi = w + c.n * p * p / q
    return c.dt(i, "psi") - lap_psi - c.value(i, "K1") * q + c.n / q


def _psi_s(c, i, form):
    n = c.n
    p, q = _pq(c, i)
    w, K0, K1 = c.value(i, "w"), c.value(i, "K0"), c.value(i, "K1")
    if form == "derived":
        return (c.dt(i, "psi_s") - c.dss(i, "psi_s")
                - (n - 2) * w * p / q - (n - 1) * (1 - p * p) / q**2 * p)
    # Laplacian form
    return c.dt(i, "psi_s") - c.lap(i, "psi_s") - (2 * K0 + (n - 1) * K1) * p


def _w(c, i, form):
    n = c.n
    p, q = _pq(c, i)
    w, K0, K1 = c.value(i, "w"), c.value(i, "K0"), c.value(i, "K1")
    br = 2 * K0 - (4 * n - 5) * p**2 / q**2 + (n - 1) / q**2
    src = -2 * (n - 1) * K1 * p**2 / q
    ws = c.ds(i, "w")
    if form == "derived":
        return c.dt(i, "w") - c.dss(i, "w") - ((n - 2) * p / q * ws + br * w + src)
    if form == "printed":
        return c.dt(i, "w") - c.dss(i, "w") - ((n - 2) * p / q * ws - br * w + src)
    if form == "derived_laplacian":
        return c.dt(i, "w") - c.lap(i, "w") - (-2 * p / q * ws + br * w + src)
    return c.dt(i, "w") - c.lap(i, "w") - (-2 * n * p / q * ws - br * w + src)


def _K(c, i, form):
    n = c.n
    p, q = _pq(c, i)
    K, K1 = c.value(i, "K"), c.value(i, "K1")
    Ks = c.ds(i, "K")
    r2 = p**2 / q**2
    if form == "derived":
        rhs = n * p / q * Ks - 2 * K**2 + 2 * (n - 1) * K1 * K - 2 * (n - 1) * (K + K1) * r2
        return c.dt(i, "K") - c.dss(i, "K") - rhs
    if form == "printed":
        rhs = n * n * p / q * Ks - 2 * K**2 - 4 * (n - 1) * K1 * K - 2 * (n - 1) * K1 * r2
        return c.dt(i, "K") - c.dss(i, "K") - rhs
    if form == "derived_laplacian":
        rhs = -2 * K**2 + 2 * (n - 1) * K1 * K - 2 * (n - 1) * (K + K1) * r2
        return c.dt(i, "K") - c.lap(i, "K") - rhs
    rhs = -4 * K**2 - 2 * (n - 1) * K1 * K - 2 * (n - 1) * K1 * r2
    return c.dt(i, "K") - c.lap(i, "K") - rhs


def _H(c, i, form):
    n = c.n
    H = c.value(i, "H")
    Hs = c.ds(i, "H")
    # V(N)^{2/n} V^{-2/n} = 1/psi^2
    inv_psi2 = c.VN ** (2.0 / n) * c.value(i, "V") ** (-2.0 / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        if form == "derived":
            rhs = c.dss(i, "H") + H * Hs - H**3 / n + 2 * (n - 1) * inv_psi2 * H
            return c.dt(i, "H") - rhs
        if form == "printed":
            rhs = (c.dss(i, "H") + (2 * n - 1) / n * H * Hs - H**3 / n**2
                   + 2 * (n - 1) * inv_psi2 * H)
            return c.dt(i, "H") - rhs
        if form == "derived_laplacian":
            rhs = -H**3 / n + 2 * (n - 1) * inv_psi2 * H
            return c.dt(i, "H") - c.lap(i, "H") - rhs
        rhs = (n - 1) / n * H * Hs - H**3 / n**2 + 2 * (n - 1) * inv_psi2 * H
        return c.dt(i, "H") - c.lap(i, "H") - rhs


def _a(c, i, form):
    n = c.n
    p, q = _pq(c, i)
    a = c.value(i, "a")
    As = c.ds(i, "a")
    if form == "derived":
        return c.dt(i, "a") - c.dss(i, "a") - ((n - 4) * p / q * As - 4 * (n - 1) * p**2 / q**2 * a)
    return c.dt(i, "a") - c.lap(i, "a") - (-4 * p / q * As - 4 * (n - 1) * p**2 / q**2 * a)


def _f_of_psi(c, i, form):
    n, k = c.n, c.k
    u = c.value(i, "u")
    us = c.ds(i, "u")
    K0, K1 = c.value(i, "K0"), c.value(i, "K1")
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = (k - 1) / k * us**2 / u
        if form == "derived":
            zeroth = k * (n - 1) * K1 * u
        elif form == "printed":
            zeroth = k * ((n - 1) * K0 + n) * u
        else:  # printed_K1: the general-f equation's K1 with the "+n"
            zeroth = k * ((n - 1) * K1 + n) * u
        return c.dt(i, "u") - c.dss(i, "u") + zeroth + grad


def _K0_s(c, i, form):
    p, q = _pq(c, i)
    K0 = c.value(i, "K0")
    psi_sss = c.ds(i, "w")
    return c.ds(i, "K0") + psi_sss / q + K0 * p / q


def _K1_s(c, i, form):
    p, q = _pq(c, i)
    K0, K1 = c.value(i, "K0"), c.value(i, "K1")
    factor = 2.0 if form == "derived" else 1.0
    return c.ds(i, "K1") + factor * p / q * (K1 - K0)


def _psi_below_one(c: ResidualContext, i: int) -> np.ndarray:
    return c.value(i, "psi") < 1.0


@dataclass(frozen=True)
class ResidualSpec:
    """One identity in one form.

    ``evaluate(ctx, idx, form)`` returns lhs - rhs at every node.  The
    reported residual is that divided pointwise by ``weight`` (the size of
    the evolving field, e.g. V for the volume equation, so that residuals
    of different equations are comparable).  The mask drops ``mask_width``
    nodes at each end, x below ``origin_band`` and above L - ``outer_band``,
    and nodes outside ``region`` when given.
    """

    name: str
    form: str
    evaluate: Callable
    weight: str | None = None
    spatial: bool = False
    mask_width: int = DEFAULT_MASK_WIDTH
    origin_band: float = DEFAULT_ORIGIN_BAND
    outer_band: float = DEFAULT_OUTER_BAND
    region: Callable | None = None
    note: str = ""

    @property
    def key(self) -> str:
        return f"{self.name}[{self.form}]"

    def residual(self, ctx: ResidualContext, idx: int) -> tuple[np.ndarray, np.ndarray]:
        if not self.spatial:
            ctx.time_weights(idx)
        # 1/psi terms are singular at the origin node, which the mask drops
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.evaluate(ctx, idx, self.form)
            if self.weight is not None:
                r = r / np.abs(ctx.value(idx, self.weight))
        m = ctx.mask(idx, self.mask_width, self.origin_band, self.outer_band)
        if self.region is not None:
            m &= self.region(ctx, idx)
        return r, m

    def report(self, ctx: ResidualContext, idx: int) -> ResidualReport:
        r, m = self.residual(ctx, idx)
        t = ctx.traj.states[idx].t
        if not np.any(m):
            return ResidualReport(self.name, self.form, t, math.nan, math.nan)
        vals = np.abs(r[m])
        k = int(np.argmax(vals))
        return ResidualReport(self.name, self.form, t, float(vals[k]),
                              float(np.sqrt(np.mean(vals**2))),
                              worst_node=int(np.flatnonzero(m)[k]))


# (evaluator, weight field, origin band override) per identity
_IDENTITIES = {
    "commutator": (_commutator, "psi_s", None),
    "arclength": (_arclength, None, 0.0),
    "Vflow": (_volume, "V", None),
    "psi_heat": (_psi_heat, "psi", 0.0),
    "psi_s": (_psi_s, "psi_s", None),
    "w": (_w, "psi", None),
    "Kflow": (_K, None, None),
    "Hflow": (_H, None, None),
    "a": (_a, "psi2", None),
    "f_of_psi": (_f_of_psi, None, 0.0),
    "K0_s": (_K0_s, None, None),
    "K1_s": (_K1_s, None, None),
}

_FORMS = [
    ("commutator", "derived"),
    ("arclength", "derived"),
    ("Vflow", "derived"), ("Vflow", "printed"),
    ("Vflow", "derived_laplacian"), ("Vflow", "printed_laplacian"),
    ("Vflow", "printed_n2"),
    ("psi_heat", "derived"),
    ("psi_s", "derived"), ("psi_s", "derived_laplacian"),
    ("w", "derived"), ("w", "printed"), ("w", "derived_laplacian"), ("w", "printed_laplacian"),
    ("Kflow", "derived"), ("Kflow", "printed"),
    ("Kflow", "derived_laplacian"), ("Kflow", "printed_laplacian"),
    ("Hflow", "derived"), ("Hflow", "printed"),
    ("Hflow", "derived_laplacian"), ("Hflow", "printed_laplacian"),
    ("a", "derived"), ("a", "derived_laplacian"),
    ("f_of_psi", "derived"), ("f_of_psi", "printed"), ("f_of_psi", "printed_K1"),
    ("K0_s", "derived"),
    ("K1_s", "derived"), ("K1_s", "printed"),
]

_NOTES = {
    "arclength": "pre-integration form n int_0^s psi_ss/psi",
    "a": "a = psi^2 (K1 - K0); residual weighted by psi^2",
    "f_of_psi": "u = psi^k on the region psi < 1",
}


def residual_specs(origin_band: float | None = None, outer_band: float = DEFAULT_OUTER_BAND,
                   mask_width: int = DEFAULT_MASK_WIDTH, n: int = 2) -> list:
    """Every identity in every shipped form, in a fixed order.

    ``origin_band=None`` keeps the per-identity default: 1.0 for identities
    with 1/psi-singular terms, 0 for those regular at the origin.
    """
    specs = []
    for name, form in _FORMS:
        if form == "printed_n2" and n != 2:
            continue
        fn, weight, band = _IDENTITIES[name]
        if origin_band is not None:
            band = origin_band
        elif band is None:
            band = DEFAULT_ORIGIN_BAND
        specs.append(ResidualSpec(
            name, form, fn, weight=weight, spatial=name in ("K0_s", "K1_s"),
            mask_width=mask_width, origin_band=band, outer_band=outer_band,
            region=_psi_below_one if name == "f_of_psi" else None,
            note=_NOTES.get(name, "")))
    return specs


# printed forms that coincide with the derived ones are listed here so the
# report states it instead of duplicating rows
PRINTED_AGREES = ("commutator", "arclength", "psi_heat", "psi_s", "a", "K0_s")
UNTESTED = {
    ("arclength", "printed_ibp"):
        "integrated-by-parts form H + (1/n) int^s H^2 has no stated lower limit "
        "and a divergent boundary term at s = 0",
}


def _spec(name: str, form: str, **kw) -> ResidualSpec:
    for sp in residual_specs(**kw):
        if sp.name == name and sp.form == form:
            return sp
    raise ConfigurationError(f"no residual {name}[{form}]", "equation")


def _run(name, default_form, traj, idx, form, k=2, **kw):
    ctx = ResidualContext(traj, k=k)
    return _spec(name, form or default_form, **kw).report(ctx, idx)


def res_commutator(traj, idx, **kw):
    return _run("commutator", "derived", traj, idx, None, **kw)


def res_arclength(traj, idx, **kw):
    return _run("arclength", "derived", traj, idx, None, **kw)


def res_volume(traj, idx, form="derived", **kw):
    return _run("Vflow", "derived", traj, idx, form, **kw)


def res_psi_heat(traj, idx, **kw):
    return _run("psi_heat", "derived", traj, idx, None, **kw)


def res_psi_s(traj, idx, form="derived", **kw):
    return _run("psi_s", "derived", traj, idx, form, **kw)


def res_w(traj, idx, form="derived", **kw):
    return _run("w", "derived", traj, idx, form, **kw)


def res_K(traj, idx, form="derived", **kw):
    return _run("Kflow", "derived", traj, idx, form, **kw)


def res_H(traj, idx, form="derived", **kw):
    return _run("Hflow", "derived", traj, idx, form, **kw)


def res_a(traj, idx, form="derived", **kw):
    return _run("a", "derived", traj, idx, form, **kw)


def res_f_of_psi(traj, idx, k: int = 2, form="derived", **kw):
    if isinstance(k, bool) or int(k) != k or k == 0:
        raise ConfigurationError(f"k must be a nonzero integer, got {k}", "k")
    return _run("f_of_psi", "derived", traj, idx, form, k=int(k), **kw)


def res_curvature_derivatives(traj, idx=0, form="derived", **kw) -> list:
    """[(K0)_s report, (K1)_s report]; purely spatial, any state index."""
    ctx = ResidualContext(traj)
    return [_spec("K0_s", "derived", **kw).report(ctx, idx),
            _spec("K1_s", form, **kw).report(ctx, idx)]


# ---------------------------------------------------------------------------
# refinement study
# ---------------------------------------------------------------------------


@dataclass
class OrderResult:
    name: str
    form: str
    observed_order: float
    max_residual: float
    verdict: str
    pair_orders: list = field(default_factory=list)
    per_grid_max: list = field(default_factory=list)
    note: str = ""

    @property
    def key(self) -> str:
        return f"{self.name}[{self.form}]"


def nearest_indices(traj, targets) -> list:
    """Interior state indices whose times are closest to ``targets``."""
    t = traj.times
    out = []
    for tt in targets:
        j = int(np.argmin(np.abs(t - tt)))
        out.append(min(max(j, 1), len(t) - 2))
    return out


def sup_residual(spec: ResidualSpec, ctx: ResidualContext, indices) -> np.ndarray:
    return np.array([spec.report(ctx, j).max_residual for j in indices])


def classify(per_grid: np.ndarray, tol: float = PASS_TOLERANCE) -> tuple[float, list, str]:
    """(mean observed order, per-pair orders, verdict) from residuals on
    grids M, 2M, 4M.  ``per_grid`` has shape (3, n_times)."""
    per_grid = np.asarray(per_grid, dtype=float)
    # times where the masked region is empty on some grid carry no information
    per_grid = per_grid[:, np.all(np.isfinite(per_grid), axis=0)]
    if per_grid.shape[1] == 0:
        return math.nan, [], "untested"
    finest = float(per_grid[-1].max())
    if float(per_grid.max()) <= EXACT_FLOOR:
        return math.nan, [], "pass"
    with np.errstate(divide="ignore", invalid="ignore"):
        pairs = np.log2(per_grid[:-1] / per_grid[1:])
    pair_means = [float(np.mean(p)) for p in pairs]
    order = float(np.mean(pair_means))
    if order >= PASS_ORDER and finest <= tol:
        verdict = "pass"
    elif order < 0.5 and finest > tol:
        verdict = "discrepancy"
    else:
        verdict = "inconclusive"
    return order, pair_means, verdict


def convergence_order(specs, trajectories, target_times, k: int = 2,
                      first_order: bool = False, tol: float = PASS_TOLERANCE) -> list:
    """Observed orders of each spec from three trajectories (M, 2M, 4M).

    Residual sup-norms are taken at the states nearest ``target_times`` on
    each grid; order = log2(r(M)/r(2M)) averaged over times, then over the
    two grid pairs.  Verdicts: pass (mean order >= 1.8 and finest
    residual <= tol, or exact to roundoff), discrepancy (no convergence,
    order < 0.5), inconclusive otherwise, untested when the masked region
    is empty.
    """
    if len(trajectories) != 3:
        raise ConfigurationError("convergence_order needs exactly three trajectories", "grids")
    Ms = [tr.grid.M for tr in trajectories]
    if not (Ms[1] == 2 * Ms[0] and Ms[2] == 2 * Ms[1]):
        raise ConfigurationError(f"grid sizes must be in ratio 1:2:4, got {Ms}", "M")
    ctxs = [ResidualContext(tr, k=k, first_order=first_order) for tr in trajectories]
    idxs = [nearest_indices(tr, target_times) for tr in trajectories]
    results = []
    for sp in specs:
        per = np.array([sup_residual(sp, c, ix) for c, ix in zip(ctxs, idxs)])
        order, pairs, verdict = classify(per, tol)
        finest = float(np.nanmax(per[-1])) if np.any(np.isfinite(per[-1])) else math.nan
        results.append(OrderResult(sp.name, sp.form, order, finest, verdict, pairs,
                                   [float(np.nanmax(p)) if np.any(np.isfinite(p)) else math.nan
                                    for p in per], sp.note))
    return results


def untested_results() -> list:
    return [OrderResult(name, form, math.nan, math.nan, "untested", note=why)
            for (name, form), why in UNTESTED.items()]


def discrepancy_table(results) -> list:
    """Rows (equation, printed form, printed verdict, derived verdict) for
    every identity shipped in both forms."""
    by_key = {(r.name, r.form): r for r in results}
    rows = []
    for (name, form), r in by_key.items():
        if not form.startswith("printed"):
            continue
        base = "derived_laplacian" if form.endswith("laplacian") else "derived"
        d = by_key.get((name, base))
        rows.append((name, form, r.verdict, d.verdict if d else "untested"))
    return rows


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def write_residuals_csv(path, reports) -> None:
    from .io import fmt

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["equation", "form", "t", "max_residual", "rms_residual"])
        for r in reports:
            w.writerow([r.name, r.form, fmt(r.t), fmt(r.max_residual), fmt(r.rms_residual)])


def write_orders_csv(path, results) -> None:
    from .io import fmt

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["equation", "form", "observed_order", "max_residual", "verdict"])
        for r in results:
            w.writerow([r.name, r.form, fmt(r.observed_order), fmt(r.max_residual), r.verdict])


def residual_series(specs, traj, indices, k: int = 2) -> list:
    ctx = ResidualContext(traj, k=k)
    return [sp.report(ctx, j) for sp in specs for j in indices]


def study_configs(base, Ms=(128, 256, 512)) -> list:
    """Three configs differing only in M, recording every step."""
    return [replace(base, M=int(M), record_every=1) for M in Ms]
