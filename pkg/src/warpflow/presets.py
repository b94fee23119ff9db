"""Initial-data presets and the exact self-similar hyperbolic family."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import Grid, Profile


@dataclass(frozen=True)
class Preset:
    """A named initial profile.

    ``lam2`` is the conformal factor of the hyperbolic model the data is
    asymptotic to (``g ~ lam2 (dx^2 + sinh^2 x ghat)`` at infinity); it
    selects the exact Dirichlet data at the outer boundary.  ``None`` means
    the data is not hyperbolic at infinity.
    """

    name: str
    params: tuple = ()
    path: str | None = None

    @property
    def lam2(self) -> float | None:
        if self.name in ("hyperbolic", "perturbed_hyperbolic"):
            return 1.0
        if self.name == "scaled_hyperbolic":
            return float(self.params[0])
        return None

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}({','.join(repr(p) for p in self.params)})"

    def profile(self, grid: Grid, n: int) -> Profile:
        x = grid.nodes
        if self.name == "hyperbolic":
            return Profile(grid, np.ones_like(x), np.sinh(x), n)
        if self.name == "flat":
            return Profile(grid, np.ones_like(x), x.copy(), n)
        if self.name == "scaled_hyperbolic":
            lam = math.sqrt(self.params[0])
            return Profile(grid, np.full_like(x, lam), lam * np.sinh(x), n)
        if self.name == "perturbed_hyperbolic":
            eps, xc, width = self.params
            bump = 1.0 + eps * x**2 * np.exp(-(((x - xc) / width) ** 2))
            return Profile(grid, np.ones_like(x), np.sinh(x) * bump, n)
        raise ConfigurationError(f"preset {self.name!r} has no closed form", "preset")


PRESET_FORMULAS = {
    "hyperbolic": "phi = 1, psi = sinh(x)",
    "flat": "phi = 1, psi = x",
    "scaled_hyperbolic(lam2)": "phi = sqrt(lam2), psi = sqrt(lam2) sinh(x)",
    "perturbed_hyperbolic(eps,x_c,width)":
        "phi = 1, psi = sinh(x) (1 + eps x^2 exp(-((x - x_c)/width)^2)), |eps| < 0.2",
    "from_csv": "x,phi,psi read from psi_csv",
}

# which normalization of phi in the hyperbolic-class definition each preset meets
PRESET_CLASS_NOTES = {
    "hyperbolic": "psi/sinh x = 1; phi/1 = 1 (phi/x -> 0: fails the literal phi/x ~ 1 reading)",
    "flat": "psi/sinh x -> 0: not hyperbolic type under either reading",
    "scaled_hyperbolic(lam2)": "psi/sinh x = sqrt(lam2); phi/1 = sqrt(lam2); phi/x -> 0",
    "perturbed_hyperbolic(eps,x_c,width)": "tail identical to hyperbolic",
    "from_csv": "depends on the data",
}

_PRESET_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")


def parse_preset(text: str, psi_csv: str | None = None) -> Preset:
    m = _PRESET_RE.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse preset {text!r}", "preset")
    name, args = m.group(1), m.group(2)
    try:
        params = tuple(float(a) for a in args.split(",")) if args else ()
    except ValueError as exc:
        raise ConfigurationError(f"non-numeric preset argument in {text!r}", "preset") from exc
    if name in ("hyperbolic", "flat"):
        if params:
            raise ConfigurationError(f"{name} takes no arguments", "preset")
    elif name == "scaled_hyperbolic":
        if len(params) != 1 or not (params[0] > 0 and math.isfinite(params[0])):
            raise ConfigurationError("scaled_hyperbolic(lam2) needs one positive argument", "preset")
    elif name == "perturbed_hyperbolic":
        if len(params) != 3:
            raise ConfigurationError("perturbed_hyperbolic(eps,x_c,width) needs three arguments", "preset")
        eps, _, width = params
        if not -0.2 < eps < 0.2:
            raise ConfigurationError(f"eps must lie in (-0.2, 0.2), got {eps}", "preset")
        if width <= 0:
            raise ConfigurationError("width must be positive", "preset")
    elif name == "from_csv":
        if not psi_csv:
            raise ConfigurationError("from_csv requires psi_csv", "psi_csv")
        return Preset(name, (), psi_csv)
    else:
        raise ConfigurationError(f"unknown preset {name!r}", "preset")
    return Preset(name, params)


# ---------------------------------------------------------------------------
# exact self-similar family
# ---------------------------------------------------------------------------


def hyperbolic_scale(t, n: int, lam2: float = 1.0, modified: bool = False):
    """Conformal factor c(t) with psi = c sinh x, phi = c solving the flow.

    Ricci flow: ``c^2 = lam2 + 2 n t``.  Modified flow (Rc + n g term):
    ``c^2 = 1 + (lam2 - 1) exp(-2 n t)``, stationary for ``lam2 = 1``.
    """
    t = np.asarray(t, dtype=float)
    if modified:
        return np.sqrt(1.0 + (lam2 - 1.0) * np.exp(-2.0 * n * t))
    return np.sqrt(lam2 + 2.0 * n * t)


def hyperbolic_scale_rate(t, n: int, lam2: float = 1.0, modified: bool = False):
    """dc/dt for :func:`hyperbolic_scale`."""
    c = hyperbolic_scale(t, n, lam2, modified)
    if modified:
        return -n * (lam2 - 1.0) * np.exp(-2.0 * n * np.asarray(t, dtype=float)) / c
    return n / c


def exact_hyperbolic_profile(grid: Grid, n: int, t: float, lam2: float = 1.0,
                             modified: bool = False) -> Profile:
    c = float(hyperbolic_scale(t, n, lam2, modified))
    x = grid.nodes
    return Profile(grid, np.full_like(x, c), c * np.sinh(x), n)
