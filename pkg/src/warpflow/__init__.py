"""Ricci flow of warped-product metrics phi^2 dx^2 + psi^2 ghat on R+ x S^n."""

from __future__ import annotations

__version__ = "0.1.0"

from .diagnostics import (
    CheckRecord,
    DiagnosticsReport,
    MassProbe,
    TrajectoryDiagnostics,
    diagnose_state,
    diagnose_trajectory,
)
from .errors import (
    BlowUpError,
    ConfigurationError,
    ContractError,
    DegenerateMetricError,
    IngestionError,
    InsufficientDataError,
    ShapeError,
    UnsupportedDimensionError,
    WarpFlowError,
)
from .flow import FlowConfig, FlowState, Trajectory, evolve, step
from .geometry import (
    CurvatureField,
    Grid,
    Profile,
    arclength,
    brown_york_mass,
    build_grid,
    class_membership,
    curvature,
    d_ds,
    mean_curvature,
    ricci_xform,
    sphere_volume,
)
from .io import RunManifest, emit_state, load_profile_csv, parse_config
from .presets import Preset, parse_preset
from .residuals import ResidualReport, convergence_order, residual_specs

__all__ = [
    "BlowUpError", "CheckRecord", "ConfigurationError", "ContractError", "CurvatureField",
    "DegenerateMetricError", "DiagnosticsReport", "FlowConfig", "FlowState", "Grid",
    "IngestionError", "InsufficientDataError", "MassProbe", "Preset", "Profile",
    "ResidualReport", "RunManifest", "ShapeError", "Trajectory", "TrajectoryDiagnostics",
    "UnsupportedDimensionError", "WarpFlowError", "arclength", "brown_york_mass",
    "build_grid", "class_membership", "convergence_order", "curvature", "d_ds",
    "diagnose_state", "diagnose_trajectory", "emit_state", "evolve", "load_profile_csv",
    "mean_curvature", "parse_config", "parse_preset", "residual_specs", "ricci_xform",
    "sphere_volume", "step",
]
