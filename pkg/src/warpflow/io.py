"""Configuration text, profile CSV ingestion, and deterministic output files.

Every float written to disk uses ``%.16e`` (17 significant digits), which
round-trips IEEE doubles exactly and does not depend on the locale.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IngestionError, WarpFlowError
from .flow import FlowConfig, FlowState, Trajectory
from .geometry import CurvatureField, Grid, Profile, curvature

FLOAT_FORMAT = "%.16e"
OUT_DIR_ENV = "WARPFLOW_OUT_DIR"
PROFILE_COLUMNS = ("x", "phi", "psi")
MANIFEST_NAME = "manifest.json"
STATES_INDEX = "states.csv"


def fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return FLOAT_FORMAT % v


def software_version() -> str:
    from . import __version__

    return __version__


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "on": True,
               "false": False, "no": False, "0": False, "off": False}


def _to_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {text!r}", key) from None


def _to_float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}", key) from None
    if not math.isfinite(v):
        raise ConfigurationError(f"must be finite, got {text!r}", key)
    return v


def _to_bool(key, text):
    try:
        return _BOOL_WORDS[text.lower()]
    except KeyError:
        raise ConfigurationError(f"expected true/false, got {text!r}", key) from None


def _to_optional_str(key, text):
    return None if text.lower() in ("", "none") else text


_CONVERTERS = {
    "n": _to_int,
    "L": _to_float,
    "M": _to_int,
    "stretch": _to_float,
    "t_end": _to_float,
    "cfl": _to_float,
    "outer_bc": lambda k, v: v,
    "preset": lambda k, v: v,
    "psi_csv": _to_optional_str,
    "modified": _to_bool,
    "record_every": _to_int,
    "out_dir": lambda k, v: v,
}

_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def parse_config(text: str) -> FlowConfig:
    """``key = value`` lines; ``#`` starts a comment; blank lines ignored.

    Unknown or repeated keys, malformed lines, type mismatches and
    constraint violations raise :class:`ConfigurationError` naming the key.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = m.group(1), m.group(2)
        if key not in _CONVERTERS:
            raise ConfigurationError(f"unknown key (line {lineno})", key)
        if key in values:
            raise ConfigurationError(f"repeated key (line {lineno})", key)
        values[key] = _CONVERTERS[key](key, value)
    return FlowConfig(**values)


def load_config(path) -> FlowConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}", "config") from exc
    return parse_config(text)


def config_text(config: FlowConfig) -> str:
    """Canonical text that :func:`parse_config` maps back to ``config``."""
    lines = []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def config_dict(config: FlowConfig) -> dict:
    return dataclasses.asdict(config)


def resolve_out_dir(config: FlowConfig, override: str | None = None) -> Path:
    """Explicit override, then the environment variable, then ``config.out_dir``."""
    return Path(override or os.environ.get(OUT_DIR_ENV) or config.out_dir)


# ---------------------------------------------------------------------------
# profile and curvature CSV
# ---------------------------------------------------------------------------


def _write_columns(path, header, columns) -> Path:
    path = Path(path)
    rows = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_profile_csv(profile: Profile, path) -> Path:
    return _write_columns(path, PROFILE_COLUMNS, (profile.x, profile.phi, profile.psi))


def write_curvature_csv(fld: CurvatureField, path) -> Path:
    cols = fld.columns()
    return _write_columns(path, CurvatureField.CSV_COLUMNS, [cols[c] for c in CurvatureField.CSV_COLUMNS])


def load_profile_csv(path, n: int = 2) -> Profile:
    """Read ``x,phi,psi`` rows.  Row numbers in errors count data rows from 1."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PROFILE_COLUMNS:
            raise IngestionError(f"header must be {','.join(PROFILE_COLUMNS)}, got {header}", 0)
        xs, phis, psis = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise IngestionError(f"expected 3 columns, got {len(row)}", row_no)
            try:
                x, phi, psi = (float(c) for c in row)
            except ValueError:
                raise IngestionError(f"non-numeric value in {row}", row_no) from None
            if not all(math.isfinite(v) for v in (x, phi, psi)):
                raise IngestionError("non-finite value", row_no)
            if row_no == 1:
                if x != 0.0:
                    raise IngestionError(f"first node must be x = 0, got {x!r}", row_no)
                if psi != 0.0:
                    raise IngestionError(f"psi at the origin must be 0, got {psi!r}", row_no)
            else:
                if x <= xs[-1]:
                    raise IngestionError(f"x not strictly increasing ({x!r} after {xs[-1]!r})", row_no)
                if psi <= 0.0:
                    raise IngestionError(f"psi must be positive away from the origin, got {psi!r}", row_no)
            if phi <= 0.0:
                raise IngestionError(f"phi must be positive, got {phi!r}", row_no)
            xs.append(x)
            phis.append(phi)
            psis.append(psi)
    try:
        grid = Grid(np.array(xs))
        return Profile(grid, np.array(phis), np.array(psis), n)
    except WarpFlowError as exc:
        raise IngestionError(str(exc)) from exc


# ---------------------------------------------------------------------------
# trajectory outputs
# ---------------------------------------------------------------------------


def state_names(index: int, t: float) -> tuple[str, str]:
    stem = f"{index:05d}_t={t:.9e}"
    return f"state_{stem}.csv", f"profile_{stem}.csv"


def emit_state(state: FlowState, out_dir, index: int, fld: CurvatureField | None = None) -> list:
    """Curvature CSV and profile CSV of one recorded state."""
    out_dir = Path(out_dir)
    fld = curvature(state.profile) if fld is None else fld
    state_name, profile_name = state_names(index, state.t)
    return [write_curvature_csv(fld, out_dir / state_name),
            write_profile_csv(state.profile, out_dir / profile_name)]


def write_states_index(traj: Trajectory, path) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write("index,t,state_file,profile_file\n")
        for i, st in enumerate(traj.states):
            s, p = state_names(i, st.t)
            fh.write(f"{i},{fmt(st.t)},{s},{p}\n")
    return Path(path)


def load_trajectory(out_dir, config: FlowConfig) -> Trajectory:
    """Rebuild a trajectory from ``states.csv`` and the profile CSVs."""
    out_dir = Path(out_dir)
    index = out_dir / STATES_INDEX
    if not index.exists():
        raise IngestionError(f"{index} not found")
    states = []
    grid = None
    with open(index, newline="") as fh:
        for row in csv.DictReader(fh):
            prof = load_profile_csv(out_dir / row["profile_file"], n=config.n)
            if grid is None:
                grid = prof.grid
            elif not np.array_equal(grid.nodes, prof.grid.nodes):
                raise IngestionError(f"grid of {row['profile_file']} differs from the first state")
            else:
                prof = Profile(grid, prof.phi, prof.psi, prof.n)
            states.append(FlowState(float(row["t"]), prof))
    if not states:
        raise IngestionError(f"{index} lists no states")
    return Trajectory(states, config)


def write_series_csv(reports, path) -> Path:
    rows = [r.series_row for r in reports]
    header = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row[h]) for h in header) + "\n")
    return Path(path)


def write_mass_csv(probe, path) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["t"] + [f"r={r:g}" for r in probe.radii]) + "\n")
        for t, row in zip(probe.times, probe.table()):
            fh.write(",".join([fmt(t)] + [fmt(v) for v in row]) + "\n")
    return Path(path)


def write_text(path, text: str) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def grid_hash(grid: Grid) -> str:
    return hashlib.sha256(np.ascontiguousarray(grid.nodes, dtype="<f8").tobytes()).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Provenance of one invocation; ``files`` maps name -> sha256."""

    command: str
    config: dict
    version: str
    grid_sha256: str | None = None
    started: str = field(default_factory=_now)
    finished: str | None = None
    status: str = "running"
    files: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def add(self, path) -> None:
        path = Path(path)
        self.files[path.name] = sha256_file(path)

    def add_all(self, paths) -> None:
        for p in paths:
            self.add(p)

    def finalize(self, status: str) -> None:
        self.status = status
        self.finished = _now()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["files"] = dict(sorted(self.files.items()))
        return d

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        with open(path, "w", newline="") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def load_manifest(out_dir) -> dict:
    with open(Path(out_dir) / MANIFEST_NAME) as fh:
        return json.load(fh)


def verify_manifest(out_dir) -> list:
    """Names whose file is missing or whose checksum differs."""
    out_dir = Path(out_dir)
    doc = load_manifest(out_dir)
    bad = []
    for name, digest in doc["files"].items():
        p = out_dir / name
        if not p.exists() or sha256_file(p) != digest:
            bad.append(name)
    return bad
