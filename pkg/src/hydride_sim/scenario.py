"""Scenario documents, initial-profile presets and bit-stable writers.

A scenario is a flat key-value document (``key = value`` per line, ``#``
comments).  Unknown keys are rejected with their line number; every other
validation failure names the violated invariant.  Writers format floats
at 17 significant digits so identical inputs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constitutive import HSpec
from .errors import ValidationError
from .grid import Field, Grid
from .state import ModelParams, State
from .stepper import StepperConfig

MODES = ("run", "steady-check", "decay-study", "convergence-study")
PRESETS = ("constant", "ramp", "gaussian-bump", "step", "csv")

#: columns of the time-series CSV, in order
TIMESERIES_COLUMNS = (
    "t", "mass", "energy", "J", "phi1", "phi2", "min_chi", "max_chi",
    "min_u", "min_theta", "energy_res", "dissip_res", "outer_iters",
)


def _fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


@dataclass(frozen=True)
class ProfileSpec:
    """Named analytic preset (or CSV import) for one initial field."""

    preset: str = "constant"
    params: dict = field(default_factory=dict)

    def evaluate(self, grid: Grid) -> Field:
        p = self.params
        if self.preset == "constant":
            return Field.constant(grid, p.get("value", 1.0))
        if self.preset == "ramp":
            lo, hi = p.get("lo", 0.0), p.get("hi", 1.0)
            x = grid.coords[:, 0]
            return Field(grid, lo + (hi - lo) * x / grid.lengths[0])
        if self.preset == "step":
            lo, hi = p.get("lo", 0.0), p.get("hi", 1.0)
            edge = p.get("edge", 0.5) * grid.lengths[0]
            x = grid.coords[:, 0]
            return Field(grid, np.where(x < edge, lo, hi))
        if self.preset == "gaussian-bump":
            base = p.get("base", 0.0)
            amp = p.get("amplitude", 1.0)
            cfrac = p.get("center", 0.5)
            sigma = p.get("width", 0.1) * min(grid.lengths)
            center = np.array([cfrac * length for length in grid.lengths])
            r2 = ((grid.coords - center) ** 2).sum(axis=1)
            return Field(grid, base + amp * np.exp(-0.5 * r2 / sigma**2))
        if self.preset == "csv":
            path = p.get("path")
            if not path:
                raise ValidationError("csv preset needs a path")
            vals = np.loadtxt(path, dtype=float, ndmin=1)
            if vals.shape != (grid.n_nodes,):
                raise ValidationError(
                    f"csv profile {path}: {vals.shape[0]} values for {grid.n_nodes} nodes"
                )
            return Field(grid, vals)
        raise ValidationError(f"unknown preset {self.preset!r}")


@dataclass(frozen=True)
class Scenario:
    """Fully validated run description."""

    grid: Grid
    params: ModelParams
    stepcfg: StepperConfig
    theta0: ProfileSpec
    chi0: ProfileSpec
    u0: ProfileSpec
    n_smooth: int = 100
    t_end: float = 1.0
    output_every: int = 1
    mode: str = "run"
    out_dir: str | None = None
    study_gammas: tuple[float, ...] = (0.5, 1.0, 2.0)
    study_levels: int = 3
    study_nus: tuple[float, ...] = (1e-2, 1e-3, 1e-4)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.stepcfg.dt))


# key -> (parser, default); profile sub-keys handled separately
_FLOAT_KEYS = {
    "grid.length_x": 1.0,
    "grid.length_y": 1.0,
    "model.mu": 1.0,
    "model.gamma": 0.0,
    "h.scale": 1.0,
    "h.c_h": 4.0,
    "step.dt": 1e-3,
    "step.dt_min": 1e-6,
    "step.tol_couple": 1e-10,
    "step.tol_newton": 1e-12,
    "step.nu": 1e-3,
    "step.relaxation": 1.0,
    "run.t_end": 1.0,
}
_INT_KEYS = {
    "grid.dim": 1,
    "grid.cells_x": 128,
    "grid.cells_y": 16,
    "step.max_outer": 60,
    "init.n": 100,
    "run.output_every": 1,
    "study.levels": 3,
}
_STR_KEYS = {
    "h.family": "atan",
    "run.mode": "run",
    "output.dir": None,
    "study.gammas": "0.5,1.0,2.0",
    "study.nus": "1e-2,1e-3,1e-4",
}
_PROFILE_FIELDS = ("theta0", "chi0", "u0")
_PROFILE_PARAM_KEYS = ("value", "lo", "hi", "base", "amplitude", "center", "width", "edge")
_PROFILE_DEFAULTS = {"theta0": 1.0, "chi0": 0.5, "u0": 1.0}


def _known_keys():
    keys = set(_FLOAT_KEYS) | set(_INT_KEYS) | set(_STR_KEYS)
    for f in _PROFILE_FIELDS:
        keys.add(f"init.{f}.preset")
        keys.add(f"init.{f}.path")
        for p in _PROFILE_PARAM_KEYS:
            keys.add(f"init.{f}.{p}")
    return keys


def parse_keyvalues(text: str) -> dict:
    """Parse the flat document into a raw string dict; report bad lines."""
    out = {}
    known = _known_keys()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _to_float(key, s):
    try:
        return float(s)
    except ValueError:
        raise ValidationError(f"{key}: expected a number, got {s!r}") from None


def _to_int(key, s):
    try:
        return int(s)
    except ValueError:
        raise ValidationError(f"{key}: expected an integer, got {s!r}") from None


def _float_list(key, s):
    try:
        return tuple(float(tok) for tok in s.split(",") if tok.strip())
    except ValueError:
        raise ValidationError(f"{key}: expected comma-separated numbers, got {s!r}") from None


def _profile(kv: dict, name: str) -> ProfileSpec:
    prefix = f"init.{name}."
    preset = kv.get(prefix + "preset", "constant")
    if preset not in PRESETS:
        raise ValidationError(f"{prefix}preset: unknown preset {preset!r}; choose from {PRESETS}")
    params = {}
    for p in _PROFILE_PARAM_KEYS:
        if prefix + p in kv:
            params[p] = _to_float(prefix + p, kv[prefix + p])
    if prefix + "path" in kv:
        params["path"] = kv[prefix + "path"]
    if preset == "constant" and "value" not in params:
        params["value"] = _PROFILE_DEFAULTS[name]
    return ProfileSpec(preset=preset, params=params)


def parse_scenario(text: str, overrides: dict | None = None) -> Scenario:
    """Validate a scenario document (plus optional key overrides)."""
    kv = parse_keyvalues(text)
    if overrides:
        known = _known_keys()
        for key, val in overrides.items():
            if key not in known:
                raise ValidationError(f"override: unknown key {key!r}")
            kv[key] = str(val)

    def fval(key):
        return _to_float(key, kv[key]) if key in kv else _FLOAT_KEYS[key]

    def ival(key):
        return _to_int(key, kv[key]) if key in kv else _INT_KEYS[key]

    def sval(key):
        return kv.get(key, _STR_KEYS[key])

    dim = ival("grid.dim")
    if dim not in (1, 2):
        raise ValidationError("grid.dim must be 1 or 2")
    if dim == 1 and ("grid.cells_y" in kv or "grid.length_y" in kv):
        raise ValidationError("grid.cells_y/length_y only apply when grid.dim = 2")
    cells = (ival("grid.cells_x"),) if dim == 1 else (ival("grid.cells_x"), ival("grid.cells_y"))
    lengths = (fval("grid.length_x"),) if dim == 1 else (fval("grid.length_x"), fval("grid.length_y"))
    grid = Grid(dim=dim, cells=cells, lengths=lengths)

    mu = fval("model.mu")
    if not mu > 0:
        raise ValidationError("mu > 0 violated")
    gamma = fval("model.gamma")
    if gamma < 0:
        raise ValidationError("gamma >= 0 violated")
    params = ModelParams(mu=mu, gamma=gamma, h=HSpec(sval("h.family"), fval("h.scale"), fval("h.c_h")))

    stepcfg = StepperConfig(
        dt=fval("step.dt"),
        dt_min=fval("step.dt_min"),
        tol_couple=fval("step.tol_couple"),
        tol_newton=fval("step.tol_newton"),
        max_outer=ival("step.max_outer"),
        nu=fval("step.nu"),
        relaxation=fval("step.relaxation"),
    )

    t_end = fval("run.t_end")
    if not t_end > 0:
        raise ValidationError("t_end > 0 violated")
    n_steps_f = t_end / stepcfg.dt
    n_steps = int(round(n_steps_f))
    if n_steps < 1 or abs(n_steps_f - n_steps) > 1e-9 * n_steps_f:
        raise ValidationError("t_end must be an integer multiple of step.dt")
    output_every = ival("run.output_every")
    if output_every < 1 or n_steps % output_every != 0:
        raise ValidationError("output cadence must divide the number of steps")

    mode = sval("run.mode")
    if mode not in MODES:
        raise ValidationError(f"run.mode must be one of {MODES}")
    study_gammas = _float_list("study.gammas", sval("study.gammas"))
    if mode == "decay-study" and any(g <= 0 for g in study_gammas):
        raise ValidationError(
            "decay-study requires strictly positive study.gammas: the Lyapunov "
            "functional needs the Robin boundary term"
        )
    n_smooth = ival("init.n")
    if n_smooth < 1:
        raise ValidationError("init.n must be a positive integer")

    return Scenario(
        grid=grid,
        params=params,
        stepcfg=stepcfg,
        theta0=_profile(kv, "theta0"),
        chi0=_profile(kv, "chi0"),
        u0=_profile(kv, "u0"),
        n_smooth=n_smooth,
        t_end=t_end,
        output_every=output_every,
        mode=mode,
        out_dir=sval("output.dir"),
        study_gammas=study_gammas,
        study_levels=ival("study.levels"),
        study_nus=_float_list("study.nus", sval("study.nus")),
    )


def write_timeseries(records, path) -> None:
    """Write diagnostics records as CSV with a fixed column order."""
    records = list(records)
    if not records:
        raise ValidationError("write_timeseries needs at least one record")
    lines = [",".join(TIMESERIES_COLUMNS)]
    for r in records:
        row = (
            r.t, r.mass, r.energy, r.j_phase, r.phi1, r.phi2_total,
            r.min_chi, r.max_chi, r.min_u, r.min_theta,
            r.energy_residual, r.dissipation_residual, r.outer_iters,
        )
        lines.append(",".join(_fmt(x) for x in row))
    _write_text(path, "\n".join(lines) + "\n")


def write_snapshot(state: State, path) -> None:
    """Write one row per node: coordinates then e, theta, chi, xi, u, p."""
    grid = state.grid
    coord_names = ("x",) if grid.dim == 1 else ("x", "y")
    header = [
        "# t = " + _fmt(state.t),
        "# grid = dim=%d cells=%s lengths=%s"
        % (grid.dim, ",".join(map(str, grid.cells)), ",".join(_fmt(x) for x in grid.lengths)),
        ",".join(coord_names + ("e", "theta", "chi", "xi", "u", "p")),
    ]
    cols = [grid.coords[:, d] for d in range(grid.dim)]
    cols += [f.values for f in (state.e, state.theta, state.chi, state.xi, state.u, state.p)]
    lines = header + [",".join(_fmt(c[i]) for c in cols) for i in range(grid.n_nodes)]
    _write_text(path, "\n".join(lines) + "\n")


def read_snapshot(path, grid: Grid) -> State:
    """Read a snapshot back onto the given grid; rejects mismatched files."""
    text = Path(path).read_text(encoding="ascii")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3 or not lines[0].startswith("# t ="):
        raise ValidationError(f"{path}: not a snapshot file")
    t = float(lines[0].split("=", 1)[1])
    ncoord = grid.dim
    data_lines = lines[3:]
    if len(data_lines) != grid.n_nodes:
        raise ValidationError(
            f"{path}: {len(data_lines)} rows for a grid with {grid.n_nodes} nodes"
        )
    try:
        data = np.array([[float(tok) for tok in ln.split(",")] for ln in data_lines])
    except ValueError:
        raise ValidationError(f"{path}: malformed numeric row") from None
    if data.shape[1] != ncoord + 6:
        raise ValidationError(f"{path}: expected {ncoord + 6} columns, found {data.shape[1]}")
    if np.abs(data[:, :ncoord] - grid.coords).max() > 1e-12:
        raise ValidationError(f"{path}: node coordinates do not match the grid")
    fields = [Field(grid, data[:, ncoord + j].copy()) for j in range(6)]
    return State(t=t, e=fields[0], theta=fields[1], chi=fields[2], xi=fields[3], u=fields[4], p=fields[5])


def _write_text(path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
