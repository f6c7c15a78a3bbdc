"""Execution modes: plain runs, steady checks, decay and convergence studies."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .constitutive import h_eval
from .diagnostics import Recorder, classify_steady, fit_decay_rate, steady_residual, steady_state
from .errors import SolverError, ValidationError
from .grid import Field, dual_norm, l2_norm
from .initial_data import build_initial_state
from .scenario import Scenario, write_snapshot, write_timeseries
from .state import State
from .stepper import Trajectory, run, step


def initial_state(scenario: Scenario) -> State:
    """Sample the scenario presets and smooth them into a valid state."""
    grid = scenario.grid
    return build_initial_state(
        scenario.theta0.evaluate(grid),
        scenario.chi0.evaluate(grid),
        scenario.u0.evaluate(grid),
        n=scenario.n_smooth,
        spec=scenario.params.h,
    )


@dataclass
class SimulationResult:
    scenario: Scenario
    trajectory: Trajectory
    records: list


def _dump_failure(out_dir, recorder, exc) -> Path:
    dump = Path(out_dir) / "failure_dump"
    dump.mkdir(parents=True, exist_ok=True)
    if recorder.records:
        write_timeseries(recorder.records, dump / "timeseries_partial.csv")
    if recorder.last_state is not None:
        write_snapshot(recorder.last_state, dump / "last_state.csv")
    (dump / "error.txt").write_text(str(exc) + "\n", encoding="ascii")
    return dump


def run_scenario(scenario: Scenario, out_dir=None, store_every: int | None = None) -> SimulationResult:
    """Simulate one scenario; on solver failure dump partial output first."""
    state0 = initial_state(scenario)
    recorder = Recorder(scenario.params, scenario.grid)
    recorder.start(state0)
    try:
        traj = run(
            state0,
            scenario.t_end,
            scenario.stepcfg,
            scenario.params,
            hooks=(recorder,),
            store_every=scenario.output_every if store_every is None else store_every,
        )
    except SolverError as exc:
        if out_dir is not None:
            exc.dump_path = _dump_failure(out_dir, recorder, exc)
        raise
    if out_dir is not None:
        out = Path(out_dir)
        write_timeseries(recorder.records, out / "timeseries.csv")
        write_snapshot(traj.initial, out / "snapshot_initial.csv")
        write_snapshot(traj.final, out / "snapshot_final.csv")
    return SimulationResult(scenario=scenario, trajectory=traj, records=recorder.records)


def _require_constant_presets(scenario: Scenario):
    consts = {}
    for name in ("theta0", "chi0", "u0"):
        prof = getattr(scenario, name)
        if prof.preset != "constant":
            raise ValidationError("steady-check requires constant initial presets")
        consts[name] = prof.params.get("value", 1.0)
    return consts


def steady_check(scenario: Scenario, out_dir=None) -> dict:
    """Classify the scenario's constant data and verify the equilibrium.

    Builds the trichotomy-consistent constant state for (theta, p) taken
    from the presets, reports its stationarity residual and the distance
    moved by one time step (a fixed point up to solver tolerances).
    """
    consts = _require_constant_presets(scenario)
    theta, chi, u = consts["theta0"], consts["chi0"], consts["u0"]
    p = u * (1.0 + chi)
    spec = scenario.params.h
    branch = classify_steady(theta, p, spec)
    st = steady_state(scenario.grid, spec, theta, p, chi_interior=chi)
    residual = steady_residual(st, scenario.params)
    stepped, _ = step(st, scenario.stepcfg, scenario.params)
    delta = max(
        np.abs(getattr(stepped, f).values - getattr(st, f).values).max()
        for f in ("e", "theta", "chi", "xi", "u", "p")
    )
    result = {
        "branch": branch.name,
        "h_theta_minus_log_p": float(h_eval(theta, 0, spec) - np.log(p)),
        "steady_residual": residual,
        "fixed_point_delta": float(delta),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["quantity,value"]
        for key, val in result.items():
            lines.append(f"{key},{val if isinstance(val, str) else '%.17g' % val}")
        (out / "steady_check.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
        write_snapshot(st, out / "steady_state.csv")
    return result


def decay_study(scenario: Scenario, out_dir=None) -> list[dict]:
    """Sweep the boundary permeability and fit the Lyapunov decay rate."""
    rows = []
    for gamma in scenario.study_gammas:
        if gamma <= 0:
            raise ValidationError("decay-study requires gamma > 0")
        sc = replace(scenario, params=replace(scenario.params, gamma=gamma))
        result = run_scenario(sc)
        series = [(r.t, r.phi1) for r in result.records if r.phi1 is not None]
        alpha, r2 = fit_decay_rate(series)
        v0, _ = dual_norm(result.trajectory.initial.u, gamma)
        vT, _ = dual_norm(result.trajectory.final.u, gamma)
        rows.append(
            {
                "gamma": gamma,
                "alpha": alpha,
                "r2": r2,
                "phi1_initial": series[0][1],
                "phi1_final": series[-1][1],
                "dual_norm_initial": v0,
                "dual_norm_final": vT,
            }
        )
    if out_dir is not None:
        _write_rows(Path(out_dir) / "decay_study.csv", rows)
    return rows


def _final_state_distance(a: State, b: State) -> float:
    return float(
        np.sqrt(
            sum(
                l2_norm(Field(a.grid, getattr(a, f).values - getattr(b, f).values)) ** 2
                for f in ("theta", "chi", "u")
            )
        )
    )


def _trajectory_l2q_distance(ta: Trajectory, tb: Trajectory, field: str = "chi") -> float:
    if len(ta.states) != len(tb.states):
        raise ValidationError("trajectory distance needs matching output cadences")
    total = 0.0
    for k in range(1, len(ta.states)):
        dt = ta.states[k].t - ta.states[k - 1].t
        diff = getattr(ta.states[k], field).values - getattr(tb.states[k], field).values
        total += dt * float(ta.states[k].grid.weights @ diff**2)
    return float(np.sqrt(total))


def _restrict(values: np.ndarray, fine, coarse) -> np.ndarray:
    # coarse nodes coincide with every stride-th fine node on tensor grids
    stride = fine.cells[0] // coarse.cells[0]
    if fine.dim == 1:
        return values[::stride]
    nx_nodes, ny_nodes = fine.shape
    return values.reshape(ny_nodes, nx_nodes)[::stride, ::stride].ravel()


def convergence_study(scenario: Scenario, out_dir=None) -> dict:
    """Halve dt and the mesh, and sweep the phase-rate smoothing.

    Reports observed temporal and spatial orders from Richardson-style
    successive differences, plus the distances between trajectories at
    consecutive smoothing coefficients (they shrink as the coefficient
    does).
    """
    levels = max(scenario.study_levels, 3)

    # temporal refinement at fixed mesh
    finals = []
    for lev in range(levels):
        dt = scenario.stepcfg.dt / 2**lev
        sc = replace(scenario, stepcfg=replace(scenario.stepcfg, dt=dt), output_every=1)
        finals.append(run_scenario(sc, store_every=None).trajectory.final)
    dt_errors = [_final_state_distance(finals[i], finals[i + 1]) for i in range(levels - 1)]
    dt_orders = [
        float(np.log2(dt_errors[i] / dt_errors[i + 1])) for i in range(len(dt_errors) - 1)
    ]

    # spatial refinement at fixed dt
    base = scenario.grid
    mesh_finals = []
    for lev in range(levels):
        cells = tuple(c * 2**lev for c in base.cells)
        sc = replace(scenario, grid=replace(base, cells=cells))
        mesh_finals.append(run_scenario(sc).trajectory.final)
    mesh_errors = []
    for i in range(levels - 1):
        fine, coarse = mesh_finals[i + 1], mesh_finals[i]
        diff = _restrict(fine.theta.values, fine.grid, coarse.grid) - coarse.theta.values
        mesh_errors.append(float(np.sqrt(coarse.grid.weights @ diff**2)))
    mesh_orders = [
        float(np.log2(mesh_errors[i] / mesh_errors[i + 1])) for i in range(len(mesh_errors) - 1)
    ]

    # phase-rate smoothing sweep
    nus = sorted(scenario.study_nus, reverse=True)
    trajs = {}
    for nu in nus:
        sc = replace(scenario, stepcfg=replace(scenario.stepcfg, nu=nu), output_every=1)
        trajs[nu] = run_scenario(sc, store_every=1).trajectory
    nu_distances = [
        _trajectory_l2q_distance(trajs[nus[i]], trajs[nus[i + 1]]) for i in range(len(nus) - 1)
    ]

    result = {
        "dt_errors": dt_errors,
        "dt_orders": dt_orders,
        "mesh_errors": mesh_errors,
        "mesh_orders": mesh_orders,
        "nus": list(nus),
        "nu_distances": nu_distances,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["quantity,values"]
        for key, val in result.items():
            if isinstance(val, list):
                lines.append(key + "," + ";".join("%.17g" % v for v in val))
        (out / "convergence_study.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    return result


def _write_rows(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join("%.17g" % row[c] if isinstance(row[c], float) else str(row[c]) for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
