"""Simulator for a coupled thermo-chemo-mechanical hydrogen-storage model.

Three implicit parabolic updates per step (pressure/continuity, a
box-constrained phase fraction, the energy balance) plus a diagnostics
layer that turns the model's structural identities (mass and energy
bookkeeping, Lyapunov dissipation and decay, positivity, steady-state
trichotomy) into machine-checkable monitors.
"""

from .constitutive import (
    HSpec,
    beta_residual,
    h_eval,
    hatbeta,
    psi,
    psi_dtheta,
    psi_inverse,
    verify_h_bounds,
)
from .diagnostics import (
    DiagnosticsRecord,
    Recorder,
    SteadyBranch,
    classify_steady,
    fit_decay_rate,
    record,
    steady_residual,
    steady_state,
)
from .errors import (
    HydrideSimError,
    InvalidStateError,
    PositivityError,
    SingularSystemError,
    SolverError,
    ValidationError,
)
from .grid import (
    DiscreteOperator,
    Field,
    Grid,
    assemble_operator,
    dual_norm,
    inner,
    integrate,
    l2_norm,
    solve_shifted,
)
from .initial_data import build_initial_state, smooth_positive, smooth_resolvent, smoothing_report
from .scenario import ProfileSpec, Scenario, parse_scenario, read_snapshot, write_snapshot, write_timeseries
from .state import ModelParams, State, assert_valid_state, validate_state
from .stepper import (
    StepperConfig,
    StepReport,
    Trajectory,
    run,
    step,
    update_energy,
    update_phase,
    update_pressure,
)
from .studies import (
    SimulationResult,
    convergence_study,
    decay_study,
    initial_state,
    run_scenario,
    steady_check,
)

__version__ = "0.1.0"
