"""Scalar monitors, decay fitting and steady-state classification.

Per-step records collect the conserved/dissipated quantities (mass of u,
total internal energy, the convex phase potential, the Lyapunov functional
of the pressure lift) together with extrema and the residuals of the two
discrete identities the scheme satisfies: the energy balance tested by 1
and the pressure dissipation balance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .constitutive import HSpec, beta_residual, h_eval, hatbeta, psi
from .errors import ValidationError
from .grid import DiscreteOperator, Field, assemble_operator, dual_norm, integrate
from .state import ModelParams, State


@dataclass
class DiagnosticsRecord:
    """Scalar monitors of one state (optionally relative to the previous one)."""

    t: float
    mass: float
    energy: float
    j_phase: float
    phi1: float | None
    phi2_increment: float | None
    phi2_total: float | None
    min_chi: float
    max_chi: float
    min_u: float
    max_u: float
    min_theta: float
    max_theta: float
    int_u_minus_log_u: float
    int_abs_log_theta: float | None
    energy_residual: float
    dissipation_residual: float | None
    outer_iters: int | None = None


def record(
    state: State,
    prev: State | None = None,
    params: ModelParams = ModelParams(),
    op_gamma: DiscreteOperator | None = None,
    prev_record: DiagnosticsRecord | None = None,
    outer_iters: int | None = None,
) -> DiagnosticsRecord:
    """Compute all monitors for a state.

    The Lyapunov entries need the Robin operator and are emitted as None
    (unavailable) when gamma = 0.  Passing the previous step's record
    avoids recomputing its elliptic lift.
    """
    grid = state.grid
    gamma = params.gamma
    u, th = state.u.values, state.theta.values
    chi = np.clip(state.chi.values, 0.0, 1.0)

    mass = integrate(state.u)
    energy = integrate(state.e)
    j_phase = float(grid.weights @ hatbeta(chi))
    int_ulog = float(grid.weights @ (u - np.log(u)))
    min_theta = float(th.min())
    int_albt = float(grid.weights @ np.abs(np.log(th))) if min_theta > 0 else None

    phi1 = phi2_inc = phi2_tot = None
    if gamma > 0:
        if op_gamma is None:
            op_gamma = assemble_operator(grid, gamma)
        value, _ = dual_norm(state.u, gamma, op=op_gamma)
        phi1 = 0.5 * value**2

    energy_res = 0.0
    dissipation_res = 0.0 if gamma > 0 else None
    if prev is not None:
        dt = state.t - prev.t
        if dt <= 0:
            raise ValidationError("record: prev state must precede the current one")
        chid = (state.chi.values - prev.chi.values) / dt
        src = -h_eval(th, 0, params.h) * chid + params.mu * chid**2
        energy_res = float(energy - integrate(prev.e) - dt * (grid.weights @ src))
        if gamma > 0:
            if prev_record is not None and prev_record.phi1 is not None:
                phi1_prev = prev_record.phi1
            else:
                v_prev, _ = dual_norm(prev.u, gamma, op=op_gamma)
                phi1_prev = 0.5 * v_prev**2
            pairing = float(grid.weights @ (state.u.values * state.p.values))
            phi2_inc = dt * pairing
            dissipation_res = phi1 - phi1_prev + phi2_inc
    elif gamma > 0:
        phi2_inc = 0.0
    if gamma > 0:
        base = prev_record.phi2_total if (prev_record and prev_record.phi2_total is not None) else 0.0
        phi2_tot = base + (phi2_inc or 0.0)

    return DiagnosticsRecord(
        t=state.t,
        mass=mass,
        energy=energy,
        j_phase=j_phase,
        phi1=phi1,
        phi2_increment=phi2_inc,
        phi2_total=phi2_tot,
        min_chi=float(state.chi.values.min()),
        max_chi=float(state.chi.values.max()),
        min_u=float(u.min()),
        max_u=float(u.max()),
        min_theta=min_theta,
        max_theta=float(th.max()),
        int_u_minus_log_u=int_ulog,
        int_abs_log_theta=int_albt,
        energy_residual=energy_res,
        dissipation_residual=dissipation_res,
        outer_iters=outer_iters,
    )


class Recorder:
    """Stepper hook that accumulates one record per accepted step."""

    def __init__(self, params: ModelParams, grid):
        self.params = params
        self.op_gamma = assemble_operator(grid, params.gamma) if params.gamma > 0 else None
        self.records: list[DiagnosticsRecord] = []
        self.last_state: State | None = None

    def start(self, initial: State):
        self.records.append(record(initial, None, self.params, op_gamma=self.op_gamma))
        self.last_state = initial

    def __call__(self, state: State, report):
        prev_rec = self.records[-1] if self.records else None
        rec = record(
            state,
            self.last_state,
            self.params,
            op_gamma=self.op_gamma,
            prev_record=prev_rec,
            outer_iters=getattr(report, "outer_iters", None),
        )
        self.records.append(rec)
        self.last_state = state


def fit_decay_rate(series) -> tuple[float, float]:
    """Least-squares exponential rate of a positive time series.

    ``series`` is an iterable of (t, value) pairs, at least 10 of them and
    all values positive.  Returns (alpha, r2) from the straight-line fit
    of log(value) against t, alpha being minus the slope.
    """
    pts = np.asarray(list(series), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 10:
        raise ValidationError("fit_decay_rate needs at least 10 (t, value) samples")
    t, v = pts[:, 0], pts[:, 1]
    if (v <= 0).any():
        raise ValidationError("fit_decay_rate needs strictly positive values")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(-slope), r2


class SteadyBranch(enum.Enum):
    CHI_ONE = "chi_one"
    CHI_FREE = "chi_free"
    CHI_ZERO = "chi_zero"


def classify_steady(theta: float, p: float, spec: HSpec = HSpec(), tol: float = 1e-9) -> SteadyBranch:
    """Trichotomy of constant equilibria by the sign of h(theta) - log p.

    A dead band of width tol around zero maps to the free branch, where
    any constant phase fraction in [0, 1] is admissible.
    """
    if not p > 0:
        raise ValidationError("classify_steady needs p > 0")
    x = h_eval(theta, 0, spec) - np.log(p)
    if abs(x) <= tol:
        return SteadyBranch.CHI_FREE
    return SteadyBranch.CHI_ONE if x > 0 else SteadyBranch.CHI_ZERO


def steady_state(
    grid,
    spec: HSpec,
    theta: float,
    p: float,
    chi_interior: float = 0.5,
    tol: float = 1e-9,
) -> State:
    """Build the constant equilibrium state matching the trichotomy branch.

    On the free branch chi takes the supplied interior value; on the
    pinned branches the multiplier equals h(theta) - log p with the
    admissible sign, and the pressure relation fixes u.
    """
    branch = classify_steady(theta, p, spec, tol)
    x = float(h_eval(theta, 0, spec) - np.log(p))
    if branch is SteadyBranch.CHI_ONE:
        chi, omega, u = 1.0, x, p / 2.0
    elif branch is SteadyBranch.CHI_ZERO:
        chi, omega, u = 0.0, x, p
    else:
        if not 0.0 <= chi_interior <= 1.0:
            raise ValidationError("chi_interior must lie in [0, 1]")
        chi, omega, u = float(chi_interior), 0.0, p / (1.0 + chi_interior)

    def make(v):
        return Field.constant(grid, v)

    return State(
        t=0.0,
        e=make(psi(theta, chi, spec)),
        theta=make(theta),
        chi=make(chi),
        xi=make(omega + np.log1p(chi)),
        u=make(u),
        p=make(p),
    )


def steady_residual(
    state: State,
    params: ModelParams,
    op0: DiscreteOperator | None = None,
    op_gamma: DiscreteOperator | None = None,
) -> float:
    """L2 norm of the full stationarity defect of a state.

    Sums the diffusion residual of theta, the Robin residual of p, the
    defect of the stationary phase relation
    ``A chi + omega = h(theta) - log p`` and the cone infeasibility of the
    multiplier; zero exactly on trichotomy equilibria.
    """
    grid = state.grid
    w = grid.weights
    if op0 is None:
        op0 = assemble_operator(grid, 0.0)
    if op_gamma is None:
        op_gamma = op0 if params.gamma == 0 else assemble_operator(grid, params.gamma)

    def dual_l2(vec):
        fun = vec / w
        return float(np.sqrt(max(w @ fun**2, 0.0)))

    r_theta = dual_l2(op0.apply(state.theta.values))
    r_p = dual_l2(op_gamma.apply(state.p.values))

    if state.p.min() <= 0:
        raise ValidationError("steady_residual needs p > 0 for log p")
    chi = np.clip(state.chi.values, 0.0, 1.0)
    omega = state.xi.values - np.log1p(chi)
    g = h_eval(state.theta.values, 0, params.h) - np.log(state.p.values)
    r_fun = op0.apply(state.chi.values) / w + omega - g
    r_chi = float(np.sqrt(max(w @ r_fun**2, 0.0)))

    cone = beta_residual(state.chi.values, state.xi.values)
    r_cone = float(np.sqrt(max(w @ cone**2, 0.0)))
    return r_theta + r_p + r_chi + r_cone
