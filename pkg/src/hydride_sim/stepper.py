"""Implicit-Euler time stepping of the coupled system.

Each step advances pressure/continuity, the constrained phase fraction and
the energy balance with a Gauss-Seidel sweep over the three subproblems:

* pressure: a symmetric M-matrix solve that conserves mass exactly when
  the boundary is closed and keeps u strictly positive;
* phase: a semismooth Newton (primal-dual active set) solve of the box-
  constrained inclusion, with the small extra smoothing term on the phase
  rate;
* energy: a damped Newton solve in temperature whose Jacobian diagonal is
  pinned away from zero by the constitutive slope bounds.

The sweep repeats until the iterates stop moving; on subsolver failure the
step size is halved (never grown back) down to a hard floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constitutive import HSpec, beta_residual, h_eval, psi, psi_dtheta
from .errors import PositivityError, SolverError, ValidationError
from .grid import DiscreteOperator, Field, assemble_operator
from .state import ModelParams, State, assert_valid_state


@dataclass(frozen=True)
class StepperConfig:
    """Numerical knobs of the time stepper."""

    dt: float = 1e-3
    dt_min: float = 1e-6
    tol_couple: float = 1e-10
    tol_newton: float = 1e-12
    max_outer: int = 60
    nu: float = 1e-3
    relaxation: float = 1.0
    max_newton: int = 50
    u_floor: float = 1e-14

    def __post_init__(self):
        if not (self.dt >= self.dt_min > 0):
            raise ValidationError("need dt >= dt_min > 0")
        if not (self.tol_couple > 0 and self.tol_newton > 0):
            raise ValidationError("tolerances must be positive")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValidationError("relaxation factor must lie in (0, 1]")
        if self.nu < 0:
            raise ValidationError("nu must be >= 0")
        if self.max_outer < 1 or self.max_newton < 1:
            raise ValidationError("iteration budgets must be >= 1")


@dataclass
class StepReport:
    """Bookkeeping for one accepted step."""

    dt: float
    outer_iters: int
    phase_newton_iters: int
    energy_newton_iters: int
    couple_change: float
    phase_residual: float
    energy_residual: float
    dt_reduced: bool = False
    floor_engaged: bool = False


def _solve_sparse(matrix, rhs):
    return spla.splu(sp.csc_matrix(matrix)).solve(rhs)


def update_pressure(
    u_prev: Field,
    chi: Field,
    dt: float,
    gamma: float = 0.0,
    tol: float = 1e-9,
    op: DiscreteOperator | None = None,
):
    """One implicit continuity step: returns (u, p) with p = u (1 + chi).

    Solved in the pressure variable, where the system matrix
    ``diag(w / (dt (1+chi))) + A_gamma`` is a symmetric M-matrix; inverse
    positivity then keeps u strictly positive, and with gamma = 0 the zero
    row sums make the quadrature mass of u exact.
    """
    grid = u_prev.grid
    if op is None:
        op = assemble_operator(grid, gamma)
    if u_prev.min() <= 0:
        raise ValidationError("update_pressure needs u_prev > 0")
    c = chi.values
    if c.min() < -1e-12 or c.max() > 1.0 + 1e-12:
        raise ValidationError("chi outside [0, 1]")
    one_pc = 1.0 + np.clip(c, 0.0, 1.0)
    w = grid.weights
    system = sp.csc_matrix(op.matrix + sp.diags(w / (dt * one_pc)))
    rhs = w * u_prev.values / dt
    p = _solve_sparse(system, rhs)
    res = np.linalg.norm(system @ p - rhs)
    if res > tol * np.linalg.norm(rhs) + 1e-300:
        raise SolverError(f"pressure solve residual {res:.3e} above tolerance")
    u = p / one_pc
    if u.min() <= 0.0:
        raise PositivityError(
            "pressure update produced a nonpositive u; operator invariants are broken"
        )
    return Field(grid, u), Field(grid, p)


def update_phase(
    chi_prev: Field,
    theta: Field,
    u: Field,
    dt: float,
    cfg: StepperConfig,
    params: ModelParams,
    op: DiscreteOperator | None = None,
    xi_init: Field | None = None,
):
    """Semismooth-Newton solve of the constrained phase step.

    Solves, with g = h(theta) - log u and backward differences in time,

        mu (chi - chi_prev)/dt + (nu/dt) A (chi - chi_prev) + A chi
            + omega + log(1 + chi) = g,
        omega in the normal cone of [0, 1] at chi,

    via a primal-dual active set iteration on the complementarity
    reformulation chi = proj_[0,1](chi + c omega) (omega oriented as the
    cone selection: <= 0 where chi = 0, >= 0 where chi = 1; the scaling
    c = dt/mu matches the multiplier's natural magnitude so a pinned node
    with the wrong multiplier sign is released instead of jumping across
    the box).  Nodes whose indicator leaves [0, 1] are pinned to the bound
    and their multiplier recovered in closed form; the free nodes take one
    Newton step on the remaining smooth system per sweep.  Convergence is
    declared on the KKT pair (equation residual, cone/box feasibility),
    which is immune to active-set chatter.

    Returns (chi, xi, iterations, residual) with xi = omega + log(1+chi).
    """
    grid = chi_prev.grid
    if op is None:
        op = assemble_operator(grid, 0.0)
    if u.min() <= 0:
        raise ValidationError("update_phase needs u > 0 for log u")
    w = grid.weights
    A = op.matrix
    mu = params.mu
    g = h_eval(theta.values, 0, params.h) - np.log(u.values)

    chi_p = np.clip(chi_prev.values, 0.0, 1.0)
    chi = chi_p.copy()
    if xi_init is not None:
        omega = xi_init.values - np.log1p(chi_p)
    else:
        omega = np.zeros_like(chi)

    k_base = sp.csr_matrix((mu / dt) * sp.diags(w) + (1.0 + cfg.nu / dt) * A)
    tol = cfg.tol_newton * (1.0 + mu / dt + np.abs(g).max())
    feas_tol = 1e-10
    scale = dt / mu

    def residual(chi_v, omega_v):
        lin = (mu / dt) * w * (chi_v - chi_p) + (cfg.nu / dt) * (A @ (chi_v - chi_p)) + A @ chi_v
        return lin / w + np.log1p(np.maximum(chi_v, -0.9)) + omega_v - g

    def feasibility(chi_v, omega_v):
        return beta_residual(chi_v, omega_v + np.log1p(np.clip(chi_v, 0.0, 1.0)))

    for it in range(1, cfg.max_newton + 1):
        s = chi + scale * omega
        upper = s >= 1.0
        lower = s <= 0.0
        inactive = ~(upper | lower)

        r = residual(chi, omega)
        if np.abs(r).max() <= tol and feasibility(chi, omega).max() <= feas_tol:
            xi = Field(grid, omega + np.log1p(chi))
            return Field(grid, chi), xi, it - 1, float(np.abs(r).max())

        target = np.where(upper, 1.0, np.where(lower, 0.0, chi))
        d_active = target - chi
        if inactive.any():
            k_var = sp.diags(w / (1.0 + np.maximum(chi, -0.9)))
            K = sp.csr_matrix(k_base + k_var)
            rhs = -(w * r)[inactive] - K[inactive][:, ~inactive] @ d_active[~inactive] + (w * omega)[inactive]
            d_free = _solve_sparse(K[inactive][:, inactive], rhs)
            # keep log(1+chi) evaluable on wayward transients
            damp = 1.0
            for _ in range(40):
                if (chi[inactive] + damp * d_free > -0.9).all():
                    break
                damp *= 0.5
            chi[inactive] += damp * d_free
            omega[inactive] = 0.0
        chi[upper] = 1.0
        chi[lower] = 0.0
        active = upper | lower
        if active.any():
            lin = (mu / dt) * w * (chi - chi_p) + (cfg.nu / dt) * (A @ (chi - chi_p)) + A @ chi
            omega[active] = (g - lin / w - np.log1p(chi))[active]

    raise SolverError(
        f"phase update: active-set Newton not converged in {cfg.max_newton} sweeps "
        f"(residual {np.abs(residual(chi, omega)).max():.3e})"
    )


def update_energy(
    e_prev: Field,
    chi_prev: Field,
    chi: Field,
    theta_guess: Field,
    dt: float,
    tol: float,
    params: ModelParams,
    op: DiscreteOperator | None = None,
    max_iter: int = 50,
):
    """Damped-Newton solve of the energy step, fully implicit in theta.

    With the phase rate fixed at its backward difference, solves

        (psi(theta, chi) - e_prev)/dt + A theta
            = -h(theta) chid + mu chid**2

    and returns (e, theta, iterations) with e = psi(theta, chi) exact.
    The Jacobian diagonal carries the slope of psi, which the constitutive
    bounds pin inside [1/c_h, c_h], so the linearizations stay well posed.
    """
    grid = e_prev.grid
    if op is None:
        op = assemble_operator(grid, 0.0)
    w = grid.weights
    A = op.matrix
    spec = params.h
    chi_v = np.clip(chi.values, 0.0, 1.0)
    chid = (chi.values - chi_prev.values) / dt
    source = params.mu * chid**2

    def res_fun(th):
        return (
            w * (psi(th, chi_v, spec) - e_prev.values) / dt
            + A @ th
            + w * (h_eval(th, 0, spec) * chid - source)
        ) / w

    theta = theta_guess.values.copy()
    tol_scaled = tol * (1.0 + np.abs(e_prev.values).max() / dt)
    r = res_fun(theta)
    res = np.abs(r).max()
    for it in range(max_iter):
        if res <= tol_scaled:
            e = Field(grid, psi(theta, chi_v, spec))
            return e, Field(grid, theta), it, float(res)
        jac = (
            sp.diags(w * psi_dtheta(theta, chi_v, spec) / dt)
            + A
            + sp.diags(w * h_eval(theta, 1, spec) * chid)
        )
        delta = _solve_sparse(jac, -w * r)
        lam = 1.0
        for _ in range(30):
            cand = theta + lam * delta
            r_cand = res_fun(cand)
            if np.abs(r_cand).max() <= res * (1.0 - 1e-4 * lam) or np.abs(r_cand).max() < tol_scaled:
                theta, r, res = cand, r_cand, np.abs(r_cand).max()
                break
            lam *= 0.5
        else:
            raise SolverError("energy update: damped Newton stalled")
    raise SolverError(f"energy update: Newton not converged in {max_iter} iterations")


@dataclass
class _Ops:
    neumann: DiscreteOperator
    robin: DiscreteOperator


def _make_ops(grid, gamma) -> _Ops:
    op0 = assemble_operator(grid, 0.0)
    return _Ops(neumann=op0, robin=op0 if gamma == 0.0 else assemble_operator(grid, gamma))


def _attempt_step(state: State, dt: float, cfg: StepperConfig, params: ModelParams, ops: _Ops):
    grid = state.grid
    u_it, chi_it, theta_it = state.u, state.chi, state.theta
    xi_warm = state.xi
    floor_engaged = False
    for outer in range(1, cfg.max_outer + 1):
        u_new, _ = update_pressure(state.u, chi_it, dt, params.gamma, op=ops.robin)
        if u_new.min() <= cfg.u_floor:
            raise PositivityError(
                f"u reached the positivity floor {cfg.u_floor:.1e} at t = {state.t + dt}"
            )
        floor_engaged |= u_new.min() < 1e3 * cfg.u_floor

        chi_new, xi_new, ph_iters, ph_res = update_phase(
            state.chi, theta_it, u_new, dt, cfg, params, op=ops.neumann, xi_init=xi_warm
        )
        e_new, theta_new, en_iters, en_res = update_energy(
            state.e, state.chi, chi_new, theta_it, dt, cfg.tol_newton, params, op=ops.neumann
        )

        change = max(
            np.abs(u_new.values - u_it.values).max() / (1.0 + np.abs(u_new.values).max()),
            np.abs(chi_new.values - chi_it.values).max(),
            np.abs(theta_new.values - theta_it.values).max()
            / (1.0 + np.abs(theta_new.values).max()),
        )
        if change <= cfg.tol_couple:
            p_final = Field(grid, u_new.values * (1.0 + chi_new.values))
            new_state = State(
                t=state.t + dt,
                e=e_new,
                theta=theta_new,
                chi=chi_new,
                xi=xi_new,
                u=u_new,
                p=p_final,
            )
            report = StepReport(
                dt=dt,
                outer_iters=outer,
                phase_newton_iters=ph_iters,
                energy_newton_iters=en_iters,
                couple_change=float(change),
                phase_residual=ph_res,
                energy_residual=en_res,
                floor_engaged=floor_engaged,
            )
            return new_state, report
        relax = cfg.relaxation
        if relax < 1.0:
            u_it = Field(grid, relax * u_new.values + (1 - relax) * u_it.values)
            chi_it = Field(grid, relax * chi_new.values + (1 - relax) * chi_it.values)
            theta_it = Field(grid, relax * theta_new.values + (1 - relax) * theta_it.values)
        else:
            u_it, chi_it, theta_it = u_new, chi_new, theta_new
        xi_warm = xi_new
    raise SolverError(
        f"coupling loop not converged in {cfg.max_outer} sweeps (change {change:.3e})"
    )


def step(state: State, cfg: StepperConfig, params: ModelParams, ops: _Ops | None = None):
    """Advance one step of size cfg.dt, halving on failure down to dt_min."""
    if ops is None:
        ops = _make_ops(state.grid, params.gamma)
    dt = cfg.dt
    reduced = False
    while True:
        try:
            new_state, report = _attempt_step(state, dt, cfg, params, ops)
            report.dt_reduced = reduced
            assert_valid_state(new_state, params.h)
            return new_state, report
        except PositivityError:
            raise
        except SolverError as exc:
            dt *= 0.5
            reduced = True
            if dt < cfg.dt_min:
                raise SolverError(
                    f"step failed at t = {state.t}: dt underflow below {cfg.dt_min}"
                ) from exc


@dataclass
class Trajectory:
    """Stored output of a run: states at the requested cadence plus reports."""

    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    @property
    def initial(self) -> State:
        return self.states[0]

    @property
    def final(self) -> State:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def state_at(self, t: float, atol: float = 1e-9) -> State:
        for s in self.states:
            if abs(s.t - t) <= atol:
                return s
        raise KeyError(f"no stored state at t = {t}")


def run(
    initial: State,
    t_end: float,
    cfg: StepperConfig,
    params: ModelParams,
    hooks=(),
    store_every: int | None = 1,
) -> Trajectory:
    """Step from the initial state to t_end, firing hooks after each step.

    ``store_every = k`` keeps every k-th state (plus initial and final) in
    the returned trajectory; ``None`` keeps only the endpoints.  The step
    size never grows: once a failure halves it, the smaller step persists.
    """
    if t_end < initial.t:
        raise ValidationError("t_end must not precede the initial time")
    ops = _make_ops(initial.grid, params.gamma)
    traj = Trajectory(states=[initial])
    state = initial
    dt_nominal = cfg.dt
    k = 0
    while state.t < t_end - 1e-12 * max(1.0, abs(t_end)):
        dt_try = min(dt_nominal, t_end - state.t)
        step_cfg = replace(cfg, dt=dt_try, dt_min=min(cfg.dt_min, dt_try))
        state, report = step(state, step_cfg, params, ops)
        if report.dt < dt_try:
            dt_nominal = report.dt
        k += 1
        for hook in hooks:
            hook(state, report)
        traj.reports.append(report)
        if store_every is not None and (k % store_every == 0):
            traj.states.append(state)
    if traj.states[-1] is not state:
        traj.states.append(state)
    return traj
