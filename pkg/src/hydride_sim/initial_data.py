"""Resolvent smoothing of initial data.

Raw nodal data are regularized by one elliptic resolvent solve,
``v + (1/n) A v = v0``, which preserves the range of the datum (discrete
maximum principle) and, in the positivity-enforcing variant, lifts the
result above the exact floor 1/n.  All three initial fields are smoothed
through this single kernel and the remaining state components are rebuilt
from the constitutive relations, so the initial state satisfies its
coupled invariants exactly.
"""

from __future__ import annotations

import numpy as np

from .constitutive import HSpec, psi
from .errors import ValidationError
from .grid import DiscreteOperator, Field, assemble_operator, solve_shifted
from .state import State


def _neumann_op(grid, op: DiscreteOperator | None) -> DiscreteOperator:
    if op is None:
        return assemble_operator(grid, 0.0)
    if op.gamma != 0.0:
        raise ValidationError("resolvent smoothing uses the gamma = 0 operator")
    return op


def smooth_resolvent(v0: Field, n: int, op: DiscreteOperator | None = None) -> Field:
    """Solve v + (1/n) A v = v0; output range stays within [min v0, max v0]."""
    if n < 1:
        raise ValidationError("smoothing index n must be a positive integer")
    grid = v0.grid
    op = _neumann_op(grid, op)
    # scaled to (n W + A) v = n W v0 so the generic shifted solver applies
    shift = n * grid.weights
    rhs = Field(grid, shift * v0.values)
    return solve_shifted(op, shift, rhs)


def smooth_positive(u0: Field, n: int, op: DiscreteOperator | None = None) -> Field:
    """Solve u + (1/n) A u = u0 + 1/n for nonnegative u0; output >= 1/n."""
    if n < 1:
        raise ValidationError("smoothing index n must be a positive integer")
    if u0.min() < 0:
        raise ValidationError("smooth_positive needs nonnegative data")
    grid = u0.grid
    op = _neumann_op(grid, op)
    shift = n * grid.weights
    rhs = Field(grid, shift * (u0.values + 1.0 / n))
    return solve_shifted(op, shift, rhs)


def build_initial_state(
    theta0: Field,
    chi0: Field,
    u0: Field,
    n: int = 100,
    spec: HSpec = HSpec(),
) -> State:
    """Assemble a valid starting state from raw nodal profiles.

    The phase fraction is range-preservingly smoothed, the pressure datum
    gets the 1/n positivity floor, and the temperature (when nonnegative,
    the positivity pathway) is smoothed through its square root and
    squared back, which keeps it strictly positive.  Internal energy,
    pressure and the graph selection are then rebuilt exactly:
    e = psi(theta, chi), p = u (1 + chi), xi = log(1 + chi).
    """
    if chi0.min() < 0.0 or chi0.max() > 1.0:
        raise ValidationError("chi0 must lie in [0, 1] nodewise")
    if u0.min() < 0.0:
        raise ValidationError("u0 must be nonnegative nodewise")
    grid = chi0.grid
    op = assemble_operator(grid, 0.0)

    chi_n = smooth_resolvent(chi0, n, op)
    u_n = smooth_positive(u0, n, op)
    if theta0.min() >= 0.0:
        eta_n = smooth_positive(Field(grid, np.sqrt(theta0.values)), n, op)
        theta_n = Field(grid, eta_n.values**2)
    else:
        # general pathway without sign restriction
        theta_n = smooth_resolvent(theta0, n, op)

    chi_vals = np.clip(chi_n.values, 0.0, 1.0)
    chi_n = Field(grid, chi_vals)
    e_n = Field(grid, psi(theta_n.values, chi_vals, spec))
    p_n = Field(grid, u_n.values * (1.0 + chi_vals))
    xi_n = Field(grid, np.log1p(chi_vals))
    return State(t=0.0, e=e_n, theta=theta_n, chi=chi_n, xi=xi_n, u=u_n, p=p_n)


def smoothing_report(v_smoothed: Field, v0: Field, n: int, op: DiscreteOperator | None = None) -> dict:
    """Monitored quantities of one smoothing pass (not enforced).

    ``w_seminorm_over_n`` tracks the squared strong-operator seminorm of
    the output divided by n, which stays bounded when the smoothing
    behaves as designed.
    """
    grid = v0.grid
    op = _neumann_op(grid, op)
    diff = v_smoothed.values - v0.values
    av = op.apply(v_smoothed.values) / grid.weights
    return {
        "l2_distance": float(np.sqrt(grid.weights @ diff**2)),
        "min": v_smoothed.min(),
        "max": v_smoothed.max(),
        "w_seminorm_over_n": float(grid.weights @ av**2) / n,
    }
