"""Model parameters and the coupled solution state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constitutive import HSpec, beta_residual, psi
from .errors import InvalidStateError, ValidationError
from .grid import Field


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the model: micro-force viscosity, boundary
    permeability and the coupling-function choice."""

    mu: float = 1.0
    gamma: float = 0.0
    h: HSpec = field(default_factory=HSpec)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValidationError("mu > 0 violated")
        if self.gamma < 0:
            raise ValidationError("gamma >= 0 violated")


@dataclass(frozen=True)
class State:
    """The sextuple (e, theta, chi, xi, u, p) at one time instant.

    Coupled invariants, checked by :func:`validate_state`:
    e = psi(theta, chi), p = u (1 + chi), chi in [0, 1], u > 0, and xi a
    selection of the constraint graph at chi.
    """

    t: float
    e: Field
    theta: Field
    chi: Field
    xi: Field
    u: Field
    p: Field

    def __post_init__(self):
        g = self.e.grid
        for name in ("theta", "chi", "xi", "u", "p"):
            if getattr(self, name).grid != g:
                raise ValidationError(f"field {name} lives on a different grid")

    @property
    def grid(self):
        return self.e.grid


def validate_state(state: State, spec: HSpec, tol: float = 1e-9) -> list[str]:
    """Return the list of violated state invariants (empty means valid)."""
    problems = []
    e, th, chi, xi, u, p = (f.values for f in (state.e, state.theta, state.chi, state.xi, state.u, state.p))

    box_lo, box_hi = chi.min(), chi.max()
    if box_lo < -tol or box_hi > 1.0 + tol:
        problems.append(f"chi outside [0,1]: range [{box_lo:.3e}, {box_hi:.3e}]")

    chi_c = np.clip(chi, 0.0, 1.0)
    err_e = np.abs(e - psi(th, chi_c, spec)).max()
    if err_e > tol * (1.0 + np.abs(e).max()):
        problems.append(f"e != psi(theta, chi): max deviation {err_e:.3e}")

    err_p = np.abs(p - u * (1.0 + chi)).max()
    if err_p > tol * (1.0 + np.abs(p).max()):
        problems.append(f"p != u(1+chi): max deviation {err_p:.3e}")

    if not (u > 0).all():
        problems.append(f"u not strictly positive: min {u.min():.3e}")

    err_beta = beta_residual(chi, xi).max()
    if err_beta > tol:
        problems.append(f"constraint-graph residual {err_beta:.3e} exceeds {tol:.1e}")
    return problems


def assert_valid_state(state: State, spec: HSpec, tol: float = 1e-9) -> None:
    problems = validate_state(state, spec, tol)
    if problems:
        raise InvalidStateError("; ".join(problems))
