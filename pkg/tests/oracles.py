"""Independent reference implementations used to cross-check the solvers.

Everything here deliberately avoids the code paths under test: dense numpy
linear algebra instead of the sparse factorizations, quadrature and finite
differences instead of closed forms, and a projected-gradient minimizer of
the phase step's convex energy instead of the active-set Newton solver.
"""

import numpy as np

from hydride_sim import h_eval
from hydride_sim.grid import assemble_operator


def dense_solve_shifted(op, shift_arr, rhs_arr):
    """Dense LU route for (diag(shift) + A) v = rhs."""
    system = op.matrix.toarray() + np.diag(shift_arr)
    return np.linalg.solve(system, rhs_arr)


def dense_pressure_update(grid, gamma, u_prev, chi, dt):
    """Dense solve of the literal update system (W/dt + A_gamma diag(1+chi)) u = W u_prev / dt."""
    a = assemble_operator(grid, gamma).matrix.toarray()
    w = grid.weights
    system = np.diag(w / dt) + a @ np.diag(1.0 + chi)
    return np.linalg.solve(system, w * u_prev / dt)


def dense_dual_norm(grid, gamma, u_vals):
    """Dense route for the elliptic lift and its pairing with u."""
    a = assemble_operator(grid, gamma).matrix.toarray()
    zeta = np.linalg.solve(a, grid.weights * u_vals)
    return float(np.sqrt(grid.weights @ (u_vals * zeta))), zeta


def phase_energy(chi, chi_prev, g, dt, mu, nu, grid, A):
    """The strictly convex per-step functional whose minimizer the phase solve returns."""
    w = grid.weights
    d = chi - chi_prev
    quad = 0.5 * (mu / dt) * (w * d) @ d + 0.5 * (nu / dt) * d @ (A @ d) + 0.5 * chi @ (A @ chi)
    pot = w @ ((1.0 + chi) * np.log1p(chi) - chi)
    return quad + pot - (w * g) @ chi


def projected_gradient_phase(chi_prev, g, dt, mu, nu, grid, max_iter=500_000, stag=1e-13):
    """Minimize the phase step energy over [0,1]^M by projected gradient.

    Runs to stagnation; with the strong convexity mu/dt this pins the
    minimizer far tighter than the comparison tolerances used in tests.
    """
    w = grid.weights
    A = assemble_operator(grid, 0.0).matrix
    chi = np.clip(chi_prev, 0.0, 1.0).copy()
    lipschitz = mu / dt + (1.0 + nu / dt) * 4.0 / min(grid.spacings) ** 2 + 1.0
    step = 1.0 / lipschitz
    for _ in range(max_iter):
        grad = (
            (mu / dt) * w * (chi - chi_prev)
            + (nu / dt) * (A @ (chi - chi_prev))
            + A @ chi
            + w * np.log1p(chi)
            - w * g
        )
        new = np.clip(chi - step * grad / w, 0.0, 1.0)
        if np.abs(new - chi).max() <= stag:
            return new
        chi = new
    raise AssertionError("projected-gradient oracle did not stagnate")


def scalar_energy_step(e_prev, chi_prev, chi, dt, mu, spec):
    """Brent root find of the spatially uniform energy step (0-dimensional oracle)."""
    from scipy.optimize import brentq

    from hydride_sim import psi

    chid = (chi - chi_prev) / dt

    def f(theta):
        return psi(theta, chi, spec) - e_prev - dt * (-h_eval(theta, 0, spec) * chid + mu * chid**2)

    lo, hi = e_prev - 10 * spec.c_h - 10, e_prev + 10 * spec.c_h + 10
    return brentq(f, lo, hi, xtol=1e-14)
