"""Structured 1D/2D grids, quadrature and the diffusion operators.

The discrete diffusion operator is the integrated (stiffness) form: its
bilinear action is ``w @ (A @ v) ~ integral of grad v . grad w``, with an
optional Robin boundary mass ``gamma * integral_boundary(v w)`` lumped onto
boundary nodes.  Quadrature is trapezoidal and matches the operator
assembly, so discrete Green/conservation identities hold exactly.

Node ordering is lexicographic with the x index fastest:
``node = iy * (nx + 1) + ix`` in 2D, plain left-to-right in 1D.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystemError, SolverError, ValidationError


def _axis_stiffness(n_cells: int, dx: float) -> sp.csr_matrix:
    # 1D P1 stiffness with natural (Neumann) closure; rows sum to zero
    n = n_cells + 1
    main = np.full(n, 2.0 / dx)
    main[0] = main[-1] = 1.0 / dx
    off = np.full(n - 1, -1.0 / dx)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _axis_weights(n_cells: int, dx: float) -> np.ndarray:
    w = np.full(n_cells + 1, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


@dataclass(frozen=True)
class Grid:
    """Rectangular tensor grid on (0, Lx) or (0, Lx) x (0, Ly)."""

    dim: int
    cells: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError("grid dim must be 1 or 2")
        if len(self.cells) != self.dim or len(self.lengths) != self.dim:
            raise ValidationError("cells/lengths must match grid dim")
        if any(c < 1 for c in self.cells):
            raise ValidationError("cells per axis must be >= 1")
        if any(not length > 0 for length in self.lengths):
            raise ValidationError("axis lengths must be positive")

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(length / c for length, c in zip(self.lengths, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        """Nodes per axis."""
        return tuple(c + 1 for c in self.cells)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (n_nodes, dim), in node ordering."""
        axes = [np.linspace(0.0, length, c + 1) for length, c in zip(self.lengths, self.cells)]
        if self.dim == 1:
            return axes[0][:, None]
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights over the domain."""
        ws = [_axis_weights(c, dx) for c, dx in zip(self.cells, self.spacings)]
        if self.dim == 1:
            return ws[0]
        return np.kron(ws[1], ws[0])

    @cached_property
    def boundary_weights(self) -> np.ndarray:
        """Trapezoidal weights of the boundary measure (zero at interior nodes)."""
        if self.dim == 1:
            bw = np.zeros(self.n_nodes)
            bw[0] = bw[-1] = 1.0
            return bw
        nx, ny = self.shape
        wx = _axis_weights(self.cells[0], self.spacings[0])
        wy = _axis_weights(self.cells[1], self.spacings[1])
        bw = np.zeros((ny, nx))
        bw[:, 0] += wy
        bw[:, -1] += wy
        bw[0, :] += wx
        bw[-1, :] += wx
        return bw.ravel()


@dataclass(frozen=True)
class Field:
    """Nodal scalar function on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValidationError(
                f"field has {values.shape} values, grid has {self.grid.n_nodes} nodes"
            )
        if not np.isfinite(values).all():
            raise ValidationError("field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample ``fn(x)`` (1D) or ``fn(x, y)`` (2D) at the nodes."""
        c = grid.coords
        vals = fn(c[:, 0]) if grid.dim == 1 else fn(c[:, 0], c[:, 1])
        return cls(grid, np.asarray(vals, dtype=float) + np.zeros(grid.n_nodes))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class DiscreteOperator:
    """Integrated diffusion operator, optionally with Robin boundary mass."""

    grid: Grid
    gamma: float
    matrix: sp.csr_matrix = field(repr=False)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


def assemble_operator(grid: Grid, gamma: float = 0.0) -> DiscreteOperator:
    """Assemble the stiffness operator, with gamma > 0 adding Robin boundary mass."""
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    ks = [_axis_stiffness(c, dx) for c, dx in zip(grid.cells, grid.spacings)]
    if grid.dim == 1:
        mat = ks[0].copy()
    else:
        wx = _axis_weights(grid.cells[0], grid.spacings[0])
        wy = _axis_weights(grid.cells[1], grid.spacings[1])
        mat = sp.kron(sp.diags(wy), ks[0]) + sp.kron(ks[1], sp.diags(wx))
    if gamma > 0:
        mat = mat + gamma * sp.diags(grid.boundary_weights)
    return DiscreteOperator(grid=grid, gamma=float(gamma), matrix=sp.csr_matrix(mat))


def integrate(f: Field) -> float:
    """Quadrature of f over the domain."""
    return float(f.grid.weights @ f.values)


def inner(f: Field, g: Field) -> float:
    """Weighted L2 inner product of two fields on the same grid."""
    if f.grid is not g.grid and f.grid != g.grid:
        raise ValidationError("fields live on different grids")
    return float(f.grid.weights @ (f.values * g.values))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def _as_shift_array(shift, grid: Grid) -> np.ndarray:
    if isinstance(shift, Field):
        arr = shift.values
    else:
        arr = np.asarray(shift, dtype=float)
        if arr.ndim == 0:
            arr = np.full(grid.n_nodes, float(arr))
    if arr.shape != (grid.n_nodes,):
        raise ValidationError("shift shape does not match grid")
    if (arr < 0).any():
        raise ValidationError("shift must be nonnegative")
    return arr


def solve_shifted(op: DiscreteOperator, shift, rhs: Field, tol: float = 1e-10) -> Field:
    """Solve (diag(shift) + A) v = rhs with a sparse direct factorization.

    The system is symmetric positive definite whenever the shift is
    positive somewhere or gamma > 0; otherwise the Neumann kernel of
    constants makes it singular and a SingularSystemError is raised.
    The residual is verified against ``tol * ||rhs||`` after the solve.
    """
    grid = op.grid
    shift_arr = _as_shift_array(shift, grid)
    if op.gamma == 0.0 and not (shift_arr > 0).any():
        raise SingularSystemError("gamma = 0 with zero shift: constants are in the kernel")
    system = sp.csc_matrix(op.matrix + sp.diags(shift_arr))
    sol = spla.splu(system).solve(rhs.values)
    rhs_norm = np.linalg.norm(rhs.values)
    res = np.linalg.norm(system @ sol - rhs.values)
    if res > tol * rhs_norm + 1e-300:
        raise SolverError(f"shifted solve residual {res:.3e} exceeds {tol:.1e} * ||rhs||")
    return Field(grid, sol)


def dual_norm(u: Field, gamma: float, tol: float = 1e-10, op: DiscreteOperator | None = None):
    """Energy norm of the elliptic lift of u and the lift itself.

    Solves ``A_gamma zeta = (weights * u)`` and returns
    ``(sqrt(<u, zeta>), zeta)``, the operator-induced dual norm of u.
    Requires gamma > 0; at gamma = 0 the lift is defined only up to the
    constant kernel and the call is rejected.
    """
    if not gamma > 0:
        raise ValidationError("dual_norm requires gamma > 0")
    grid = u.grid
    if op is None:
        op = assemble_operator(grid, gamma)
    elif op.gamma != gamma:
        raise ValidationError("operator gamma does not match requested gamma")
    rhs = grid.weights * u.values
    system = sp.csc_matrix(op.matrix)
    zeta = spla.splu(system).solve(rhs)
    res = np.linalg.norm(system @ zeta - rhs)
    if res > tol * (np.linalg.norm(rhs) + 1e-300):
        raise SolverError(f"dual-norm lift residual {res:.3e} exceeds tolerance")
    value = float(np.sqrt(max(grid.weights @ (u.values * zeta), 0.0)))
    return value, Field(grid, zeta)
