import numpy as np
import pytest

from hydride_sim import (
    Field,
    Grid,
    SingularSystemError,
    ValidationError,
    assemble_operator,
    dual_norm,
    inner,
    integrate,
    solve_shifted,
)
from oracles import dense_dual_norm, dense_solve_shifted


class TestGrid:
    def test_spacing_and_nodes(self):
        g = Grid(1, (4,), (2.0,))
        assert g.spacings == (0.5,)
        assert g.n_nodes == 5
        assert np.allclose(g.coords[:, 0], [0, 0.5, 1.0, 1.5, 2.0])

    def test_weights_sum_to_volume(self, grid2d):
        assert grid2d.weights.sum() == pytest.approx(grid2d.volume, rel=1e-14)

    def test_boundary_weights_sum_to_perimeter(self, grid2d):
        lx, ly = grid2d.lengths
        assert grid2d.boundary_weights.sum() == pytest.approx(2 * (lx + ly), rel=1e-14)

    def test_boundary_weights_1d_count_endpoints(self, grid16):
        bw = grid16.boundary_weights
        assert bw[0] == bw[-1] == 1.0
        assert np.all(bw[1:-1] == 0.0)

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValidationError):
            Grid(3, (4, 4, 4), (1.0, 1.0, 1.0))
        with pytest.raises(ValidationError):
            Grid(1, (0,), (1.0,))
        with pytest.raises(ValidationError):
            Grid(1, (4,), (-1.0,))

    def test_field_length_mismatch(self, grid16):
        with pytest.raises(ValidationError):
            Field(grid16, np.zeros(3))

    def test_field_rejects_nonfinite(self, grid16):
        vals = np.zeros(grid16.n_nodes)
        vals[2] = np.nan
        with pytest.raises(ValidationError):
            Field(grid16, vals)


class TestOperator:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_constants_in_kernel_when_closed(self, dim):
        g = Grid(1, (3,), (1.0,)) if dim == 1 else Grid(2, (3, 4), (1.0, 0.5))
        op = assemble_operator(g, 0.0)
        c = np.full(g.n_nodes, 2.7)
        assert np.abs(op.apply(c)).max() < 1e-13

    def test_row_sums_zero_when_closed(self, grid2d):
        op = assemble_operator(grid2d, 0.0)
        assert np.abs(np.asarray(op.matrix.sum(axis=1))).max() < 1e-13

    def test_symmetry(self, grid2d, rng):
        op = assemble_operator(grid2d, 0.7)
        v = rng.standard_normal(grid2d.n_nodes)
        w = rng.standard_normal(grid2d.n_nodes)
        assert abs(w @ op.apply(v) - v @ op.apply(w)) < 1e-12 * (1 + np.abs(v @ op.apply(w)))

    def test_offdiagonals_nonpositive(self, grid2d):
        m = assemble_operator(grid2d, 1.0).matrix.toarray()
        off = m - np.diag(np.diag(m))
        assert off.max() <= 1e-14

    def test_positive_semidefinite_and_robin_definite(self, grid16, rng):
        a0 = assemble_operator(grid16, 0.0).matrix.toarray()
        ag = assemble_operator(grid16, 1.0).matrix.toarray()
        eig0 = np.linalg.eigvalsh(a0)
        eigg = np.linalg.eigvalsh(ag)
        assert eig0.min() > -1e-12
        assert eigg.min() > 0  # dense eigensolve oracle: smallest eigenvalue positive

    def test_robin_smallest_eigenvalue_positive_8_cells(self):
        # 9x9 matrix, gamma = 1
        g = Grid(1, (8,), (1.0,))
        m = assemble_operator(g, 1.0).matrix.toarray()
        assert np.linalg.eigvalsh(m).min() > 0

    def test_discrete_green_identity(self, grid2d, rng):
        op = assemble_operator(grid2d, 0.0)
        v = rng.standard_normal(grid2d.n_nodes)
        assert abs(np.ones(grid2d.n_nodes) @ op.apply(v)) < 1e-11

    def test_quadratic_form_nonnegative_zero_only_on_constants(self, grid16, rng):
        op = assemble_operator(grid16, 0.0)
        v = rng.standard_normal(grid16.n_nodes)
        assert v @ op.apply(v) >= 0
        c = np.full(grid16.n_nodes, 1.3)
        assert abs(c @ op.apply(c)) < 1e-13
        assert v @ op.apply(v) > 1e-6  # random field is nonconstant

    def test_negative_gamma_rejected(self, grid16):
        with pytest.raises(ValidationError):
            assemble_operator(grid16, -0.5)


class TestIntegrate:
    def test_measures_domain(self):
        g = Grid(1, (5,), (2.0,))
        assert integrate(Field.constant(g, 1.0)) == pytest.approx(2.0, rel=1e-14)

    def test_zero(self, grid16):
        assert integrate(Field.constant(grid16, 0.0)) == 0.0

    def test_linear_profile(self):
        g = Grid(1, (64,), (1.0,))
        f = Field(g, g.coords[:, 0])
        assert integrate(f) == pytest.approx(0.5, abs=1e-3)

    def test_linearity(self, grid2d, rng):
        f = Field(grid2d, rng.standard_normal(grid2d.n_nodes))
        h = Field(grid2d, rng.standard_normal(grid2d.n_nodes))
        lhs = integrate(Field(grid2d, 2.0 * f.values + 3.0 * h.values))
        assert lhs == pytest.approx(2 * integrate(f) + 3 * integrate(h), rel=1e-12)

    def test_inner_product_grid_mismatch(self, grid16, grid8):
        with pytest.raises(ValidationError):
            inner(Field.constant(grid16, 1.0), Field.constant(grid8, 1.0))


class TestSolveShifted:
    def test_constant_shift_constant_rhs(self, grid16):
        op = assemble_operator(grid16, 0.0)
        rhs = Field.constant(grid16, 4.0)
        v = solve_shifted(op, 1.0, rhs)
        assert np.abs(v.values - 4.0).max() < 1e-12

    def test_singular_system_detected(self, grid16):
        op = assemble_operator(grid16, 0.0)
        with pytest.raises(SingularSystemError):
            solve_shifted(op, 0.0, Field.constant(grid16, 1.0))

    def test_matches_dense_oracle(self, grid16, rng):
        op = assemble_operator(grid16, 0.0)
        shift = np.full(grid16.n_nodes, 1.0)
        rhs = np.sin(2 * np.pi * grid16.coords[:, 0])
        v = solve_shifted(op, shift, Field(grid16, rhs))
        ref = dense_solve_shifted(op, shift, rhs)
        assert np.abs(v.values - ref).max() < 1e-8

    def test_inverse_positivity(self, grid16, rng):
        # Z-matrix with positive shift: nonnegative rhs gives nonnegative solution
        op = assemble_operator(grid16, 0.0)
        for _ in range(10):
            rhs = rng.uniform(0, 1, grid16.n_nodes)
            v = solve_shifted(op, 2.0, Field(grid16, rhs))
            assert v.values.min() >= -1e-14

    def test_negative_shift_rejected(self, grid16):
        op = assemble_operator(grid16, 0.0)
        with pytest.raises(ValidationError):
            solve_shifted(op, -1.0, Field.constant(grid16, 1.0))


class TestDualNorm:
    def test_zero_field(self, grid16):
        val, zeta = dual_norm(Field.constant(grid16, 0.0), 1.0)
        assert val == 0.0

    def test_scaling_linearity(self, grid16, rng):
        u = Field(grid16, rng.uniform(0.1, 1.0, grid16.n_nodes))
        v1, _ = dual_norm(u, 1.0)
        v2, _ = dual_norm(Field(grid16, 2.0 * u.values), 1.0)
        assert v2 == pytest.approx(2.0 * v1, rel=1e-12)

    def test_matches_dense_oracle_on_ones(self, grid16):
        u = Field.constant(grid16, 1.0)
        val, zeta = dual_norm(u, 1.0)
        ref_val, ref_zeta = dense_dual_norm(grid16, 1.0, u.values)
        assert val == pytest.approx(ref_val, rel=1e-8)
        assert np.abs(zeta.values - ref_zeta).max() < 1e-8

    def test_rejects_gamma_zero(self, grid16):
        with pytest.raises(ValidationError):
            dual_norm(Field.constant(grid16, 1.0), 0.0)

    def test_two_routes_to_lyapunov_value_agree(self, grid2d, rng):
        # <u, zeta> versus the gradient + boundary quadratic form of zeta
        gamma = 0.8
        u = Field(grid2d, rng.uniform(0.2, 2.0, grid2d.n_nodes))
        val, zeta = dual_norm(u, gamma)
        op0 = assemble_operator(grid2d, 0.0)
        quad = zeta.values @ op0.apply(zeta.values) + gamma * (
            grid2d.boundary_weights @ zeta.values**2
        )
        assert quad == pytest.approx(val**2, rel=1e-8)
