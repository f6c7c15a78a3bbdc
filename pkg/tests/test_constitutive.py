import numpy as np
import pytest

from hydride_sim import (
    HSpec,
    SolverError,
    ValidationError,
    beta_residual,
    h_eval,
    hatbeta,
    psi,
    psi_dtheta,
    psi_inverse,
    verify_h_bounds,
)


class TestHEval:
    def test_atan_at_zero(self):
        assert h_eval(0.0, 0) == 0.0

    def test_first_derivative_at_one(self):
        # 1/(1+r^2) at r=1
        assert h_eval(1.0, 1) == pytest.approx(0.5, abs=1e-15)

    def test_bounded_by_pi_half_over_wide_range(self):
        r = np.linspace(-1e6, 1e6, 200001)
        assert np.abs(h_eval(r, 0)).max() <= np.pi / 2 + 1e-12

    def test_scale_zero_kills_everything(self):
        spec = HSpec(scale=0.0)
        r = np.linspace(-5, 5, 101)
        for order in (0, 1, 2):
            assert np.all(h_eval(r, order, spec) == 0.0)

    def test_tanh_family_derivatives_match_finite_differences(self):
        spec = HSpec(family="tanh", scale=0.7)
        r = np.linspace(-3, 3, 61)
        eps = 1e-6
        fd1 = (h_eval(r + eps, 0, spec) - h_eval(r - eps, 0, spec)) / (2 * eps)
        fd2 = (h_eval(r + eps, 1, spec) - h_eval(r - eps, 1, spec)) / (2 * eps)
        assert np.abs(fd1 - h_eval(r, 1, spec)).max() < 1e-8
        assert np.abs(fd2 - h_eval(r, 2, spec)).max() < 1e-8

    def test_bad_family_rejected(self):
        with pytest.raises(ValidationError):
            HSpec(family="cubic")


class TestVerifyHBounds:
    def test_default_spec_passes_with_margin(self):
        cert = verify_h_bounds(HSpec(), samples=4096)
        assert cert.passed
        # analytic suprema: sup|r h'| = sup|r h''| = 1/2
        assert cert.observed["sup_r_h1"] == pytest.approx(0.5, abs=1e-6)
        assert cert.observed["min_slope"] >= 0.5 - 1e-12

    def test_scale_ten_fails_slope_bound(self):
        cert = verify_h_bounds(HSpec(scale=10.0), samples=4096)
        assert not cert.passed
        # at r=1, s=1 the slope term is 1 - 10/2 < 1/4
        assert cert.observed["min_slope"] < 0.25

    def test_zero_scale_passes_trivially(self):
        cert = verify_h_bounds(HSpec(scale=0.0), samples=1000)
        assert cert.passed
        assert cert.observed["min_slope"] == 1.0 == cert.observed["max_slope"]

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValidationError):
            verify_h_bounds(HSpec(), samples=999)


class TestPsi:
    def test_identity_when_chi_zero(self, rng):
        theta = rng.uniform(-50, 50, 100)
        assert np.all(psi(theta, 0.0) == theta)

    def test_frozen_value_at_one_one(self):
        # 1 - (atan 1 - 1/2) = 1.5 - pi/4
        assert psi(1.0, 1.0) == pytest.approx(0.7146018366025517, abs=1e-15)

    def test_zero_fixed_for_any_chi(self, rng):
        chi = rng.uniform(0, 1, 50)
        assert np.all(psi(0.0, chi) == 0.0)

    def test_chi_outside_box_raises(self):
        with pytest.raises(ValidationError):
            psi(1.0, 1.5)

    def test_monotone_with_pinned_difference_quotients(self, rng):
        spec = HSpec()
        theta = np.sort(rng.uniform(-20, 20, 200))
        for chi in rng.uniform(0, 1, 5):
            vals = psi(theta, chi, spec)
            quot = np.diff(vals) / np.diff(theta)
            assert quot.min() >= 1 / spec.c_h - 1e-9
            assert quot.max() <= spec.c_h + 1e-9

    def test_slope_from_finite_differences(self, rng):
        spec = HSpec()
        theta = rng.uniform(-10, 10, 200)
        chi = rng.uniform(0, 1, 200)
        eps = 1e-6
        fd = (psi(theta + eps, chi, spec) - psi(theta - eps, chi, spec)) / (2 * eps)
        assert np.abs(fd - psi_dtheta(theta, chi, spec)).max() < 1e-8
        assert fd.min() >= 1 / spec.c_h - 1e-6
        assert fd.max() <= spec.c_h + 1e-6


class TestPsiInverse:
    def test_identity_when_chi_zero(self, rng):
        e = rng.uniform(-30, 30, 64)
        out = psi_inverse(e, 0.0)
        assert np.abs(out - e).max() < 1e-12

    def test_frozen_roundtrip_value(self):
        assert psi_inverse(0.7146018366025517, 1.0) == pytest.approx(1.0, abs=1e-10)

    def test_zero_roundtrip(self, rng):
        chi = rng.uniform(0, 1, 16)
        assert np.abs(psi_inverse(np.zeros(16), chi)).max() < 1e-12

    def test_roundtrip_bound(self, rng):
        spec = HSpec()
        tol = 1e-12
        theta = rng.uniform(-40, 40, 500)
        chi = rng.uniform(0, 1, 500)
        back = psi_inverse(psi(theta, chi, spec), chi, spec, tol=tol)
        assert np.abs(back - theta).max() <= spec.c_h * tol * 10

    def test_budget_exhaustion_signals_solver_error(self):
        with pytest.raises(SolverError):
            psi_inverse(1.0, 1.0, max_iter=1, tol=1e-15)

    def test_nonpositive_tol_rejected(self):
        with pytest.raises(ValidationError):
            psi_inverse(1.0, 0.5, tol=0.0)


class TestHatbeta:
    def test_zero_at_zero(self):
        assert hatbeta(0.0) == 0.0

    def test_closed_form_at_one(self):
        # integral of log(1+s) over [0,1] = 2 log 2 - 1, cross-checked by quadrature
        assert hatbeta(1.0) == pytest.approx(0.3862943611198906, abs=1e-14)

    def test_quadrature_oracle_at_half(self):
        # scipy.integrate.quad of log1p on [0, 0.5]
        assert hatbeta(0.5) == pytest.approx(0.10819766216224658, abs=1e-12)

    def test_sentinel_outside_box(self):
        assert hatbeta(1.5) == np.inf
        assert hatbeta(-0.1) == np.inf

    def test_nonnegative_and_below_log2_bound(self, rng):
        r = rng.uniform(0, 1, 2000)
        vals = hatbeta(r)
        assert vals.min() >= 0.0
        assert np.all(vals <= r * np.log(2) + 1e-15)

    def test_midpoint_convexity(self, rng):
        a = rng.uniform(0, 1, 3000)
        b = rng.uniform(0, 1, 3000)
        mid = hatbeta(0.5 * (a + b))
        assert np.all(mid <= 0.5 * (hatbeta(a) + hatbeta(b)) + 1e-14)


class TestBetaResidual:
    def test_interior_point_with_zero_multiplier(self):
        assert beta_residual(0.5, np.log(1.5)) == 0.0

    def test_upper_bound_accepts_nonnegative_multiplier(self):
        assert beta_residual(1.0, np.log(2.0) + 0.3) == 0.0

    def test_lower_bound_rejects_positive_multiplier(self):
        assert beta_residual(0.0, 0.1) == pytest.approx(0.1, abs=1e-15)

    def test_lower_bound_accepts_negative_multiplier(self):
        assert beta_residual(0.0, -2.0) == 0.0

    def test_interior_nonzero_multiplier_penalized(self):
        assert beta_residual(0.3, np.log(1.3) + 0.25) == pytest.approx(0.25, abs=1e-15)

    def test_box_violation_dominates(self):
        assert beta_residual(1.4, np.log(2.0)) == pytest.approx(0.4, abs=1e-12)

    def test_vectorized(self):
        chi = np.array([0.5, 1.0, 0.0])
        xi = np.array([np.log(1.5), np.log(2.0) + 1.0, 0.2])
        out = beta_residual(chi, xi)
        assert out.shape == (3,)
        assert out[0] == 0.0 and out[1] == 0.0 and out[2] == pytest.approx(0.2)


def test_one_third_log_split_inequality(rng):
    # r - log r >= (r + |log r|)/3 over a wide logarithmic range
    r = np.exp(rng.uniform(np.log(1e-8), np.log(1e8), 10_000))
    lhs = r - np.log(r)
    rhs = (r + np.abs(np.log(r))) / 3.0
    assert np.all(lhs >= rhs - 1e-12 * np.maximum(1.0, np.abs(lhs)))
