"""Pointwise constitutive functions of the hydride model.

Everything here is scalar/elementwise and free of grid state: the latent-heat
coupling ``h`` and its derivatives, the energy map ``psi`` linking internal
energy, temperature and phase fraction, its safeguarded inverse, the convex
phase potential ``hatbeta`` and the residual of the constraint graph that
keeps the phase fraction inside [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError, ValidationError

H_FAMILIES = ("atan", "tanh")

#: slack accepted on the phase-fraction box before raising
CHI_SLACK = 1e-12


@dataclass(frozen=True)
class HSpec:
    """Choice of the coupling function h plus its certified constant.

    family : one of ``"atan"`` (h(r) = scale * atan(r), the default) or
        ``"tanh"`` (h(r) = scale * tanh(r)).
    scale : nonnegative prefactor; 0 switches the coupling off entirely.
    c_h : certified constant > 1 bounding h, h', h'', |r h'| and pinning
        the slope of psi into [1/c_h, c_h].  The default (scale=1, c_h=4)
        holds with analytic margin: sup|r h'| = sup|r h''| = 1/2.
    """

    family: str = "atan"
    scale: float = 1.0
    c_h: float = 4.0

    def __post_init__(self):
        if self.family not in H_FAMILIES:
            raise ValidationError(f"unknown h family {self.family!r}; choose from {H_FAMILIES}")
        if not self.scale >= 0.0:
            raise ValidationError("h scale must be >= 0")
        if not self.c_h > 1.0:
            raise ValidationError("c_h must be > 1")


def h_eval(r, order: int = 0, spec: HSpec = HSpec()):
    """Evaluate h, h' or h'' (order 0, 1, 2) elementwise."""
    r = np.asarray(r, dtype=float)
    a = spec.scale
    if spec.family == "atan":
        if order == 0:
            out = a * np.arctan(r)
        elif order == 1:
            out = a / (1.0 + r * r)
        elif order == 2:
            out = -2.0 * a * r / (1.0 + r * r) ** 2
        else:
            raise ValidationError("order must be 0, 1 or 2")
    else:  # tanh
        t = np.tanh(r)
        if order == 0:
            out = a * t
        elif order == 1:
            out = a * (1.0 - t * t)
        elif order == 2:
            out = -2.0 * a * t * (1.0 - t * t)
        else:
            raise ValidationError("order must be 0, 1 or 2")
    return out if out.ndim else float(out)


@dataclass
class HBoundsCertificate:
    """Outcome of the sampled verification of the h-function assumptions."""

    passed: bool
    observed: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)


def verify_h_bounds(spec: HSpec, samples: int = 4096) -> HBoundsCertificate:
    """Sample-check the admissibility bounds of an HSpec.

    Draws ``samples`` points over a wide logarithmic range of r together
    with s in [0, 1] and verifies both the norm bound
    ``max(|h|, |h'|, |h''|) + sup|r h'| <= c_h`` and the two-sided slope
    bound ``1/c_h <= 1 + r h''(r) s <= c_h``.  Failures are reported in the
    returned certificate (never raised): a failing certificate means psi
    inversion and the energy-step Jacobian lose their guarantees.

    Parameters
    ----------
    spec : HSpec
        Candidate coupling choice.
    samples : int
        Number of r samples, at least 1000.
    """
    if samples < 1000:
        raise ValidationError("verify_h_bounds needs samples >= 1000")
    mag = np.logspace(-8.0, 8.0, samples // 2)
    r = np.unique(np.concatenate([-mag[::-1], [0.0], mag, np.linspace(-10.0, 10.0, samples)]))
    s = np.linspace(0.0, 1.0, 5)

    h0 = np.abs(h_eval(r, 0, spec))
    h1 = np.abs(h_eval(r, 1, spec))
    h2 = np.abs(h_eval(r, 2, spec))
    rh1 = np.abs(r * h_eval(r, 1, spec))
    slope = 1.0 + np.outer(r * h_eval(r, 2, spec), s)

    observed = {
        "sup_h": float(h0.max()),
        "sup_h1": float(h1.max()),
        "sup_h2": float(h2.max()),
        "sup_r_h1": float(rh1.max()),
        "min_slope": float(slope.min()),
        "max_slope": float(slope.max()),
    }
    norm_total = max(observed["sup_h"], observed["sup_h1"], observed["sup_h2"]) + observed["sup_r_h1"]
    observed["norm_plus_rh1"] = norm_total

    violations = []
    if norm_total > spec.c_h:
        violations.append(("norm", None, norm_total))
    bad = (slope < 1.0 / spec.c_h) | (slope > spec.c_h)
    if bad.any():
        ii, jj = np.nonzero(bad)
        for i, j in zip(ii[:20], jj[:20]):
            violations.append((float(r[i]), float(s[j]), float(slope[i, j])))
    return HBoundsCertificate(passed=not violations, observed=observed, violations=violations)


def _check_chi(chi):
    chi = np.asarray(chi, dtype=float)
    if (chi < -CHI_SLACK).any() or (chi > 1.0 + CHI_SLACK).any():
        raise ValidationError("phase fraction outside [0, 1]")
    return np.clip(chi, 0.0, 1.0)


def psi(theta, chi, spec: HSpec = HSpec()):
    """Internal energy e = theta - chi * (h(theta) - theta h'(theta))."""
    chi = _check_chi(chi)
    theta = np.asarray(theta, dtype=float)
    out = theta - chi * (h_eval(theta, 0, spec) - theta * h_eval(theta, 1, spec))
    return out if out.ndim else float(out)


def psi_dtheta(theta, chi, spec: HSpec = HSpec()):
    """Slope of psi in theta: 1 + chi * theta * h''(theta), pinned in [1/c_h, c_h]."""
    chi = _check_chi(chi)
    theta = np.asarray(theta, dtype=float)
    out = 1.0 + chi * theta * h_eval(theta, 2, spec)
    return out if out.ndim else float(out)


def psi_inverse(e, chi, spec: HSpec = HSpec(), tol: float = 1e-12, max_iter: int = 100):
    """Solve psi(theta, chi) = e for theta, elementwise.

    Newton iteration safeguarded by bisection.  The initial bracket
    [e - c_h, e + c_h] is certain once the HSpec bounds hold (psi deviates
    from the identity by at most c_h); it is widened geometrically as a
    last resort.  The residual tolerance is floored at roundoff scale for
    large |e|.

    Raises
    ------
    SolverError
        If the iteration budget is exhausted, which signals a violated
        HSpec certificate rather than a numerical accident.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    chi = _check_chi(chi)
    e = np.asarray(e, dtype=float)
    scalar = e.ndim == 0 and chi.ndim == 0
    e, chi = np.broadcast_arrays(np.atleast_1d(e), np.atleast_1d(chi))
    e = e.astype(float)

    lo = e - spec.c_h
    hi = e + spec.c_h
    widen = spec.c_h if spec.c_h > 0 else 1.0
    for _ in range(60):
        bad_lo = psi(lo, chi, spec) > e
        bad_hi = psi(hi, chi, spec) < e
        if not bad_lo.any() and not bad_hi.any():
            break
        lo = np.where(bad_lo, lo - widen, lo)
        hi = np.where(bad_hi, hi + widen, hi)
        widen *= 2.0
    else:
        raise SolverError("psi_inverse could not bracket a root; h bounds violated")

    tol_eff = np.maximum(tol, 8.0 * np.finfo(float).eps * (1.0 + np.abs(e)))
    theta = np.clip(e, lo, hi)
    done = np.zeros(theta.shape, dtype=bool)
    for _ in range(max_iter):
        f = psi(theta, chi, spec) - e
        done |= np.abs(f) <= tol_eff
        if done.all():
            break
        hi = np.where(~done & (f > 0), np.minimum(hi, theta), hi)
        lo = np.where(~done & (f < 0), np.maximum(lo, theta), lo)
        step = f / psi_dtheta(theta, chi, spec)
        cand = theta - step
        inside = (cand > lo) & (cand < hi)
        cand = np.where(inside, cand, 0.5 * (lo + hi))
        theta = np.where(done, theta, cand)
    else:
        n_bad = int((~done).sum())
        raise SolverError(
            f"psi_inverse: {n_bad} node(s) unconverged after {max_iter} iterations; "
            "check verify_h_bounds for this HSpec"
        )
    return float(theta[()]) if scalar else theta.reshape(np.broadcast_shapes(np.shape(e), np.shape(chi)))


def hatbeta(r):
    """Convex phase potential: integral of log(1+s) on [0, r] for r in [0, 1].

    Outside [0, 1] the extended value +inf is returned as a sentinel; it
    must never be fed back into arithmetic.
    """
    r = np.asarray(r, dtype=float)
    inside = (r >= 0.0) & (r <= 1.0)
    rc = np.clip(r, 0.0, 1.0)
    val = (1.0 + rc) * np.log1p(rc) - rc
    out = np.where(inside, val, np.inf)
    return out if out.ndim else float(out)


def beta_residual(chi, xi):
    """Violation magnitude of the constraint graph relation xi in beta(chi).

    Zero exactly when chi lies in [0, 1] and the multiplier
    omega = xi - log(1 + chi) sits in the normal cone of [0, 1] at chi
    (omega <= 0 at chi = 0, omega = 0 inside, omega >= 0 at chi = 1).
    Otherwise returns max(box distance of chi, cone distance of omega),
    the usual complementarity residual.
    """
    chi = np.asarray(chi, dtype=float)
    xi = np.asarray(xi, dtype=float)
    box = np.maximum(0.0, np.maximum(-chi, chi - 1.0))
    chi_c = np.clip(chi, 0.0, 1.0)
    omega = xi - np.log1p(chi_c)
    cone = np.where(
        chi_c <= 0.0,
        np.maximum(omega, 0.0),
        np.where(chi_c >= 1.0, np.maximum(-omega, 0.0), np.abs(omega)),
    )
    out = np.maximum(box, cone)
    return out if out.ndim else float(out)
