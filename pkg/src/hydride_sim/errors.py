"""Exception hierarchy shared across the package."""


class HydrideSimError(Exception):
    """Base class for all package errors."""


class ValidationError(HydrideSimError):
    """A scenario document or a data precondition is invalid."""


class InvalidStateError(HydrideSimError):
    """A state violates one of its coupled invariants beyond tolerance."""


class SolverError(HydrideSimError):
    """A linear or nonlinear solve failed to reach its tolerance."""


class SingularSystemError(SolverError):
    """The requested linear system has a nontrivial kernel."""


class PositivityError(SolverError):
    """A field that must stay positive reached the configured floor."""
