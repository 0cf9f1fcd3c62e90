"""Exception taxonomy shared across the package."""


class NessedpError(Exception):
    """Base class for package errors."""


class DomainError(NessedpError):
    """A state or force violates its space (dimension, positivity, weights)."""


class MissingPrimal(NessedpError):
    """A primal dissipation potential was required but not available."""


class Unbounded(NessedpError):
    """A conjugate or inner optimization grows without bound on the search box."""


class NoConvergence(NessedpError):
    """An iterative solver stalled; carries the best iterate when available."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class NewtonDivergence(NoConvergence):
    """Damped Newton failed even after step-length safeguarding."""


class StepUnderflow(NessedpError):
    """Adaptive time stepping pushed the step below the allowed floor."""


class ConstraintInfeasible(NessedpError):
    """An affine constraint set is empty."""


class ConstraintDrift(NessedpError):
    """A coupled integration left its algebraic constraint beyond tolerance."""


class Infeasible(NessedpError):
    """A steady-state problem admits no solution for the given driving."""


class NotNullMinimizer(NessedpError):
    """The variational steady-state route converged to a positive value."""


class ExcessFormViolation(NessedpError):
    """A sampled excess representation failed one of its three conditions."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DualityMismatch(NessedpError):
    """Two routes to the same conjugate value disagree beyond tolerance."""


class SingularBlock(NessedpError):
    """A matrix block that must be positive definite is not."""


class InvalidEps(NessedpError):
    """A scale-separation parameter outside ]0, 1] was supplied."""


class GridMismatch(NessedpError):
    """Field data does not live on the expected grid."""


class SingularCoefficient(NessedpError):
    """A coefficient profile is not strictly positive where required."""


class BVPSingular(NessedpError):
    """The discretized two-point boundary value problem is singular."""


class WronskianDrift(NessedpError):
    """The conserved flux bracket of the transfer pair is not constant."""


class ParseError(NessedpError):
    """Config file failed to parse; carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(NessedpError):
    """Config parsed but violates the schema."""


class MissingColumn(NessedpError):
    """A result table is missing a column required by the output contract."""
