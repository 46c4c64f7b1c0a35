"""
Exception Hierarchy
===================

Every failure the toolkit can raise on purpose lives here, so callers (and the
CLI) can catch one base class and still tell the two families apart:

    NsaSpecError
    ├── InputError (ValueError)        bad input or a violated precondition
    └── NumericalError (RuntimeError)  two computations that should agree don't

The CLI maps ConfigError to exit code 2 and everything else to a failed check.
"""


class NsaSpecError(Exception):
    """Base class for every error raised by nsaspec."""


class InputError(NsaSpecError, ValueError):
    """Input data or a documented precondition is violated."""


class NumericalError(NsaSpecError, RuntimeError):
    """A numerical cross-check or convergence test failed."""


# =============================================================================
# INPUT / PRECONDITION ERRORS
# =============================================================================

class ConfigError(InputError):
    """Configuration file is unreadable, malformed or fails validation."""


class PreconditionError(InputError):
    """An operation was called outside its documented domain."""


class NotAntisymmetric(PreconditionError):
    """The magnetic matrix A must be antisymmetric for this operation."""


class RealRootError(InputError):
    """A pencil root lies on (or within tolerance of) the real axis."""


class CountMismatch(InputError):
    """The upper half plane does not hold exactly n roots."""


class EmptyWindow(InputError):
    """No lattice point satisfies the requested real-part bound."""


class SectorViolation(InputError):
    """A lattice generator has |arg| >= pi/2."""


class ContourTooClose(InputError):
    """A pencil root sits too close to the integration contour."""


class ArgumentJump(InputError):
    """Consecutive contour nodes differ in argument by more than pi/2."""


class NotAMinimum(InputError):
    """A declared candidate fails one of the minimum conditions."""


class DegenerateHessian(InputError):
    """V''(x_j) is not invertible."""


class DimensionMismatch(InputError):
    """Potential, grid or vector dimensions disagree."""


class DimensionGuard(InputError):
    """A dense algorithm was asked to work on a matrix that is too large."""


class AmbiguousPairing(InputError):
    """Two numerical eigenvalues compete for the same quadratic eigenvalue."""


class AnnulusNotClean(InputError):
    """Another eigenvalue lies in the annulus around a projection contour."""


class NoiseFloor(InputError):
    """Too few remainder norms lie above the estimation noise floor."""


# =============================================================================
# NUMERICAL CONSISTENCY ERRORS
# =============================================================================

class CrossCheckFailure(NumericalError):
    """Hamilton-map and companion eigenvalues disagree."""


class MismatchWithClosedForm(NumericalError):
    """Iterative and closed-form singular spaces differ."""


class NonIntegerResidual(NumericalError):
    """A contour count is too far from an integer."""


class ConvergenceFailure(NumericalError):
    """An iterative eigensolver did not converge at some shift."""


class QuadratureNotConverged(NumericalError):
    """Doubling contour nodes changed the projection action too much."""


class StepFailure(NumericalError):
    """Krylov substepping could not reach the requested tolerance."""


class FactorizationSingular(NumericalError):
    """Sparse LU hit an exactly singular pivot (z is spectrum-adjacent)."""
