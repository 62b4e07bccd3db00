"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the exit status
the command-line front end maps it to (1 for invalid input, 2 for a
numerical failure).
"""


class SpectralError(Exception):
    """Base class for all package errors."""

    code = "spectral_error"
    exit_status = 2

    def __init__(self, message="", **context):
        super().__init__(message)
        self.context = context


class ValidationError(SpectralError, ValueError):
    """The input violates a documented precondition."""

    code = "validation_error"
    exit_status = 1


class NumericalError(SpectralError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""

    code = "numerical_error"
    exit_status = 2


# -- validation ---------------------------------------------------------------

class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class SingularCoefficient(ValidationError):
    code = "singular_coefficient"


class ZeroExtremeDiagonal(ValidationError):
    code = "zero_extreme_diagonal"


class NonPositiveScale(ValidationError):
    code = "non_positive_scale"


class ZeroArgument(ValidationError):
    code = "zero_argument"


class NotChiral(ValidationError):
    code = "not_chiral"


class OddBlockSize(ValidationError):
    code = "odd_block_size"


class SizeCapExceeded(ValidationError):
    code = "size_cap_exceeded"


class ModelFileError(ValidationError):
    code = "model_file_error"


# -- numerical ----------------------------------------------------------------

class EigensolverFailure(NumericalError):
    code = "eigensolver_failure"


class IdenticallyZeroDiscriminant(NumericalError):
    code = "identically_zero_discriminant"


class EigenvalueOnContour(NumericalError):
    code = "eigenvalue_on_contour"


class EigenvalueOnCircle(EigenvalueOnContour):
    code = "eigenvalue_on_circle"


class DegenerateEnergy(NumericalError):
    code = "degenerate_energy"


class QuadratureNotConverged(NumericalError):
    code = "quadrature_not_converged"


class OverflowRisk(NumericalError, OverflowError):
    code = "overflow_risk"


class MiddleModuliEqual(NumericalError):
    code = "middle_moduli_equal"


class EmptyIntersection(NumericalError):
    code = "empty_intersection"


class BreakpointHit(NumericalError):
    code = "breakpoint_hit"


class ZeroOnLambda(NumericalError):
    code = "zero_on_lambda"


# -- warnings -----------------------------------------------------------------

class NonHolomorphicCellWarning(UserWarning):
    """A scan cell lies inside the degeneracy set, where the outlier
    function is not holomorphic, so the argument principle is skipped."""
