"""Exception hierarchy shared by all modules."""


class EymahError(Exception):
    """Base class for library errors."""


class ShapeError(EymahError, ValueError):
    """Tensor rank, form degree or array shape does not fit the operation."""


class ChartError(EymahError):
    """Requested chart model is not available for an operation."""


class SingularMetricError(EymahError):
    """Metric is degenerate or indefinite at a sample point."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class AlgebraError(EymahError):
    """Lie algebra data is inconsistent or two forms use different algebras."""


class ConfigurationError(EymahError, ValueError):
    """Invalid parameters for a configuration, cutoff or discretization."""


class UnsupportedModeError(EymahError):
    """Operation mode cannot be used for the given input."""


class DegenerateGapError(EymahError):
    """Shift parameter too small: the indicial roots leave the real axis."""


class NoGapError(EymahError):
    """An indicial root sits on the critical line, so no weight window exists."""


class NotUniformlyDegenerateError(EymahError):
    """Probe responses are not a quadratic polynomial in the exponent."""


class WeightOutOfRangeError(EymahError, ValueError):
    """Weight lies outside the non-indicial interval of a block."""

    def __init__(self, weight, interval, block):
        lo, hi = interval
        super().__init__(
            f"weight {weight} outside the non-indicial interval ({lo:g}, {hi:g}) "
            f"of the {block} block"
        )
        self.weight = weight
        self.interval = interval
        self.block = block


class LinearSolverError(EymahError):
    """Linear solve failed to reach its tolerance."""


class NonConvergenceError(EymahError):
    """Newton iteration did not converge; carries the partial result."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class GenerationError(EymahError):
    """Random test-field generation failed after bounded retries."""


class DegenerateFieldError(EymahError, ValueError):
    """Test field has zero norm."""


class PreconditionError(EymahError, ValueError):
    """Input violates a documented precondition."""
