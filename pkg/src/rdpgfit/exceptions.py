"""Exception hierarchy shared by all rdpgfit modules."""


class RdpgError(Exception):
    """Base class for every error raised by rdpgfit."""


class InvalidSizeError(RdpgError, ValueError):
    """A size or shape argument is invalid (empty graph, mismatched shapes)."""


class DomainError(RdpgError, ValueError):
    """A numeric input lies outside its admissible range (e.g. a probability > 1)."""


class InvalidConfigError(RdpgError, ValueError):
    """A configuration object is inconsistent."""


class ContractError(RdpgError, ValueError):
    """A structural precondition does not hold (e.g. a non-symmetric matrix)."""


class DimensionError(RdpgError, ValueError):
    """The requested embedding dimension cannot be supported by the data."""

    def __init__(self, message, usable=None):
        super().__init__(message)
        self.usable = usable


class RankDeficiencyError(RdpgError, ArithmeticError):
    """A matrix that must have full column rank does not."""


class SingularSystemError(RdpgError, ArithmeticError):
    """A linear system that must be positive definite is not."""


class ManifoldError(RdpgError, ValueError):
    """A point is not on the manifold of matrices with orthogonal nonzero columns."""


class RetractionError(RankDeficiencyError):
    """The retraction input ``X + zeta`` lost column rank; shrink the step."""


class StepSizeError(RdpgError, ArithmeticError):
    """Gradient descent diverged; a smaller step size is needed."""


class DegenerateColumnError(RdpgError, ValueError):
    """A factor has a zero column, so column norms cannot be equalised."""


class UnknownNodeError(RdpgError, KeyError):
    """A node id is not present in the current node table."""


class FormatError(RdpgError, ValueError):
    """A file does not follow the documented format."""
