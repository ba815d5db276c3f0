"""Exception hierarchy shared across the package."""


class LatentShapError(Exception):
    """Base class for every error raised by latentshap."""


class ValidationError(LatentShapError, ValueError):
    """Input failed a shape, finiteness or range check."""


class DimensionError(ValidationError):
    """Two inputs disagree on a dimension."""


class ExcludedCoalitionError(ValidationError):
    """The empty or full coalition was passed where only proper ones are allowed."""


class UndefinedSimilarityError(ValidationError):
    """Cosine similarity requested for a zero vector."""


class SizeCapError(ValidationError):
    """Problem is larger than an exhaustive routine accepts."""


class CapabilityError(LatentShapError):
    """A transform lacks an operation the caller needs (usually an inverse)."""


class ConditioningError(LatentShapError):
    """The explanation regression is rank deficient."""


class ModelError(LatentShapError):
    """The black-box model returned something unusable."""


class UnderflowError(LatentShapError):
    """All proximity weights for some column underflowed to zero."""


class TrainingError(LatentShapError):
    """Logistic regression training failed to reach the accuracy floor."""


class ExternalModelError(ModelError):
    """An external model or transform subprocess failed.

    The captured stderr of the child, when any, is kept in ``stderr``.
    """

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message if not stderr else f"{message}: {stderr.strip()}")
        self.stderr = stderr


class CellError(LatentShapError):
    """An experiment job failed; the message names the (size, alpha, instance) triple."""
