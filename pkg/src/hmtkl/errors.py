"""Exception hierarchy shared across the package."""


class HmtklError(Exception):
    """Base class for all package-specific errors."""


class ModelError(HmtklError):
    """A model document or model object is unusable."""


class ModelFormatError(ModelError):
    """The document could not be parsed or does not match the schema."""


class ModelValidationError(ModelError):
    """The model violates a probabilistic invariant.

    Attributes
    ----------
    report : list of str
        One entry per violated invariant.
    """

    def __init__(self, report):
        self.report = list(report)
        super().__init__("; ".join(self.report))


class PreconditionError(HmtklError):
    """A mathematical precondition of an operation does not hold."""


class StationaryError(PreconditionError):
    """The transition matrix has no unique stationary distribution."""


class ZeroLikelihoodError(PreconditionError):
    """The evidence has probability zero under the model.

    Attributes
    ----------
    position : int
        1-based index of the first symbol at which all mass vanishes.
    """

    def __init__(self, position, message=None):
        self.position = position
        super().__init__(message or f"evidence has zero likelihood (first at position {position})")


class SpectralError(HmtklError):
    """The transition matrix does not meet the eigendecomposition preconditions."""


class EnumerationBudgetError(HmtklError):
    """The instance has more joint outcomes than the enumeration budget allows."""
