"""Exception hierarchy.

Every error raised by the library derives from :class:`GamblerError`; the
input-validation family also derives from :class:`ValueError` so callers that
already catch ``ValueError`` keep working.
"""


class GamblerError(Exception):
    """Base class for all library errors."""


class InvalidInputError(GamblerError, ValueError):
    pass


class InvalidRangeError(InvalidInputError):
    pass


class InvalidLabelError(InvalidInputError):
    pass


class InvalidHyperparameterError(InvalidInputError):
    pass


class InvalidRateError(InvalidInputError):
    pass


class UnsupportedDimensionError(InvalidInputError):
    pass


class ShapeError(InvalidInputError):
    pass


class DivergenceError(GamblerError, ArithmeticError):
    """A loss or formula left the finite range."""


class LearnabilityError(GamblerError, ValueError):
    """The point is not learnable; the optimum abstains completely (f0 = 1)."""


class DegeneratePredictionError(GamblerError, ValueError):
    """All probability mass sits on the rejection slot."""


class FormatError(GamblerError, ValueError):
    pass


class ConsistencyError(GamblerError, ValueError):
    pass


class SizeError(GamblerError, ValueError):
    pass
