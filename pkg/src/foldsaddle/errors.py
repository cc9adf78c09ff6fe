"""Exception hierarchy shared by every module of the package."""


class FoldSaddleError(Exception):
    """Base class for all errors raised by :mod:`foldsaddle`."""


class ParameterError(FoldSaddleError, ValueError):
    """A parameter lies outside its admissible range."""


class OutOfDomainError(FoldSaddleError, ValueError):
    """A point lies outside the domain of the system or of a map."""


class UnsupportedOrderError(FoldSaddleError, ValueError):
    """A Lie derivative of unsupported order was requested."""


class MissingDerivativeError(FoldSaddleError):
    """A custom field was asked for a Lie derivative it does not provide."""


class TangencyError(FoldSaddleError, ArithmeticError):
    """The sliding field is ill defined because ``Y.f - X.f`` vanishes."""


class NotARootError(FoldSaddleError, ValueError):
    """A point claimed to be a pseudo-equilibrium is not a root of H."""


class RegionError(FoldSaddleError, ValueError):
    """A point lies in the wrong region of the switching line."""


class EscapingStartError(FoldSaddleError):
    """Forward evolution from an escaping point needs a branch directive."""


class NoReturnError(FoldSaddleError, ValueError):
    """An orbit does not come back to the switching line."""


class NoRootError(FoldSaddleError, ValueError):
    """A closed-form root does not exist (negative discriminant)."""


class NoBracketError(FoldSaddleError):
    """A root-finding problem has no sign change in the search interval."""


class StructuralMismatch(FoldSaddleError):
    """The predicted case structure disagrees with the computed structure.

    Attributes
    ----------
    predicted : dict
        Structure predicted by the case table.
    computed : dict
        Structure found numerically.
    label : str or None
        Case index the table assigned before verification.
    """

    def __init__(self, message, predicted=None, computed=None, label=None):
        super().__init__(message)
        self.predicted = predicted or {}
        self.computed = computed or {}
        self.label = label
