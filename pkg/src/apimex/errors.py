"""Exception types raised across the package."""


class ApimexError(Exception):
    pass


class DegenerateTableauError(ApimexError):
    """Implicit matrix is neither invertible nor of CK form."""


class NotStifflyAccurateError(ApimexError):
    pass


class SingularMatrixError(ApimexError):
    pass


class UnknownSchemeError(ApimexError, KeyError):
    pass


class GridTooSmallError(ApimexError):
    pass


class NonUniformStencilError(ApimexError):
    pass


class NonFiniteStateError(ApimexError, FloatingPointError):
    """State became non-finite or exceeded the blow-up bound."""


class NewtonDivergenceError(ApimexError):
    pass


class SingularBandedMatrixError(ApimexError):
    pass


class ShapeMismatchError(ApimexError, ValueError):
    pass


class ZeroDenominatorError(ApimexError, ZeroDivisionError):
    pass


class ConfigError(ApimexError, ValueError):
    pass
