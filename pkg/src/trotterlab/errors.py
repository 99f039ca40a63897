"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all errors raised by trotterlab."""


class NonHermitian(LabError):
    pass


class NumericalFailure(LabError):
    pass


class DomainViolation(LabError):
    """A function was evaluated outside the closed right half-plane."""


class NotPSD(LabError):
    pass


class ShapeMismatch(LabError):
    pass


class SingularResolvent(LabError):
    pass


class UnknownName(LabError, KeyError):
    pass


class QuadratureUnderResolved(LabError):
    pass


class GridTooNarrow(LabError):
    pass


class ConfigError(LabError):
    """Invalid experiment configuration; ``field`` names the offending leaf."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
