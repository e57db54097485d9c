"""Exception types raised across the package."""


class PgibbsError(Exception):
    """Base class for package errors."""


class ZeroWeight(PgibbsError):
    """All importance weights vanished at some time step."""


class LengthMismatch(PgibbsError, ValueError):
    pass


class UnsupportedModel(PgibbsError):
    """The requested construction needs an analytic quantity the model does not provide."""


class IndexOutOfRange(PgibbsError, IndexError):
    pass


class InvalidN(PgibbsError, ValueError):
    pass


class InvalidParams(PgibbsError, ValueError):
    pass


class CapExceeded(PgibbsError):
    """An exact enumeration would exceed its configured size cap."""


class ZeroLikelihood(PgibbsError):
    pass


class NonFiniteModel(PgibbsError):
    pass


class NumericalDegeneracy(PgibbsError):
    pass


class UnboundedWeight(PgibbsError):
    """No sup-norm bound is available for the weight function."""


class BudgetExceeded(PgibbsError):
    pass


class ConfigError(PgibbsError, ValueError):
    pass


class EmptySample(PgibbsError, ValueError):
    pass
