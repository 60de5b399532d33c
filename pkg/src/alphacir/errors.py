"""Exception hierarchy shared by all engines."""


class AlphaCirError(Exception):
    """Base class for package errors."""


class ParameterError(AlphaCirError, ValueError):
    """A parameter violates a model invariant."""


class ErgodicityError(ParameterError):
    """An operation needs b(r) > 0 for every type."""


class AssumptionError(ParameterError):
    """An operation on the Fleming-Viot stationary law needs m(E) > 1."""


class UnsupportedParameterError(ParameterError):
    """A sub-sampler cannot be run at the requested configuration."""


class QuadratureError(AlphaCirError, ArithmeticError):
    """Adaptive quadrature failed to reach its declared tolerance."""


class DegenerateStateError(AlphaCirError):
    """Total mass reached the clamp floor, so a ratio is undefined."""


class ConfigError(AlphaCirError, ValueError):
    """An experiment configuration file is malformed."""


class ClampRateError(AlphaCirError):
    """Too many Euler steps were clamped at zero."""
