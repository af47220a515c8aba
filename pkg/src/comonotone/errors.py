"""Exception types raised by the solvers and the experiment harness."""


class ComonotoneError(Exception):
    """Base class for all errors raised by this package."""


class ParameterViolation(ComonotoneError, ValueError):
    """A regularization parameter is outside the range where the resolvent
    is single-valued (``gamma + rho <= 0`` or ``eta <= max(-2 rho, 0)``)."""


class SingularResolvent(ComonotoneError, ArithmeticError):
    """``I + gamma M`` is singular or too badly conditioned to invert."""


class ConfigInvalid(ComonotoneError, ValueError):
    """A solver or experiment configuration violates its constraints."""


class MonotonicityRequired(ComonotoneError, ValueError):
    """A baseline that assumes a monotone operator was given ``rho < 0``."""


class StepSizeUnderflow(ComonotoneError, ArithmeticError):
    """The adaptive integrator step fell below ``1e-13 * t``."""


class SRangeViolation(ComonotoneError, ValueError):
    """The Lyapunov parameter ``s`` is outside ``[0, alpha - 1]``."""


class MissingKnownZero(ComonotoneError, ValueError):
    """A distance-based quantity was requested for an operator whose zero
    is not known."""


class EmptySeries(ComonotoneError, ValueError):
    """A plot was requested for an empty series."""


class IOFailure(ComonotoneError, OSError):
    """The output directory cannot be created or written."""


class UnboundedComonotonicity(UserWarning):
    """Issued by certification when every ``rho`` works (the zero matrix)."""
