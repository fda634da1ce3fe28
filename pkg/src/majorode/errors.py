"""Exception types shared across the package."""


class MajorodeError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MajorodeError, ValueError):
    pass


class DivergentTail(MajorodeError):
    """A tail sum cannot be bounded under the declared rule."""


class InapplicablePositivity(MajorodeError):
    """A majorant coordinate is not strictly positive on the sampling grid."""

    def __init__(self, message, t=None, k=None, value=None):
        super().__init__(message)
        self.t = t
        self.k = k
        self.value = value


class BlowUpBeforeT(MajorodeError):
    def __init__(self, message, t_star):
        super().__init__(message)
        self.t_star = t_star


class EpsilonTooLarge(MajorodeError, ValueError):
    pass


class StepSizeUnderflow(MajorodeError):
    """Adaptive step size collapsed; usually a finite-time blow-up."""

    def __init__(self, message, t, state):
        super().__init__(message)
        self.t = t
        self.state = state


class StepBudgetExceeded(MajorodeError):
    """The integrator hit its step or wall-clock budget before reaching T."""

    def __init__(self, message, t, state):
        super().__init__(message)
        self.t = t
        self.state = state


class NonFiniteRhs(MajorodeError):
    def __init__(self, message, t, state):
        super().__init__(message)
        self.t = t
        self.state = state


class NotConverged(MajorodeError):
    """Fixed-point search ended without meeting the tolerance.

    ``result`` carries the best iterate and the residual history.
    """

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class BoxEscape(MajorodeError):
    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class GridMismatch(MajorodeError, ValueError):
    pass


class ConfigError(MajorodeError, ValueError):
    pass
