"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A quadrature or other numerical routine failed to converge.

    The achieved error estimate, when one is available, is kept on
    ``error_estimate`` so callers can decide whether to retry with a looser
    tolerance.
    """

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class UndefinedLatencyError(NumericalError):
    """Expected latency requested for a configuration that never detects."""


class LowThresholdWarning(UserWarning):
    """SINR threshold below the range where the union bound stays tight."""
