"""Exception types raised by the package."""


class ResourceError(ValueError):
    """Requested dense computation exceeds the supported Hilbert space size."""


class PfaffianError(ArithmeticError):
    """Pfaffian evaluation broke down numerically."""


class IntegrationError(RuntimeError):
    """A time integrator failed to reach its accuracy target."""


class DetectionError(RuntimeError):
    """No qualifying correlation peak was found.

    The ``fallback`` attribute carries the global-maximum sample (t, value).
    """

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class EstimationError(RuntimeError):
    """The analytic surge-time condition has no root in the search bracket."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class RegressionError(ValueError):
    """Degenerate input for a least-squares fit."""


class ChannelNotInvertibleError(ValueError):
    """Readout channel with p_fp + p_fn >= 1 cannot be inverted."""


class DivisionGuardError(ZeroDivisionError):
    """A reference correlator is too close to zero to divide by."""

    def __init__(self, message, ell=None):
        super().__init__(message)
        self.ell = ell


class RecordFormatError(ValueError):
    """A shot record or table file is malformed."""
