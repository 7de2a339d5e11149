"""Exception types shared across the package."""


class BBAlphaError(Exception):
    """Base class for all package errors."""


class NonNormalizable(BBAlphaError):
    """Natural parameters do not describe a normalizable Gaussian (eta2 >= 0)."""


class ShapeMismatch(BBAlphaError):
    """Operands have incompatible shapes."""


class ImproperCavity(BBAlphaError):
    """Cavity distribution has non-negative eta2; alpha is too large for the current q."""


class ImproperTilted(BBAlphaError):
    """Tilted distribution has a non-positive-definite precision."""


class NonPositiveNoise(BBAlphaError):
    """Observation noise variance must be strictly positive."""


class ClassOutOfRange(BBAlphaError):
    """Class label outside the model's label space."""


class NonFiniteIntermediate(BBAlphaError):
    """A tape node produced NaN or Inf; carries the offending op name."""

    def __init__(self, op_name):
        super().__init__("non-finite value produced by op '%s'" % op_name)
        self.op_name = op_name


class UndefinedDivergence(BBAlphaError):
    """The alpha-divergence integral diverges (blend precision not positive definite)."""


class DomainError(BBAlphaError):
    """Input outside the validity region of a closed-form expression."""


class NoConvergence(BBAlphaError):
    """Fixed-point iteration failed to reach tolerance; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DivergenceDetected(BBAlphaError):
    """Training energy became non-finite or grew explosively; carries the epoch."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ParseError(BBAlphaError):
    """CSV cell failed to parse; message names the row and column."""


class MissingColumn(BBAlphaError):
    """Required column absent from a CSV header."""
