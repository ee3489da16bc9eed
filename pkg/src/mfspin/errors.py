"""Exception types raised across the package."""


class MfspinError(Exception):
    """Base class for all package errors."""


class SupportOutOfVolume(MfspinError):
    """A translated observable support does not fit inside the volume."""


class NoAdmissibleTranslate(MfspinError):
    """No translate of the observable fits inside the volume."""


class DimensionCapExceeded(MfspinError):
    """Requested dense Hilbert-space dimension exceeds the configured cap."""


class DimensionMismatch(MfspinError):
    """Operands act on Hilbert spaces of different dimension."""


class NonSymmetricPolynomial(MfspinError):
    """Operation requires a symmetric word polynomial (real classical values)."""


class DifferentClassicalPolynomial(MfspinError):
    """The two word polynomials do not collapse to the same classical function."""


class ConvergenceFailure(MfspinError):
    """An eigensolver failed to converge or returned an invalid decomposition."""


class NotPermutationInvariant(MfspinError):
    """Model has multi-site structure; the collective-spin fast path needs one-site terms."""


class GeneratorSetUnsupported(MfspinError):
    """Collective-spin fast path only supports two-level (n = 2) sites."""


class NonOneSiteObservable(MfspinError):
    """Product-state solver requires one-site observables."""


class InsufficientSamples(MfspinError):
    """Extrapolation needs at least three increasing volumes."""


class ParseError(MfspinError):
    """Config file is not valid TOML."""


class ValidationError(MfspinError):
    """Config file parsed but contains invalid or unknown fields."""


class IoError(MfspinError):
    """Reading or writing a file failed."""
