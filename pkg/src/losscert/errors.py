"""Exception types shared across the package."""


class CalibrationError(RuntimeError):
    """Raised when a bound-vector calibration search fails to converge."""


class DivergenceError(RuntimeError):
    """Raised when a bound is infinite because the loss support is unbounded.

    Typically fixed by declaring ``support_max`` on the samples.
    """


class SchemaError(ValueError):
    """Raised on malformed input files (bad header, NaN losses, ...)."""
