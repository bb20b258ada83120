"""Exception hierarchy shared by the fitting library and the CLI."""


class FMMError(Exception):
    """Base class for all package errors."""


class ConfigError(FMMError, ValueError):
    """Invalid configuration or arguments."""


class FormatError(FMMError, ValueError):
    """Malformed input data (CSV / JSON)."""


class FitFailedError(FMMError, RuntimeError):
    """A fit could not produce an estimate."""


class DegenerateDesignError(FitFailedError):
    """Least-squares design matrix is rank deficient."""


class UndefinedVarianceError(FitFailedError):
    """Data has zero total variance, so R^2 is undefined."""


class DegenerateWaveError(FMMError, ValueError):
    """Wave with omega == 0 has no defined peak / trough."""


class UndefinedMeanError(FMMError, ValueError):
    """Angular mean of angles whose resultant vanishes."""
