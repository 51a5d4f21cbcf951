"""Exception hierarchy and process exit codes.

Every error the toolkit can raise descends from :class:`CritbandError` and
falls into one of three CLI-visible families:

* config errors (bad parameters, invalid bands, missing paths) -> exit 2
* data errors (malformed logs, unknown ids, insufficient data)  -> exit 3
* numerical failures (non-convergence, degenerate fits)         -> exit 4
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class CritbandError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(CritbandError):
    """Invalid configuration, parameters, or referenced paths."""

    exit_code = EXIT_CONFIG


class InvalidBandError(ConfigError):
    """A frequency band violates a representability bound."""


class DataError(CritbandError):
    """Malformed or inconsistent input data."""

    exit_code = EXIT_DATA


class ManifestError(DataError):
    """Stimulus manifest is malformed or inconsistent."""


class PredictionLogError(DataError):
    """Prediction log is malformed or references unknown stimuli."""


class MappingError(DataError):
    """Superclass mapping file is malformed."""


class InsufficientDataError(DataError):
    """Too few observations to run a fit."""


class UndefinedMetricError(DataError):
    """A metric is undefined on the given inputs (e.g. no cue-consistent responses)."""


class NumericalError(CritbandError):
    """A numerical procedure failed."""

    exit_code = EXIT_NUMERICAL


class ConvergenceError(NumericalError):
    """Iterative fit did not converge; carries the last iterate and residual trace."""

    def __init__(self, message, last_params=None, residual_trace=None):
        super().__init__(message)
        self.last_params = last_params
        self.residual_trace = residual_trace or []


class DegenerateFitError(NumericalError):
    """The data admit no meaningful fit (flat data, zero variance, ...)."""
