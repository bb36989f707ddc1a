"""Exception types raised by the plpmlg package."""


class PLPMLGError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(PLPMLGError, ValueError):
    """A distribution or model parameter violates its domain constraints."""


class DegenerateDesignError(PLPMLGError, ValueError):
    """A design or constraint matrix is rank deficient."""


class CertaintyUnitError(PLPMLGError, ValueError):
    """A sampling design would force an inclusion probability to one or above."""


class TruncationFailureError(PLPMLGError, RuntimeError):
    """Rejection sampling against a truncation region exhausted its attempt budget."""


class SamplingFailureError(PLPMLGError, RuntimeError):
    """A Markov chain reached a non-finite or otherwise unusable state."""


class PilotFailureError(PLPMLGError, RuntimeError):
    """The pilot chain used to calibrate the boundary correction broke down."""


class ConfigurationError(PLPMLGError, ValueError):
    """A configuration object or file is inconsistent or incomplete."""


class IngestionError(PLPMLGError, ValueError):
    """A data file could not be parsed into a valid population or sample."""


class EstimationError(PLPMLGError, ValueError):
    """An estimator's inputs are insufficient or inconsistent."""
