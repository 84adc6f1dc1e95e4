EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

# Codes a user fixes by changing flags or config rather than input data.
USAGE_CODES = frozenset({
    "INVALID_CONFIG",
    "INVALID_POLICY",
    "INVALID_HYPERPARAMS",
    "MODEL_REQUIRED",
    "MODEL_MODE_MISMATCH",
    "DUPLICATE_POLICY",
    "PATH_NOT_FOUND",
})

INTERNAL_CODES = frozenset({
    "NONFINITE_LOSS",
})


class LmeosError(Exception):
    """Base error for the toolkit.

    ``code`` is a stable, machine-readable reason (e.g. ``CHECKSUM_MISMATCH``)
    that tests and scripts can rely on; the message is for humans.
    """

    def __init__(self, message, code=None):
        super().__init__(message)
        self.code = code

    @property
    def exit_code(self):
        if self.code in USAGE_CODES:
            return EXIT_USAGE
        if self.code in INTERNAL_CODES:
            return EXIT_INTERNAL
        return EXIT_DATA


class ConfigError(LmeosError):
    """Raised when a run configuration is invalid."""


class CorpusError(LmeosError):
    """Raised when raw documents or example files cannot be used."""


class TaggerError(LmeosError):
    """Raised by vocabulary building, training, streaming and model files."""


class EndpointError(LmeosError):
    """Raised when a word-event stream violates its ordering contract."""


class FusionError(LmeosError):
    """Raised when a policy, model and stream cannot be combined."""


class MetricsError(LmeosError):
    """Raised when hypothesis and reference cannot be scored together."""
