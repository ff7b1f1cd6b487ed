"""Exception hierarchy shared by all pipeline stages.

Each error class maps to one CLI exit code so shell scripts can tell
I/O trouble from bad configuration or degenerate data.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1

    def __init__(self, message, *, module=None):
        super().__init__(message)
        self.module = module


class DataIOError(PipelineError):
    """Missing, malformed, or truncated input files; unwritable outputs."""

    exit_code = 2


class ConfigError(PipelineError):
    """Invalid or contradictory configuration values."""

    exit_code = 3


class NumericalError(PipelineError):
    """A numerical routine received input outside its contract or failed."""

    exit_code = 4


class DegenerateDataError(PipelineError):
    """Data too degenerate to proceed (constant images, empty classes, ...)."""

    exit_code = 5
