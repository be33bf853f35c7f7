"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration errors exit 2, data
errors exit 3, numerical failures exit 4.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(ToolkitError):
    """Invalid configuration value or combination (exit code 2)."""


class DataError(ToolkitError):
    """Malformed input data: parse failures, misaligned documents,
    unjoinable report files (exit code 3)."""


class ScoringError(ToolkitError):
    """A scoring request the model cannot honour: out-of-vocabulary ids,
    overlong inputs, conditioning on a zero-probability event."""


class NumericalError(ToolkitError):
    """Numerical failure such as divergence during training (exit code 4)."""
