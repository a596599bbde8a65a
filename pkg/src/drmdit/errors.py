"""Exception hierarchy shared by all modules.

Each class maps to a CLI exit code; see cli.EXIT_CODES.
"""


class DrmditError(Exception):
    """Base class for all library errors."""


class ParameterError(DrmditError):
    """Invalid argument: bad shape, bad range, empty input."""


class DataError(DrmditError):
    """Unusable input data: missing file, no parseable rows, non-finite values."""


class DegeneracyError(DrmditError):
    """Numeric degeneracy: zero trace, singular matrix, collapsed batch."""


class TrainingError(DrmditError):
    """Optimization failure (non-finite gradient or parameter)."""
