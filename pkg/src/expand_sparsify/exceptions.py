"""Exception hierarchy.

Every error raised by the library derives from :class:`ExpandSparsifyError`.
The CLI maps the three families onto exit codes (configuration 2, data 3,
everything else 4).
"""


class ExpandSparsifyError(Exception):
    """Base class for all library errors."""


class ConfigurationError(ExpandSparsifyError, ValueError):
    """Invalid hyperparameters, dimensions or experiment grids."""


class DataError(ExpandSparsifyError, ValueError):
    """Problem with the data handed to an operation."""


class ShapeError(DataError):
    pass


class InputError(DataError):
    pass


class CalibrationError(DataError):
    pass


class FitError(DataError):
    pass


class IngestionError(DataError):
    """CSV ingestion failure. ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        if row is not None and column is not None:
            message = f"row {row} col {column}: {message}"
        elif row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class NoActiveUnitsError(ExpandSparsifyError, ArithmeticError):
    """The binary code of an input has no active unit, so the weighted
    average readout is undefined."""


class ModelFileError(ExpandSparsifyError, IOError):
    pass


class ChecksumError(ModelFileError):
    pass


class VersionError(ModelFileError):
    pass
