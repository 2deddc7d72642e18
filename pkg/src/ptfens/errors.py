"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError (and
subclasses) -> 2, anything else -> 3.
"""


class PtfensError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PtfensError):
    """Bad command line usage, config file, or run configuration."""


class DataError(PtfensError):
    """Invalid input data, file contents, or arguments."""


class ParameterError(DataError):
    """Retention parameters outside their family's domain."""


class InputError(DataError):
    """Operation input violates a precondition."""


class SchemaError(DataError):
    """Column-mapping schema is missing or inconsistent with the data file."""


class TableLookupError(DataError):
    """A texture class is absent from a class lookup table."""


class AnnSpecError(DataError):
    """Malformed network spec or input of the wrong dimension."""


class GridFormatError(DataError):
    """ASCII grid file violates the expected format."""


class CoregistrationError(DataError):
    """Raster layers do not share an identical header."""


class MemberPredictionError(DataError):
    """An ensemble member failed to predict; carries the member name."""
