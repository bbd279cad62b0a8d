"""Exception types shared across the package."""


class SurvCbpsError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(SurvCbpsError):
    """Input file or mapping does not have the expected columns/fields."""


class RowParseError(SurvCbpsError):
    """A data row failed validation.

    Carries the 1-based data row index (header excluded) and the
    offending column name.
    """

    def __init__(self, row, column, message):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {message}")


class DegenerateArmError(SurvCbpsError):
    """A treatment arm is empty or has no uncensored outcomes."""


class InputError(SurvCbpsError):
    """Invalid argument values (shapes, ranges, non-finite entries)."""


class FitError(SurvCbpsError):
    """Optimization failed in a way that leaves no usable fit."""


class SelectionError(FitError):
    """Every candidate fit on the tuning grid failed."""


class SingularMatrixError(SurvCbpsError):
    """A matrix that must be inverted for inference is singular."""


class ConfigError(SurvCbpsError):
    """Simulation or CLI configuration is invalid."""


class DumpFormatError(SurvCbpsError):
    """A stored simulation dump is malformed or has an unknown schema."""
