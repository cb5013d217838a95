class BBGCError(Exception):
    """Base class for errors raised by the imputation package."""


class DataFormatError(BBGCError):
    """A CSV or schema file could not be parsed."""

    def __init__(self, message, row=None, column=None, value=None):
        self.row = row
        self.column = column
        self.value = value
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if value is not None:
            location.append(f"value {value!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class DegenerateColumnError(BBGCError):
    """A column cannot carry a marginal distribution.

    `constant` is True when the column has observations but a single distinct
    value; `value` then holds that constant.
    """

    def __init__(self, message, column=None, constant=False, value=None):
        self.column = column
        self.constant = constant
        self.value = value
        super().__init__(message)


class InfeasibleMissingnessError(BBGCError):
    """The requested amputation cannot be realised under its constraints."""


class NumericalError(BBGCError):
    """A matrix or statistic left its valid domain (non-SPD, zero variance...)."""
