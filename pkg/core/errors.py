"""
Domain exception hierarchy.

Each error carries the CLI exit code and the HTTP status it maps to, so the
command line and the API report failures the same way.
"""

class PrivacyToolkitError(Exception):
    exit_code: int = 1
    status_code: int = 500

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class UsageError(PrivacyToolkitError):
    exit_code = 2
    status_code = 400


# --- DATA ERRORS (exit 3) ---

class DataError(PrivacyToolkitError):
    exit_code = 3
    status_code = 422


class SchemaError(DataError):
    pass


class DomainViolationError(DataError):
    """A cell value lies outside the declared domain of its attribute."""
    def __init__(self, row: int, column: str, value: str):
        super().__init__(
            f"Row {row}, column '{column}': value '{value}' is not in the declared domain.",
            row=row, column=column, value=value
        )


class EmptyDatasetError(DataError):
    def __init__(self, message: str = "empty dataset"):
        super().__init__(message)


class EstimationError(DataError):
    pass


# --- INFEASIBLE CONFIGURATIONS (exit 4) ---

class InfeasibleConfigurationError(PrivacyToolkitError):
    exit_code = 4
    status_code = 409


class IneligibleDatasetError(InfeasibleConfigurationError):
    pass


class PartitionError(InfeasibleConfigurationError):
    pass


class UnsafeConfigurationError(InfeasibleConfigurationError):
    pass


class AmbiguousMatchError(DataError):
    """Published rows cannot be matched to source tuples by their NSA values."""
    pass


class UnknownTupleError(DataError):
    def __init__(self, tuple_id: int):
        super().__init__(f"Tuple id {tuple_id} is not part of the partition.", tuple_id=tuple_id)
