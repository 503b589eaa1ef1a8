"""Exception taxonomy shared across the package.

The CLI maps these onto its exit-code contract: data errors exit 2,
numerical failures exit 3, capability guards exit 4.
"""


class KscaleError(Exception):
    """Base class for all package-specific errors."""


class DomainError(KscaleError, ValueError):
    """A numeric quantity is outside its mathematical domain."""


class EstimationError(KscaleError, RuntimeError):
    """Model estimation failed to converge.

    ``best_fit`` carries the best parameter set found before giving up,
    or ``None`` when nothing usable was produced.
    """

    def __init__(self, message, best_fit=None):
        super().__init__(message)
        self.best_fit = best_fit


class CapabilityError(KscaleError, RuntimeError):
    """Requested computation exceeds a hard capability guard."""


class DataError(KscaleError, ValueError):
    """Base class for input-data problems (schema, values, duplicates)."""


class SchemaError(DataError):
    """A file header or feature name does not match the expected schema."""


class ValidationError(DataError):
    """A row or value violates an invariant; message names file and line."""


class IntegrityError(DataError):
    """Duplicate keys or cross-record inconsistencies."""


class CompletenessError(DataError):
    """A required (scenario, country, year) combination is missing."""
