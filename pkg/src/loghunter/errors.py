"""Error taxonomy shared across the pipeline (CLI maps these to exit codes)."""


class LogHunterError(Exception):
    """Base class for all package errors."""


class UsageError(LogHunterError):
    """Bad arguments or configuration (CLI exit 2)."""


class DataError(LogHunterError):
    """Data violates a contract: bad values, schemas, plans (CLI exit 3)."""


class SchemaMismatchError(DataError):
    """Tables with incompatible column specs or class lists."""


class UnsupportedFormatError(DataError):
    """A file format capability that this build does not include."""
