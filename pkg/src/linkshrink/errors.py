"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed user input: files, schemas, labels, shapes.

    The command line maps this class to exit code 2.
    """


class InternalError(RuntimeError):
    """An internal invariant broke. The command line maps this to exit code 1."""
