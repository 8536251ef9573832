class FiltannError(Exception):
    """Base class for errors raised by this package."""


class UsageError(FiltannError, ValueError):
    """A caller violated a precondition (bad shape, bad parameter, bad id)."""


class FormatError(FiltannError, ValueError):
    """An on-disk artifact is truncated, corrupt, or does not match its manifest."""


class DomainError(FiltannError, ValueError):
    """Input lies outside the domain of a distance function."""


class StorageError(FiltannError, OSError):
    """Reading or writing an index file failed; the message names the file."""
