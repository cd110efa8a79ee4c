"""Exception hierarchy shared across the toolkit."""


class PolicyscopeError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(PolicyscopeError):
    """An array argument has the wrong shape or dtype."""


class ConfigError(PolicyscopeError):
    """A network spec or analysis configuration is inconsistent."""


class FormatError(PolicyscopeError):
    """Base class for container/archive parsing failures."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class ChecksumMismatchError(FormatError):
    pass


class TruncatedBlobError(FormatError):
    pass


class SpecInconsistencyError(FormatError):
    """Header metadata and tensor contents disagree."""


class MissingStreamError(FormatError):
    """A rollout archive lacks a required stream file."""


class StreamLengthError(FormatError):
    """Stream files in an archive disagree on step count."""


class DegenerateFilterError(PolicyscopeError):
    """First-layer present-frame weights have zero magnitude."""


class DegenerateInputError(PolicyscopeError):
    """Input data carries no variance to analyze."""


class InsufficientDataError(PolicyscopeError):
    """Not enough samples to honor the requested dataset size."""
