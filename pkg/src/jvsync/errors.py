"""Exception types raised by the engine.

Everything the engine raises on bad data, bad parameters, or a failing
provider derives from JvsyncError so the CLI can map it to exit code 2.
"""


class JvsyncError(Exception):
    """Base class for all engine errors."""


class ParameterError(JvsyncError, ValueError):
    """A value violates an operation's parameter contract."""


class MediaFormatError(JvsyncError):
    """A media file is malformed, truncated, or uses an unsupported codec."""


class StoreError(JvsyncError):
    """An embedding-store file is malformed or inconsistent."""


class ProviderError(JvsyncError):
    """An embedding provider failed to produce a usable vector."""


class ManifestError(JvsyncError):
    """A manifest record is missing fields or references unresolvable media."""
