"""Exception types shared across the package.

``DataError`` covers everything caused by bad input data or files; the CLI
maps it to exit code 2. Anything else escaping a command is treated as an
internal error (exit code 3).
"""


class DataError(Exception):
    """Base class for errors caused by invalid input data or files."""


class MalformedWaveError(DataError):
    """RIFF/WAVE container is truncated or structurally invalid."""


class UnsupportedCodecError(DataError):
    """WAVE file uses a sample format other than 16-bit PCM or 32-bit float."""


class ManifestError(DataError):
    """Manifest CSV is missing columns, has bad values, or duplicate keys."""


class EmbeddingFormatError(DataError):
    """Embedding CSV violates the documented header/row contract."""


class ModelFormatError(DataError):
    """Persisted model file does not parse under the versioned text format."""


class ValidationError(DataError):
    """Numeric input violates a documented precondition."""
