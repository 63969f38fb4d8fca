"""Exception types shared across the package.

Each maps to a distinct CLI exit code (see ``mmwave_ia.cli.EXIT_CODES``).
"""


class ConfigError(ValueError):
    """A configuration value violates its documented invariant."""


class SubsetError(ValueError):
    """A beam subset specification is malformed or inconsistent."""


class FormatError(ValueError):
    """A persisted file is corrupt, truncated or of an unknown version."""


class ShapeError(FormatError):
    """A persisted file is well formed but its shapes do not match."""
