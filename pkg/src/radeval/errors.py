"""Exception types shared across the package."""

from __future__ import annotations


class RadEvalError(Exception):
    """Base class for radeval errors."""


class ParseError(RadEvalError):
    """A file could not be parsed; carries the location of the problem."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SchemaError(ParseError):
    """A record does not conform to its declared label schema."""


class DuplicateKeyError(ParseError):
    """Two records share a key that must be unique."""


class ConfigError(RadEvalError):
    """A run configuration is invalid (unknown metric, missing file, ...)."""
