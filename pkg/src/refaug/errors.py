"""Exception hierarchy shared by all refaug modules.

Every error carries a short machine-readable ``category`` so the CLI can
emit one-line, parseable failures (``refaug: error: <category>: <message>``).
"""


class RefaugError(Exception):
    """Base class for all errors raised by this package."""

    category = "internal"


class ParseError(RefaugError):
    """A file could not be decoded (bad JSON, bad binary layout, bad TSV)."""

    category = "parse"

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(RefaugError):
    """Decoded data violates a documented invariant."""

    category = "validation"


class UsageError(RefaugError):
    """Caller passed arguments that cannot be acted on (bad k, bad flags)."""

    category = "usage"
