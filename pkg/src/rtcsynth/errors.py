"""Error taxonomy shared across the toolkit.

Everything raised on purpose derives from ToolError so the CLI can map
failures to exit codes without fishing through stdlib exception types.
"""


class ToolError(Exception):
    """Base class for all deliberate failures."""


class UsageError(ToolError):
    """Bad command-line usage or an impossible option combination."""


class ModelError(ToolError):
    """A machine or problem violates a structural requirement."""


class SpecError(ToolError):
    """A goal or formula falls outside the supported fragment."""


class ParseError(ToolError):
    """Malformed input text; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
