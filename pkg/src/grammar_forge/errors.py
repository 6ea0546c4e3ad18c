"""Exception hierarchy and diagnostics shared across the workbench."""

from __future__ import annotations

from dataclasses import dataclass


class GrammarForgeError(Exception):
    """Base class for all workbench errors."""


class MetamodelError(GrammarForgeError):
    """Metamodel document cannot be loaded or violates an invariant."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)


class GrammarSyntaxError(GrammarForgeError):
    """Grammar text is not well-formed."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class GrammarValidationError(GrammarForgeError):
    """A structurally well-formed grammar violates an invariant."""


class GenerationError(GrammarForgeError):
    """Grammar generation cannot proceed for the given metamodel."""


class ConfigError(GrammarForgeError):
    """Optimization-rule configuration is malformed or fails its schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StyleError(GrammarForgeError):
    """Style bundle cannot be parsed, installed, or found."""


class SerializeError(GrammarForgeError):
    """An instance model cannot be rendered under the given grammar."""


class MigrationError(GrammarForgeError):
    """A domain program cannot be migrated between grammar versions."""


class InferenceError(GrammarForgeError):
    """An annotated example is invalid or yields conflicting structure."""


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: the violated invariant and the offending element."""

    code: str
    message: str
    element: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.element}: {self.message}"
