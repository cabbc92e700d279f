"""Shared diagnostic records and error types for the toolchain."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    message: str
    file: str = "<input>"
    line: int = 0
    col: int = 0
    severity: str = "error"

    def __str__(self):
        return "%s:%d:%d: %s: %s" % (self.file, self.line, self.col, self.severity, self.message)


class ToolError(Exception):
    """Base for all toolchain errors that carry diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class ParseError(ToolError):
    pass


class CompileError(ToolError):
    pass


class LinkError(ToolError):
    pass
