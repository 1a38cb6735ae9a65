"""Structured diagnostics carried instead of exceptions for body code."""

from __future__ import annotations

from dataclasses import dataclass

PHASES = ("parse", "typecheck", "runtime")


@dataclass(frozen=True)
class Loc:
    line: int  # 1-based
    col: int  # 1-based


@dataclass
class Diagnostics:
    phase: str
    message: str
    location: Loc
    excerpt: str = ""

    def __post_init__(self):
        assert self.phase in PHASES
        assert self.message

    def render(self) -> str:
        return f"{self.phase} error at line {self.location.line}, col {self.location.col}: {self.message}"

    def to_json_obj(self) -> dict:
        return {
            "phase": self.phase,
            "message": self.message,
            "line": self.location.line,
            "col": self.location.col,
            "excerpt": self.excerpt,
        }


def excerpt_line(source: str, line: int) -> str:
    lines = source.splitlines()
    if 1 <= line <= len(lines):
        return lines[line - 1].strip()
    return ""
