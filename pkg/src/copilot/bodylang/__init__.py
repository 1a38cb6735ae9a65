from .checker import check
from .diagnostics import Diagnostics, Loc
from .external import ExternalResult, ExternalRunSpec, run_external
from .interpreter import run_body
from .parser import BodyProgram, parse
from .values import TimeRange


def parse_and_check(source: str) -> BodyProgram | Diagnostics:
    """Parse then statically check a body; first diagnostic wins."""
    program = parse(source)
    if isinstance(program, Diagnostics):
        return program
    return check(program)


__all__ = [
    "BodyProgram",
    "Diagnostics",
    "ExternalResult",
    "ExternalRunSpec",
    "Loc",
    "TimeRange",
    "check",
    "parse",
    "parse_and_check",
    "run_body",
    "run_external",
]
