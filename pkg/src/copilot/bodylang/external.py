"""Sandboxed runner for generated external code (the hybrid path).

The child gets its own session and working-directory jail, an address
space limit, and a wall clock; it is killed as a group on timeout so no
orphans survive. Network access is never granted (the spec field cannot
be set), though true isolation relies on the process limits here plus
the absence of credentials in the child environment.
"""

from __future__ import annotations

import os
import shlex
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ExternalTimeout, MemoryExceeded, SpawnFailure

DEFAULT_INTERPRETER = "python3 -I"

# at most this many external children at once
_slots = threading.Semaphore(2)


@dataclass(frozen=True)
class ExternalRunSpec:
    code: str
    workdir: str
    interpreter_command: str = DEFAULT_INTERPRETER
    wall_ms: int = 10_000
    memory_mb: int = 512
    network: bool = field(default=False, init=False)  # immutable by construction

    def __post_init__(self):
        if not self.code.strip():
            raise ValueError("code must be non-empty")
        if self.wall_ms <= 0 or self.memory_mb <= 0:
            raise ValueError("limits must be positive")


@dataclass
class ExternalResult:
    stdout: str
    stderr: str
    exit_code: int
    duration: float


def _child_setup(memory_bytes: int):
    def setup():
        os.setsid()
        try:
            import resource

            resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))
        except (ImportError, ValueError, OSError):
            pass

    return setup


def run_external(spec: ExternalRunSpec) -> ExternalResult:
    workdir = Path(spec.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    script = workdir / "__body__.py"
    script.write_text(spec.code, encoding="utf-8")

    command = shlex.split(spec.interpreter_command) + [script.name]
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "LANG": "C.UTF-8",
        # nothing else: no proxies, no credentials
    }
    with _slots:
        started = time.monotonic()
        try:
            proc = subprocess.Popen(
                command,
                cwd=str(workdir),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                env=env,
                text=True,
                preexec_fn=_child_setup(spec.memory_mb * 1024 * 1024),
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot spawn {command[0]!r}: {exc}") from exc
        try:
            stdout, stderr = proc.communicate(timeout=spec.wall_ms / 1000.0)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            proc.wait()
            raise ExternalTimeout(f"external code exceeded {spec.wall_ms} ms") from None
        duration = time.monotonic() - started

    if proc.returncode < 0 and -proc.returncode == signal.SIGKILL:
        raise MemoryExceeded(f"external code killed (limit {spec.memory_mb} MB)")
    if "MemoryError" in stderr:
        raise MemoryExceeded(f"external code ran out of memory (limit {spec.memory_mb} MB)")
    return ExternalResult(stdout=stdout, stderr=stderr, exit_code=proc.returncode, duration=duration)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except ProcessLookupError:
        pass
    except PermissionError:  # pragma: no cover - same-user children
        proc.kill()
