"""Sandbox interface used by the evaluation harness.

The harness only needs ``run_one(ExecRequest) -> ExecVerdict``.  Two
implementations ship here: :class:`StubSandbox` answers from canned
verdicts without executing anything (tests, dry runs), and
:class:`ProcessSandbox` drives external runner processes over a
line-delimited JSON protocol (one request object in, one verdict object
out, matched by id).
"""

import json
import logging
import os
import select
import shlex
import subprocess
import threading
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from queue import Queue

log = logging.getLogger(__name__)

__all__ = [
    "ExecRequest",
    "ExecVerdict",
    "ProcessSandbox",
    "SandboxUnavailableError",
    "StubSandbox",
    "VERDICT_STATUSES",
]

VERDICT_STATUSES = ("pass", "fail", "timeout", "error")

STDERR_TAIL_LIMIT = 2048


class SandboxUnavailableError(RuntimeError):
    """The sandbox cannot be started or reached; nothing was executed."""


@dataclass(frozen=True)
class ExecRequest:
    id: str
    program: str
    timeout_s: float

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")

    def to_dict(self) -> dict:
        return {"id": self.id, "program": self.program, "timeout_s": self.timeout_s}


@dataclass(frozen=True)
class ExecVerdict:
    id: str
    status: str
    stderr_tail: str = ""
    duration_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.status not in VERDICT_STATUSES:
            raise ValueError(f"status must be one of {VERDICT_STATUSES}")


def verdict_from_dict(obj: dict) -> ExecVerdict:
    return ExecVerdict(
        id=str(obj["id"]),
        status=obj["status"],
        stderr_tail=str(obj.get("stderr_tail", ""))[-STDERR_TAIL_LIMIT:],
        duration_ms=float(obj.get("duration_ms", 0.0)),
    )


class StubSandbox:
    """Canned-verdict sandbox: no code is ever executed.

    ``passing_programs`` marks program texts that should pass; everything
    else fails.  ``verdict_fn`` overrides the lookup entirely and may
    return a status string or a full :class:`ExecVerdict`.  ``latency_s``
    (constant or callable) simulates execution time, which exercises the
    harness's scheduling without affecting results.
    """

    def __init__(
        self,
        passing_programs: set[str] | None = None,
        verdict_fn: Callable[[ExecRequest], "str | ExecVerdict"] | None = None,
        latency_s: float | Callable[[ExecRequest], float] = 0.0,
    ):
        self._passing = passing_programs or set()
        self._verdict_fn = verdict_fn
        self._latency_s = latency_s

    def run_one(self, req: ExecRequest) -> ExecVerdict:
        delay = self._latency_s(req) if callable(self._latency_s) else self._latency_s
        if delay:
            time.sleep(delay)
        if self._verdict_fn is not None:
            verdict = self._verdict_fn(req)
            if isinstance(verdict, ExecVerdict):
                return verdict
            return ExecVerdict(id=req.id, status=verdict)
        status = "pass" if req.program in self._passing else "fail"
        return ExecVerdict(id=req.id, status=status)

    def close(self) -> None:
        pass


class _Runner:
    """One external runner process plus its buffered stdout reader."""

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise SandboxUnavailableError(
                f"cannot start sandbox runner {self.command!r}: {exc}"
            ) from exc
        self._buffer = bytearray()

    def request(self, req: ExecRequest, deadline_s: float) -> ExecVerdict | None:
        """Send one request and read one verdict line; None on runner death."""
        line = json.dumps(req.to_dict(), ensure_ascii=False) + "\n"
        try:
            self.proc.stdin.write(line.encode("utf-8"))
            self.proc.stdin.flush()
        except (OSError, ValueError):
            return None
        raw = self._read_line(deadline_s)
        if raw is None:
            return None
        try:
            return verdict_from_dict(json.loads(raw))
        except (ValueError, KeyError):
            return None

    def _read_line(self, deadline_s: float) -> str | None:
        deadline = time.monotonic() + deadline_s
        fd = self.proc.stdout.fileno()
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.25))
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                return None
            self._buffer.extend(chunk)
        line, _, rest = bytes(self._buffer).partition(b"\n")
        self._buffer = bytearray(rest)
        return line.decode("utf-8", errors="replace")

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class ProcessSandbox:
    """Pool of runner processes spoken to over stdin/stdout JSON lines.

    ``workers`` processes are started eagerly so a missing runner fails
    before any execution.  ``run_one`` is thread-safe: each call checks a
    runner out of the pool for the duration of the request.  A runner that
    dies or misbehaves yields an error verdict and is replaced.
    """

    def __init__(self, command: Sequence[str] | str, workers: int = 1, grace_s: float = 5.0):
        if isinstance(command, str):
            command = shlex.split(command)
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.command = list(command)
        self.grace_s = grace_s
        self._pool: Queue[_Runner] = Queue()
        self._lock = threading.Lock()
        self._closed = False
        started = []
        try:
            for _ in range(workers):
                started.append(_Runner(self.command))
        except SandboxUnavailableError:
            for runner in started:
                runner.close()
            raise
        for runner in started:
            self._pool.put(runner)

    def run_one(self, req: ExecRequest) -> ExecVerdict:
        runner = self._pool.get()
        try:
            verdict = runner.request(req, deadline_s=req.timeout_s + self.grace_s)
            if verdict is None:
                log.warning("sandbox runner failed on request %s; respawning", req.id)
                runner.close()
                runner = _Runner(self.command)
                return ExecVerdict(
                    id=req.id, status="error", stderr_tail="sandbox runner failed"
                )
            if verdict.id != req.id:
                return ExecVerdict(
                    id=req.id,
                    status="error",
                    stderr_tail=f"verdict id mismatch: {verdict.id!r}",
                )
            return verdict
        finally:
            self._pool.put(runner)

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        while not self._pool.empty():
            self._pool.get_nowait().close()

    def __enter__(self) -> "ProcessSandbox":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
