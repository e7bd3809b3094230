"""Isolated execution of candidate programs.

Each request runs in a fresh child process started in its own session,
with a private temporary working directory and a cleared environment
(minimal allowlist only).  The whole process tree is killed at the
deadline, so no request can block the runner for more than the request
timeout plus a small grace period.

Verdict semantics: exit 0 -> pass, nonzero exit -> fail, killed by the
deadline -> timeout, runner-internal fault -> error.
"""

import json
import os
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import IO

STDERR_TAIL_LIMIT = 2048

# Environment variables forwarded into the child; everything else is
# dropped.  HOME and TMPDIR are pointed at the scratch directory.
_ENV_ALLOWLIST = ("PATH", "LANG", "LC_ALL", "LC_CTYPE", "TZ")


@dataclass(frozen=True)
class ExecRequest:
    id: str
    program: str
    timeout_s: float

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")


@dataclass(frozen=True)
class ExecVerdict:
    id: str
    status: str  # pass | fail | timeout | error
    stderr_tail: str = ""
    duration_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "stderr_tail": self.stderr_tail,
            "duration_ms": self.duration_ms,
        }


def _child_env(workdir: str) -> dict[str, str]:
    env = {name: os.environ[name] for name in _ENV_ALLOWLIST if name in os.environ}
    env["HOME"] = workdir
    env["TMPDIR"] = workdir
    env["PYTHONIOENCODING"] = "utf-8"
    return env


def _stderr_tail(path: str) -> str:
    try:
        with open(path, "rb") as handle:
            handle.seek(0, os.SEEK_END)
            size = handle.tell()
            handle.seek(max(0, size - STDERR_TAIL_LIMIT))
            return handle.read().decode("utf-8", errors="replace")
    except OSError:
        return ""


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        try:
            proc.kill()
        except ProcessLookupError:
            pass


def run_one(req: ExecRequest) -> ExecVerdict:
    """Execute one program and always return a verdict."""
    started = time.monotonic()
    try:
        with tempfile.TemporaryDirectory(prefix="fim-sandbox-") as workdir:
            program_path = os.path.join(workdir, "candidate.py")
            with open(program_path, "w", encoding="utf-8") as handle:
                handle.write(req.program)
            stderr_path = os.path.join(workdir, "stderr.log")
            with open(stderr_path, "wb") as stderr_handle:
                proc = subprocess.Popen(
                    [sys.executable, "-I", program_path],
                    cwd=workdir,
                    env=_child_env(workdir),
                    stdin=subprocess.DEVNULL,
                    stdout=subprocess.DEVNULL,
                    stderr=stderr_handle,
                    start_new_session=True,
                )
                try:
                    returncode = proc.wait(timeout=req.timeout_s)
                    status = "pass" if returncode == 0 else "fail"
                except subprocess.TimeoutExpired:
                    _kill_tree(proc)
                    proc.wait()
                    status = "timeout"
            tail = _stderr_tail(stderr_path)
    except Exception as exc:  # runner fault must never hang or escape
        duration_ms = (time.monotonic() - started) * 1000.0
        return ExecVerdict(
            id=req.id,
            status="error",
            stderr_tail=f"runner fault: {exc!r}"[:STDERR_TAIL_LIMIT],
            duration_ms=duration_ms,
        )
    duration_ms = (time.monotonic() - started) * 1000.0
    return ExecVerdict(
        id=req.id, status=status, stderr_tail=tail, duration_ms=duration_ms
    )


def _request_from_obj(obj: object) -> ExecRequest:
    if not isinstance(obj, dict):
        raise ValueError("request must be a JSON object")
    req_id = obj.get("id")
    program = obj.get("program")
    timeout_s = obj.get("timeout_s")
    if not isinstance(req_id, str):
        raise ValueError("id must be a string")
    if not isinstance(program, str):
        raise ValueError("program must be a string")
    if not isinstance(timeout_s, (int, float)) or isinstance(timeout_s, bool):
        raise ValueError("timeout_s must be a number")
    return ExecRequest(id=req_id, program=program, timeout_s=float(timeout_s))


def serve(stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    """Process requests line by line until end-of-input.

    Malformed lines produce an error verdict (id "?" unless the line at
    least carried a usable id) and the loop continues.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        obj = None
        try:
            obj = json.loads(line)
            req = _request_from_obj(obj)
        except (ValueError, TypeError) as exc:
            req_id = "?"
            if isinstance(obj, dict) and isinstance(obj.get("id"), str):
                req_id = obj["id"]
            verdict = ExecVerdict(
                id=req_id,
                status="error",
                stderr_tail=f"bad request: {exc}"[:STDERR_TAIL_LIMIT],
            )
        else:
            verdict = run_one(req)
        stdout.write(json.dumps(verdict.to_dict(), ensure_ascii=False) + "\n")
        stdout.flush()
    return 0


def main() -> int:
    return serve()


if __name__ == "__main__":
    sys.exit(main())
