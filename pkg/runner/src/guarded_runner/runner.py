"""Execute one untrusted Python program under resource limits.

The process reads a single JSON request line from standard input, runs the
candidate code in a child process inside an ephemeral working directory,
and emits exactly one JSON result line on standard output. The candidate's
outcome, including crashes and timeouts, is data in the result record; the
runner itself exits nonzero only on internal faults such as a malformed
request.

Limits and semantics:

- ``wall_timeout``: after this many seconds the child's process group gets
  SIGTERM, then SIGKILL after a 0.5 s grace period; ``timed_out`` is true
  exactly when this wall timeout fired.
- ``cpu_timeout``: enforced by RLIMIT_CPU in the child; exceeding it kills
  the child with SIGXCPU, which shows up as a negative exit status and does
  not count as ``timed_out``.
- ``memory_cap``: RLIMIT_AS in bytes; exceeding it surfaces as an ordinary
  candidate failure (usually a MemoryError traceback).
- ``output_cap``: per-stream byte cap; anything beyond it is discarded and
  the stream ends with a ``[truncated]`` marker.

The child runs in a fresh session with a minimal environment (a fixed
UTF-8 locale and nothing else), so no proxy or credential variables leak
into candidate code.
"""

import json
import os
import resource
import signal
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass

GRACE_SECONDS = 0.5
TRUNCATION_MARKER = "[truncated]"
READ_BLOCK = 65536

CHILD_ENV = {
    "LANG": "C.UTF-8",
    "LC_ALL": "C.UTF-8",
    "PYTHONIOENCODING": "utf-8",
}

REQUIRED_FIELDS = ("code", "wall_timeout", "cpu_timeout", "memory_cap", "output_cap")


class RequestError(Exception):
    """The request line cannot be turned into a well-formed run."""


@dataclass(frozen=True)
class RunnerRequest:
    """One candidate program plus the limits to run it under."""

    code: str
    wall_timeout: float
    cpu_timeout: float
    memory_cap: int
    output_cap: int


def parse_request(line: str) -> RunnerRequest:
    """Validate a raw request line into a RunnerRequest."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError(f"request is not valid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise RequestError("request must be a JSON object")
    missing = [name for name in REQUIRED_FIELDS if name not in obj]
    if missing:
        raise RequestError(f"request lacks fields: {', '.join(missing)}")
    code = obj["code"]
    if not isinstance(code, str) or not code.strip():
        raise RequestError("code must be a nonempty string")
    try:
        wall = float(obj["wall_timeout"])
        cpu = float(obj["cpu_timeout"])
        memory = int(obj["memory_cap"])
        output = int(obj["output_cap"])
    except (TypeError, ValueError) as exc:
        raise RequestError(f"limit fields must be numeric: {exc}") from exc
    if wall <= 0 or cpu <= 0 or memory <= 0 or output <= 0:
        raise RequestError("all limits must be positive")
    return RunnerRequest(code, wall, cpu, memory, output)


def _apply_child_limits(cpu_timeout: float, memory_cap: int):
    """Build the preexec hook that installs rlimits inside the child."""

    def apply():
        cpu_seconds = max(1, int(cpu_timeout + 0.999))
        resource.setrlimit(resource.RLIMIT_CPU, (cpu_seconds, cpu_seconds + 1))
        resource.setrlimit(resource.RLIMIT_AS, (memory_cap, memory_cap))
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))

    return apply


def _drain(pipe, cap: int) -> str:
    """Consume a child stream fully, keeping at most ``cap`` bytes of it.

    Reading to EOF even after the cap keeps the child from blocking on a
    full pipe; the surplus is discarded.
    """
    chunks = []
    kept = 0
    truncated = False
    while True:
        block = pipe.read(READ_BLOCK)
        if not block:
            break
        if kept < cap:
            take = block[: cap - kept]
            chunks.append(take)
            kept += len(take)
            if len(take) < len(block):
                truncated = True
        else:
            truncated = True
    pipe.close()
    text = b"".join(chunks).decode("utf-8", errors="ignore")
    return text + TRUNCATION_MARKER if truncated else text


def _kill_group(pid: int, sig: int) -> None:
    try:
        os.killpg(pid, sig)
    except (ProcessLookupError, PermissionError):
        pass


def run_once(request: RunnerRequest) -> dict:
    """Run the candidate to completion and return the result record."""
    with tempfile.TemporaryDirectory(prefix="guarded-") as workdir:
        script = os.path.join(workdir, "main.py")
        with open(script, "w", encoding="utf-8") as fh:
            fh.write(request.code)

        start = time.monotonic()
        child = subprocess.Popen(
            [sys.executable, script],
            cwd=workdir,
            env=dict(CHILD_ENV),
            stdin=subprocess.DEVNULL,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
            preexec_fn=_apply_child_limits(request.cpu_timeout, request.memory_cap),
        )

        captured = {}

        def reader(name, pipe):
            captured[name] = _drain(pipe, request.output_cap)

        threads = [
            threading.Thread(target=reader, args=("stdout", child.stdout)),
            threading.Thread(target=reader, args=("stderr", child.stderr)),
        ]
        for thread in threads:
            thread.start()

        timed_out = False
        try:
            child.wait(timeout=request.wall_timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_group(child.pid, signal.SIGTERM)
            try:
                child.wait(timeout=GRACE_SECONDS)
            except subprocess.TimeoutExpired:
                _kill_group(child.pid, signal.SIGKILL)
                child.wait()
        wall_time = time.monotonic() - start

        for thread in threads:
            thread.join(timeout=5.0)

        return {
            "exit_status": child.returncode,
            "stdout": captured.get("stdout", ""),
            "stderr": captured.get("stderr", ""),
            "wall_time": wall_time,
            "timed_out": timed_out,
        }


def main(stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    line = stdin.readline()
    if not line.strip():
        print("guarded-runner: empty request", file=sys.stderr)
        return 2
    try:
        request = parse_request(line)
    except RequestError as exc:
        print(f"guarded-runner: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_once(request)
    except OSError as exc:
        print(f"guarded-runner: cannot run candidate: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(result, ensure_ascii=False), file=stdout, flush=True)
    return 0
