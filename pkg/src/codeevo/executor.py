"""Sandboxed execution of candidate programs.

The engine never runs candidate code in-process. It hands the source to an
execution backend and gets back a :class:`CompilerFeedback` record. Two
backends ship here: a table-driven mock for tests and scripted runs, and a
bridge that spawns an out-of-process guarded runner over a one-line JSON
request/response protocol.
"""

import hashlib
import json
import logging
import subprocess
import sys
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ProfileUnknown, SandboxUnavailable

log = logging.getLogger(__name__)

DEFAULT_WALL_TIMEOUT = 10.0
DEFAULT_CPU_TIMEOUT = 10.0
DEFAULT_MEMORY_CAP = 512 * 1024 * 1024
DEFAULT_OUTPUT_CAP = 64 * 1024
GRACE_SECONDS = 0.5

TRUNCATION_MARKER = "[truncated]"
TIMEOUT_MARKER = "[timed out]"

# extra slack on top of wall+grace before declaring the runner itself hung
BRIDGE_MARGIN_SECONDS = 10.0


@dataclass(frozen=True)
class CompilerFeedback:
    """Ground-truth outcome of one candidate execution."""

    exit_status: int
    stdout: str
    stderr: str
    wall_time: float
    timed_out: bool

    @property
    def compiler_ok(self) -> bool:
        """A run passes the compiler check iff it exited 0 without timing out."""
        return self.exit_status == 0 and not self.timed_out

    def as_dict(self) -> dict:
        return {
            "exit_status": self.exit_status,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "wall_time": self.wall_time,
            "timed_out": self.timed_out,
            "compiler_ok": self.compiler_ok,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "CompilerFeedback":
        return cls(
            exit_status=int(obj["exit_status"]),
            stdout=str(obj["stdout"]),
            stderr=str(obj["stderr"]),
            wall_time=float(obj["wall_time"]),
            timed_out=bool(obj["timed_out"]),
        )


@dataclass(frozen=True)
class ExecutionLimits:
    """Resource caps applied to every candidate run. Network is always off."""

    wall_timeout: float = DEFAULT_WALL_TIMEOUT
    cpu_timeout: float = DEFAULT_CPU_TIMEOUT
    memory_cap: int = DEFAULT_MEMORY_CAP
    output_cap: int = DEFAULT_OUTPUT_CAP

    def __post_init__(self):
        if self.wall_timeout <= 0 or self.cpu_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.memory_cap <= 0 or self.output_cap <= 0:
            raise ValueError("caps must be positive")

    @property
    def network_enabled(self) -> bool:
        return False

    def as_dict(self) -> dict:
        return {
            "wall_timeout": self.wall_timeout,
            "cpu_timeout": self.cpu_timeout,
            "memory_cap": self.memory_cap,
            "output_cap": self.output_cap,
        }


def truncate_stream(text: str, cap: int) -> str:
    """Cap a captured stream at ``cap`` bytes of UTF-8, marking the cut."""
    raw = text.encode("utf-8")
    if len(raw) <= cap:
        return text
    head = raw[:cap].decode("utf-8", errors="ignore")
    return head + TRUNCATION_MARKER


def summarize_feedback(feedback: CompilerFeedback, output_cap: int = DEFAULT_OUTPUT_CAP) -> str:
    """Render feedback as bounded, deterministic text for prompts and logs."""
    lines = [f"exit={feedback.exit_status}"]
    if feedback.timed_out:
        lines.append(TIMEOUT_MARKER)
    lines.append("--- stdout ---")
    lines.append(truncate_stream(feedback.stdout, output_cap))
    lines.append("--- stderr ---")
    lines.append(truncate_stream(feedback.stderr, output_cap))
    return "\n".join(lines)


def code_digest(code: str) -> str:
    """Stable key for code text, used by hash-keyed fixture tables."""
    return hashlib.sha256(code.encode("utf-8")).hexdigest()


class MockExecutor:
    """Pure table lookup from code text to canned feedback.

    With ``hashed=True`` the table is keyed by ``code_digest(code)`` instead
    of the raw text, which keeps fixture files readable. A ``default``
    feedback, when given, answers any code missing from the table.
    """

    def __init__(
        self,
        lookup: Mapping[str, CompilerFeedback] | None = None,
        *,
        hashed: bool = False,
        default: CompilerFeedback | None = None,
    ):
        self._lookup = dict(lookup or {})
        self._hashed = hashed
        self._default = default
        self.calls = 0

    @classmethod
    def from_fixture_file(cls, path) -> "MockExecutor":
        """Load a fixture table: {"default": record|null, "codes": {sha256: record}}."""
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        default = obj.get("default")
        codes = obj.get("codes") or {}
        return cls(
            {key: CompilerFeedback.from_dict(rec) for key, rec in codes.items()},
            hashed=True,
            default=CompilerFeedback.from_dict(default) if default else None,
        )

    def execute(self, code: str, limits: ExecutionLimits, profile: str = "python") -> CompilerFeedback:
        self.calls += 1
        key = code_digest(code) if self._hashed else code
        found = self._lookup.get(key)
        if found is not None:
            return found
        if self._default is not None:
            return self._default
        raise SandboxUnavailable(f"no fixture feedback for code with digest {code_digest(code)[:12]}")


class RunnerBridgeExecutor:
    """Executes candidates by spawning a guarded runner process per request.

    Profiles map a language name to the runner argv. The runner receives one
    JSON request line on stdin and must answer with one JSON result line on
    stdout; a nonzero runner exit or an unreadable reply means the sandbox
    itself is broken, not the candidate.
    """

    def __init__(self, profiles: Mapping[str, Sequence[str]] | None = None):
        if profiles is None:
            profiles = {"python": (sys.executable, "-m", "guarded_runner")}
        self._profiles = {name: tuple(argv) for name, argv in profiles.items()}

    def execute(self, code: str, limits: ExecutionLimits, profile: str = "python") -> CompilerFeedback:
        if not code:
            raise ValueError("cannot execute empty code")
        argv = self._profiles.get(profile)
        if argv is None:
            raise ProfileUnknown(profile)
        request = json.dumps(
            {
                "code": code,
                "wall_timeout": limits.wall_timeout,
                "cpu_timeout": limits.cpu_timeout,
                "memory_cap": limits.memory_cap,
                "output_cap": limits.output_cap,
            },
            ensure_ascii=False,
        )
        deadline = limits.wall_timeout + GRACE_SECONDS + BRIDGE_MARGIN_SECONDS
        try:
            proc = subprocess.run(
                list(argv),
                input=request + "\n",
                capture_output=True,
                text=True,
                timeout=deadline,
            )
        except FileNotFoundError as exc:
            raise SandboxUnavailable(f"runner command not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SandboxUnavailable(f"runner unresponsive after {deadline:.1f}s") from exc
        except OSError as exc:
            raise SandboxUnavailable(f"could not spawn runner: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else "no diagnostics"
            raise SandboxUnavailable(f"runner exited {proc.returncode}: {tail}")
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if not lines:
            raise SandboxUnavailable("runner produced no result record")
        try:
            record = json.loads(lines[-1])
            return CompilerFeedback.from_dict(record)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SandboxUnavailable(f"unreadable runner result: {exc}") from exc
