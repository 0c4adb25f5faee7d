"""Shared record types: trajectory events and retained pairs.

These are the only shapes that cross module boundaries into the store, so
they live apart from the engine to keep the dependency graph acyclic.
"""

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping

EVENT_KINDS = frozenset(
    {
        "instruction_issued",
        "code_generated",
        "executed",
        "reviewed",
        "fused",
        "refined",
        "evolved_harder",
        "simplified",
        "pair_retained",
        "discarded",
    }
)

PHASE_INITIAL = "initial"
PHASE_REFINE = "refine"
PHASE_SIMPLIFIED = "simplified"


def utc_now_rfc3339() -> str:
    """Current UTC instant in RFC 3339 form."""
    now = datetime.now(timezone.utc)
    return now.isoformat(timespec="microseconds").replace("+00:00", "Z")


def normalize_instruction(text: str) -> str:
    """Canonical form used for duplicate detection across retained pairs."""
    return " ".join(text.split()).casefold()


def pair_fingerprint(seed_id: str, round_index: int, instruction: str) -> str:
    """Deterministic pair id from lineage and instruction text."""
    blob = f"{seed_id}\x1f{round_index}\x1f{instruction}".encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class TrajectoryEvent:
    """One step in a seed's synthesis lifecycle."""

    seed_id: str
    round: int
    seq: int
    kind: str
    payload: Mapping
    timestamp: str

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.round < 0 or self.seq < 0:
            raise ValueError("round and seq must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "seed_id": self.seed_id,
            "round": self.round,
            "seq": self.seq,
            "kind": self.kind,
            "payload": dict(self.payload),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "TrajectoryEvent":
        return cls(
            seed_id=str(obj["seed_id"]),
            round=int(obj["round"]),
            seq=int(obj["seq"]),
            kind=str(obj["kind"]),
            payload=dict(obj["payload"]),
            timestamp=str(obj["timestamp"]),
        )


@dataclass(frozen=True)
class PairValidation:
    """Validation facts recorded alongside a retained pair."""

    compiler_ok: bool
    reviewer_verdict: str
    refined: bool

    def as_dict(self) -> dict:
        return {
            "compiler_ok": self.compiler_ok,
            "reviewer_verdict": self.reviewer_verdict,
            "refined": self.refined,
        }


@dataclass(frozen=True)
class InstructionCodePair:
    """One retained instruction-code pair with its lineage."""

    pair_id: str
    seed_id: str
    round: int
    instruction: str
    solution: str
    validation: PairValidation

    @classmethod
    def make(
        cls,
        seed_id: str,
        round_index: int,
        instruction: str,
        solution: str,
        *,
        refined: bool,
        reviewer_verdict: str = "success",
    ) -> "InstructionCodePair":
        return cls(
            pair_id=pair_fingerprint(seed_id, round_index, instruction),
            seed_id=seed_id,
            round=round_index,
            instruction=instruction,
            solution=solution,
            validation=PairValidation(True, reviewer_verdict, refined),
        )

    def as_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "seed_id": self.seed_id,
            "round": self.round,
            "instruction": self.instruction,
            "solution": self.solution,
            "validation": self.validation.as_dict(),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "InstructionCodePair":
        val = obj["validation"]
        return cls(
            pair_id=str(obj["pair_id"]),
            seed_id=str(obj["seed_id"]),
            round=int(obj["round"]),
            instruction=str(obj["instruction"]),
            solution=str(obj["solution"]),
            validation=PairValidation(
                compiler_ok=bool(val["compiler_ok"]),
                reviewer_verdict=str(val["reviewer_verdict"]),
                refined=bool(val["refined"]),
            ),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.as_dict(), ensure_ascii=False)
