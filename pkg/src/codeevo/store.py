"""Durable run storage: manifest, pair store, trajectory log, exports.

A run directory is created once, appended to while the run is open, and
sealed exactly once. Sealing deduplicates retained pairs by normalized
instruction text with a deterministic keep rule, rewrites the pair store
in canonical order (sorted by pair id), and freezes the manifest. Exports
and analyses operate on sealed runs only, so their inputs are immutable.

Appends happen under a lock as a single write plus flush per record, so
concurrent workers never interleave bytes within a line. Data is fsynced
at seal time.
"""

import json
import logging
import os
import random
import shutil
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    CorruptRecord,
    InvalidPair,
    RunNotFound,
    RunNotSealed,
    StorageError,
)
from .records import (
    InstructionCodePair,
    TrajectoryEvent,
    normalize_instruction,
    utc_now_rfc3339,
)
from .seeds import SeedInstruction, load_corpus, write_corpus
from .version import ENGINE_VERSION

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PAIRS_NAME = "pairs.jsonl"
TRAJECTORY_NAME = "trajectory.jsonl"
SEEDS_NAME = "seeds.jsonl"
REPLAY_NAME = "replay.json"
SUMMARY_NAME = "summary.json"
EXPORTS_DIR = "exports"

STATUS_OPEN = "open"
STATUS_SEALED = "sealed"

EXPORT_FORMATS = ("pairs", "chat")


@dataclass(frozen=True)
class ExportProfile:
    """Shape of a training export assembled from a sealed run."""

    format: str = "pairs"
    include_seed_references: bool = False
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.format not in EXPORT_FORMATS:
            raise ValueError(f"unknown export format {self.format!r}")

    def filename(self) -> str:
        refs = "-with-refs" if self.include_seed_references else ""
        return f"export-{self.format}{refs}-shuffle{self.shuffle_seed}.jsonl"


def _write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _read_jsonl(path: Path) -> list[tuple[int, dict]]:
    records = []
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorruptRecord(str(path), line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorruptRecord(str(path), line_no, "record is not a JSON object")
            records.append((line_no, obj))
    return records


class RunStore:
    """Handle on one run directory."""

    def __init__(self, run_dir: Path, manifest: dict):
        self._run_dir = Path(run_dir)
        self._manifest = manifest
        self._lock = threading.Lock()
        self._pairs_fh = None
        self._trajectory_fh = None

    # lifecycle

    @classmethod
    def create(
        cls,
        run_dir,
        config: dict,
        seeds: Sequence[SeedInstruction],
        replay_source=None,
    ) -> "RunStore":
        """Create a fresh run directory; refuses to touch a nonempty one."""
        run_dir = Path(run_dir)
        if run_dir.exists() and any(run_dir.iterdir()):
            raise StorageError(f"refusing to write into nonempty directory {run_dir}")
        try:
            run_dir.mkdir(parents=True, exist_ok=True)
            write_corpus(seeds, run_dir / SEEDS_NAME)
            replay_name = None
            if replay_source is not None:
                shutil.copyfile(replay_source, run_dir / REPLAY_NAME)
                replay_name = REPLAY_NAME
        except OSError as exc:
            raise StorageError(f"could not initialize run directory: {exc}") from exc
        manifest = {
            "engine": "codeevo",
            "version": ENGINE_VERSION,
            "status": STATUS_OPEN,
            "created_at": utc_now_rfc3339(),
            "sealed_at": None,
            "config": config,
            "files": {
                "seeds": SEEDS_NAME,
                "pairs": PAIRS_NAME,
                "trajectory": TRAJECTORY_NAME,
                "replay": replay_name,
            },
        }
        _write_json_atomic(run_dir / MANIFEST_NAME, manifest)
        return cls(run_dir, manifest)

    @classmethod
    def open(cls, run_dir) -> "RunStore":
        run_dir = Path(run_dir)
        manifest_path = run_dir / MANIFEST_NAME
        if not manifest_path.exists():
            raise RunNotFound(run_dir)
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        return cls(run_dir, manifest)

    @property
    def run_dir(self) -> Path:
        return self._run_dir

    @property
    def manifest(self) -> dict:
        return dict(self._manifest)

    @property
    def sealed(self) -> bool:
        return self._manifest.get("status") == STATUS_SEALED

    def close(self) -> None:
        with self._lock:
            for fh in (self._pairs_fh, self._trajectory_fh):
                if fh is not None:
                    fh.close()
            self._pairs_fh = None
            self._trajectory_fh = None

    # appends

    def _append_line(self, which: str, line: str) -> None:
        if self.sealed:
            raise StorageError("run is sealed; no further appends")
        try:
            if which == "pairs":
                if self._pairs_fh is None:
                    self._pairs_fh = open(self._run_dir / PAIRS_NAME, "a", encoding="utf-8", newline="\n")
                fh = self._pairs_fh
            else:
                if self._trajectory_fh is None:
                    self._trajectory_fh = open(self._run_dir / TRAJECTORY_NAME, "a", encoding="utf-8", newline="\n")
                fh = self._trajectory_fh
            fh.write(line + "\n")
            fh.flush()
        except OSError as exc:
            raise StorageError(f"append failed: {exc}") from exc

    def append_pair(self, pair: InstructionCodePair) -> None:
        """Append one retained pair; only validated pairs are accepted."""
        if not (pair.validation.compiler_ok and pair.validation.reviewer_verdict == "success"):
            raise InvalidPair(f"pair {pair.pair_id} was never validated")
        if not pair.instruction.strip() or not pair.solution.strip():
            raise InvalidPair(f"pair {pair.pair_id} has empty instruction or solution")
        with self._lock:
            self._append_line("pairs", pair.to_json_line())

    def append_event(self, event: TrajectoryEvent) -> None:
        with self._lock:
            self._append_line("trajectory", json.dumps(event.as_dict(), ensure_ascii=False))

    def append_events(self, events: Iterable[TrajectoryEvent]) -> None:
        with self._lock:
            for event in events:
                self._append_line("trajectory", json.dumps(event.as_dict(), ensure_ascii=False))

    # reads

    def seeds(self) -> list[SeedInstruction]:
        return load_corpus(self._run_dir / SEEDS_NAME)

    def load_pairs(self) -> list[InstructionCodePair]:
        pairs = []
        path = self._run_dir / PAIRS_NAME
        for line_no, obj in _read_jsonl(path):
            try:
                pairs.append(InstructionCodePair.from_dict(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptRecord(str(path), line_no, f"bad pair record: {exc}") from exc
        return pairs

    def load_events(self) -> list[TrajectoryEvent]:
        events = []
        path = self._run_dir / TRAJECTORY_NAME
        for line_no, obj in _read_jsonl(path):
            try:
                events.append(TrajectoryEvent.from_dict(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptRecord(str(path), line_no, f"bad event record: {exc}") from exc
        return events

    def load_trajectory(self, seed_id: str) -> list[TrajectoryEvent]:
        """Events for one seed in (round, seq) order; unknown seeds yield []."""
        mine = [e for e in self.load_events() if e.seed_id == seed_id]
        mine.sort(key=lambda e: (e.round, e.seq))
        return mine

    def processed_seed_ids(self) -> set[str]:
        """Seeds that already have any persisted trajectory, for resume."""
        return {e.seed_id for e in self.load_events()}

    # sealing

    def seal(self) -> dict:
        """Deduplicate, canonicalize the pair store, and freeze the run.

        Duplicate suppression keys on normalized instruction text; among
        duplicates the pair with the smallest (seed_id, round, pair_id)
        wins, which makes the outcome independent of worker scheduling.
        Each dropped pair leaves a discarded event in the trajectory.
        """
        if self.sealed:
            raise StorageError("run is already sealed")
        pairs = self.load_pairs()

        keep: dict[str, InstructionCodePair] = {}
        for pair in pairs:
            key = normalize_instruction(pair.instruction)
            cur = keep.get(key)
            if cur is None or (pair.seed_id, pair.round, pair.pair_id) < (cur.seed_id, cur.round, cur.pair_id):
                keep[key] = pair
        kept_ids = {p.pair_id for p in keep.values()}
        dropped = [p for p in pairs if p.pair_id not in kept_ids]

        if dropped:
            next_seq: dict[str, int] = {}
            for event in self.load_events():
                next_seq[event.seed_id] = max(next_seq.get(event.seed_id, -1), event.seq)
            for pair in dropped:
                seq = next_seq.get(pair.seed_id, -1) + 1
                next_seq[pair.seed_id] = seq
                kept = keep[normalize_instruction(pair.instruction)]
                self.append_event(
                    TrajectoryEvent(
                        seed_id=pair.seed_id,
                        round=pair.round,
                        seq=seq,
                        kind="discarded",
                        payload={
                            "reason": "duplicate_instruction",
                            "pair_id": pair.pair_id,
                            "kept_pair_id": kept.pair_id,
                        },
                        timestamp=utc_now_rfc3339(),
                    )
                )

        canonical = sorted(keep.values(), key=lambda p: p.pair_id)
        pairs_path = self._run_dir / PAIRS_NAME
        tmp = pairs_path.with_suffix(".jsonl.tmp")
        try:
            with self._lock:
                if self._pairs_fh is not None:
                    self._pairs_fh.close()
                    self._pairs_fh = None
                with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                    for pair in canonical:
                        fh.write(pair.to_json_line() + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, pairs_path)
                if self._trajectory_fh is not None:
                    self._trajectory_fh.flush()
                    os.fsync(self._trajectory_fh.fileno())
                    self._trajectory_fh.close()
                    self._trajectory_fh = None
        except OSError as exc:
            raise StorageError(f"seal failed: {exc}") from exc

        self._manifest["status"] = STATUS_SEALED
        self._manifest["sealed_at"] = utc_now_rfc3339()
        _write_json_atomic(self._run_dir / MANIFEST_NAME, self._manifest)
        return {"retained": len(canonical), "deduplicated": len(dropped)}

    def write_summary(self, summary: dict) -> None:
        _write_json_atomic(self._run_dir / SUMMARY_NAME, summary)


def export_run(store: RunStore, profile: ExportProfile) -> Path:
    """Assemble a training export from a sealed run.

    The record set is built in canonical order (pairs by pair id, then seed
    references in corpus order) and shuffled with the profile's fixed seed,
    so the same profile always yields a byte-identical file.
    """
    if not store.sealed:
        raise RunNotSealed("runs must be sealed before export")
    rows: list[dict] = []
    for pair in store.load_pairs():
        rows.append({"instruction": pair.instruction, "solution": pair.solution})
    if profile.include_seed_references:
        for seed in store.seeds():
            if seed.reference_solution is not None:
                rows.append({"instruction": seed.instruction, "solution": seed.reference_solution})

    if profile.format == "chat":
        rows = [
            {
                "messages": [
                    {"role": "user", "content": row["instruction"]},
                    {"role": "assistant", "content": row["solution"]},
                ]
            }
            for row in rows
        ]

    random.Random(profile.shuffle_seed).shuffle(rows)

    out_dir = store.run_dir / EXPORTS_DIR
    out_path = out_dir / profile.filename()
    tmp = out_path.with_suffix(".jsonl.tmp")
    try:
        out_dir.mkdir(exist_ok=True)
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, out_path)
    except OSError as exc:
        raise StorageError(f"export failed: {exc}") from exc
    return out_path
