"""Seed corpus loading, validation, and sampling.

A corpus file is UTF-8 text with one JSON record per line (LF line ends).
Each record carries ``id``, ``instruction``, ``keywords``, ``source``, and
optionally ``reference_solution``; any other field rejects the record.
Keywords are normalized on load (whitespace collapsed, case-folded) and
deduplicated in first-seen order, so a loaded corpus is already canonical.
"""

import json
import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateId,
    EmptyInstruction,
    EmptyKeywordReply,
    MalformedRecord,
)

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "instruction", "keywords", "source")
OPTIONAL_FIELDS = ("reference_solution",)
KNOWN_FIELDS = frozenset(REQUIRED_FIELDS + OPTIONAL_FIELDS)


def normalize_keyword(text: str) -> str:
    """Collapse internal whitespace, trim, and case-fold a keyword tag."""
    return " ".join(text.split()).casefold()


def dedup_keywords(tags: Iterable[str]) -> tuple[str, ...]:
    """Normalize tags and drop duplicates, keeping first-seen order."""
    seen: dict[str, None] = {}
    for tag in tags:
        seen.setdefault(normalize_keyword(tag), None)
    return tuple(t for t in seen if t)


@dataclass(frozen=True)
class SeedInstruction:
    """One corpus entry: an instruction plus its normalized keyword tags."""

    id: str
    instruction: str
    keywords: tuple[str, ...]
    source: str
    reference_solution: str | None = None


@dataclass(frozen=True)
class Violation:
    """One problem found while scanning a corpus file."""

    line_no: int
    code: str
    message: str


@dataclass
class CorpusScan:
    """Everything a full scan of a corpus file produced."""

    seeds: list[SeedInstruction] = field(default_factory=list)
    errors: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)


def _parse_record(line_no: int, raw: str) -> SeedInstruction:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    unknown = sorted(set(obj) - KNOWN_FIELDS)
    if unknown:
        raise MalformedRecord(line_no, f"unknown fields: {', '.join(unknown)}")
    missing = [name for name in REQUIRED_FIELDS if name not in obj]
    if missing:
        raise MalformedRecord(line_no, f"missing fields: {', '.join(missing)}")

    seed_id = obj["id"]
    if not isinstance(seed_id, str) or not seed_id.strip():
        raise MalformedRecord(line_no, "id must be a nonempty string")
    instruction = obj["instruction"]
    if not isinstance(instruction, str):
        raise MalformedRecord(line_no, "instruction must be a string")
    if not instruction.strip():
        raise EmptyInstruction(seed_id)
    keywords = obj["keywords"]
    if not isinstance(keywords, list) or any(not isinstance(k, str) for k in keywords):
        raise MalformedRecord(line_no, "keywords must be an array of strings")
    if any(not normalize_keyword(k) for k in keywords):
        raise MalformedRecord(line_no, "keywords must be nonempty after normalization")
    source = obj["source"]
    if not isinstance(source, str):
        raise MalformedRecord(line_no, "source must be a string")
    reference = obj.get("reference_solution")
    if "reference_solution" in obj and not isinstance(reference, str):
        raise MalformedRecord(line_no, "reference_solution must be a string when present")

    return SeedInstruction(
        id=seed_id,
        instruction=instruction,
        keywords=dedup_keywords(keywords),
        source=source,
        reference_solution=reference,
    )


def scan_corpus(path: str | Path) -> CorpusScan:
    """Scan a corpus file end to end and collect every violation.

    Unlike :func:`load_corpus`, scanning never raises on bad content; it
    reports all errors so a validation command can list them in one pass.
    """
    scan = CorpusScan()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        scan.errors.append(Violation(0, "unreadable", f"cannot read {path}: {exc}"))
        return scan

    lines_by_id: dict[str, list[int]] = defaultdict(list)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            scan.errors.append(Violation(line_no, "blank_line", "blank line in corpus"))
            continue
        try:
            seed = _parse_record(line_no, raw)
        except MalformedRecord as exc:
            scan.errors.append(Violation(line_no, "malformed_record", str(exc)))
            continue
        except EmptyInstruction as exc:
            scan.errors.append(Violation(line_no, "empty_instruction", str(exc)))
            continue
        lines_by_id[seed.id].append(line_no)
        if not seed.keywords:
            scan.warnings.append(
                Violation(line_no, "no_keywords", f"seed {seed.id!r} has no keywords; auto-assignment possible")
            )
        scan.seeds.append(seed)

    for seed_id, line_nos in lines_by_id.items():
        if len(line_nos) > 1:
            scan.errors.append(
                Violation(
                    line_nos[1],
                    "duplicate_id",
                    str(DuplicateId(seed_id, tuple(line_nos))),
                )
            )
    return scan


def load_corpus(path: str | Path) -> list[SeedInstruction]:
    """Load a corpus file, rejecting the whole file on the first violation."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    seeds: list[SeedInstruction] = []
    lines_by_id: dict[str, list[int]] = defaultdict(list)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            raise MalformedRecord(line_no, "blank line in corpus")
        seed = _parse_record(line_no, raw)
        lines_by_id[seed.id].append(line_no)
        if len(lines_by_id[seed.id]) > 1:
            raise DuplicateId(seed.id, tuple(lines_by_id[seed.id]))
        seeds.append(seed)
    return seeds


def canonical_record(seed: SeedInstruction) -> str:
    """Serialize one seed with stable field order."""
    obj: dict[str, object] = {
        "id": seed.id,
        "instruction": seed.instruction,
        "keywords": list(seed.keywords),
        "source": seed.source,
    }
    if seed.reference_solution is not None:
        obj["reference_solution"] = seed.reference_solution
    return json.dumps(obj, ensure_ascii=False)


def write_corpus(seeds: Sequence[SeedInstruction], path: str | Path) -> None:
    """Write seeds as canonical line-delimited records (UTF-8, LF)."""
    body = "".join(canonical_record(seed) + "\n" for seed in seeds)
    Path(path).write_text(body, encoding="utf-8", newline="\n")


def stratified_source_sample(
    corpus: Sequence[SeedInstruction],
    quota: Mapping[str, int],
    rng: random.Random,
) -> list[SeedInstruction]:
    """Sample up to ``quota[source]`` seeds per source, without replacement.

    Shortfalls (a source with fewer seeds than its quota) are logged, not
    fatal; the sample simply takes every seed that source has.
    """
    by_source: dict[str, list[SeedInstruction]] = defaultdict(list)
    for seed in corpus:
        by_source[seed.source].append(seed)
    picked: list[SeedInstruction] = []
    for source in quota:
        want = quota[source]
        if want < 0:
            raise ValueError(f"quota for source {source!r} is negative")
        pool = by_source.get(source, [])
        take = min(want, len(pool))
        if take < want:
            log.warning("source %r has %d seeds, quota asked for %d", source, len(pool), want)
        picked.extend(rng.sample(pool, take))
    return picked


def assign_keywords(seed: SeedInstruction, reviewer) -> SeedInstruction:
    """Fill a keywordless seed by asking the reviewer agent for tags.

    ``reviewer`` is any object exposing ``reviewer_keywords(text) -> tags``.
    """
    if seed.keywords:
        raise ValueError(f"seed {seed.id!r} already has keywords")
    tags = dedup_keywords(reviewer.reviewer_keywords(seed.instruction))
    if not tags:
        raise EmptyKeywordReply(f"no usable tags for seed {seed.id!r}")
    return replace(seed, keywords=tags)
