"""Quality analyses over sealed runs and exported pair files.

Survival measures how often each evolution round keeps its pair, diversity
measures mean pairwise cosine similarity over embedded texts, the audit
re-executes solutions and classifies outcomes, and keyword frequency
profiles a corpus. All reports serialize to plain dictionaries.
"""

import json
import logging
import os
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .engine import tally_rounds
from .errors import (
    DegenerateEmbedding,
    EmbedderError,
    MalformedRecord,
    RunNotSealed,
)
from .executor import ExecutionLimits
from .gateway import DEFAULT_API_KEY_REF
from .seeds import SeedInstruction
from .store import RunStore

log = logging.getLogger(__name__)


# survival


@dataclass(frozen=True)
class RoundSurvival:
    """Attempted versus retained outcomes at one round depth."""

    round: int
    attempted: int
    retained: int
    rate: float
    simplified_attempted: int
    simplified_retained: int

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "attempted": self.attempted,
            "retained": self.retained,
            "rate": self.rate,
            "simplified_attempted": self.simplified_attempted,
            "simplified_retained": self.simplified_retained,
        }


@dataclass(frozen=True)
class SurvivalReport:
    per_round: tuple[RoundSurvival, ...]
    overall_rate: float

    def as_dict(self) -> dict:
        return {
            "per_round": [row.as_dict() for row in self.per_round],
            "overall_rate": self.overall_rate,
        }

    def format_table(self) -> str:
        lines = ["round  attempted  retained     rate"]
        for row in self.per_round:
            lines.append(
                f"{row.round:>5}  {row.attempted:>9}  {row.retained:>8}  {row.rate:>7.4f}"
            )
        lines.append(f"overall rate: {self.overall_rate:.4f}")
        return "\n".join(lines)


def survival(run_dir) -> SurvivalReport:
    """Per-round survival rates for a sealed run.

    A round's attempts are its non-simplification fused cycles; rates are
    retained/attempted. Simplification passes are reported alongside but
    never mixed into the headline rate. Rounds with zero attempts are
    omitted.
    """
    store = RunStore.open(run_dir)
    if not store.sealed:
        raise RunNotSealed("survival analysis requires a sealed run")
    counts = tally_rounds(store.load_events())
    rows = []
    total_attempted = 0
    total_retained = 0
    for round_index in sorted(counts):
        row = counts[round_index]
        if row["attempted"] == 0:
            continue
        total_attempted += row["attempted"]
        total_retained += row["retained"]
        rows.append(
            RoundSurvival(
                round=round_index,
                attempted=row["attempted"],
                retained=row["retained"],
                rate=row["retained"] / row["attempted"],
                simplified_attempted=row["simplified_attempted"],
                simplified_retained=row["simplified_retained"],
            )
        )
    overall = total_retained / total_attempted if total_attempted else 0.0
    return SurvivalReport(tuple(rows), overall)


# diversity


class HashEmbedder:
    """Deterministic text embedder for offline analysis and tests.

    Vectors are derived from SHA-256 of the text, so equal texts embed
    equally and the result never depends on the environment.
    """

    def __init__(self, dim: int = 16):
        if dim < 1:
            raise ValueError("dim must be at least 1")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        import hashlib

        out = []
        for text in texts:
            values: list[float] = []
            block = 0
            while len(values) < self.dim:
                digest = hashlib.sha256(f"{block}:{text}".encode("utf-8")).digest()
                values.extend(b / 127.5 - 1.0 for b in digest)
                block += 1
            out.append(values[: self.dim])
        return out


class HttpEmbeddingProvider:
    """Embeddings client for any compatible HTTP endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_ref: str = DEFAULT_API_KEY_REF,
        request_timeout: float = 60.0,
    ):
        self._endpoint = endpoint
        self._model = model
        self._api_key_ref = api_key_ref
        self._timeout = request_timeout

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self._api_key_ref, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = requests.post(
                self._endpoint,
                json={"model": self._model, "input": list(texts)},
                headers=headers,
                timeout=self._timeout,
            )
        except requests.RequestException as exc:
            raise EmbedderError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbedderError(f"embedding endpoint answered {resp.status_code}")
        try:
            data = sorted(resp.json()["data"], key=lambda row: row["index"])
            return [list(map(float, row["embedding"])) for row in data]
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbedderError(f"unusable embedding body: {exc}") from exc


@dataclass(frozen=True)
class DiversityReport:
    target: str
    sample_size: int
    mean_pairwise_cosine: float

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "sample_size": self.sample_size,
            "mean_pairwise_cosine": self.mean_pairwise_cosine,
        }


def diversity(
    texts: Sequence[str],
    embedder,
    sample_size: int = 1000,
    rng: random.Random | None = None,
    target: str = "instructions",
) -> DiversityReport:
    """Mean pairwise cosine similarity over a sampled subset of texts.

    Lower is more diverse. Sampling is without replacement; when fewer
    texts exist than requested, all of them are used.
    """
    if sample_size < 2:
        raise ValueError("sample_size must be at least 2")
    if len(texts) < 2:
        raise ValueError("diversity needs at least two texts")
    rng = rng or random.Random(0)
    n = min(sample_size, len(texts))
    sample = rng.sample(list(texts), n)

    vectors = embedder.embed(sample)
    if len(vectors) != n:
        raise EmbedderError(f"embedder returned {len(vectors)} vectors for {n} texts")
    matrix = np.asarray(vectors, dtype=np.float64)
    if matrix.ndim != 2:
        raise EmbedderError("embedding vectors have inconsistent dimensions")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateEmbedding("an embedding vector has zero norm")
    unit = matrix / norms[:, None]
    gram = unit @ unit.T
    upper = np.triu_indices(n, k=1)
    mean = float(gram[upper].mean())
    return DiversityReport(target=target, sample_size=n, mean_pairwise_cosine=mean)


# dataset audit


@dataclass(frozen=True)
class AuditReport:
    """Re-execution outcomes over a pair dataset; categories partition records."""

    records: int
    passed: int
    assertion_failures: int
    timeouts: int
    other: int
    error_counts: dict

    def as_dict(self) -> dict:
        return {
            "records": self.records,
            "pass": self.passed,
            "assertion_failure": self.assertion_failures,
            "timeout": self.timeouts,
            "other": self.other,
            "error_counts": dict(self.error_counts),
        }

    def format_table(self) -> str:
        lines = [
            f"records: {self.records}",
            f"pass: {self.passed}",
            f"assertion_failure: {self.assertion_failures}",
            f"timeout: {self.timeouts}",
            f"other: {self.other}",
        ]
        if self.error_counts:
            lines.append("errors:")
            for name in sorted(self.error_counts, key=lambda k: (-self.error_counts[k], k)):
                lines.append(f"  {name}: {self.error_counts[name]}")
        return "\n".join(lines)


_ERROR_NAME_RE = re.compile(r"\b([A-Za-z_]*(?:Error|Exception|Exit|Interrupt))\b")


def _error_signature(stderr: str) -> str:
    for line in reversed(stderr.strip().splitlines()):
        match = _ERROR_NAME_RE.search(line)
        if match:
            return match.group(1)
    return "unknown"


def dataset_texts(rows: Sequence[dict], target: str = "instructions") -> list[str]:
    """Pull analysis texts from dataset rows (flat pair rows or chat rows)."""
    if target not in ("instructions", "pairs"):
        raise ValueError(f"unknown diversity target {target!r}")
    texts = []
    for line_no, row in enumerate(rows, start=1):
        if "instruction" in row:
            instruction = row["instruction"]
            solution = row.get("solution", "")
        elif "messages" in row:
            try:
                instruction = row["messages"][0]["content"]
                solution = row["messages"][1]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise MalformedRecord(line_no, f"bad chat record: {exc}") from exc
        else:
            raise MalformedRecord(line_no, "record has neither instruction nor messages")
        if target == "instructions":
            texts.append(str(instruction))
        else:
            texts.append(f"{instruction}\n\n{solution}")
    return texts


def read_pair_texts(path) -> list[dict]:
    """Read a pair dataset file: either exported rows or full pair records."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not a JSON object")
            rows.append(obj)
    return rows


def audit_pairs(
    pairs_file,
    executor,
    limits: ExecutionLimits | None = None,
    profile: str = "python",
) -> AuditReport:
    """Re-execute every solution in a pair dataset and classify outcomes."""
    limits = limits or ExecutionLimits()
    rows = read_pair_texts(pairs_file)
    passed = assertion_failures = timeouts = other = 0
    error_counts: Counter = Counter()
    for row in rows:
        solution = row.get("solution")
        if not isinstance(solution, str) or not solution.strip():
            other += 1
            error_counts["missing_solution"] += 1
            continue
        feedback = executor.execute(solution, limits, profile)
        if feedback.compiler_ok:
            passed += 1
        elif feedback.timed_out:
            timeouts += 1
            error_counts["timeout"] += 1
        elif "AssertionError" in feedback.stderr:
            assertion_failures += 1
            error_counts["AssertionError"] += 1
        else:
            other += 1
            error_counts[_error_signature(feedback.stderr)] += 1
    return AuditReport(
        records=len(rows),
        passed=passed,
        assertion_failures=assertion_failures,
        timeouts=timeouts,
        other=other,
        error_counts=dict(error_counts),
    )


# keyword frequency


def keyword_frequency(corpus: Sequence[SeedInstruction], min_count: int = 1) -> list[tuple[str, int]]:
    """Tag histogram over a corpus, descending by count, ties lexicographic."""
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    counter: Counter = Counter()
    for seed in corpus:
        counter.update(seed.keywords)
    rows = [(tag, count) for tag, count in counter.items() if count >= min_count]
    rows.sort(key=lambda item: (-item[1], item[0]))
    return rows
