"""Chat gateway for the coder and reviewer roles.

One provider transport (live HTTP or scripted replay) serves both roles;
the gateway renders role prompts, sends them, and parses replies into
typed values. Every parse is total: a reply maps to a value or to a typed
error, never to an unhandled exception. In-flight requests are bounded by
the engine's worker pool, since each worker holds at most one open call.
"""

import hashlib
import json
import logging
import os
import re
import urllib.parse
from dataclasses import dataclass
from typing import Mapping, Sequence

import requests

from . import prompts
from .errors import (
    EmptyKeywordReply,
    EvolutionNoop,
    MissingNewMarker,
    NoCodeBlock,
    ProviderError,
    UnparseableVerdict,
)
from .executor import DEFAULT_OUTPUT_CAP, TIMEOUT_MARKER, CompilerFeedback, truncate_stream
from .seeds import dedup_keywords

log = logging.getLogger(__name__)

VERDICT_SUCCESS = "success"
VERDICT_FAILURE = "failure"

DIRECTION_HARDER = "harder"
DIRECTION_SIMPLER = "simpler"

DEFAULT_API_KEY_REF = "CODEEVO_API_KEY"

_VERDICT_TOKEN_RE = re.compile(r"[A-Za-z]+")
_FENCED_BLOCK_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_RATIONALE_JUNK = " \t\r\n:;,.*_#!-"


@dataclass(frozen=True)
class ChatTurn:
    """One message on the chat wire."""

    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown chat role {self.role!r}")
        if not self.content:
            raise ValueError("chat turn content must be nonempty")


@dataclass(frozen=True)
class ChatProviderConfig:
    """Connection and sampling settings shared by both roles."""

    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model_coder: str = "coder"
    model_reviewer: str = "reviewer"
    api_key_ref: str = DEFAULT_API_KEY_REF
    coder_temperature: float = 0.7
    reviewer_temperature: float = 0.2
    max_reply_tokens: int = 2048
    request_timeout: float = 60.0

    def __post_init__(self):
        parsed = urllib.parse.urlparse(self.endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"endpoint is not a well-formed URL: {self.endpoint!r}")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be positive")
        if self.max_reply_tokens < 1:
            raise ValueError("max_reply_tokens must be at least 1")
        if self.coder_temperature < 0 or self.reviewer_temperature < 0:
            raise ValueError("temperatures must be nonnegative")


@dataclass(frozen=True)
class ReviewerVerdict:
    """Parsed judgement: the leading verdict token plus the free-text rest."""

    verdict: str
    rationale: str
    raw_reply: str

    @property
    def is_success(self) -> bool:
        return self.verdict == VERDICT_SUCCESS


@dataclass(frozen=True)
class EvolvedInstruction:
    """A new instruction plus the keyword subset that conditioned it."""

    text: str
    direction: str
    conditioning_keywords: tuple[str, ...]


def request_fingerprint(model: str, messages: Sequence[ChatTurn]) -> str:
    """Canonical digest of a request's identity (model + messages only)."""
    payload = {
        "model": model,
        "messages": [{"content": t.content, "role": t.role} for t in messages],
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_verdict(reply: str) -> ReviewerVerdict:
    """Read the leading Success/Failure token; anything else is unparseable."""
    match = _VERDICT_TOKEN_RE.search(reply)
    if match is None:
        raise UnparseableVerdict(reply)
    token = match.group(0).casefold()
    if token == "success":
        verdict = VERDICT_SUCCESS
    elif token == "failure":
        verdict = VERDICT_FAILURE
    else:
        raise UnparseableVerdict(reply)
    rationale = reply[match.end():].lstrip(_RATIONALE_JUNK).rstrip()
    return ReviewerVerdict(verdict, rationale, reply)


def extract_code_block(reply: str) -> str:
    """Return the body of the first fenced code block in a reply."""
    match = _FENCED_BLOCK_RE.search(reply)
    if match is None:
        raise NoCodeBlock("reply contains no fenced code block")
    code = match.group(1).strip("\n")
    if not code.strip():
        raise NoCodeBlock("first fenced block is empty")
    return code


def extract_new_instruction(reply: str) -> str:
    """Return the text after the ###New marker, trimmed."""
    idx = reply.find(prompts.NEW_SECTION_MARKER)
    if idx < 0:
        raise MissingNewMarker("reply lacks a ###New section")
    text = reply[idx + len(prompts.NEW_SECTION_MARKER):].strip()
    if not text:
        raise MissingNewMarker("###New section is empty")
    return text


def parse_keyword_reply(reply: str) -> tuple[str, ...]:
    """Split a comma- or line-separated tag reply into normalized tags."""
    tags = []
    for part in re.split(r"[,\n]", reply):
        part = part.strip().strip("\"'")
        part = part.lstrip("-*• \t").rstrip(".")
        if part.strip():
            tags.append(part)
    deduped = dedup_keywords(tags)
    if not deduped:
        raise EmptyKeywordReply(f"no tags in reply starting {reply[:60]!r}")
    return deduped


class HttpChatProvider:
    """Chat-completions client for any compatible HTTP endpoint.

    The API key is read from the environment variable named by
    ``api_key_ref`` at call time and sent as a bearer token when present.
    Transport failures and 5xx answers get one retry; client errors and
    unusable bodies do not.
    """

    def __init__(self, config: ChatProviderConfig):
        self._config = config

    def complete(self, model: str, messages: Sequence[ChatTurn], temperature: float, max_tokens: int) -> str:
        payload = {
            "model": model,
            "messages": [{"role": t.role, "content": t.content} for t in messages],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self._config.api_key_ref, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error = None
        for attempt in range(2):
            try:
                resp = requests.post(
                    self._config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self._config.request_timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                log.warning("chat request attempt %d failed: %s", attempt + 1, exc)
                continue
            if resp.status_code >= 500:
                last_error = f"server error {resp.status_code}"
                log.warning("chat request attempt %d got %d", attempt + 1, resp.status_code)
                continue
            if resp.status_code != 200:
                raise ProviderError(f"endpoint answered {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"unusable completion body: {exc}") from exc
            if not isinstance(content, str):
                raise ProviderError("completion content is not a string")
            return content
        raise ProviderError(last_error or "chat request failed")


class ScriptedProvider:
    """Deterministic replay transport: request fingerprint to canned reply."""

    def __init__(self, replies: Mapping[str, str]):
        self._replies = dict(replies)

    @classmethod
    def from_file(cls, path) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict) or any(not isinstance(v, str) for v in obj.values()):
            raise ProviderError(f"replay file {path} is not a fingerprint-to-reply table")
        return cls(obj)

    def complete(self, model: str, messages: Sequence[ChatTurn], temperature: float, max_tokens: int) -> str:
        key = request_fingerprint(model, messages)
        try:
            return self._replies[key]
        except KeyError:
            head = messages[-1].content[:80].replace("\n", " ")
            raise ProviderError(
                f"no scripted reply for request {key[:12]} (last turn starts {head!r})"
            ) from None


class RecordingProvider:
    """Wraps a live transport and captures a replay table as it goes."""

    def __init__(self, inner):
        self._inner = inner
        self.replies: dict[str, str] = {}

    def complete(self, model: str, messages: Sequence[ChatTurn], temperature: float, max_tokens: int) -> str:
        reply = self._inner.complete(model, messages, temperature, max_tokens)
        self.replies[request_fingerprint(model, messages)] = reply
        return reply

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.replies, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")


class Gateway:
    """Role-level operations over one provider transport."""

    def __init__(self, provider, config: ChatProviderConfig):
        self._provider = provider
        self._config = config

    def _coder(self, messages: Sequence[ChatTurn]) -> str:
        return self._provider.complete(
            self._config.model_coder, messages,
            self._config.coder_temperature, self._config.max_reply_tokens,
        )

    def _reviewer(self, messages: Sequence[ChatTurn]) -> str:
        return self._provider.complete(
            self._config.model_reviewer, messages,
            self._config.reviewer_temperature, self._config.max_reply_tokens,
        )

    def coder_generate(self, instruction: str) -> str:
        """Ask the coder for a candidate solution with embedded test execution."""
        reply = self._coder([ChatTurn("user", prompts.render_coder_generate(instruction))])
        return extract_code_block(reply)

    def coder_refine(self, instruction: str, prior_code: str, feedback: str) -> str:
        """Ask the coder to repair its prior candidate given fused feedback."""
        messages = [
            ChatTurn("user", prompts.render_coder_generate(instruction)),
            ChatTurn("assistant", f"```python\n{prior_code}\n```"),
            ChatTurn("user", prompts.render_coder_refine(feedback)),
        ]
        return extract_code_block(self._coder(messages))

    def reviewer_evaluate(self, instruction: str, code: str, execution: CompilerFeedback) -> ReviewerVerdict:
        """Ask the reviewer to judge a candidate against its execution record."""
        outputs = truncate_stream(execution.stdout, DEFAULT_OUTPUT_CAP)
        errors = truncate_stream(execution.stderr, DEFAULT_OUTPUT_CAP)
        if execution.timed_out:
            errors = f"{errors}\n{TIMEOUT_MARKER}" if errors else TIMEOUT_MARKER
        prompt = prompts.render_reviewer_evaluate(instruction, code, outputs, errors)
        return parse_verdict(self._reviewer([ChatTurn("user", prompt)]))

    def reviewer_evolve(self, instruction: str, keywords: Sequence[str], direction: str) -> EvolvedInstruction:
        """Ask the reviewer for a harder or simpler variant of an instruction."""
        if direction == DIRECTION_HARDER:
            prompt = prompts.render_evolve_harder(instruction, keywords)
        elif direction == DIRECTION_SIMPLER:
            prompt = prompts.render_evolve_simpler(instruction, keywords)
        else:
            raise ValueError(f"unknown evolution direction {direction!r}")
        reply = self._reviewer([ChatTurn("user", prompt)])
        text = extract_new_instruction(reply)
        if text == instruction.strip():
            raise EvolutionNoop("evolved instruction restates the parent verbatim")
        return EvolvedInstruction(text, direction, tuple(keywords))

    def reviewer_keywords(self, text: str) -> tuple[str, ...]:
        """Ask the reviewer to tag a problem text with keyword concepts."""
        reply = self._reviewer([ChatTurn("user", prompts.render_keyword_request(text))])
        return parse_keyword_reply(reply)
