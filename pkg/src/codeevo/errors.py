"""Typed error hierarchy shared across the engine.

Every failure the engine can surface maps to exactly one class below, so
callers can branch on type instead of scraping messages.
"""


class CodeEvoError(Exception):
    """Base class for all engine errors."""


# seed corpus

class MalformedRecord(CodeEvoError):
    """A corpus or dataset line is not a well-formed record."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(CodeEvoError):
    """Two corpus records share the same id."""

    def __init__(self, seed_id: str, lines: tuple[int, ...] = ()):
        where = f" (lines {', '.join(str(n) for n in lines)})" if lines else ""
        super().__init__(f"duplicate seed id {seed_id!r}{where}")
        self.seed_id = seed_id
        self.lines = lines


class EmptyInstruction(CodeEvoError):
    """A seed instruction is empty after trimming."""

    def __init__(self, seed_id: str):
        super().__init__(f"seed {seed_id!r} has an empty instruction")
        self.seed_id = seed_id


class EmptyKeywordReply(CodeEvoError):
    """A keyword-assignment reply parsed to zero usable tags."""


# keyword sampling

class EmptyKeywordSet(CodeEvoError):
    """Subset sampling was asked to draw from an empty tag set."""


# agent gateway

class ProviderError(CodeEvoError):
    """A chat provider failed to return a usable reply."""


class ReplyParseError(CodeEvoError):
    """Base class for agent replies that parse to no usable value."""


class NoCodeBlock(ReplyParseError):
    """A coder reply contains no fenced code block."""


class UnparseableVerdict(ReplyParseError):
    """A reviewer reply does not open with a recognizable verdict."""

    def __init__(self, raw_reply: str):
        head = raw_reply[:80].replace("\n", " ")
        super().__init__(f"no Success/Failure verdict in reply starting {head!r}")
        self.raw_reply = raw_reply


class MissingNewMarker(ReplyParseError):
    """An evolution reply lacks the ###New section."""


class EvolutionNoop(ReplyParseError):
    """An evolution reply restated the parent instruction verbatim."""


# sandboxed execution

class ProfileUnknown(CodeEvoError):
    """No execution profile is registered under the requested name."""

    def __init__(self, profile: str):
        super().__init__(f"unknown execution profile {profile!r}")
        self.profile = profile


class SandboxUnavailable(CodeEvoError):
    """The execution backend could not run the candidate at all."""


# hybrid feedback

class CalledOnValid(CodeEvoError):
    """A failure-only operation was invoked on a valid outcome."""


# dataset store

class StorageError(CodeEvoError):
    """A store operation failed at the filesystem level."""


class InvalidPair(CodeEvoError):
    """A pair that never passed validation was offered to the store."""


class RunNotFound(CodeEvoError):
    """The requested run directory holds no run manifest."""

    def __init__(self, run_dir):
        super().__init__(f"no run manifest under {run_dir}")
        self.run_dir = run_dir


class RunNotSealed(CodeEvoError):
    """An operation that requires a sealed run was invoked on an open one."""


class CorruptRecord(CodeEvoError):
    """A store file contains an unreadable line."""

    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


# quality analysis

class EmbedderError(CodeEvoError):
    """An embedding backend failed to produce vectors."""


class DegenerateEmbedding(CodeEvoError):
    """An embedding vector has zero norm and admits no cosine."""
