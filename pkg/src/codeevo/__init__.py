"""Interaction-driven synthesis of validated instruction-code pairs.

A coder agent writes candidate solutions with embedded tests, a reviewer
agent judges them, a sandbox executes them, and only candidates that pass
both channels are retained. Valid instructions evolve harder under sampled
keyword subsets; failing ones get one simpler retry before the seed stops.
"""

from .version import ENGINE_VERSION as __version__

from .engine import LifecycleConfig, RunSummary, run_pipeline, run_seed_lifecycle
from .executor import (
    CompilerFeedback,
    ExecutionLimits,
    MockExecutor,
    RunnerBridgeExecutor,
    summarize_feedback,
)
from .feedback import HybridFeedback, classify_failure, fuse
from .gateway import (
    ChatProviderConfig,
    ChatTurn,
    EvolvedInstruction,
    Gateway,
    HttpChatProvider,
    RecordingProvider,
    ReviewerVerdict,
    ScriptedProvider,
    request_fingerprint,
)
from .keywords import KeywordSubsetPlan, SamplerConfig, sample_subsets, select_for_simplification
from .records import InstructionCodePair, PairValidation, TrajectoryEvent
from .seeds import SeedInstruction, load_corpus, scan_corpus, write_corpus
from .store import ExportProfile, RunStore, export_run

__all__ = [
    "__version__",
    "ChatProviderConfig",
    "ChatTurn",
    "CompilerFeedback",
    "EvolvedInstruction",
    "ExecutionLimits",
    "ExportProfile",
    "Gateway",
    "HttpChatProvider",
    "HybridFeedback",
    "InstructionCodePair",
    "KeywordSubsetPlan",
    "LifecycleConfig",
    "MockExecutor",
    "PairValidation",
    "RecordingProvider",
    "ReviewerVerdict",
    "RunnerBridgeExecutor",
    "RunStore",
    "RunSummary",
    "SamplerConfig",
    "ScriptedProvider",
    "SeedInstruction",
    "TrajectoryEvent",
    "classify_failure",
    "export_run",
    "fuse",
    "load_corpus",
    "request_fingerprint",
    "run_pipeline",
    "run_seed_lifecycle",
    "sample_subsets",
    "scan_corpus",
    "select_for_simplification",
    "summarize_feedback",
    "write_corpus",
]
