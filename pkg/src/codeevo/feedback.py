"""Hybrid fusion of compiler ground truth and reviewer judgement.

A round is valid only when both channels agree the candidate is good: the
program exited cleanly and the reviewer said Success. Either channel alone
can veto. The fused record always carries a refinement message so a failed
round can be fed back to the coder verbatim.
"""

from dataclasses import dataclass

from .errors import CalledOnValid
from .executor import CompilerFeedback, summarize_feedback
from .gateway import ReviewerVerdict

EXECUTION_FAILURE = "execution_failure"
JUDGMENT_FAILURE = "judgment_failure"
BOTH_FAILED = "both"


@dataclass(frozen=True)
class HybridFeedback:
    """Joint outcome of one generate-execute-evaluate cycle."""

    valid: bool
    compiler: CompilerFeedback
    reviewer: ReviewerVerdict
    refinement_message: str


def fuse(compiler: CompilerFeedback, reviewer: ReviewerVerdict) -> HybridFeedback:
    """Combine both channels; validity is their conjunction."""
    valid = compiler.compiler_ok and reviewer.is_success
    verdict_word = "Success" if reviewer.is_success else "Failure"
    message = (
        f"{summarize_feedback(compiler)}\n\n"
        f"Reviewer verdict: {verdict_word}\n"
        f"{reviewer.rationale}"
    ).rstrip()
    return HybridFeedback(valid, compiler, reviewer, message)


def classify_failure(feedback: HybridFeedback) -> str:
    """Name which channel vetoed a failed round."""
    if feedback.valid:
        raise CalledOnValid("cannot classify a valid outcome as a failure")
    compiler_bad = not feedback.compiler.compiler_ok
    reviewer_bad = not feedback.reviewer.is_success
    if compiler_bad and reviewer_bad:
        return BOTH_FAILED
    if compiler_bad:
        return EXECUTION_FAILURE
    return JUDGMENT_FAILURE
