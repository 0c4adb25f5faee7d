"""Shared test doubles: canned feedback, scripted agents, counting wrappers."""

import hashlib
from collections import deque

from codeevo.executor import CompilerFeedback
from codeevo.gateway import EvolvedInstruction, ReviewerVerdict
from codeevo.seeds import SeedInstruction


def ok_feedback(stdout="ok\n", wall=0.01):
    return CompilerFeedback(exit_status=0, stdout=stdout, stderr="", wall_time=wall, timed_out=False)


def crash_feedback(stderr="Traceback (most recent call last):\nAssertionError: nope", exit_status=1):
    return CompilerFeedback(exit_status=exit_status, stdout="", stderr=stderr, wall_time=0.01, timed_out=False)


def timeout_feedback(wall=10.0):
    return CompilerFeedback(exit_status=-9, stdout="", stderr="", wall_time=wall, timed_out=True)


def make_seed(i=0, *, keywords=("array", "hash table", "sorting"), source="unit",
              reference=None, instruction=None):
    sid = f"s{i:03d}"
    return SeedInstruction(
        id=sid,
        instruction=instruction or f"Compute answer variant {i}",
        keywords=tuple(keywords),
        source=source,
        reference_solution=reference,
    )


class QueueAgents:
    """Gateway double whose reviewer verdicts come from a fixed queue.

    Meant for single-lifecycle tests where call order is deterministic.
    Generated code and evolved instructions are unique per call so pair
    deduplication never interferes with a fixture.
    """

    def __init__(self, verdicts):
        self._verdicts = deque(verdicts)
        self._counter = 0
        self.evolve_calls = []
        self.refine_calls = 0

    def coder_generate(self, instruction):
        self._counter += 1
        return f"# candidate {self._counter}\nprint('ok')"

    def coder_refine(self, instruction, prior_code, feedback):
        self.refine_calls += 1
        assert feedback.strip(), "refinement message must be nonempty"
        return f"{prior_code}\n# repair {self.refine_calls}"

    def reviewer_evaluate(self, instruction, code, execution):
        ok = self._verdicts.popleft()
        if ok:
            return ReviewerVerdict("success", "matches the task", "Success\nmatches the task")
        return ReviewerVerdict("failure", "wrong on edge cases", "Failure\nwrong on edge cases")

    def reviewer_evolve(self, instruction, keywords, direction):
        self._counter += 1
        self.evolve_calls.append((direction, tuple(keywords)))
        text = f"{instruction} [{direction} step {self._counter}]"
        return EvolvedInstruction(text, direction, tuple(keywords))

    def reviewer_keywords(self, text):
        return ("array", "sorting")


class AllValidAgents:
    """Thread-safe gateway double: every candidate passes review."""

    def coder_generate(self, instruction):
        return f"print('solved')  # for: {instruction[:40]!r}"

    def coder_refine(self, instruction, prior_code, feedback):
        return f"{prior_code}\n# repaired"

    def reviewer_evaluate(self, instruction, code, execution):
        return ReviewerVerdict("success", "correct", "Success\ncorrect")

    def reviewer_evolve(self, instruction, keywords, direction):
        text = f"{instruction} [{direction}:{','.join(keywords)}]"
        return EvolvedInstruction(text, direction, tuple(keywords))

    def reviewer_keywords(self, text):
        return ("array", "hash table")


class CountingExecutor:
    """Wraps an executor and counts execute calls."""

    def __init__(self, inner):
        self._inner = inner
        self.calls = 0

    def execute(self, code, limits, profile="python"):
        self.calls += 1
        return self._inner.execute(code, limits, profile)


class RuleProvider:
    """Provider transport whose reply is a pure function of the request.

    Routing keys off the prompt's opening phrase, replies embed a digest of
    the prompt, so recording a run and replaying the table later always
    agree. This stands in for a live endpoint in end-to-end tests.
    """

    def complete(self, model, messages, temperature, max_tokens):
        prompt = messages[-1].content
        tag = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
        if prompt.startswith("Write python code to solve"):
            return f"Here you go.\n```python\nprint('solution {tag}')\n```"
        if prompt.startswith("The following is an evaluation and feedback"):
            return f"```python\nprint('repaired {tag}')\n```"
        if prompt.startswith("Next I will give you a coding problem"):
            return "Success\nThe output matches the task."
        if "knowledge related but more difficult" in prompt:
            return f"Raising the bar.\n###New\nSolve the extended task {tag}."
        if "knowledge related but simpler" in prompt:
            return f"Paring it down.\n###New\nSolve the reduced task {tag}."
        if prompt.startswith("You are given a text that includes"):
            return "Array, Loop"
        raise AssertionError(f"unroutable prompt starting {prompt[:60]!r}")
