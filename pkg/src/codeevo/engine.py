"""The synthesis loop: one lifecycle per seed, a worker pool per run.

Each seed walks up to ``max_iterations`` rounds. A round issues the current
instruction to the coder, executes the candidate, asks the reviewer for a
judgement, and fuses both channels. A failed round may get up to
``refine_rounds`` repair cycles before it counts as invalid. A valid round
retains the pair and evolves the instruction harder, conditioned on the
next keyword subset from the seed's sampling plan. The first invalid round
triggers exactly one simplification attempt and then ends the lifecycle.

Per-seed randomness is seeded as ``f"{rng_seed}:{seed_id}"`` so outcomes do
not depend on worker count or scheduling order.
"""

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Sequence

from .errors import CodeEvoError, UnparseableVerdict
from .executor import ExecutionLimits
from .feedback import HybridFeedback, fuse
from .gateway import (
    DIRECTION_HARDER,
    DIRECTION_SIMPLER,
    VERDICT_FAILURE,
    ReviewerVerdict,
)
from .keywords import SamplerConfig, sample_subsets, select_for_simplification
from .records import (
    PHASE_INITIAL,
    PHASE_REFINE,
    PHASE_SIMPLIFIED,
    InstructionCodePair,
    TrajectoryEvent,
    utc_now_rfc3339,
)
from .seeds import SeedInstruction, assign_keywords, dedup_keywords
from .store import RunStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LifecycleConfig:
    """Knobs for one synthesis run."""

    max_iterations: int = 5
    refine_rounds: int = 1
    sampler: SamplerConfig = SamplerConfig(r_min=1, r_max=3, t_max=5)
    limits: ExecutionLimits = ExecutionLimits()
    rng_seed: int = 0
    language_profile: str = "python"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be nonnegative")


@dataclass
class RunSummary:
    """What one run produced, per round and overall."""

    seeds_total: int
    seeds_completed: int
    pairs_retained: int
    pairs_deduplicated: int
    per_round: list[dict]
    failures: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "seeds_total": self.seeds_total,
            "seeds_completed": self.seeds_completed,
            "pairs_retained": self.pairs_retained,
            "pairs_deduplicated": self.pairs_deduplicated,
            "per_round": self.per_round,
            "failures": self.failures,
        }

    def format_table(self) -> str:
        lines = [
            f"seeds: {self.seeds_completed}/{self.seeds_total} completed",
            f"pairs retained: {self.pairs_retained} (deduplicated: {self.pairs_deduplicated})",
            "round  attempted  retained",
        ]
        for row in self.per_round:
            lines.append(f"{row['round']:>5}  {row['attempted']:>9}  {row['retained']:>8}")
        if self.failures:
            lines.append(f"failed seeds: {len(self.failures)}")
            for item in self.failures[:20]:
                lines.append(f"  {item['seed_id']}: {item['reason']}")
            if len(self.failures) > 20:
                lines.append(f"  ... and {len(self.failures) - 20} more")
        return "\n".join(lines)


class _EventLog:
    """Per-seed event recorder with a monotonically increasing sequence."""

    def __init__(self, seed_id: str):
        self._seed_id = seed_id
        self._seq = 0
        self.events: list[TrajectoryEvent] = []

    def emit(self, kind: str, round_index: int, payload: dict) -> None:
        self.events.append(
            TrajectoryEvent(
                seed_id=self._seed_id,
                round=round_index,
                seq=self._seq,
                kind=kind,
                payload=payload,
                timestamp=utc_now_rfc3339(),
            )
        )
        self._seq += 1


def _snake_case(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def _execute_and_review(
    instruction: str,
    code: str,
    round_index: int,
    phase: str,
    config: LifecycleConfig,
    gateway,
    executor,
    events: _EventLog,
) -> HybridFeedback:
    """One execute-evaluate-fuse pass over a candidate."""
    execution = executor.execute(code, config.limits, config.language_profile)
    events.emit("executed", round_index, {**execution.as_dict(), "phase": phase})
    try:
        verdict = gateway.reviewer_evaluate(instruction, code, execution)
        parse_error = False
    except UnparseableVerdict as exc:
        # an unreadable judgement never validates a round; keep the raw
        # reply in the trajectory and treat the verdict as failure
        verdict = ReviewerVerdict(
            VERDICT_FAILURE,
            f"reviewer reply had no recognizable verdict: {exc}",
            exc.raw_reply,
        )
        parse_error = True
    events.emit(
        "reviewed",
        round_index,
        {
            "verdict": verdict.verdict,
            "rationale": verdict.rationale,
            "parse_error": parse_error,
            "phase": phase,
        },
    )
    fused = fuse(execution, verdict)
    events.emit("fused", round_index, {"valid": fused.valid, "phase": phase})
    return fused


def run_seed_lifecycle(
    seed: SeedInstruction,
    config: LifecycleConfig,
    gateway,
    executor,
) -> tuple[list[InstructionCodePair], list[TrajectoryEvent]]:
    """Run one seed to completion. Never raises on per-seed failures.

    Provider, sandbox, and reply-parse failures abort the seed with a
    ``discarded`` event; the pairs retained before the failure survive.
    """
    rng = random.Random(f"{config.rng_seed}:{seed.id}")
    events = _EventLog(seed.id)
    pairs: list[InstructionCodePair] = []
    round_index = 0
    try:
        plan = sample_subsets(seed.keywords, config.sampler, rng)
        subsets = list(plan.subsets)
        next_subset = 0
        instruction = seed.instruction
        parent_subset: tuple[str, ...] = ()

        while round_index < config.max_iterations:
            events.emit(
                "instruction_issued",
                round_index,
                {
                    "instruction": instruction,
                    "origin": "seed" if round_index == 0 else "evolved_harder",
                },
            )
            code = gateway.coder_generate(instruction)
            events.emit("code_generated", round_index, {"code": code, "phase": PHASE_INITIAL})
            fused = _execute_and_review(
                instruction, code, round_index, PHASE_INITIAL, config, gateway, executor, events
            )

            attempts = 0
            while not fused.valid and attempts < config.refine_rounds:
                attempts += 1
                code = gateway.coder_refine(instruction, code, fused.refinement_message)
                events.emit("refined", round_index, {"code": code, "attempt": attempts})
                fused = _execute_and_review(
                    instruction, code, round_index, PHASE_REFINE, config, gateway, executor, events
                )

            if fused.valid:
                pair = InstructionCodePair.make(
                    seed.id, round_index, instruction, code, refined=attempts > 0
                )
                pairs.append(pair)
                events.emit(
                    "pair_retained",
                    round_index,
                    {"pair_id": pair.pair_id, "refined": attempts > 0, "simplified": False},
                )
                if next_subset >= len(subsets):
                    log.debug("seed %s: keyword plan exhausted at round %d", seed.id, round_index)
                    break
                subset = subsets[next_subset]
                next_subset += 1
                evolved = gateway.reviewer_evolve(instruction, subset, DIRECTION_HARDER)
                events.emit(
                    "evolved_harder",
                    round_index,
                    {"instruction": evolved.text, "keywords": list(subset)},
                )
                parent_subset = subset
                instruction = evolved.text
                round_index += 1
                continue

            # first invalid round: one simplification attempt, then stop
            usable = dedup_keywords(list(seed.keywords) + list(parent_subset))
            retained_tags = select_for_simplification(usable, rng)
            simpler = gateway.reviewer_evolve(instruction, retained_tags, DIRECTION_SIMPLER)
            events.emit(
                "simplified",
                round_index,
                {"instruction": simpler.text, "keywords": list(retained_tags)},
            )
            code = gateway.coder_generate(simpler.text)
            events.emit("code_generated", round_index, {"code": code, "phase": PHASE_SIMPLIFIED})
            fused = _execute_and_review(
                simpler.text, code, round_index, PHASE_SIMPLIFIED, config, gateway, executor, events
            )
            if fused.valid:
                pair = InstructionCodePair.make(
                    seed.id, round_index, simpler.text, code, refined=False
                )
                pairs.append(pair)
                events.emit(
                    "pair_retained",
                    round_index,
                    {"pair_id": pair.pair_id, "refined": False, "simplified": True},
                )
            else:
                events.emit("discarded", round_index, {"reason": "simplification_failed"})
            break
    except CodeEvoError as exc:
        events.emit(
            "discarded",
            round_index,
            {"reason": _snake_case(type(exc).__name__), "detail": str(exc)},
        )
    return pairs, events.events


def ensure_keywords(
    corpus: Sequence[SeedInstruction],
    gateway,
) -> tuple[list[SeedInstruction], list[dict]]:
    """Auto-assign tags to keywordless seeds; drop the irrecoverable ones.

    Assignment retries once per seed; a seed that still has no usable tags
    is excluded from the run and reported, never fatal.
    """
    ready: list[SeedInstruction] = []
    dropped: list[dict] = []
    for seed in corpus:
        if seed.keywords:
            ready.append(seed)
            continue
        assigned = None
        last_error = "unknown"
        for _ in range(2):
            try:
                assigned = assign_keywords(seed, gateway)
                break
            except CodeEvoError as exc:
                last_error = str(exc)
        if assigned is None:
            log.warning("dropping seed %s: keyword assignment failed (%s)", seed.id, last_error)
            dropped.append({"seed_id": seed.id, "reason": f"keyword_assignment_failed: {last_error}"})
        else:
            ready.append(assigned)
    return ready, dropped


def tally_rounds(events: Sequence[TrajectoryEvent]) -> dict[int, dict]:
    """Count attempted and retained outcomes per round.

    Attempts are fused initial/refine cycles; simplification passes are
    counted separately so headline rates reflect the evolved chain only.
    """
    counts: dict[int, dict] = {}
    for event in events:
        row = counts.setdefault(
            event.round,
            {"attempted": 0, "retained": 0, "simplified_attempted": 0, "simplified_retained": 0},
        )
        if event.kind == "fused":
            if event.payload.get("phase") == PHASE_SIMPLIFIED:
                row["simplified_attempted"] += 1
            else:
                row["attempted"] += 1
        elif event.kind == "pair_retained":
            if event.payload.get("simplified"):
                row["simplified_retained"] += 1
            else:
                row["retained"] += 1
    return counts


def run_pipeline(
    corpus: Sequence[SeedInstruction],
    config: LifecycleConfig,
    gateway,
    executor,
    store: RunStore,
    concurrency: int = 4,
) -> RunSummary:
    """Run every seed through its lifecycle and seal the store.

    Seeds are independent; a pool of ``concurrency`` workers drives them.
    Results are appended as each seed finishes and the pair store is
    canonicalized at seal time, so the final dataset does not depend on
    worker count.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if concurrency < 1:
        raise ValueError("concurrency must be at least 1")

    ready, dropped = ensure_keywords(corpus, gateway)
    failures: list[dict] = list(dropped)
    all_events: list[TrajectoryEvent] = []
    retained = 0
    completed = 0

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = {
            pool.submit(run_seed_lifecycle, seed, config, gateway, executor): seed
            for seed in ready
        }
        for future in as_completed(futures):
            seed = futures[future]
            try:
                pairs, events = future.result()
            except Exception as exc:  # keep one bad seed from sinking the run
                log.exception("seed %s failed unexpectedly", seed.id)
                event = TrajectoryEvent(
                    seed_id=seed.id,
                    round=0,
                    seq=0,
                    kind="discarded",
                    payload={"reason": "internal_error", "detail": str(exc)},
                    timestamp=utc_now_rfc3339(),
                )
                store.append_event(event)
                all_events.append(event)
                failures.append({"seed_id": seed.id, "reason": f"internal_error: {exc}"})
                continue
            store.append_events(events)
            for pair in pairs:
                store.append_pair(pair)
            all_events.extend(events)
            completed += 1
            retained += len(pairs)
            for event in events:
                if event.kind == "discarded" and event.payload.get("reason") != "simplification_failed":
                    failures.append(
                        {"seed_id": seed.id, "reason": str(event.payload.get("reason"))}
                    )

    seal_info = store.seal()
    counts = tally_rounds(all_events)
    per_round = [
        {"round": r, **counts[r]}
        for r in sorted(counts)
        if counts[r]["attempted"] or counts[r]["simplified_attempted"]
    ]
    summary = RunSummary(
        seeds_total=len(corpus),
        seeds_completed=completed,
        pairs_retained=seal_info["retained"],
        pairs_deduplicated=seal_info["deduplicated"],
        per_round=per_round,
        failures=failures,
    )
    store.write_summary(summary.as_dict())
    return summary
