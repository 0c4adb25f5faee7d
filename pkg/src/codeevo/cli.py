"""Command line interface.

Subcommands: synthesize (run the engine), validate-seeds, analyze
(survival | diversity | keywords), audit, and export. Exit codes: 0 on
success, 1 on runtime failure, 2 on usage errors. Analysis commands print
a human table and write a machine-readable JSON record.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import analysis
from .engine import LifecycleConfig, run_pipeline, tally_rounds
from .errors import CodeEvoError
from .executor import (
    CompilerFeedback,
    ExecutionLimits,
    MockExecutor,
    RunnerBridgeExecutor,
)
from .gateway import (
    DEFAULT_API_KEY_REF,
    ChatProviderConfig,
    Gateway,
    HttpChatProvider,
    RecordingProvider,
    ScriptedProvider,
)
from .keywords import SamplerConfig
from .seeds import load_corpus, scan_corpus
from .store import ExportProfile, RunStore, export_run

log = logging.getLogger(__name__)

MODE_LIVE = "live"
MODE_SCRIPTED = "scripted"


class _UsageError(Exception):
    """A problem the caller can fix on the command line."""


@dataclass
class RunConfig:
    """Full configuration of one synthesize invocation.

    A JSON config file may supply any of these by field name; explicit
    flags win over the file, the file wins over defaults.
    """

    seeds_path: str
    out_dir: str
    max_iterations: int = 5
    refine_rounds: int = 1
    kw_r_min: int = 1
    kw_r_max: int = 3
    kw_t_max: int | None = None
    wall_timeout: float = 10.0
    cpu_timeout: float = 10.0
    memory_cap_mib: int = 512
    output_cap_kib: int = 64
    concurrency: int = 4
    rng_seed: int = 0
    mode: str = MODE_LIVE
    replay: str | None = None
    exec_fixtures: str | None = None
    record: str | None = None
    resume: bool = False
    language_profile: str = "python"
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model_coder: str = "coder"
    model_reviewer: str = "reviewer"
    api_key_ref: str = DEFAULT_API_KEY_REF
    coder_temperature: float = 0.7
    reviewer_temperature: float = 0.2
    max_reply_tokens: int = 2048
    request_timeout: float = 60.0

    def sampler(self) -> SamplerConfig:
        t_max = self.kw_t_max if self.kw_t_max is not None else self.max_iterations
        return SamplerConfig(r_min=self.kw_r_min, r_max=self.kw_r_max, t_max=t_max)

    def limits(self) -> ExecutionLimits:
        return ExecutionLimits(
            wall_timeout=self.wall_timeout,
            cpu_timeout=self.cpu_timeout,
            memory_cap=self.memory_cap_mib * 1024 * 1024,
            output_cap=self.output_cap_kib * 1024,
        )

    def lifecycle(self) -> LifecycleConfig:
        return LifecycleConfig(
            max_iterations=self.max_iterations,
            refine_rounds=self.refine_rounds,
            sampler=self.sampler(),
            limits=self.limits(),
            rng_seed=self.rng_seed,
            language_profile=self.language_profile,
        )

    def provider_config(self) -> ChatProviderConfig:
        return ChatProviderConfig(
            endpoint=self.endpoint,
            model_coder=self.model_coder,
            model_reviewer=self.model_reviewer,
            api_key_ref=self.api_key_ref,
            coder_temperature=self.coder_temperature,
            reviewer_temperature=self.reviewer_temperature,
            max_reply_tokens=self.max_reply_tokens,
            request_timeout=self.request_timeout,
        )

    def as_dict(self) -> dict:
        return asdict(self)


_CONFIG_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    file_values: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _UsageError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise _UsageError("config file must hold a JSON object")
        unknown = sorted(set(file_values) - _CONFIG_FIELD_NAMES)
        if unknown:
            raise _UsageError(f"unknown config keys: {', '.join(unknown)}")

    values: dict = {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
        elif f.name in file_values:
            values[f.name] = file_values[f.name]
    values["resume"] = bool(args.resume or file_values.get("resume", False))
    if "seeds_path" not in values or "out_dir" not in values:
        raise _UsageError("--seeds and --out are required (flags or config file)")
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise _UsageError(f"bad configuration: {exc}") from exc


def _default_pass_feedback() -> CompilerFeedback:
    return CompilerFeedback(exit_status=0, stdout="", stderr="", wall_time=0.0, timed_out=False)


def _summary_from_store(store: RunStore, seeds_total: int, seal_info: dict) -> dict:
    counts = tally_rounds(store.load_events())
    per_round = [
        {"round": r, **counts[r]}
        for r in sorted(counts)
        if counts[r]["attempted"] or counts[r]["simplified_attempted"]
    ]
    return {
        "seeds_total": seeds_total,
        "seeds_completed": seeds_total,
        "pairs_retained": seal_info["retained"],
        "pairs_deduplicated": seal_info["deduplicated"],
        "per_round": per_round,
        "failures": [],
    }


def cmd_synthesize(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    if cfg.mode not in (MODE_LIVE, MODE_SCRIPTED):
        raise _UsageError(f"unknown mode {cfg.mode!r}")
    try:
        provider_cfg = cfg.provider_config()
        lifecycle = cfg.lifecycle()
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc

    recorder = None
    if cfg.mode == MODE_SCRIPTED:
        if not cfg.replay:
            raise _UsageError("scripted mode requires --replay")
        provider = ScriptedProvider.from_file(cfg.replay)
        if cfg.exec_fixtures:
            executor = MockExecutor.from_fixture_file(cfg.exec_fixtures)
        else:
            executor = MockExecutor(default=_default_pass_feedback())
    else:
        if not os.environ.get(cfg.api_key_ref):
            raise _UsageError(
                f"live mode needs an API key: set the {cfg.api_key_ref} environment variable"
            )
        provider = HttpChatProvider(provider_cfg)
        if cfg.record:
            provider = recorder = RecordingProvider(provider)
        executor = RunnerBridgeExecutor()
    gateway = Gateway(provider, provider_cfg)

    out_dir = Path(cfg.out_dir)
    resuming = out_dir.exists() and any(out_dir.iterdir())
    if resuming and not cfg.resume:
        raise _UsageError(f"output directory {out_dir} is not empty; pass --resume or pick another")

    if resuming:
        store = RunStore.open(out_dir)
        if store.sealed:
            raise _UsageError(f"run at {out_dir} is sealed; it cannot be resumed")
        corpus = store.seeds()
        done = store.processed_seed_ids()
        todo = [seed for seed in corpus if seed.id not in done]
        print(f"resuming: {len(done)} seeds already processed, {len(todo)} remaining")
    else:
        corpus = load_corpus(cfg.seeds_path)
        if not corpus:
            raise _UsageError(f"seed corpus {cfg.seeds_path} is empty")
        todo = corpus
        store = RunStore.create(
            out_dir,
            config=cfg.as_dict(),
            seeds=corpus,
            replay_source=cfg.replay if cfg.mode == MODE_SCRIPTED else None,
        )

    try:
        if todo:
            summary = run_pipeline(
                todo, lifecycle, gateway, executor, store, concurrency=cfg.concurrency
            )
            summary_dict = summary.as_dict()
            table = summary.format_table()
        else:
            seal_info = store.seal()
            summary_dict = _summary_from_store(store, len(corpus), seal_info)
            store.write_summary(summary_dict)
            table = "nothing left to process; run sealed"
    finally:
        store.close()

    if recorder is not None and cfg.record:
        recorder.save(cfg.record)
        print(f"recorded {len(recorder.replies)} replies to {cfg.record}")
    print(table)
    print(f"run directory: {out_dir}")
    return 0


def cmd_validate_seeds(args: argparse.Namespace) -> int:
    scan = scan_corpus(args.seeds)
    for violation in sorted(scan.errors, key=lambda v: v.line_no):
        print(f"error: line {violation.line_no}: [{violation.code}] {violation.message}")
    for violation in sorted(scan.warnings, key=lambda v: v.line_no):
        print(f"warning: line {violation.line_no}: [{violation.code}] {violation.message}")
    print(f"{len(scan.seeds)} seeds, {len(scan.errors)} errors, {len(scan.warnings)} warnings")
    return 1 if scan.errors else 0


def _write_record(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    print(f"wrote {path}")


def cmd_analyze_survival(args: argparse.Namespace) -> int:
    report = analysis.survival(args.run)
    print(report.format_table())
    out = Path(args.out) if args.out else Path(args.run) / "analysis" / "survival.json"
    _write_record(out, report.as_dict())
    return 0


def cmd_analyze_diversity(args: argparse.Namespace) -> int:
    rows = analysis.read_pair_texts(args.pairs)
    texts = analysis.dataset_texts(rows, args.target)
    if args.embedder == "hash":
        embedder = analysis.HashEmbedder(dim=args.dim)
    else:
        if not args.endpoint or not args.model:
            raise _UsageError("the http embedder needs --endpoint and --model")
        embedder = analysis.HttpEmbeddingProvider(
            args.endpoint, args.model, api_key_ref=args.api_key_ref
        )
    import random

    report = analysis.diversity(
        texts,
        embedder,
        sample_size=args.sample,
        rng=random.Random(args.rng_seed),
        target=args.target,
    )
    print(
        f"target: {report.target}\nsample_size: {report.sample_size}\n"
        f"mean_pairwise_cosine: {report.mean_pairwise_cosine:.6f}"
    )
    out = Path(args.out) if args.out else Path(str(args.pairs) + ".diversity.json")
    _write_record(out, report.as_dict())
    return 0


def cmd_analyze_keywords(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.seeds)
    rows = analysis.keyword_frequency(corpus, min_count=args.min_count)
    print("keyword  count")
    for tag, count in rows:
        print(f"{tag}  {count}")
    out = Path(args.out) if args.out else Path(str(args.seeds) + ".keywords.json")
    _write_record(out, {"keywords": [{"keyword": t, "count": c} for t, c in rows]})
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    limits = ExecutionLimits(
        wall_timeout=args.wall_timeout,
        cpu_timeout=args.cpu_timeout,
        memory_cap=args.memory_cap_mib * 1024 * 1024,
        output_cap=args.output_cap_kib * 1024,
    )
    executor = RunnerBridgeExecutor()
    report = analysis.audit_pairs(args.pairs, executor, limits, profile=args.language_profile)
    print(report.format_table())
    out = Path(args.out) if args.out else Path(str(args.pairs) + ".audit.json")
    _write_record(out, report.as_dict())
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    store = RunStore.open(args.run)
    profile = ExportProfile(
        format=args.format,
        include_seed_references=args.include_seed_references,
        shuffle_seed=args.shuffle_seed,
    )
    path = export_run(store, profile)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codeevo",
        description="Synthesize validated instruction-code pairs with paired coder and reviewer agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    syn = sub.add_parser("synthesize", help="run the synthesis engine over a seed corpus")
    syn.add_argument("--seeds", dest="seeds_path", help="seed corpus file (JSON lines)")
    syn.add_argument("--out", dest="out_dir", help="run directory to create")
    syn.add_argument("--config", help="JSON config file; flags override it")
    syn.add_argument("--max-iterations", dest="max_iterations", type=int)
    syn.add_argument("--refine-rounds", dest="refine_rounds", type=int)
    syn.add_argument("--kw-r-min", dest="kw_r_min", type=int)
    syn.add_argument("--kw-r-max", dest="kw_r_max", type=int)
    syn.add_argument("--kw-t-max", dest="kw_t_max", type=int)
    syn.add_argument("--wall-timeout", dest="wall_timeout", type=float)
    syn.add_argument("--cpu-timeout", dest="cpu_timeout", type=float)
    syn.add_argument("--memory-cap-mib", dest="memory_cap_mib", type=int)
    syn.add_argument("--output-cap-kib", dest="output_cap_kib", type=int)
    syn.add_argument("--concurrency", dest="concurrency", type=int)
    syn.add_argument("--rng-seed", dest="rng_seed", type=int)
    syn.add_argument("--mode", dest="mode", choices=(MODE_LIVE, MODE_SCRIPTED))
    syn.add_argument("--replay", dest="replay", help="scripted-mode reply table (JSON)")
    syn.add_argument("--exec-fixtures", dest="exec_fixtures", help="scripted-mode execution fixtures (JSON)")
    syn.add_argument("--record", dest="record", help="capture live replies into a replay file")
    syn.add_argument("--resume", action="store_true", help="continue an interrupted run directory")
    syn.add_argument("--language-profile", dest="language_profile")
    syn.add_argument("--endpoint", dest="endpoint")
    syn.add_argument("--model-coder", dest="model_coder")
    syn.add_argument("--model-reviewer", dest="model_reviewer")
    syn.add_argument("--api-key-ref", dest="api_key_ref")
    syn.add_argument("--coder-temperature", dest="coder_temperature", type=float)
    syn.add_argument("--reviewer-temperature", dest="reviewer_temperature", type=float)
    syn.add_argument("--max-reply-tokens", dest="max_reply_tokens", type=int)
    syn.add_argument("--request-timeout", dest="request_timeout", type=float)
    syn.set_defaults(func=cmd_synthesize)

    val = sub.add_parser("validate-seeds", help="scan a seed corpus and report every violation")
    val.add_argument("--seeds", required=True)
    val.set_defaults(func=cmd_validate_seeds)

    ana = sub.add_parser("analyze", help="quality analyses")
    ana_sub = ana.add_subparsers(dest="analysis", required=True)

    sur = ana_sub.add_parser("survival", help="per-round survival rates of a sealed run")
    sur.add_argument("--run", required=True)
    sur.add_argument("--out")
    sur.set_defaults(func=cmd_analyze_survival)

    div = ana_sub.add_parser("diversity", help="mean pairwise cosine over a pair dataset")
    div.add_argument("--pairs", required=True)
    div.add_argument("--target", choices=("instructions", "pairs"), default="instructions")
    div.add_argument("--sample", type=int, default=1000)
    div.add_argument("--embedder", choices=("hash", "http"), default="hash")
    div.add_argument("--dim", type=int, default=16)
    div.add_argument("--endpoint")
    div.add_argument("--model")
    div.add_argument("--api-key-ref", default=DEFAULT_API_KEY_REF)
    div.add_argument("--rng-seed", type=int, default=0)
    div.add_argument("--out")
    div.set_defaults(func=cmd_analyze_diversity)

    kw = ana_sub.add_parser("keywords", help="keyword frequency over a seed corpus")
    kw.add_argument("--seeds", required=True)
    kw.add_argument("--min-count", type=int, default=1)
    kw.add_argument("--out")
    kw.set_defaults(func=cmd_analyze_keywords)

    aud = sub.add_parser("audit", help="re-execute a pair dataset and classify outcomes")
    aud.add_argument("--pairs", required=True)
    aud.add_argument("--wall-timeout", type=float, default=10.0)
    aud.add_argument("--cpu-timeout", type=float, default=10.0)
    aud.add_argument("--memory-cap-mib", type=int, default=512)
    aud.add_argument("--output-cap-kib", type=int, default=64)
    aud.add_argument("--language-profile", default="python")
    aud.add_argument("--out")
    aud.set_defaults(func=cmd_audit)

    exp = sub.add_parser("export", help="assemble a training export from a sealed run")
    exp.add_argument("--run", required=True)
    exp.add_argument("--format", choices=("pairs", "chat"), default="pairs")
    exp.add_argument("--include-seed-references", action="store_true")
    exp.add_argument("--shuffle-seed", type=int, default=0)
    exp.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CodeEvoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
