"""Run directory storage: appends, sealing, dedup, exports."""

import json
import threading

import pytest

from codeevo.errors import (
    CorruptRecord,
    InvalidPair,
    RunNotFound,
    RunNotSealed,
    StorageError,
)
from codeevo.records import InstructionCodePair, PairValidation, TrajectoryEvent
from codeevo.store import ExportProfile, RunStore, export_run
from helpers import make_seed


def make_pair(seed_id="s000", round_index=0, instruction="Sum the list", solution="print(sum([1]))"):
    return InstructionCodePair.make(seed_id, round_index, instruction, solution, refined=False)


def make_event(seed_id="s000", round_index=0, seq=0, kind="instruction_issued", payload=None):
    return TrajectoryEvent(
        seed_id=seed_id,
        round=round_index,
        seq=seq,
        kind=kind,
        payload=payload or {},
        timestamp="2026-01-01T00:00:00.000000Z",
    )


@pytest.fixture
def store(tmp_path):
    handle = RunStore.create(tmp_path / "run", config={"n": 2}, seeds=[make_seed(0), make_seed(1)])
    yield handle
    handle.close()


def test_create_writes_manifest_and_seed_snapshot(store):
    manifest = store.manifest
    assert manifest["status"] == "open"
    assert manifest["config"] == {"n": 2}
    assert (store.run_dir / "seeds.jsonl").exists()
    assert [s.id for s in store.seeds()] == ["s000", "s001"]


def test_create_refuses_nonempty_directory(tmp_path):
    target = tmp_path / "run"
    target.mkdir()
    (target / "junk.txt").write_text("leftover")
    with pytest.raises(StorageError):
        RunStore.create(target, config={}, seeds=[])


def test_create_copies_replay_table(tmp_path):
    replay = tmp_path / "table.json"
    replay.write_text(json.dumps({"abc": "reply"}))
    handle = RunStore.create(tmp_path / "run", config={}, seeds=[], replay_source=replay)
    assert (handle.run_dir / "replay.json").read_text() == replay.read_text()
    assert handle.manifest["files"]["replay"] == "replay.json"


def test_open_round_trips_manifest(store):
    reopened = RunStore.open(store.run_dir)
    assert reopened.manifest == store.manifest


def test_open_missing_directory_raises(tmp_path):
    with pytest.raises(RunNotFound):
        RunStore.open(tmp_path / "nowhere")


def test_append_pair_rejects_unvalidated(store):
    bad = InstructionCodePair(
        pair_id="feedface00000000",
        seed_id="s000",
        round=0,
        instruction="Do it",
        solution="pass",
        validation=PairValidation(compiler_ok=False, reviewer_verdict="success", refined=False),
    )
    with pytest.raises(InvalidPair):
        store.append_pair(bad)
    judged_bad = InstructionCodePair(
        pair_id="feedface00000001",
        seed_id="s000",
        round=0,
        instruction="Do it",
        solution="pass",
        validation=PairValidation(compiler_ok=True, reviewer_verdict="failure", refined=False),
    )
    with pytest.raises(InvalidPair):
        store.append_pair(judged_bad)
    blank = InstructionCodePair(
        pair_id="feedface00000002",
        seed_id="s000",
        round=0,
        instruction="   ",
        solution="pass",
        validation=PairValidation(compiler_ok=True, reviewer_verdict="success", refined=False),
    )
    with pytest.raises(InvalidPair):
        store.append_pair(blank)


def test_append_and_load_pairs(store):
    first = make_pair(instruction="Task one")
    second = make_pair(seed_id="s001", instruction="Task two")
    store.append_pair(first)
    store.append_pair(second)
    assert store.load_pairs() == [first, second]


def test_concurrent_appends_produce_whole_lines(store):
    def writer(worker):
        for i in range(50):
            store.append_pair(make_pair(seed_id=f"s{worker:03d}", round_index=i,
                                        instruction=f"task {worker}-{i}"))

    threads = [threading.Thread(target=writer, args=(w,)) for w in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    pairs = store.load_pairs()
    assert len(pairs) == 200
    assert len({p.pair_id for p in pairs}) == 200


def test_load_trajectory_sorts_and_filters(store):
    store.append_event(make_event(seq=2, kind="executed", payload={"phase": "initial"}))
    store.append_event(make_event(seq=0))
    store.append_event(make_event(seed_id="s001", seq=0))
    store.append_event(make_event(seq=1, kind="code_generated", payload={"phase": "initial"}))
    mine = store.load_trajectory("s000")
    assert [e.seq for e in mine] == [0, 1, 2]
    assert store.load_trajectory("never-ran") == []


def test_load_rejects_corrupt_lines(store):
    store.append_pair(make_pair())
    with open(store.run_dir / "pairs.jsonl", "a", encoding="utf-8") as fh:
        fh.write("{oops\n")
    store.close()
    with pytest.raises(CorruptRecord) as info:
        store.load_pairs()
    assert info.value.line_no == 2
    assert "pairs.jsonl" in str(info.value.path)


def test_load_rejects_wrong_shape(store):
    with open(store.run_dir / "trajectory.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"seed_id": "s000", "round": 0}) + "\n")
    with pytest.raises(CorruptRecord):
        store.load_events()


def test_processed_seed_ids(store):
    assert store.processed_seed_ids() == set()
    store.append_event(make_event(seed_id="s001"))
    assert store.processed_seed_ids() == {"s001"}


def test_seal_deduplicates_and_canonicalizes(store):
    kept = make_pair(seed_id="s000", round_index=0, instruction="Reverse a   string")
    alias = make_pair(seed_id="s001", round_index=0, instruction="reverse a string")
    other = make_pair(seed_id="s001", round_index=1, instruction="Reverse two strings")
    store.append_event(make_event(seed_id="s001", seq=0))
    for pair in (other, alias, kept):
        store.append_pair(pair)
    info = store.seal()
    assert info == {"retained": 2, "deduplicated": 1}
    pairs = store.load_pairs()
    assert [p.pair_id for p in pairs] == sorted(p.pair_id for p in pairs)
    assert {p.pair_id for p in pairs} == {kept.pair_id, other.pair_id}

    discarded = [e for e in store.load_events() if e.kind == "discarded"]
    assert len(discarded) == 1
    event = discarded[0]
    assert event.seed_id == "s001"
    assert event.seq == 1  # continues that seed's sequence
    assert event.payload == {
        "reason": "duplicate_instruction",
        "pair_id": alias.pair_id,
        "kept_pair_id": kept.pair_id,
    }
    assert store.sealed
    assert store.manifest["sealed_at"] is not None


def test_seal_is_single_shot(store):
    store.append_pair(make_pair())
    store.seal()
    with pytest.raises(StorageError):
        store.seal()


def test_sealed_store_refuses_appends(store):
    store.seal()
    with pytest.raises(StorageError):
        store.append_pair(make_pair())
    with pytest.raises(StorageError):
        store.append_event(make_event())


def test_dedup_keep_rule_prefers_smallest_lineage(store):
    late = make_pair(seed_id="s001", round_index=0, instruction="same text")
    early = make_pair(seed_id="s000", round_index=2, instruction="Same Text")
    store.append_pair(late)
    store.append_pair(early)
    store.seal()
    assert [p.seed_id for p in store.load_pairs()] == ["s000"]


# exports


def seeded_store(tmp_path):
    seeds = [
        make_seed(0, reference="def ref(): return 0"),
        make_seed(1),
    ]
    handle = RunStore.create(tmp_path / "run", config={}, seeds=seeds)
    handle.append_pair(make_pair(instruction="Count vowels", solution="print('v')"))
    handle.append_pair(make_pair(seed_id="s001", instruction="Count consonants", solution="print('c')"))
    return handle


def test_export_requires_sealed_run(tmp_path):
    handle = seeded_store(tmp_path)
    with pytest.raises(RunNotSealed):
        export_run(handle, ExportProfile())
    handle.close()


def test_export_pairs_format(tmp_path):
    handle = seeded_store(tmp_path)
    handle.seal()
    path = export_run(handle, ExportProfile(format="pairs"))
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == 2
    assert all(set(row) == {"instruction", "solution"} for row in rows)
    handle.close()


def test_export_with_references_appends_seed_solutions(tmp_path):
    handle = seeded_store(tmp_path)
    handle.seal()
    path = export_run(handle, ExportProfile(format="pairs", include_seed_references=True))
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == 3  # two pairs plus the one seed that has a reference
    assert any(row["solution"] == "def ref(): return 0" for row in rows)
    handle.close()


def test_export_chat_format(tmp_path):
    handle = seeded_store(tmp_path)
    handle.seal()
    path = export_run(handle, ExportProfile(format="chat"))
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    for row in rows:
        assert [m["role"] for m in row["messages"]] == ["user", "assistant"]
    assert {row["messages"][0]["content"] for row in rows} == {"Count vowels", "Count consonants"}
    handle.close()


def test_export_shuffle_is_deterministic(tmp_path):
    first = seeded_store(tmp_path / "a")
    first.seal()
    second = seeded_store(tmp_path / "b")
    second.seal()
    profile = ExportProfile(format="pairs", shuffle_seed=7)
    bytes_first = export_run(first, profile).read_bytes()
    bytes_second = export_run(second, profile).read_bytes()
    assert bytes_first == bytes_second
    other = export_run(first, ExportProfile(format="pairs", shuffle_seed=8))
    assert other.name != "export-pairs-shuffle7.jsonl"
    first.close()
    second.close()


def test_export_round_trip_is_lossless(tmp_path):
    handle = seeded_store(tmp_path)
    handle.seal()
    path = export_run(handle, ExportProfile(format="pairs"))
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    originals = {(p.instruction, p.solution) for p in handle.load_pairs()}
    assert {(r["instruction"], r["solution"]) for r in rows} == originals
    handle.close()


def test_export_profile_validates_format():
    with pytest.raises(ValueError):
        ExportProfile(format="parquet")


def test_export_filenames_encode_profile():
    assert ExportProfile().filename() == "export-pairs-shuffle0.jsonl"
    assert (
        ExportProfile(format="chat", include_seed_references=True, shuffle_seed=3).filename()
        == "export-chat-with-refs-shuffle3.jsonl"
    )
