import json

import pytest

from houseworld.actions import Verb
from houseworld.corpus import (
    CorpusManifest,
    STAGE_PRESETS,
    _STAGE1_MIX,
    _split_mix,
    corpus_stats,
    dumps_canonical,
    export_dialogue,
    forge_corpus,
    generate_corpus,
    import_dialogue,
    load_dialogues,
    load_trajectories,
    recount,
    save_dialogues,
    save_trajectories,
    verify_manifest,
)
from houseworld.errors import GrammarViolation, ParseError
from houseworld.metrics import filter_trajectories
from houseworld.planner import derive_key_actions
from houseworld.tasks import SUB_TASKS

SMALL_MIX = {
    "ExposedSearch": 3, "EnclosedSearch": 2, "ExposedGrasp": 2,
    "Exp2ExpTransfer": 2, "Enc2EncTransfer": 2, "SequentialTransfer": 1,
}


def test_stage1_mix_totals():
    assert sum(_STAGE1_MIX.values()) == 1128
    assert sum(STAGE_PRESETS["Stage2_Rejection"]["mix"].values()) in \
        range(6246 - 11, 6246 + 12)
    assert sum(STAGE_PRESETS["TestSet"]["mix"].values()) in \
        range(809 - 11, 809 + 12)


def test_split_mix_conserves_counts():
    chunks = _split_mix(_STAGE1_MIX, 16)
    merged = {}
    for c in chunks:
        for k, v in c.items():
            merged[k] = merged.get(k, 0) + v
        assert sum(c.values()) <= 16 + len(SUB_TASKS)
    assert merged == _STAGE1_MIX


def test_generate_corpus_small_and_deterministic():
    t1, tasks1, scenes1, m1 = generate_corpus(
        master_seed=42, mix=SMALL_MIX)
    t2, tasks2, scenes2, m2 = generate_corpus(
        master_seed=42, mix=SMALL_MIX)
    assert [dumps_canonical(t.to_dict()) for t in t1] == \
        [dumps_canonical(t.to_dict()) for t in t2]
    assert m1.to_dict() == m2.to_dict()
    t3, _, _, _ = generate_corpus(master_seed=43, mix=SMALL_MIX)
    assert [dumps_canonical(t.to_dict()) for t in t1] != \
        [dumps_canonical(t.to_dict()) for t in t3]
    assert len(t1) == sum(SMALL_MIX.values())
    verify_manifest(m1, t1)


def test_generated_corpus_filters_clean():
    trajs, tasks, scenes, _ = generate_corpus(master_seed=5, mix=SMALL_MIX)
    keys = {
        tid: derive_key_actions(task, scenes[task.scene_id])
        for tid, task in tasks.items()
    }
    report = filter_trajectories(
        [(tasks[t.task_id], t) for t in trajs], scenes, keys
    )
    assert not report.rejected


def test_trajectory_file_round_trip(tmp_path):
    trajs, _, _, manifest = generate_corpus(master_seed=9, mix=SMALL_MIX)
    path = tmp_path / "corpus.jsonl"
    save_trajectories(path, trajs, manifest)
    again = load_trajectories(path)
    assert [t.to_dict() for t in again] == \
        [t.to_dict() for t in sorted(trajs, key=lambda t: t.task_id)]
    stored = CorpusManifest.from_dict(
        json.loads((tmp_path / "corpus.jsonl.manifest.json").read_text())
    )
    verify_manifest(stored, again)


def test_manifest_drift_is_detected():
    trajs, _, _, manifest = generate_corpus(master_seed=9, mix=SMALL_MIX)
    verify_manifest(manifest, trajs)
    with pytest.raises(GrammarViolation):
        verify_manifest(manifest, trajs[:-1])


def test_load_trajectories_reports_bad_lines(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"task_id": "x"}\n')
    with pytest.raises(ParseError):
        load_trajectories(path)


def test_dialogue_export_round_trip(tmp_path):
    trajs, tasks, scenes, _ = generate_corpus(master_seed=3, mix=SMALL_MIX)
    records = [export_dialogue(t, scenes[t.scene_id]) for t in trajs]
    for rec in records:
        assert rec["turns"][0]["role"] == "user"
        for turn in rec["turns"]:
            if turn["role"] != "assistant":
                continue
            spans = turn["spans"]
            assert spans[-1]["kind"] == "decision"
            assert spans[-1]["text"].startswith("<DecisionMaking>")
            for span in spans:
                assert isinstance(span["loss"], bool)
    path = tmp_path / "dialogues.jsonl"
    save_dialogues(path, records)
    again = load_dialogues(path)
    assert [dumps_canonical(r) for r in again] == \
        [dumps_canonical(r) for r in records]


def test_import_dialogue_rejects_malformed():
    with pytest.raises(ParseError):
        import_dialogue("{}")
    with pytest.raises(ParseError):
        import_dialogue({"task_id": "t", "scene_id": "s", "seed": 0,
                         "system": "x",
                         "turns": [{"role": "assistant", "spans": []}]})


def test_corpus_stats_shape():
    trajs, _, _, _ = generate_corpus(master_seed=12, mix=SMALL_MIX)
    stats = corpus_stats(trajs)
    assert stats["n_trajectories"] == len(trajs)
    assert sum(stats["per_sub_task"].values()) == len(trajs)
    assert stats["per_verb"]["end"] == len(trajs)
    assert stats["action_count_mean"] > 0
    # End is excluded from action counts
    total_steps = sum(len(t.actions()) - 1 for t in trajs)
    assert stats["action_count_mean"] == pytest.approx(total_steps / len(trajs))
    for cat, band in stats["key_lengths_by_category"].items():
        assert 1 <= band["min"] <= band["max"]


def test_recount_matches_by_construction():
    trajs, _, _, manifest = generate_corpus(master_seed=1, mix=SMALL_MIX)
    assert recount(trajs) == manifest.counts


def test_forge_corpus_filters_clean():
    trajs, tasks, scenes, manifest = forge_corpus(master_seed=4, scale=0.02)
    assert trajs
    keys = {
        tid: derive_key_actions(task, scenes[task.scene_id])
        for tid, task in tasks.items()
    }
    report = filter_trajectories(
        [(tasks[t.task_id], t) for t in trajs], scenes, keys
    )
    assert not report.rejected, [r[2] for r in report.rejected]
    kinds = {"anomaly" if "anomalies" in t.meta else "correction"
             for t in trajs}
    assert kinds == {"anomaly", "correction"}


def test_detour_stages_include_exploration():
    trajs, _, _, _ = generate_corpus(
        stage="Stage2_Rejection", master_seed=6, scale=0.01)
    assert any(
        any(a.verb in (Verb.OBSERVE,) for a in t.actions()) or
        t.meta.get("inserted", 0) > 0
        for t in trajs
    )
