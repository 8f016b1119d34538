"""Corpus pipeline: trajectory files, dialogue exports with loss masks,
dataset statistics, stage presets, and end-to-end generation.

All corpus files are line-delimited JSON (one trajectory or dialogue
record per line) with a sidecar manifest whose counts are recomputable
from the files. Every random choice derives from one master seed via
hierarchical splitting (stage -> scene -> task -> trajectory), so a
single integer reproduces a corpus byte-for-byte.
"""

import json
import logging
import math
import random
from dataclasses import dataclass, field

from .actions import Verb
from .catalog import CATALOG_VERSION
from .errors import GrammarViolation, ParseError
from .planner import SearchPolicy, derive_key_actions, insert_search_process
from .prompts import SYSTEM_PROMPT
from .scene import SceneSpec, generate_scene
from .seeds import derive_seed
from .tasks import CATEGORY_OF, SUB_TASKS, synthesize_tasks
from .thoughts import PATTERNS, annotate, default_transition_model
from .trajectory import Trajectory

log = logging.getLogger(__name__)

STAGES = ("Stage1_Imitation", "Stage2_Rejection", "Stage3_Reflection",
          "TestSet")

# Full-scale per-sub-task counts for each stage preset; a scale factor
# shrinks them proportionally (rounded, floor 1).
_STAGE1_MIX = {
    "ExposedSearch": 150, "EnclosedSearch": 150,
    "ExposedGrasp": 120, "EnclosedGrasp": 120, "ExposedToggle": 100,
    "Exp2ExpTransfer": 120, "Exp2EncTransfer": 100,
    "Enc2ExpTransfer": 90, "Enc2EncTransfer": 90,
    "SequentialTransfer": 60, "LongTermComplex": 28,
}  # total 1,128


def _scaled(mix, factor):
    return {k: max(1, round(v * factor)) for k, v in mix.items() if v > 0}


def _scale_to_total(total):
    base = sum(_STAGE1_MIX.values())
    return {k: max(1, round(v * total / base)) for k, v in _STAGE1_MIX.items()}


STAGE_PRESETS = {
    "Stage1_Imitation": {"mix": dict(_STAGE1_MIX), "detours": 0},
    "Stage2_Rejection": {"mix": _scale_to_total(6246), "detours": 3},
    "Stage3_Reflection": {"mix": _scale_to_total(2016), "detours": 2},
    "TestSet": {"mix": _scale_to_total(809), "detours": 0},
}

_ROOM_CYCLE = ("Kitchen", "LivingRoom", "Bedroom", "Bathroom")
TASKS_PER_SCENE = 16


@dataclass
class CorpusManifest:
    stage: str
    master_seed: int
    counts: dict = field(default_factory=dict)
    transition_matrix: dict = field(default_factory=dict)
    catalog_version: str = CATALOG_VERSION

    def to_dict(self):
        return {
            "stage": self.stage,
            "master_seed": self.master_seed,
            "counts": self.counts,
            "transition_matrix": self.transition_matrix,
            "catalog_version": self.catalog_version,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            stage=d["stage"],
            master_seed=int(d["master_seed"]),
            counts=dict(d.get("counts", {})),
            transition_matrix=dict(d.get("transition_matrix", {})),
            catalog_version=d.get("catalog_version", CATALOG_VERSION),
        )


def recount(trajectories):
    """Recompute the manifest counts from the corpus content."""
    counts = {
        "trajectories": len(trajectories),
        "records": sum(len(t.records) for t in trajectories),
        "actions": sum(len(t.actions()) for t in trajectories),
        "thoughts": {p: 0 for p in PATTERNS},
    }
    for t in trajectories:
        for th in t.thoughts():
            counts["thoughts"][th.kind] += 1
    return counts


def verify_manifest(manifest, trajectories):
    found = recount(trajectories)
    if found != manifest.counts:
        raise GrammarViolation(
            f"manifest counts drifted: stored {manifest.counts}, "
            f"recomputed {found}"
        )
    return True


# -- trajectory files ---------------------------------------------------


def dumps_canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_trajectories(path, trajectories, manifest=None):
    with open(path, "w", encoding="utf-8") as fh:
        for traj in sorted(trajectories, key=lambda t: t.task_id):
            fh.write(dumps_canonical(traj.to_dict()) + "\n")
    if manifest is not None:
        with open(str(path) + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_trajectories(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(Trajectory.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ParseError(f"bad trajectory record: {exc}",
                                 line=lineno)
    return out


# -- dialogue export ----------------------------------------------------


def export_dialogue(trajectory, scene=None):
    """Flatten a trajectory into a multi-turn training record.

    User turns carry observation/feedback text; each assistant turn is a
    list of spans (thought texts and the final decision tag), every span
    tagged with its loss flag so tokenizers can mask precisely.
    """
    trajectory.check_grammar()
    turns = []
    pending_spans = []
    for rec in trajectory.records:
        if rec.kind in ("observation", "feedback"):
            if pending_spans:
                raise GrammarViolation("unit interrupted before its action")
            text = rec.payload if rec.kind == "feedback" else rec.payload.text
            turns.append({"role": "user", "text": text,
                          "provenance": rec.provenance})
        elif rec.kind == "thought":
            pending_spans.append({
                "kind": "thought",
                "pattern": rec.payload.kind,
                "text": rec.payload.text,
                "loss": rec.loss_mask,
                "provenance": rec.provenance,
            })
        elif rec.kind == "action":
            tag = (f"<DecisionMaking>{rec.payload.render(scene)}"
                   f"</DecisionMaking>")
            pending_spans.append({
                "kind": "decision",
                "text": tag,
                "loss": rec.loss_mask,
                "provenance": rec.provenance,
            })
            turns.append({"role": "assistant", "spans": pending_spans})
            pending_spans = []
    return {
        "task_id": trajectory.task_id,
        "scene_id": trajectory.scene_id,
        "seed": trajectory.seed,
        "system": SYSTEM_PROMPT,
        "turns": turns,
    }


def import_dialogue(record):
    """Validate a dialogue record; returns the canonical dict form."""
    try:
        if isinstance(record, str):
            record = json.loads(record)
        for key in ("task_id", "scene_id", "seed", "system", "turns"):
            if key not in record:
                raise KeyError(key)
        for turn in record["turns"]:
            role = turn["role"]
            if role == "user":
                turn["text"]
            elif role == "assistant":
                spans = turn["spans"]
                if not spans or spans[-1]["kind"] != "decision":
                    raise ValueError("assistant turn must end in a decision")
                for span in spans:
                    span["text"], span["loss"]
            else:
                raise ValueError(f"unknown role {role}")
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad dialogue record: {exc}")
    return record


def save_dialogues(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_canonical(rec) + "\n")


def load_dialogues(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(import_dialogue(line))
    return out


# -- statistics ---------------------------------------------------------


def _sub_task_of(task_id):
    parts = task_id.split("/")
    for p in parts:
        if p in SUB_TASKS:
            return p
    return None


def corpus_stats(trajectories):
    """Distribution tables: per-sub-task and per-category counts,
    per-verb counts, key-length histograms (End excluded), thought
    pattern frequencies, and mean actions per trajectory (End excluded)."""
    per_sub = {}
    per_category = {}
    per_verb = {v.value: 0 for v in Verb}
    lengths = []
    key_lengths_by_category = {}
    thoughts = {p: 0 for p in PATTERNS}
    for traj in trajectories:
        sub = _sub_task_of(traj.task_id)
        cat = CATEGORY_OF.get(sub)
        if sub:
            per_sub[sub] = per_sub.get(sub, 0) + 1
        if cat:
            per_category[cat] = per_category.get(cat, 0) + 1
        actions = traj.actions()
        lengths.append(sum(1 for a in actions if a.verb != Verb.END))
        for a in actions:
            per_verb[a.verb.value] += 1
        key_len = traj.meta.get("key_length")
        if key_len is not None and cat:
            key_lengths_by_category.setdefault(cat, []).append(key_len - 1)
        for th in traj.thoughts():
            thoughts[th.kind] += 1
    hist = {}
    for n in lengths:
        hist[n] = hist.get(n, 0) + 1
    return {
        "n_trajectories": len(trajectories),
        "per_sub_task": dict(sorted(per_sub.items())),
        "per_category": dict(sorted(per_category.items())),
        "per_verb": per_verb,
        "action_count_mean": (sum(lengths) / len(lengths)) if lengths else 0.0,
        "action_count_hist": {str(k): v for k, v in sorted(hist.items())},
        "key_lengths_by_category": {
            k: {"min": min(v), "max": max(v), "n": len(v)}
            for k, v in sorted(key_lengths_by_category.items())
        },
        "thought_patterns": thoughts,
    }


# -- generation pipeline ------------------------------------------------


def _split_mix(mix, per_scene):
    """Partition a sub-task mix into per-scene chunks, spreading every
    sub-task across chunks so no scene must host one type alone."""
    total = sum(mix.values())
    if total == 0:
        return []
    n_chunks = max(1, math.ceil(total / per_scene))
    chunks = [{} for _ in range(n_chunks)]
    for sub in SUB_TASKS:
        count = mix.get(sub, 0)
        base, extra = divmod(count, n_chunks)
        for i in range(n_chunks):
            take = base + (1 if i < extra else 0)
            if take:
                chunks[i][sub] = take
    return [c for c in chunks if c]


def generate_corpus(stage="Stage1_Imitation", master_seed=0, scale=1.0,
                    detours=None, model=None, mix=None,
                    tasks_per_scene=TASKS_PER_SCENE):
    """End-to-end deterministic generation for a stage preset.

    Returns (trajectories, tasks_by_id, scenes_by_id, manifest).
    Trajectories are ordered by task id so output is seed-stable
    regardless of any parallel fan-out upstream.
    """
    preset = STAGE_PRESETS[stage]
    mix = mix if mix is not None else _scaled(preset["mix"], scale)
    detours = preset["detours"] if detours is None else detours
    model = model or default_transition_model()

    chunks = _split_mix(mix, tasks_per_scene)
    trajectories = []
    tasks_by_id = {}
    scenes_by_id = {}
    produced = {sub: 0 for sub in SUB_TASKS}

    def run_chunk(i, chunk):
        scene_seed = derive_seed(master_seed, stage, "scene", i)
        rng = random.Random(scene_seed)
        spec = SceneSpec(
            room_type=_ROOM_CYCLE[i % len(_ROOM_CYCLE)],
            n_receptacles=rng.randint(5, 7),
            n_items=rng.randint(8, 10),
            seed=scene_seed,
        )
        scene = generate_scene(spec)
        scene.id = f"{stage}-scene-{i:04d}"
        scenes_by_id[scene.id] = scene
        tasks = synthesize_tasks(
            scene, chunk, derive_seed(master_seed, stage, "tasks", i)
        )
        for task in tasks:
            tasks_by_id[task.id] = task
            produced[task.sub_task] += 1
            traj_seed = derive_seed(master_seed, stage, "traj", task.id)
            key = derive_key_actions(task, scene)
            n = random.Random(traj_seed).randint(0, detours) if detours else 0
            plan = insert_search_process(
                key, scene, SearchPolicy(n_detours=n), traj_seed
            )
            trajectories.append(
                annotate(plan, scene, task, model=model, seed=traj_seed)
            )

    for i, chunk in enumerate(chunks):
        run_chunk(i, chunk)
    # top up shortfalls (a scene may lack bindings for some sub-task,
    # e.g. no toggleable object landed on an exposed surface)
    next_index = len(chunks)
    for _ in range(8):
        shortfall = {
            sub: mix[sub] - produced[sub]
            for sub in mix if mix[sub] > produced[sub]
        }
        if not shortfall:
            break
        run_chunk(next_index, shortfall)
        next_index += 1
    trajectories.sort(key=lambda t: t.task_id)
    manifest = CorpusManifest(
        stage=stage,
        master_seed=master_seed,
        counts=recount(trajectories),
        transition_matrix={
            state: dict(row) for state, row in model.rows.items()
        },
    )
    return trajectories, tasks_by_id, scenes_by_id, manifest


def induce_failure(plan, scene, task, seed=0):
    """Deterministically break a correct plan into a failed trajectory
    (early End), for exercising the correction forge."""
    from .simulator import Episode
    from .trajectory import TrajectoryRecord
    from .actions import Action

    rng = random.Random(seed)
    key_core = [a for a in plan.full if a.verb != Verb.END]
    cut = rng.randrange(0, max(1, len(key_core) - 1))
    actions = key_core[:cut] + [Action(Verb.END)]
    ep = Episode(scene, task=task, step_limit=10 ** 9)
    _, obs0 = ep.reset()
    records = [TrajectoryRecord(kind="observation", payload=obs0)]
    for j, a in enumerate(actions):
        records.append(TrajectoryRecord(kind="action", payload=a,
                                        loss_mask=True))
        outcome = ep.step(a)
        if j + 1 < len(actions):
            if outcome.ok:
                records.append(TrajectoryRecord(
                    kind="observation", payload=outcome.observation))
            else:
                records.append(TrajectoryRecord(
                    kind="feedback",
                    payload=outcome.observation.feedback_text))
    return Trajectory(task_id=task.id, scene_id=scene.id, seed=seed,
                      records=records, meta={"induced_failure": cut})


def forge_corpus(master_seed=0, scale=1.0, anomaly_fraction=0.5):
    """Stage-3 preset: successes with injected anomalies plus corrected
    induced failures; returns (trajectories, tasks, scenes, manifest)."""
    from .forge import forge_correction, inject_anomaly, sample_anomaly_spec

    base, tasks_by_id, scenes_by_id, _ = generate_corpus(
        stage="Stage3_Reflection", master_seed=master_seed, scale=scale,
    )
    forged = []
    n_anomaly = math.floor(len(base) * anomaly_fraction)
    for i, traj in enumerate(base):
        task = tasks_by_id[traj.task_id]
        scene = scenes_by_id[traj.scene_id]
        seed = derive_seed(master_seed, "forge", traj.task_id)
        key = derive_key_actions(task, scene)
        if i < n_anomaly:
            spec = sample_anomaly_spec(traj, scene, seed)
            forged.append(inject_anomaly(traj, spec, scene, task, seed=seed))
        else:
            plan = insert_search_process(key, scene, SearchPolicy(0), seed)
            failed = induce_failure(plan, scene, task, seed=seed)
            forged.append(forge_correction(failed, key, scene, task,
                                           seed=seed))
    forged.sort(key=lambda t: t.task_id)
    manifest = CorpusManifest(
        stage="Stage3_Reflection",
        master_seed=master_seed,
        counts=recount(forged),
        transition_matrix={
            s: dict(r) for s, r in default_transition_model().rows.items()
        },
    )
    return forged, tasks_by_id, scenes_by_id, manifest
