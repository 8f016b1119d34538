"""Reflection data forging: anomaly injection and failure correction.

Anomaly injection plants a hardware hiccup after a chosen action — the
agent sees an inconsistent outcome, reflects on the mismatch, and
retries the same action, after which the original trajectory resumes.
Failure correction truncates a failed trajectory at its first
irrecoverable step, inserts a reflective thought, and completes the task
with a freshly derived suffix; the erroneous prefix is kept verbatim but
masked out of the training loss.
"""

import random
from dataclasses import dataclass

from .actions import Action, INTERACTION_VERBS, Verb
from .errors import (
    IncompatiblePosition,
    NoDivergenceFound,
    UncorrectableState,
    Unreachable,
    InfeasibleGoal,
)
from .planner import _Deriver, first_divergence
from .simulator import Episode, Observation, render_frame
from .thoughts import Thought, thought_templates
from .trajectory import Trajectory, TrajectoryRecord

ANOMALY_KINDS = ("navigation", "manipulation")
_MANIPULATION_VERBS = frozenset(INTERACTION_VERBS) - {Verb.END}


@dataclass
class AnomalySpec:
    kind: str  # "navigation" | "manipulation"
    position: int  # index into the trajectory's action list
    wrong_receptacle: str = None  # navigation only

    def to_dict(self):
        d = {"kind": self.kind, "position": self.position}
        if self.wrong_receptacle is not None:
            d["wrong_receptacle"] = self.wrong_receptacle
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], position=int(d["position"]),
                   wrong_receptacle=d.get("wrong_receptacle"))


def _action_record_indices(traj):
    return [i for i, r in enumerate(traj.records) if r.kind == "action"]


def eligible_positions(traj, kind):
    """Action indices where an anomaly of the given kind can be planted.
    The final End never hosts one (there is no o+ to resume into)."""
    actions = traj.actions()
    out = []
    for i, a in enumerate(actions[:-1]):
        if kind == "navigation" and a.verb == Verb.NAVIGATE_TO:
            out.append(i)
        elif kind == "manipulation" and a.verb in _MANIPULATION_VERBS:
            out.append(i)
    return out


def sample_anomaly_spec(traj, scene, seed, kind=None) -> AnomalySpec:
    rng = random.Random(seed)
    kinds = [kind] if kind else list(ANOMALY_KINDS)
    options = [(k, p) for k in kinds for p in eligible_positions(traj, k)]
    if not options:
        raise IncompatiblePosition("trajectory hosts no anomaly position")
    k, pos = rng.choice(options)
    wrong = None
    if k == "navigation":
        target = traj.actions()[pos].target
        pool = [r for r in scene.navigable_receptacles() if r != target]
        if not pool:
            raise IncompatiblePosition("no alternative receptacle for decoy")
        wrong = rng.choice(pool)
    return AnomalySpec(kind=k, position=pos, wrong_receptacle=wrong)


def _validate_spec(traj, spec):
    actions = traj.actions()
    if not 0 <= spec.position < len(actions) - 1:
        raise IncompatiblePosition(f"position {spec.position} out of range")
    verb = actions[spec.position].verb
    if spec.kind == "navigation":
        if verb != Verb.NAVIGATE_TO:
            raise IncompatiblePosition(f"navigation anomaly on {verb.value}")
        if not spec.wrong_receptacle:
            raise IncompatiblePosition("navigation anomaly needs a decoy")
    elif spec.kind == "manipulation":
        if verb not in _MANIPULATION_VERBS:
            raise IncompatiblePosition(f"manipulation anomaly on {verb.value}")
    else:
        raise IncompatiblePosition(f"unknown anomaly kind {spec.kind}")


def _anomalous_observation(spec, action, episode, scene):
    if spec.kind == "navigation":
        wrong = scene.obj(spec.wrong_receptacle)
        entries = [{"id": wrong.id, "class": wrong.class_name}]
        return Observation(
            kind="frame",
            entries=entries,
            text=render_frame(wrong.class_name, entries),
        ), wrong.class_name
    text = (
        f"The command {action.render(scene)} did not take effect; "
        "your gripper slipped and the scene in front of you is unchanged."
    )
    return Observation(kind="feedback", feedback_text=text, text=text), \
        "an unchanged scene"


def inject_anomaly(traj, spec, scene, task, seed=0) -> Trajectory:
    """Insert {.., a, o-, t_r, a, o+ ..} at the spec position."""
    _validate_spec(traj, spec)
    rng = random.Random(seed)
    action_idx = _action_record_indices(traj)[spec.position]
    action = traj.records[action_idx].payload

    # replay up to (and including) the hosting action so the anomalous
    # frame is rendered against the true current state
    ep = Episode(scene, task=task, step_limit=10 ** 9)
    ep.reset()
    for a in traj.actions()[: spec.position + 1]:
        outcome = ep.step(a)
        if not outcome.ok:
            raise IncompatiblePosition(
                f"source trajectory is not replayable at {a.render(scene)}"
            )

    obs_minus, observed = _anomalous_observation(spec, action, ep, scene)
    template = rng.choice(thought_templates()["anomaly_reflection"])
    reflection = Thought(
        kind="self_reflection",
        text=template.format(action=action.render(scene), observed=observed),
        refers_to=[action_idx + 1],
    )

    records = list(traj.records[: action_idx + 1])
    records.append(TrajectoryRecord(
        kind="observation", payload=obs_minus, provenance="injected_anomaly",
    ))
    records.append(TrajectoryRecord(
        kind="thought", payload=reflection, loss_mask=True,
        provenance="reflective_thought",
    ))
    records.append(TrajectoryRecord(
        kind="action", payload=action, loss_mask=True,
    ))
    records.extend(traj.records[action_idx + 1:])

    meta = dict(traj.meta)
    meta["anomalies"] = list(meta.get("anomalies", [])) + [spec.to_dict()]
    forged = Trajectory(
        task_id=traj.task_id, scene_id=traj.scene_id, seed=traj.seed,
        records=records, meta=meta,
    )
    return forged.check_grammar()


# -- failure correction -------------------------------------------------


def _prefix_records(traj, divergence):
    """Records of the failed trajectory before the divergent action's
    unit (its observation is kept to host the reflection)."""
    action_indices = _action_record_indices(traj)
    if divergence >= len(action_indices):
        return list(traj.records)
    cut = action_indices[divergence]
    # walk back over the unit's thoughts to its observation
    start = cut
    while start > 0 and traj.records[start - 1].kind == "thought":
        start -= 1
    return list(traj.records[:start])


def forge_correction(traj, key, scene, task, seed=0) -> Trajectory:
    """Correct a failed trajectory: masked erroneous prefix, reflective
    thought, then a derived suffix that completes the task."""
    predicted = traj.actions()
    divergence = first_divergence(key, predicted, scene, task)
    if divergence is None:
        raise NoDivergenceFound(f"trajectory for {traj.task_id} succeeded")

    prefix = _prefix_records(traj, divergence)
    records = []
    for rec in prefix:
        records.append(TrajectoryRecord(
            kind=rec.kind, payload=rec.payload, loss_mask=False,
            provenance="erroneous_prefix",
        ))

    # replay the prefix actions to recover the mid-episode state
    ep = Episode(scene, task=task, step_limit=10 ** 9)
    _, obs0 = ep.reset()
    prefix_actions = [r.payload for r in records if r.kind == "action"]
    for a in prefix_actions:
        outcome = ep.step(a)
        if not outcome.ok or ep.ended:
            raise UncorrectableState(
                f"prefix not replayable at {a.render(scene)}"
            )
        last_obs = outcome.observation
    if not records:
        records.append(TrajectoryRecord(
            kind="observation", payload=obs0, provenance="erroneous_prefix",
        ))
    elif records[-1].kind == "action":
        # prefix ended on an action; surface the resulting frame so the
        # reflection has an observation to attach to
        records.append(TrajectoryRecord(
            kind="observation", payload=last_obs,
            provenance="erroneous_prefix",
        ))

    rng = random.Random(seed)
    wrong_text = (
        predicted[divergence].render(scene)
        if divergence < len(predicted) else "stopping early"
    )
    goal = next(
        (g for i, g in enumerate(task.goal) if i not in ep.goal_steps),
        task.goal[-1],
    )
    template = rng.choice(thought_templates()["correction_reflection"])
    records.append(TrajectoryRecord(
        kind="thought",
        payload=Thought(
            kind="self_reflection",
            text=template.format(
                wrong=wrong_text,
                target=scene.obj(goal.target).class_name,
            ),
            refers_to=[len(records) - 1],
        ),
        loss_mask=True,
        provenance="reflective_thought",
    ))

    d = _Deriver(task, scene, episode=ep)
    key_closes = {a.target for a in key.actions if a.verb == Verb.CLOSE}
    d.pending_closes = [
        a.target for a in prefix_actions
        if a.verb == Verb.OPEN and a.target in key_closes
        and ep.world.open.get(a.target)
    ]
    try:
        for g in task.goal:
            d.run_goal(g)
        d.emit(Verb.END)
    except (InfeasibleGoal, Unreachable) as exc:
        raise UncorrectableState(str(exc)) from exc

    for i, a in enumerate(d.actions):
        records.append(TrajectoryRecord(
            kind="action", payload=a, loss_mask=True,
            provenance="corrected_suffix",
        ))
        if i + 1 < len(d.actions):
            records.append(TrajectoryRecord(
                kind="observation", payload=d.observations[i],
                provenance="corrected_suffix",
            ))

    meta = dict(traj.meta)
    meta["divergence"] = divergence
    forged = Trajectory(
        task_id=traj.task_id, scene_id=traj.scene_id, seed=traj.seed,
        records=records, meta=meta,
    )
    return forged.check_grammar()
