"""Markov thought-pattern model and trajectory annotation.

Thoughts come in five patterns and are interleaved between observation
and action according to a first-order transition model. Two of the
patterns are context-gated: self-reflection may only follow a search
step that failed to surface the sought object, and double-verification
may only follow the completion of a sub-goal. In contexts where a
pattern is ineligible its probability mass falls through to acting
immediately, so every row still sums to one.
"""

import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .actions import Verb
from .errors import InvariantViolation, PlanExecutionFailed
from .scene import ROOT_ID
from .simulator import Episode
from .trajectory import Trajectory, TrajectoryRecord

PATTERNS = (
    "situation_analysis",
    "task_planning",
    "spatial_reasoning",
    "self_reflection",
    "double_verification",
)
ACT = "act"
OUTCOMES = PATTERNS + (ACT,)
MAX_THOUGHTS_PER_ACTION = 3

_GATED = {
    "self_reflection": "failed_search",
    "double_verification": "subgoal_done",
}


@dataclass
class Thought:
    kind: str
    text: str
    refers_to: list = field(default_factory=list)  # indices of prior records

    def validate(self):
        if self.kind not in PATTERNS:
            raise InvariantViolation("thought-kind", self.kind)

    def to_dict(self):
        return {"kind": self.kind, "text": self.text,
                "refers_to": list(self.refers_to)}

    @classmethod
    def from_dict(cls, d):
        t = cls(kind=d["kind"], text=d["text"],
                refers_to=list(d.get("refers_to", [])))
        t.validate()
        return t


def _load_templates():
    path = resources.files("houseworld.data") / "thought_templates.json"
    return json.loads(path.read_text())


_TEMPLATES = None


def thought_templates():
    global _TEMPLATES
    if _TEMPLATES is None:
        _TEMPLATES = _load_templates()
    return _TEMPLATES


@dataclass
class TransitionModel:
    """Rows map a state to a distribution over next outcomes.

    States: "start" (before the first action of an episode),
    "after_action", and "after_<pattern>" for chained thoughts.
    """

    rows: dict

    def validate(self):
        for state, row in self.rows.items():
            total = 0.0
            for outcome, p in row.items():
                if outcome not in OUTCOMES:
                    raise InvariantViolation("transition-outcome", outcome)
                if p < 0:
                    raise InvariantViolation(
                        "transition-prob", f"{state}->{outcome} = {p}"
                    )
                total += p
            if abs(total - 1.0) > 1e-9:
                raise InvariantViolation(
                    "transition-row-sum", f"{state} sums to {total}"
                )
        for state in ("start", "after_action"):
            if state not in self.rows:
                raise InvariantViolation("transition-state", f"missing {state}")
        for p in PATTERNS:
            if f"after_{p}" not in self.rows:
                raise InvariantViolation("transition-state", f"missing after_{p}")
        return self

    def effective_row(self, state, failed_search=False, subgoal_done=False):
        """Row with ineligible gated patterns folded into "act"."""
        eligible = {"failed_search": failed_search, "subgoal_done": subgoal_done}
        row = dict(self.rows[state])
        for pattern, gate in _GATED.items():
            if not eligible[gate] and row.get(pattern, 0.0) > 0:
                row[ACT] = row.get(ACT, 0.0) + row.pop(pattern)
        return row

    def sample_outcome(self, rng, state, failed_search=False, subgoal_done=False):
        row = self.effective_row(state, failed_search, subgoal_done)
        outcomes = sorted(row)
        weights = [row[o] for o in outcomes]
        return rng.choices(outcomes, weights=weights, k=1)[0]

    def sample_unit(self, rng, start=False, failed_search=False,
                    subgoal_done=False, max_thoughts=MAX_THOUGHTS_PER_ACTION):
        """Thought patterns preceding one action."""
        state = "start" if start else "after_action"
        chain = []
        while len(chain) < max_thoughts:
            outcome = self.sample_outcome(rng, state, failed_search, subgoal_done)
            if outcome == ACT:
                break
            chain.append(outcome)
            state = f"after_{outcome}"
        return chain


def default_transition_model() -> TransitionModel:
    """Pinned transition probabilities.

    Stated cells: start -> planning .55 / spatial .45; after an action
    spatial .42, reflection .33 (failed-search contexts), verification
    .03; spatial -> verification .06. The unstated remainder of the
    after-action row is split evenly between planning and acting, and
    each after-pattern row spreads its remaining mass uniformly over the
    non-self outcomes.
    """
    rows = {
        "start": {"task_planning": 0.55, "spatial_reasoning": 0.45},
        "after_action": {
            "spatial_reasoning": 0.42,
            "self_reflection": 0.33,
            "double_verification": 0.03,
            "task_planning": 0.11,
            ACT: 0.11,
        },
    }
    stated = {"spatial_reasoning": {"double_verification": 0.06}}
    for p in PATTERNS:
        row = dict(stated.get(p, {}))
        rest = [o for o in OUTCOMES if o != p and o not in row]
        remaining = 1.0 - sum(row.values())
        for o in rest:
            row[o] = remaining / len(rest)
        rows[f"after_{p}"] = row
    return TransitionModel(rows=rows).validate()


def sample_transitions(model, n, seed, failed_search=True, subgoal_done=True,
                       units_per_episode=8):
    """Stream of (state, outcome) pairs drawn from the model, one action
    unit after another across many short episodes, so every row
    (including the per-episode "start" row) accumulates samples."""
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        state = "start"
        for _ in range(units_per_episode):
            if len(out) >= n:
                break
            chain_len = 0
            while chain_len < MAX_THOUGHTS_PER_ACTION and len(out) < n:
                outcome = model.sample_outcome(
                    rng, state, failed_search, subgoal_done
                )
                out.append((state, outcome))
                if outcome == ACT:
                    break
                chain_len += 1
                state = f"after_{outcome}"
            state = "after_action"
    return out


def estimate_matrix(pairs):
    """Maximum-likelihood transition estimate from (state, outcome) pairs."""
    counts = {}
    for state, outcome in pairs:
        counts.setdefault(state, {}).setdefault(outcome, 0)
        counts[state][outcome] += 1
    est = {}
    for state, row in counts.items():
        total = sum(row.values())
        est[state] = {o: c / total for o, c in row.items()}
    return est


# -- annotation ---------------------------------------------------------


def _names(scene, ids):
    return sorted({scene.obj(i).class_name for i in ids})


def _listing(names, empty):
    if not names:
        return empty
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


class _SlotContext:
    """Fills template slots from live episode state."""

    def __init__(self, ep, task):
        self.ep = ep
        self.task = task
        self.visited = []

    def note_navigation(self, oid):
        if oid not in self.visited:
            self.visited.append(oid)

    def active_goal(self):
        for i, goal in enumerate(self.task.goal):
            if i not in self.ep.goal_steps:
                return goal
        return self.task.goal[-1]

    def slots(self):
        scene = self.ep.scene
        goal = self.active_goal()
        loc = self.ep.agent.location
        tried = _names(scene, self.visited)
        known = self.ep.agent.known_receptacles
        candidates = _names(scene, known - set(self.visited))
        done = len(self.ep.goal_steps)
        return {
            "target": scene.obj(goal.target).class_name,
            "location": (
                f"the {scene.obj(loc).class_name}" if loc else "the doorway"
            ),
            "tried": _listing(tried, "nowhere yet"),
            "candidates": _listing(candidates, "no further places"),
            "subgoal": f"{done} of {len(self.task.goal)} sub-goals are done",
            "task": self.task.text,
        }


def _failed_search(ep, prev_action, prev_revealed):
    """A navigation that surfaced neither the sought object nor its
    enclosure counts as a failed search step."""
    if prev_action is None or prev_action.verb != Verb.NAVIGATE_TO:
        return False
    if ep.task is None:
        return False
    goal = None
    for i, g in enumerate(ep.task.goal):
        if i not in ep.goal_steps:
            goal = g
            break
    if goal is None:
        return False
    if goal.target in ep.agent.revealed_items:
        return False
    chain = ep.scene.graph.ancestors(goal.target)
    return ep.agent.location not in chain and ep.agent.location != goal.target


def annotate(plan, scene, task, model=None, seed=0,
             max_thoughts=MAX_THOUGHTS_PER_ACTION) -> Trajectory:
    """Execute a plan and interleave sampled, template-grounded thoughts.

    The record stream follows the unit grammar observation (thought)*
    action; self-reflection is only emitted after failed search steps
    and double-verification only right after a sub-goal completes.
    """
    if model is None:
        model = default_transition_model()
    model.validate()
    rng = random.Random(seed)
    templates = thought_templates()

    ep = Episode(scene, task=task, step_limit=max(len(plan.full) + 5, 40))
    _, obs0 = ep.reset()
    ctx = _SlotContext(ep, task)
    records = [TrajectoryRecord(kind="observation", payload=obs0)]

    prev_action = None
    prev_goal_count = 0
    prev_revealed = set(ep.agent.revealed_items)
    for i, action in enumerate(plan.full):
        failed_search = _failed_search(ep, prev_action, prev_revealed)
        subgoal_done = len(ep.goal_steps) > prev_goal_count
        prev_goal_count = len(ep.goal_steps)
        chain = model.sample_unit(
            rng, start=(i == 0), failed_search=failed_search,
            subgoal_done=subgoal_done, max_thoughts=max_thoughts,
        )
        obs_index = len(records) - 1
        slots = ctx.slots()
        for pattern in chain:
            text = rng.choice(templates[pattern]).format(**slots)
            records.append(TrajectoryRecord(
                kind="thought",
                payload=Thought(kind=pattern, text=text,
                                refers_to=[obs_index]),
                loss_mask=True,
            ))
        prev_revealed = set(ep.agent.revealed_items)
        outcome = ep.step(action)
        if not outcome.ok:
            raise PlanExecutionFailed(
                f"plan action {action.render(scene)} failed: {outcome.error}"
            )
        if action.verb == Verb.NAVIGATE_TO:
            ctx.note_navigation(ep.agent.location)
        records.append(TrajectoryRecord(
            kind="action", payload=action, loss_mask=True,
        ))
        prev_action = action
        if i + 1 < len(plan.full):
            records.append(TrajectoryRecord(
                kind="observation", payload=outcome.observation,
            ))
    traj = Trajectory(
        task_id=task.id, scene_id=scene.id, seed=seed, records=records,
        meta={"key_length": len(plan.key.actions),
              "inserted": len(plan.inserted)},
    )
    return traj.check_grammar()


def empirical_pattern_counts(trajectories):
    counts = {p: 0 for p in PATTERNS}
    for traj in trajectories:
        for th in traj.thoughts():
            counts[th.kind] += 1
    return counts
