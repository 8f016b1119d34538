"""Key-action derivation from the affiliation forest, exploratory
inflation with decoy searches, and divergence location for corrections.
"""

import random
from dataclasses import dataclass, field

from .actions import Action, INTERACTION_VERBS, Verb
from .errors import InfeasibleGoal, Unreachable
from .scene import ROOT_ID, Scene
from .simulator import Episode, final_state_check


@dataclass
class KeyActionSequence:
    task_id: str
    actions: list  # ordered Actions ending in End

    def to_dict(self):
        return {"task_id": self.task_id,
                "actions": [a.to_dict() for a in self.actions]}

    @classmethod
    def from_dict(cls, d):
        return cls(task_id=d["task_id"],
                   actions=[Action.from_dict(a) for a in d["actions"]])


@dataclass
class ExploratoryPlan:
    key: KeyActionSequence
    inserted: list = field(default_factory=list)  # (key position, Action)
    full: list = field(default_factory=list)

    def to_dict(self):
        return {
            "key": self.key.to_dict(),
            "inserted": [[pos, a.to_dict()] for pos, a in self.inserted],
            "full": [a.to_dict() for a in self.full],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            key=KeyActionSequence.from_dict(d["key"]),
            inserted=[(pos, Action.from_dict(a)) for pos, a in d["inserted"]],
            full=[Action.from_dict(a) for a in d["full"]],
        )


class _Deriver:
    """Emits the minimum action chain for each goal while executing it in
    a scratch episode, so skip decisions (already there / already open)
    track the actual world state."""

    def __init__(self, task, scene, episode=None):
        self.scene = scene
        if episode is None:
            self.ep = Episode(scene, task=task)
            self.ep.reset()
        else:
            self.ep = episode
        self.actions = []
        self.observations = []
        # containers opened earlier in a resumed episode that the key
        # sequence still expects to be tidied shut (set by the forge)
        self.pending_closes = []

    def _live_ancestors(self, oid):
        """Ancestor chain in the current world (items may have moved)."""
        chain = []
        cur = self.ep.world.parent.get(oid)
        while cur is not None and cur != ROOT_ID:
            chain.append(cur)
            cur = self.ep.world.parent.get(cur)
        chain.reverse()
        return chain

    def emit(self, verb, target=None):
        action = Action(verb, target)
        outcome = self.ep.step(action)
        if not outcome.ok:
            raise InfeasibleGoal(
                f"derived action {action.render(self.scene)} is illegal: "
                f"{outcome.error}"
            )
        self.actions.append(action)
        self.observations.append(outcome.observation)

    def approach(self, oid, include_self):
        """Navigate/open along the ancestor chain of `oid`; returns the
        containers opened on the way (for later tidy-up closes)."""
        nodes = self._live_ancestors(oid)
        if include_self:
            nodes.append(oid)
        if not any(self.scene.obj(n).attrs.navigable for n in nodes):
            raise Unreachable(f"no navigable ancestor for {oid}")
        opened = []
        for node in nodes:
            obj = self.scene.obj(node)
            if obj.attrs.navigable and self.ep.agent.location != node:
                self.emit(Verb.NAVIGATE_TO, node)
            if obj.attrs.openable and not self.ep.world.open[node]:
                self.emit(Verb.OPEN, node)
                opened.append(node)
        return opened

    def _free_hand(self, keep=None):
        """Stow whatever is held (unless it is the wanted item) on the
        nearest surface so a pickup can proceed."""
        held = self.ep.agent.held
        if held is None or held == keep:
            return
        dests = set()
        if self.ep.task is not None:
            dests = {g.dest for g in self.ep.task.goal if g.dest}
        candidates = sorted(
            self.scene.navigable_receptacles(), key=lambda r: r in dests
        )
        for r in candidates:
            obj = self.scene.obj(r)
            if obj.attrs.openable:
                continue
            if self.ep.agent.location != r:
                self.emit(Verb.NAVIGATE_TO, r)
            self.emit(Verb.PUT_IN, r)
            return
        raise Unreachable("no open surface to stow the held item")

    def _tidy_pending(self):
        for c in reversed(self.pending_closes):
            if not self.ep.world.open.get(c):
                continue
            loc = self.ep.agent.location
            if loc != c and self.ep.world.parent.get(c) != loc:
                obj = self.scene.obj(c)
                anchor = c if obj.attrs.navigable \
                    else self.ep.world.parent.get(c)
                self.emit(Verb.NAVIGATE_TO, anchor)
            self.emit(Verb.CLOSE, c)
        self.pending_closes = []

    def run_goal(self, goal, close_source=True):
        if goal.kind == "search":
            self.approach(goal.target, include_self=False)
            if goal.target not in self.ep.agent.revealed_items:
                raise InfeasibleGoal(f"{goal.target} not revealed by approach")
            return
        if goal.kind == "toggle":
            self.approach(goal.target, include_self=False)
            self.emit(Verb.TOGGLE, goal.target)
            return
        if goal.kind == "grasp":
            if self.ep.agent.held == goal.target:
                return
            self._free_hand(goal.target)
            self.approach(goal.target, include_self=False)
            # a bare grasp keeps the container open for the hand-off;
            # closes only follow transfer pickups
            self.emit(Verb.PICKUP, goal.target)
            return
        if goal.kind == "transfer":
            if self.ep.world.parent.get(goal.target) == goal.dest:
                return
            if self.ep.agent.held == goal.target:
                opened = []
            else:
                self._free_hand(goal.target)
                opened = self.approach(goal.target, include_self=False)
                self.emit(Verb.PICKUP, goal.target)
            if close_source:
                for c in reversed(opened):
                    self.emit(Verb.CLOSE, c)
                self._tidy_pending()
            self.approach(goal.dest, include_self=True)
            self.emit(Verb.PUT_IN, goal.dest)
            return
        raise InfeasibleGoal(f"unknown goal kind {goal.kind}")


def derive_key_actions(task, scene: Scene) -> KeyActionSequence:
    """Minimum required action sequence for the task's ordered goals:
    walk each source's ancestor chain (NavigateTo for navigable nodes,
    Open for closed openable nodes), interact, close opened source
    containers after a transfer pickup, then approach the destination and
    place; terminated by End. Destinations are left open."""
    d = _Deriver(task, scene)
    for goal in task.goal:
        d.run_goal(goal)
    d.emit(Verb.END)
    if not final_state_check(d.ep, task):
        raise InfeasibleGoal(f"derived plan does not satisfy task {task.id}")
    return KeyActionSequence(task_id=task.id, actions=d.actions)


@dataclass
class SearchPolicy:
    n_detours: int = 0
    allow_observe: bool = True


def insert_search_process(key: KeyActionSequence, scene: Scene,
                          policy: SearchPolicy, seed: int) -> ExploratoryPlan:
    """Inflate a key sequence with decoy navigations before the first
    revealing action, plus an Observe when the needed receptacles exceed
    the initially visible ones. Degrades to zero insertions."""
    rng = random.Random(seed)
    # the first goal's true-location chain (everything navigated/opened
    # before the first revealing interaction) is off-limits for decoys
    target_loc = None
    avoid = set()
    for a in key.actions:
        if a.verb in (Verb.NAVIGATE_TO, Verb.OPEN):
            if target_loc is None and a.verb == Verb.NAVIGATE_TO:
                target_loc = a.target
            avoid.add(a.target)
        else:
            break
    eligible = [r for r in scene.navigable_receptacles() if r not in avoid]
    n = min(policy.n_detours, len(eligible))
    decoys = rng.sample(eligible, n) if n > 0 else []
    # no immediate repeats: sample-without-replacement already guarantees it

    inserted = []
    known = set(scene.initially_visible)
    observed = False
    prefix = []
    for d in decoys:
        if d not in known and policy.allow_observe and not observed:
            prefix.append(Action(Verb.OBSERVE))
            inserted.append((0, prefix[-1]))
            known.update(scene.navigable_receptacles())
            observed = True
        prefix.append(Action(Verb.NAVIGATE_TO, d))
        inserted.append((0, prefix[-1]))
        known.add(d)
    if (
        target_loc
        and target_loc not in known
        and policy.allow_observe
        and not observed
        and decoys
    ):
        prefix.append(Action(Verb.OBSERVE))
        inserted.append((0, prefix[-1]))
    return ExploratoryPlan(key=key, inserted=inserted,
                           full=prefix + list(key.actions))


def _action_sig(action, scene):
    cls = action.target
    if cls is not None and cls in scene:
        cls = scene.obj(cls).class_name
    return (action.verb, cls)


def key_subsequence_progress(key_actions, predicted_actions, scene):
    """How many key actions are matched, in order, by the predicted
    interaction actions (Observe/MoveForward excluded)."""
    key_sigs = [_action_sig(a, scene) for a in key_actions]
    p = 0
    for action in predicted_actions:
        if action.verb not in INTERACTION_VERBS:
            continue
        if p < len(key_sigs) and _action_sig(action, scene) == key_sigs[p]:
            p += 1
    return p


def first_divergence(key: KeyActionSequence, predicted, scene: Scene, task=None):
    """Index of the first predicted action that is illegal in simulation,
    or after which the remaining key actions are no longer reachable as a
    subsequence; None when the prediction completes the task."""
    ep = Episode(scene, task=task, step_limit=10 ** 9)
    ep.reset()
    key_sigs = [_action_sig(a, scene) for a in key.actions]
    legal = []
    for action in predicted:
        outcome = ep.step(action)
        legal.append(outcome.ok)
        if ep.ended:
            break
    n = len(legal)
    completed = (
        key_subsequence_progress(key.actions, predicted[:n], scene) == len(key_sigs)
        and (task is None or final_state_check(ep, task))
    )
    if completed:
        return None

    p = 0
    for i in range(n):
        if not legal[i]:
            return i
        if predicted[i].verb not in INTERACTION_VERBS:
            continue
        sig = _action_sig(predicted[i], scene)
        if p < len(key_sigs) and sig == key_sigs[p]:
            p += 1
            continue
        # a deviation diverges when the remaining key is no longer
        # reachable as a subsequence of the actual future
        remaining = key_sigs[p:]
        tail = [
            _action_sig(a, scene)
            for a in predicted[i + 1 : n]
            if a.verb in INTERACTION_VERBS
        ]
        q = 0
        for s in tail:
            if q < len(remaining) and s == remaining[q]:
                q += 1
        if q < len(remaining):
            return i
    # legal and never irrecoverably deviating: the trajectory stalled
    # before finishing; the divergence point is its end
    return n
