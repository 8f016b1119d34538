"""Deterministic episode state machine over an immutable scene.

Observations are symbolic: a frame is a structured list of currently
visible objects plus a fixed natural-language rendering, standing in for
rendered first-person images. Visibility is a pure function of the
agent's location and container open flags:

* at a navigable receptacle L you see L, its child objects, items on a
  surface L (or inside L when L is open), and the contents of any open
  child container; contents of closed containers stay hidden;
* before the first navigation only the initially visible receptacles are
  in view;
* Observe discloses the existence of every navigable receptacle without
  revealing contents; MoveForward re-reads the current surface.
"""

import copy
from dataclasses import dataclass, field

from .actions import Action, Verb
from .errors import HouseworldError
from .scene import ROOT_ID, Scene

DEFAULT_STEP_LIMIT = 40


@dataclass
class AgentState:
    location: str = None
    held: str = None
    known_receptacles: set = field(default_factory=set)
    revealed_items: set = field(default_factory=set)
    step_count: int = 0

    def snapshot(self):
        return copy.deepcopy(self)


@dataclass
class Observation:
    kind: str  # "frame" | "feedback"
    entries: list = field(default_factory=list)
    feedback_text: str = None
    text: str = ""

    def to_dict(self):
        return {
            "kind": self.kind,
            "entries": self.entries,
            "feedback_text": self.feedback_text,
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            entries=d.get("entries", []),
            feedback_text=d.get("feedback_text"),
            text=d.get("text", ""),
        )


@dataclass
class StepOutcome:
    status: str  # "ok" | "illegal"
    observation: Observation
    state_after: AgentState
    error: str = None
    action: Action = None

    @property
    def ok(self):
        return self.status == "ok"


def _entry(scene, world, oid, note=None):
    obj = scene.obj(oid)
    e = {"id": oid, "class": obj.class_name}
    if obj.attrs.openable:
        e["open"] = world.open[oid]
    if obj.attrs.toggleable:
        e["toggled_on"] = world.toggled[oid]
    if note:
        e["note"] = note
    return e


def render_entry(e):
    flags = []
    if "open" in e:
        flags.append("open" if e["open"] else "closed")
    if "toggled_on" in e:
        flags.append("on" if e["toggled_on"] else "off")
    if "note" in e:
        flags.append(e["note"])
    if flags:
        return f"{e['class']} ({', '.join(flags)})"
    return e["class"]


def render_frame(location_class, entries, style="location"):
    """Deterministic frame text; exact strings are golden-tested."""
    listing = "; ".join(render_entry(e) for e in entries) or "nothing notable"
    if style == "corner":
        return f"From the corner of the room, you can see: {listing}."
    if style == "scan":
        return f"You look around the room and notice: {listing}."
    return f"You are at the {location_class}. You can see: {listing}."


class WorldState:
    """Mutable per-episode overlay of the immutable scene."""

    def __init__(self, scene: Scene):
        self.parent = dict(scene.graph.parent)
        self.open = {
            o.id: o.open for o in scene.objects if o.attrs.openable
        }
        self.toggled = {
            o.id: o.toggled_on for o in scene.objects if o.attrs.toggleable
        }

    def snapshot(self):
        return (dict(self.parent), dict(self.open), dict(self.toggled))


class Episode:
    """One interactive episode; mutated single-threaded."""

    def __init__(self, scene: Scene, seed: int = 0,
                 step_limit: int = DEFAULT_STEP_LIMIT, task=None):
        self.scene = scene
        self.seed = seed
        self.step_limit = step_limit
        self.task = task
        self.world = WorldState(scene)
        self.agent = AgentState()
        self.ended = False
        self.truncated = False
        self.goal_steps = {}  # goal index -> step when first satisfied
        self._started = False

    # -- lifecycle -----------------------------------------------------

    def reset(self):
        self.world = WorldState(self.scene)
        self.agent = AgentState(
            known_receptacles=set(self.scene.initially_visible)
        )
        self.ended = False
        self.truncated = False
        self.goal_steps = {}
        self._started = True
        obs = self._frame(style="corner")
        return self.agent, obs

    # -- visibility ----------------------------------------------------

    def visible_ids(self):
        agent = self.agent
        if agent.location is None:
            vis = set(agent.known_receptacles)
        else:
            loc = self.scene.obj(agent.location)
            vis = {agent.location}
            loc_open = (not loc.attrs.openable) or self.world.open[agent.location]
            for child in self._children(agent.location):
                cobj = self.scene.obj(child)
                if cobj.attrs.receptacle and not cobj.attrs.pickupable:
                    vis.add(child)
                    if cobj.attrs.openable and self.world.open[child]:
                        vis.update(self._children(child))
                    elif not cobj.attrs.openable:
                        vis.update(self._children(child))
                elif loc_open:
                    vis.add(child)
                    if cobj.attrs.receptacle:
                        vis.update(self._children(child))
        if agent.held:
            vis.add(agent.held)
        return vis

    def _children(self, oid):
        return sorted(c for c, p in self.world.parent.items() if p == oid)

    def _frame(self, style="location", ids=None):
        if ids is None:
            ids = sorted(self.visible_ids())
        entries = []
        for oid in ids:
            note = None
            parent = self.world.parent.get(oid)
            if parent and parent != ROOT_ID and parent in ids:
                pobj = self.scene.obj(parent)
                prep = "in" if pobj.attrs.openable else "on"
                note = f"{prep} {pobj.class_name}"
            entries.append(_entry(self.scene, self.world, oid, note))
        loc_class = (
            self.scene.obj(self.agent.location).class_name
            if self.agent.location
            else None
        )
        return Observation(
            kind="frame",
            entries=entries,
            text=render_frame(loc_class, entries, style=style),
        )

    # -- stepping ------------------------------------------------------

    def step(self, action: Action) -> StepOutcome:
        if not self._started:
            raise HouseworldError("reset() must be called before step()")
        if self.ended:
            return self._illegal(action, "EpisodeEnded")
        self.agent.step_count += 1
        handler = {
            Verb.NAVIGATE_TO: self._do_navigate,
            Verb.OPEN: self._do_open,
            Verb.CLOSE: self._do_close,
            Verb.PICKUP: self._do_pickup,
            Verb.PUT_IN: self._do_put_in,
            Verb.TOGGLE: self._do_toggle,
            Verb.OBSERVE: self._do_observe,
            Verb.MOVE_FORWARD: self._do_move_forward,
            Verb.END: self._do_end,
        }[action.verb]
        outcome = handler(action)
        if outcome.ok:
            for oid in self.visible_ids():
                if self.scene.obj(oid).attrs.pickupable:
                    self.agent.revealed_items.add(oid)
            self._track_goals()
        if self.agent.step_count >= self.step_limit and not self.ended:
            self.ended = True
            self.truncated = True
        return outcome

    def _track_goals(self):
        if self.task is None:
            return
        for i, goal in enumerate(self.task.goal):
            if i not in self.goal_steps and self.goal_holds(goal):
                self.goal_steps[i] = self.agent.step_count

    def goal_holds(self, goal):
        kind = goal.kind
        if kind == "search":
            return goal.target in self.agent.revealed_items
        if kind == "grasp":
            return self.agent.held == goal.target
        if kind == "toggle":
            return self.world.toggled.get(goal.target, False)
        if kind == "transfer":
            return self.world.parent.get(goal.target) == goal.dest
        raise HouseworldError(f"unknown goal kind {kind}")

    # -- verb handlers -------------------------------------------------

    def _resolve(self, action, check):
        """Resolve a class-or-id target; prefer a candidate that is legal."""
        t = action.target
        if t in self.scene:
            return t, check(t)
        cls = t
        if not self.scene.ids_of_class(cls):
            folded = t.strip().casefold().replace(" ", "")
            for name in self.scene._by_class:
                if name.casefold() == folded:
                    cls = name
                    break
        candidates = self.scene.ids_of_class(cls)
        if not candidates:
            return None, None
        first = None
        for oid in candidates:
            err = check(oid)
            if err is None:
                return oid, None
            if first is None:
                first = (oid, err)
        return first

    def _ok(self, action, style="location"):
        return StepOutcome(
            status="ok",
            observation=self._frame(style=style),
            state_after=self.agent.snapshot(),
            action=action,
        )

    def _illegal(self, action, error):
        from .prompts import render_feedback

        text = render_feedback(error, action, self.scene)
        obs = Observation(kind="feedback", feedback_text=text, text=text)
        return StepOutcome(
            status="illegal",
            observation=obs,
            state_after=self.agent.snapshot(),
            error=error,
            action=action,
        )

    def _adjacent(self, oid):
        loc = self.agent.location
        return loc is not None and (
            loc == oid or self.world.parent.get(oid) == loc
        )

    def _do_navigate(self, action):
        def check(oid):
            if not self.scene.obj(oid).attrs.navigable:
                return "TargetNotNavigable"
            return None

        oid, err = self._resolve(action, check)
        if oid is None:
            return self._illegal(action, "UnknownNavigationTarget")
        if err:
            return self._illegal(action, err)
        self.agent.location = oid
        self.agent.known_receptacles.add(oid)
        return self._ok(action)

    def _do_open(self, action):
        def check(oid):
            obj = self.scene.obj(oid)
            if not obj.attrs.openable:
                return "TargetUnavailable"
            if not self._adjacent(oid):
                return "TargetUnavailable"
            if self.world.open[oid]:
                return "AlreadyOpen"
            return None

        oid, err = self._resolve(action, check)
        if oid is None:
            return self._illegal(action, "UnknownInteractionTarget")
        if err:
            return self._illegal(action, err)
        self.world.open[oid] = True
        return self._ok(action)

    def _do_close(self, action):
        def check(oid):
            obj = self.scene.obj(oid)
            if not obj.attrs.openable:
                return "TargetUnavailable"
            if not self._adjacent(oid):
                return "TargetUnavailable"
            if not self.world.open[oid]:
                return "AlreadyClosed"
            return None

        oid, err = self._resolve(action, check)
        if oid is None:
            return self._illegal(action, "UnknownInteractionTarget")
        if err:
            return self._illegal(action, err)
        self.world.open[oid] = False
        return self._ok(action)

    def _do_pickup(self, action):
        def check(oid):
            obj = self.scene.obj(oid)
            if not obj.attrs.pickupable:
                return "TargetUnavailable"
            if oid not in self.visible_ids() or oid == self.agent.held:
                return "TargetUnavailable"
            if self.agent.held is not None:
                return "HandsFull"
            return None

        oid, err = self._resolve(action, check)
        if oid is None:
            return self._illegal(action, "UnknownInteractionTarget")
        if err:
            return self._illegal(action, err)
        self.agent.held = oid
        del self.world.parent[oid]
        return self._ok(action)

    def _do_put_in(self, action):
        def check(oid):
            obj = self.scene.obj(oid)
            if not obj.attrs.receptacle:
                return "TargetUnavailable"
            if self.agent.held is None:
                return "HandsEmpty"
            if oid == self.agent.held:
                return "TargetUnavailable"
            if not self._adjacent(oid):
                return "TargetUnavailable"
            if obj.attrs.openable and not self.world.open[oid]:
                return "ContainerClosed"
            return None

        oid, err = self._resolve(action, check)
        if oid is None:
            return self._illegal(action, "UnknownInteractionTarget")
        if err:
            return self._illegal(action, err)
        self.world.parent[self.agent.held] = oid
        self.agent.held = None
        return self._ok(action)

    def _do_toggle(self, action):
        def check(oid):
            obj = self.scene.obj(oid)
            if not obj.attrs.toggleable:
                return "TargetUnavailable"
            if oid not in self.visible_ids():
                return "TargetUnavailable"
            return None

        oid, err = self._resolve(action, check)
        if oid is None:
            return self._illegal(action, "UnknownInteractionTarget")
        if err:
            return self._illegal(action, err)
        self.world.toggled[oid] = not self.world.toggled[oid]
        return self._ok(action)

    def _do_observe(self, action):
        self.agent.known_receptacles.update(self.scene.navigable_receptacles())
        ids = sorted(self.agent.known_receptacles)
        frame = self._frame(style="scan", ids=ids)
        return StepOutcome(
            status="ok",
            observation=frame,
            state_after=self.agent.snapshot(),
            action=action,
        )

    def _do_move_forward(self, action):
        # Sharpens the current view; containment is unchanged.
        return self._ok(action)

    def _do_end(self, action):
        self.ended = True
        return self._ok(action)


def final_state_check(episode: Episode, task) -> bool:
    """True iff every goal predicate holds and, for composites, the goals
    were first satisfied in instruction order."""
    if episode.task is not task:
        raise HouseworldError("episode was not tracking this task")
    steps = []
    for i, goal in enumerate(task.goal):
        if not episode.goal_holds(goal):
            return False
        if i not in episode.goal_steps:
            return False
        steps.append(episode.goal_steps[i])
    return all(a <= b for a, b in zip(steps, steps[1:]))
