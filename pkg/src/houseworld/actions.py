"""The 9 high-level actions and their text rendering."""

from dataclasses import dataclass
from enum import Enum

from .errors import InvariantViolation, ParseError


class Verb(Enum):
    OBSERVE = "observe"
    MOVE_FORWARD = "move forward"
    NAVIGATE_TO = "navigate to"
    PUT_IN = "put in"
    PICKUP = "pickup"
    TOGGLE = "toggle"
    CLOSE = "close"
    OPEN = "open"
    END = "end"


TARGETED_VERBS = frozenset(
    {Verb.NAVIGATE_TO, Verb.PUT_IN, Verb.PICKUP, Verb.TOGGLE, Verb.CLOSE, Verb.OPEN}
)
# Verbs that participate in key-action matching (Observe/MoveForward are
# exploration-only and excluded).
INTERACTION_VERBS = frozenset(TARGETED_VERBS | {Verb.END})


@dataclass(frozen=True)
class Action:
    verb: Verb
    target: str = None  # object class name or id; resolved at execution time

    def __post_init__(self):
        if self.verb in TARGETED_VERBS and not self.target:
            raise InvariantViolation("arity", f"{self.verb.value} requires a target")
        if self.verb not in TARGETED_VERBS and self.target is not None:
            raise InvariantViolation("arity", f"{self.verb.value} takes no target")

    def render(self, scene=None) -> str:
        """Surface form, e.g. "navigate to Fridge". Targets render as the
        object's class name when a scene is given."""
        if self.target is None:
            return self.verb.value
        name = self.target
        if scene is not None and name in scene:
            name = scene.obj(name).class_name
        return f"{self.verb.value} {name}"

    def to_dict(self):
        d = {"verb": self.verb.value}
        if self.target is not None:
            d["target"] = self.target
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(verb=Verb(d["verb"]), target=d.get("target"))


# Longest-verb-first so "put in" wins over a hypothetical "put" prefix.
_VERB_ORDER = sorted(Verb, key=lambda v: -len(v.value))


def parse_action_text(text: str) -> Action:
    """Parse an action surface form; verbs match case-insensitively."""
    body = " ".join(text.strip().split())
    low = body.lower()
    for verb in _VERB_ORDER:
        if low == verb.value:
            if verb in TARGETED_VERBS:
                raise ParseError(f"{verb.value} requires a target")
            return Action(verb)
        if low.startswith(verb.value + " "):
            if verb not in TARGETED_VERBS:
                raise ParseError(f"{verb.value} takes no target")
            target = body[len(verb.value) + 1 :].strip()
            if not target:
                raise ParseError(f"{verb.value} requires a target")
            return Action(verb, target)
    raise ParseError(f"unknown verb in action text: {text!r}")
