"""Interleaved trajectory records with loss masks and provenance."""

from dataclasses import dataclass, field

from .actions import Action
from .errors import GrammarViolation, InvariantViolation
from .simulator import Observation

KINDS = ("observation", "thought", "action", "feedback")
PROVENANCE = (
    "synthesized", "sampled", "injected_anomaly", "reflective_thought",
    "corrected_suffix", "erroneous_prefix",
)
MASKABLE_KINDS = ("thought", "action")


@dataclass
class TrajectoryRecord:
    kind: str
    payload: object  # Observation | Thought | Action | str (feedback text)
    loss_mask: bool = False
    provenance: str = "synthesized"

    def validate(self):
        if self.kind not in KINDS:
            raise InvariantViolation("record-kind", self.kind)
        if self.provenance not in PROVENANCE:
            raise InvariantViolation("provenance", self.provenance)
        if self.loss_mask and self.kind not in MASKABLE_KINDS:
            raise InvariantViolation(
                "loss-mask", "loss_mask only on thought/action records"
            )
        if self.provenance == "erroneous_prefix" and self.loss_mask:
            raise InvariantViolation(
                "loss-mask", "erroneous prefix records never train"
            )

    def to_dict(self):
        if self.kind == "observation":
            payload = self.payload.to_dict()
        elif self.kind in ("thought", "action"):
            payload = self.payload.to_dict()
        else:
            payload = self.payload
        return {
            "kind": self.kind,
            "payload": payload,
            "loss_mask": self.loss_mask,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        payload = d["payload"]
        if kind == "observation":
            payload = Observation.from_dict(payload)
        elif kind == "action":
            payload = Action.from_dict(payload)
        elif kind == "thought":
            from .thoughts import Thought

            payload = Thought.from_dict(payload)
        rec = cls(
            kind=kind,
            payload=payload,
            loss_mask=bool(d["loss_mask"]),
            provenance=d["provenance"],
        )
        rec.validate()
        return rec


@dataclass
class Trajectory:
    task_id: str
    scene_id: str
    seed: int = 0
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)  # anomaly specs, divergence, ...

    def actions(self):
        return [r.payload for r in self.records if r.kind == "action"]

    def thoughts(self):
        return [r.payload for r in self.records if r.kind == "thought"]

    def observations(self):
        return [r.payload for r in self.records if r.kind == "observation"]

    def check_grammar(self):
        """Record stream must match (Observation|Feedback (Thought)* Action)+
        with the final action being End."""
        state = "want_obs"
        for i, rec in enumerate(self.records):
            rec.validate()
            if rec.kind in ("observation", "feedback"):
                if state == "want_thought_or_action":
                    raise GrammarViolation(
                        f"record {i}: observation before an action closed the unit"
                    )
                state = "want_thought_or_action"
            elif rec.kind == "thought":
                if state != "want_thought_or_action":
                    raise GrammarViolation(f"record {i}: thought without observation")
            elif rec.kind == "action":
                if state != "want_thought_or_action":
                    raise GrammarViolation(f"record {i}: action without observation")
                state = "want_obs"
        if state != "want_obs":
            raise GrammarViolation("trajectory ends mid-unit")
        acts = self.actions()
        if not acts:
            raise GrammarViolation("trajectory has no actions")
        from .actions import Verb

        if acts[-1].verb != Verb.END:
            raise GrammarViolation("final action must be End")
        return self

    def to_dict(self):
        return {
            "task_id": self.task_id,
            "scene_id": self.scene_id,
            "seed": self.seed,
            "records": [r.to_dict() for r in self.records],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            task_id=d["task_id"],
            scene_id=d["scene_id"],
            seed=int(d.get("seed", 0)),
            records=[TrajectoryRecord.from_dict(r) for r in d["records"]],
            meta=dict(d.get("meta", {})),
        )
