"""Template-based instruction synthesis with constraint checking.

Constraints are a closed predicate algebra (Pickupable, Openable,
Toggleable, Receptacle, Parent, Different) evaluated directly against a
scene; every emitted instruction stores its per-predicate proof trace.
"""

import itertools
import logging
import random
from dataclasses import dataclass, field

from .errors import UnknownObject
from .scene import ROOT_ID, Scene
from .seeds import derive_seed

log = logging.getLogger(__name__)

SUB_TASKS = (
    "ExposedSearch", "EnclosedSearch",
    "ExposedGrasp", "EnclosedGrasp", "ExposedToggle",
    "Exp2ExpTransfer", "Exp2EncTransfer", "Enc2ExpTransfer", "Enc2EncTransfer",
    "SequentialTransfer", "LongTermComplex",
)

CATEGORY_OF = {
    "ExposedSearch": "Search",
    "EnclosedSearch": "Search",
    "ExposedGrasp": "Manipulate",
    "EnclosedGrasp": "Manipulate",
    "ExposedToggle": "Manipulate",
    "Exp2ExpTransfer": "Transport",
    "Exp2EncTransfer": "Transport",
    "Enc2ExpTransfer": "Transport",
    "Enc2EncTransfer": "Transport",
    "SequentialTransfer": "Composite",
    "LongTermComplex": "Composite",
}

# Constituents allowed inside the two composite types.
SEQUENTIAL_PARTS = ("Exp2ExpTransfer", "Exp2EncTransfer", "Enc2ExpTransfer")
LONG_TERM_PARTS = (
    "ExposedToggle", "Exp2ExpTransfer", "Enc2ExpTransfer",
    "Enc2EncTransfer", "Exp2EncTransfer",
)


@dataclass(frozen=True)
class Goal:
    kind: str  # search | grasp | toggle | transfer
    target: str
    dest: str = None

    def to_dict(self):
        d = {"kind": self.kind, "target": self.target}
        if self.dest is not None:
            d["dest"] = self.dest
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], target=d["target"], dest=d.get("dest"))


@dataclass
class TaskTemplate:
    sub_task: str
    slots: tuple
    constraint: tuple  # tuples: (name, term) / (name, term, term); name may be Not-prefixed
    text_forms: tuple  # >= 3 surface phrasings with slot holes


@dataclass
class ConstraintProof:
    entries: list = field(default_factory=list)  # (predicate_text, bool)

    @property
    def passed(self):
        return all(v for _, v in self.entries)

    def failed_predicates(self):
        return [p for p, v in self.entries if not v]

    def to_dict(self):
        return [{"predicate": p, "value": v} for p, v in self.entries]

    @classmethod
    def from_dict(cls, rows):
        return cls(entries=[(r["predicate"], r["value"]) for r in rows])


@dataclass
class TaskInstruction:
    id: str
    scene_id: str
    sub_task: str
    bindings: dict  # slot -> object id
    text: str
    goal: list  # ordered Goals
    proof: ConstraintProof = field(default_factory=ConstraintProof)

    @property
    def category(self):
        return CATEGORY_OF[self.sub_task]

    def to_dict(self):
        return {
            "id": self.id,
            "scene_id": self.scene_id,
            "sub_task": self.sub_task,
            "bindings": dict(sorted(self.bindings.items())),
            "text": self.text,
            "goal": [g.to_dict() for g in self.goal],
            "proof": self.proof.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            id=d["id"],
            scene_id=d["scene_id"],
            sub_task=d["sub_task"],
            bindings=dict(d["bindings"]),
            text=d["text"],
            goal=[Goal.from_dict(g) for g in d["goal"]],
            proof=ConstraintProof.from_dict(d.get("proof", [])),
        )


_EXPOSED_ITEM = (("Pickupable", "A"), ("NotOpenable", ("Parent", "A")))
_ENCLOSED_ITEM = (("Pickupable", "A"), ("Openable", ("Parent", "A")))
_DEST_EXPOSED = (("Receptacle", "B"), ("NotOpenable", "B"),
                 ("Different", "A", "B"), ("Different", "B", ("Parent", "A")))
_DEST_ENCLOSED = (("Receptacle", "B"), ("Openable", "B"),
                  ("Different", "A", "B"), ("Different", "B", ("Parent", "A")))

TEMPLATES = {
    "ExposedSearch": TaskTemplate(
        "ExposedSearch", ("A",), _EXPOSED_ITEM,
        (
            "Could you please find the {A} in the room?",
            "I can not find my {A}. Can you help me find it?",
            "Would you mind looking for the {A} for me?",
        ),
    ),
    "EnclosedSearch": TaskTemplate(
        "EnclosedSearch", ("A",), _ENCLOSED_ITEM,
        (
            "Could you please find the {A} in the room?",
            "I can not find my {A}. Can you help me find it?",
            "Would you mind looking for the {A} for me?",
        ),
    ),
    "ExposedGrasp": TaskTemplate(
        "ExposedGrasp", ("A",), _EXPOSED_ITEM,
        (
            "I want to pick up a {A} from the room, can you help me?",
            "Could you please pick up the {A} in the room?",
            "Would it be possible for you to pick up a {A} from the room?",
        ),
    ),
    "EnclosedGrasp": TaskTemplate(
        "EnclosedGrasp", ("A",), _ENCLOSED_ITEM,
        (
            "Would it be possible for you to pick up a {A} from the room?",
            "Could you please pick up the {A} in the room?",
            "I want to pick up a {A} from the room, can you help me?",
        ),
    ),
    "ExposedToggle": TaskTemplate(
        "ExposedToggle", ("A",),
        (("Toggleable", "A"), ("NotOpenable", ("Parent", "A"))),
        (
            "Would you mind powering on the {A} for me?",
            "Could you please turn on the {A}?",
            "I need the {A} switched on, can you do that?",
        ),
    ),
    "Exp2ExpTransfer": TaskTemplate(
        "Exp2ExpTransfer", ("A", "B"), _EXPOSED_ITEM + _DEST_EXPOSED,
        (
            "Could you please put the {A} on the {B}?",
            "Would you mind placing the {A} on the {B}, please?",
            "Is it okay to put the {A} on the {B}?",
        ),
    ),
    "Exp2EncTransfer": TaskTemplate(
        "Exp2EncTransfer", ("A", "B"), _EXPOSED_ITEM + _DEST_ENCLOSED,
        (
            "Would you mind placing the {A} in the {B}, please?",
            "Could you please put the {A} in the {B}?",
            "May I ask you to put the {A} in the {B}?",
        ),
    ),
    "Enc2ExpTransfer": TaskTemplate(
        "Enc2ExpTransfer", ("A", "B"), _ENCLOSED_ITEM + _DEST_EXPOSED,
        (
            "Is it okay to put the {A} on the {B}?",
            "Could you please put the {A} on the {B}?",
            "I'd appreciate it if you could leave the {A} on the {B} when possible.",
        ),
    ),
    "Enc2EncTransfer": TaskTemplate(
        "Enc2EncTransfer", ("A", "B"), _ENCLOSED_ITEM + _DEST_ENCLOSED,
        (
            "May I ask you to put the {A} in the {B}?",
            "Could you please put the {A} in the {B}?",
            "Would you mind placing the {A} in the {B}, please?",
        ),
    ),
    "SequentialTransfer": TaskTemplate(
        "SequentialTransfer", ("A1", "B1", "A2", "B2"),
        (("Different", "A1", "A2"),),  # plus the constituent transfer constraints
        (
            "Could you please first {c1}, and then {c2}?",
            "First, {c1}. After that, please {c2}.",
            "Would you mind doing this in order: {c1}, then {c2}?",
        ),
    ),
    "LongTermComplex": TaskTemplate(
        "LongTermComplex", ("A1", "B1", "A2", "B2", "A3", "B3", "A4", "B4"),
        (),  # constituent constraints plus pairwise Different over sources
        (
            "Could you please {c1}, then {c2}, then {c3}, and finally {c4}?",
            "First {c1}. Next, {c2}. Then {c3}. At last, {c4}.",
            "I have a list for you: {c1}; {c2}; {c3}; and then {c4}.",
        ),
    ),
}

COMPOSITE_TYPES = ("SequentialTransfer", "LongTermComplex")


def _term_text(term):
    if isinstance(term, tuple):
        return f"{term[0]}({term[1]})"
    return term


def _resolve_term(scene, bindings, term):
    if isinstance(term, tuple):  # ("Parent", slot)
        child = _resolve_term(scene, bindings, term[1])
        return scene.graph.parent.get(child, ROOT_ID)
    oid = bindings[term]
    if oid not in scene:
        raise UnknownObject(oid)
    return oid


def _eval_predicate(scene, bindings, pred):
    name = pred[0]
    negate = name.startswith("Not")
    base = name[3:] if negate else name
    if base == "Different":
        a = _resolve_term(scene, bindings, pred[1])
        b = _resolve_term(scene, bindings, pred[2])
        value = a != b
        text = f"Different({_term_text(pred[1])}, {_term_text(pred[2])})"
    else:
        oid = _resolve_term(scene, bindings, pred[1])
        attr = getattr(scene.obj(oid).attrs, base.lower())
        value = bool(attr)
        text = f"{base}({_term_text(pred[1])})"
    if negate:
        value = not value
        text = "Not" + text
    return text, value


def _composite_predicates(sub_task, bindings, scene):
    """Expand a composite's constraint into its constituents' predicates."""
    preds = []
    n = 2 if sub_task == "SequentialTransfer" else 4
    for i in range(1, n + 1):
        part = _part_type(bindings, i, scene)
        for pred in TEMPLATES[part].constraint:
            preds.append(_suffix_pred(pred, i))
    for i, j in itertools.combinations(range(1, n + 1), 2):
        preds.append(("Different", f"A{i}", f"A{j}"))
    return preds


def _suffix_pred(pred, i):
    def fix(term):
        if isinstance(term, tuple):
            return (term[0], fix(term[1]))
        return f"{term}{i}"

    if pred[0] == "Different":
        return (pred[0], fix(pred[1]), fix(pred[2]))
    return (pred[0], fix(pred[1]))


def _part_type(bindings, i, scene):
    """Constituent sub-task type of a composite binding; recoverable from
    the scene when the construction-time tag is absent."""
    if f"B{i}" not in bindings:
        return "ExposedToggle"
    tagged = bindings.get(f"_type{i}")
    if tagged:
        return tagged
    a, b = bindings[f"A{i}"], bindings[f"B{i}"]
    parent = scene.graph.parent.get(a, ROOT_ID)
    src = "Enc" if scene.obj(parent).attrs.openable else "Exp"
    dst = "Enc" if scene.obj(b).attrs.openable else "Exp"
    return f"{src}2{dst}Transfer"


def check_constraint(template: TaskTemplate, bindings, scene: Scene) -> ConstraintProof:
    """Evaluate every predicate; the proof records each truth value."""
    if template.sub_task in COMPOSITE_TYPES:
        preds = _composite_predicates(template.sub_task, bindings, scene)
    else:
        preds = template.constraint
    proof = ConstraintProof()
    for pred in preds:
        proof.entries.append(_eval_predicate(scene, bindings, pred))
    return proof


def _item_domain(scene):
    return [oid for oid in sorted(scene._by_id) if scene.obj(oid).attrs.pickupable]


def _toggle_domain(scene):
    return [oid for oid in sorted(scene._by_id)
            if scene.obj(oid).attrs.toggleable and oid != ROOT_ID]


def _dest_domain(scene):
    out = []
    for oid in sorted(scene._by_id):
        obj = scene.obj(oid)
        if oid == ROOT_ID or not obj.attrs.receptacle or obj.attrs.pickupable:
            continue
        parent = scene.graph.parent.get(oid)
        if obj.attrs.navigable or (
            parent and parent != ROOT_ID and scene.obj(parent).attrs.navigable
        ):
            out.append(oid)
    return out


def _simple_domains(sub_task, scene):
    if sub_task == "ExposedToggle":
        doms = {"A": _toggle_domain(scene)}
    else:
        doms = {"A": _item_domain(scene)}
    if sub_task.endswith("Transfer"):
        doms["B"] = _dest_domain(scene)
    return doms


def enumerate_bindings(template: TaskTemplate, scene: Scene, limit=None):
    """All binding tuples whose constraint passes, in lexicographic id order."""
    sub = template.sub_task
    out = []
    if sub == "SequentialTransfer":
        parts = [
            (t, b)
            for t in SEQUENTIAL_PARTS
            for b in enumerate_bindings(TEMPLATES[t], scene)
        ]
        combos = itertools.product(parts, parts)
        for (t1, b1), (t2, b2) in combos:
            binding = {
                "A1": b1["A"], "B1": b1["B"], "A2": b2["A"], "B2": b2["B"],
                "_type1": t1, "_type2": t2,
            }
            if check_constraint(template, binding, scene).passed:
                out.append(binding)
                if limit and len(out) >= limit:
                    return _sorted_bindings(out, template)
        return _sorted_bindings(out, template)
    if sub == "LongTermComplex":
        pools = {
            t: enumerate_bindings(TEMPLATES[t], scene) for t in LONG_TERM_PARTS
        }
        for types in itertools.permutations(LONG_TERM_PARTS, 4):
            for combo in itertools.product(*(pools[t] for t in types)):
                binding = {}
                for i, (t, b) in enumerate(zip(types, combo), start=1):
                    binding[f"A{i}"] = b["A"]
                    if "B" in b:
                        binding[f"B{i}"] = b["B"]
                    binding[f"_type{i}"] = t
                if check_constraint(template, binding, scene).passed:
                    out.append(binding)
                    if limit and len(out) >= limit:
                        return _sorted_bindings(out, template)
        return _sorted_bindings(out, template)

    doms = _simple_domains(sub, scene)
    slots = [s for s in template.slots if s in doms]
    for combo in itertools.product(*(doms[s] for s in slots)):
        binding = dict(zip(slots, combo))
        if check_constraint(template, binding, scene).passed:
            out.append(binding)
            if limit and len(out) >= limit:
                break
    return _sorted_bindings(out, template)


def _sorted_bindings(bindings, template):
    slots = [s for s in template.slots]
    return sorted(bindings, key=lambda b: tuple(b.get(s, "") for s in slots))


def goals_for(sub_task, bindings, scene=None):
    if sub_task in ("ExposedSearch", "EnclosedSearch"):
        return [Goal("search", bindings["A"])]
    if sub_task in ("ExposedGrasp", "EnclosedGrasp"):
        return [Goal("grasp", bindings["A"])]
    if sub_task == "ExposedToggle":
        return [Goal("toggle", bindings["A"])]
    if sub_task.endswith("Transfer") and sub_task not in COMPOSITE_TYPES:
        return [Goal("transfer", bindings["A"], bindings["B"])]
    n = 2 if sub_task == "SequentialTransfer" else 4
    goals = []
    for i in range(1, n + 1):
        if f"B{i}" in bindings:
            goals.append(Goal("transfer", bindings[f"A{i}"], bindings[f"B{i}"]))
        else:
            goals.append(Goal("toggle", bindings[f"A{i}"]))
    return goals


def _clause(scene, kind, a_id, b_id=None):
    a = scene.obj(a_id).class_name
    if kind == "toggle":
        return f"turn on the {a}"
    b = scene.obj(b_id).class_name
    prep = "in" if scene.obj(b_id).attrs.openable else "on"
    return f"place the {a} {prep} the {b}"


def render_text(template, bindings, scene, rng):
    form = rng.choice(template.text_forms)
    sub = template.sub_task
    if sub in COMPOSITE_TYPES:
        goals = goals_for(sub, bindings)
        clauses = {
            f"c{i}": _clause(scene, g.kind, g.target, g.dest)
            for i, g in enumerate(goals, start=1)
        }
        return form.format(**clauses)
    named = {s: scene.obj(bindings[s]).class_name for s in template.slots}
    return form.format(**named)


def _feasible(task, scene):
    from .planner import derive_key_actions
    from .simulator import Episode

    try:
        key = derive_key_actions(task, scene)
    except Exception:
        return False
    ep = Episode(scene, task=task)
    ep.reset()
    for action in key.actions:
        if not ep.step(action).ok:
            return False
    from .simulator import final_state_check

    return final_state_check(ep, task)


def _key_length(task, scene):
    """Interaction count of the derived key sequence, End excluded."""
    from .planner import derive_key_actions

    return len(derive_key_actions(task, scene).actions) - 1


def synthesize_tasks(scene: Scene, mix: dict, seed: int):
    """Instantiate `mix[sub_task]` instructions per sub-task, deterministically.

    Every emitted instruction carries a passing proof and has been re-run
    through the planner/simulator so it is guaranteed solvable. Short
    counts are best-effort and logged.
    """
    tasks = []
    for sub_task in SUB_TASKS:
        count = mix.get(sub_task, 0)
        if count <= 0:
            continue
        template = TEMPLATES[sub_task]
        rng = random.Random(derive_seed(seed, scene.id, sub_task))
        if sub_task in COMPOSITE_TYPES:
            chosen = _sample_composites(template, scene, count, rng)
        else:
            pool = enumerate_bindings(template, scene)
            pool = [b for b in pool
                    if _feasible(_mk_task(scene, sub_task, b, "probe", rng), scene)]
            if not pool:
                log.warning("no valid binding for %s on %s", sub_task, scene.id)
                continue
            if len(pool) >= count:
                chosen = rng.sample(pool, count)
            else:
                log.warning(
                    "only %d/%d bindings for %s on %s",
                    len(pool), count, sub_task, scene.id,
                )
                chosen = [pool[i % len(pool)] for i in range(count)]
        for n, binding in enumerate(chosen):
            task = _mk_task(scene, sub_task, binding, str(n), rng)
            tasks.append(task)
    return tasks


def _mk_task(scene, sub_task, binding, suffix, rng):
    template = TEMPLATES[sub_task]
    public = {k: v for k, v in binding.items() if not k.startswith("_")}
    return TaskInstruction(
        id=f"{scene.id}/{sub_task}/{suffix}",
        scene_id=scene.id,
        sub_task=sub_task,
        bindings=public,
        text=render_text(template, binding, scene, rng),
        goal=goals_for(sub_task, binding),
        proof=check_constraint(template, binding, scene),
    )


def _sample_composites(template, scene, count, rng, max_attempts_per=50):
    """Rejection-sample composite bindings; each candidate is re-checked by
    executing its derived key actions (excludes deadlocked compositions)."""
    sub = template.sub_task
    n_parts = 2 if sub == "SequentialTransfer" else 4
    part_types = SEQUENTIAL_PARTS if sub == "SequentialTransfer" else LONG_TERM_PARTS
    pools = {t: enumerate_bindings(TEMPLATES[t], scene) for t in part_types}
    usable = [t for t in part_types if pools[t]]
    chosen = []
    if len(usable) < n_parts:
        log.warning("no valid binding for %s on %s", sub, scene.id)
        return chosen
    for _ in range(count * max_attempts_per):
        if len(chosen) >= count:
            break
        types = rng.sample(usable, n_parts)
        binding = {}
        for i, t in enumerate(types, start=1):
            b = rng.choice(pools[t])
            binding[f"A{i}"] = b["A"]
            if "B" in b:
                binding[f"B{i}"] = b["B"]
            binding[f"_type{i}"] = t
        if not check_constraint(template, binding, scene).passed:
            continue
        probe = _mk_task(scene, sub, binding, "probe", random.Random(0))
        if _feasible(probe, scene) and _key_length(probe, scene) >= 8:
            chosen.append(binding)
    if len(chosen) < count:
        log.warning("only %d/%d composites for %s on %s",
                    len(chosen), count, sub, scene.id)
    return chosen


_GERUNDS = {
    "find": "finding",
    "pickup": "picking up",
    "pick": "picking",
    "put": "putting",
    "place": "placing",
    "toggle": "toggling",
    "turn": "turning",
}

BUILTIN_STYLES = ("polite-request", "direct", "urgent")


def _builtin_paraphrase(text, style_id):
    stripped = text.strip().rstrip(".?!")
    if style_id == "polite-request":
        words = stripped.split()
        head = words[0].lower()
        if head in _GERUNDS:
            return f"Would you mind {_GERUNDS[head]} {' '.join(words[1:])} for me?"
        return f"Would you mind helping with this: {stripped}?"
    if style_id == "direct":
        return f"Please {stripped[0].lower() + stripped[1:]}."
    if style_id == "urgent":
        return f"As soon as you can: {stripped}."
    raise ValueError(f"unknown style {style_id}")


def paraphrase_hook(text, style_id, endpoint=None, timeout=5.0):
    """Meaning-preserving restyling; goal structure is untouched.

    With `endpoint` set, an external text-generation service is consulted
    (POST {text, style} -> {text}); any failure falls back to the builtin
    canned style with a logged warning.
    """
    if endpoint:
        try:
            import httpx

            resp = httpx.post(
                endpoint, json={"text": text, "style": style_id}, timeout=timeout
            )
            resp.raise_for_status()
            return resp.json()["text"]
        except Exception as e:  # noqa: BLE001 - any transport failure degrades
            log.warning("paraphrase endpoint unavailable (%s); using builtin", e)
    return _builtin_paraphrase(text, style_id)
