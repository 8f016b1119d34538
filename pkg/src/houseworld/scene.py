"""World model: objects, receptacles and the affiliation forest.

A scene is a forest rooted at the room node. An edge child -> parent
means "child is in/on parent". Scenes are immutable after construction
(episodes keep their own mutable overlay), and serialization is
canonical key-sorted JSON so byte equality is meaningful.
"""

import json
import random
from dataclasses import dataclass, field

from .catalog import DEFAULT_CATALOG, ObjectAttr, ROOM_TYPES
from .errors import InvariantViolation, ParseError, SpecInfeasible, UnknownObject

ROOT_ID = "room"
MAX_DEPTH = 3
DEFAULT_VISIBLE_FRACTION = 0.5


@dataclass
class SceneObject:
    id: str
    class_name: str
    attrs: ObjectAttr
    open: bool = False
    toggled_on: bool = False

    def validate(self):
        self.attrs.validate()
        if self.open and not self.attrs.openable:
            raise InvariantViolation("openable", f"{self.id}: open without openable")
        if self.toggled_on and not self.attrs.toggleable:
            raise InvariantViolation(
                "toggleable", f"{self.id}: toggled_on without toggleable"
            )

    def to_dict(self):
        return {
            "id": self.id,
            "class_name": self.class_name,
            "attrs": self.attrs.to_dict(),
            "state": {"open": self.open, "toggled_on": self.toggled_on},
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                id=d["id"],
                class_name=d["class_name"],
                attrs=ObjectAttr.from_dict(d["attrs"]),
                open=bool(d.get("state", {}).get("open", False)),
                toggled_on=bool(d.get("state", {}).get("toggled_on", False)),
            )
        except KeyError as e:
            raise ParseError(f"object missing field {e}", field=str(e))


class AffiliationGraph:
    """Forest over object ids; `parent` maps every non-root node."""

    def __init__(self, nodes, parent, root=ROOT_ID):
        self.nodes = set(nodes)
        self.parent = dict(parent)
        self.root = root

    def ancestors(self, object_id):
        """Path root -> ... -> parent(object), root first."""
        if object_id not in self.nodes:
            raise UnknownObject(object_id)
        chain = []
        cur = object_id
        seen = {cur}
        while cur in self.parent:
            cur = self.parent[cur]
            if cur in seen:
                raise InvariantViolation("forest", f"cycle through {cur}")
            seen.add(cur)
            chain.append(cur)
        return list(reversed(chain))

    def children(self, object_id):
        return sorted(c for c, p in self.parent.items() if p == object_id)

    def depth(self, object_id):
        return len(self.ancestors(object_id))


@dataclass
class Scene:
    id: str
    room_type: str
    objects: list = field(default_factory=list)
    graph: AffiliationGraph = None
    initially_visible: set = field(default_factory=set)
    seed: int = 0

    def __post_init__(self):
        self._by_id = {o.id: o for o in self.objects}
        self._by_class = {}
        for o in self.objects:
            self._by_class.setdefault(o.class_name, []).append(o.id)
        for ids in self._by_class.values():
            ids.sort()

    def obj(self, object_id) -> SceneObject:
        try:
            return self._by_id[object_id]
        except KeyError:
            raise UnknownObject(object_id)

    def __contains__(self, object_id):
        return object_id in self._by_id

    def ids_of_class(self, class_name):
        return list(self._by_class.get(class_name, []))

    def navigable_receptacles(self):
        return sorted(
            o.id for o in self.objects if o.attrs.navigable and o.id != ROOT_ID
        )

    def items(self):
        return sorted(o.id for o in self.objects if o.attrs.pickupable)

    def validate(self):
        if self.room_type not in ROOM_TYPES:
            raise InvariantViolation("room_type", self.room_type)
        seen = set()
        for o in self.objects:
            if o.id in seen:
                raise InvariantViolation("unique-id", o.id)
            seen.add(o.id)
            o.validate()
        if self.graph.root != ROOT_ID or ROOT_ID not in seen:
            raise InvariantViolation("root", "missing room node")
        if self.graph.nodes != seen:
            raise InvariantViolation("forest", "graph nodes != object ids")
        for node in self.graph.nodes:
            if node == ROOT_ID:
                if node in self.graph.parent:
                    raise InvariantViolation("forest", "root has a parent")
                continue
            if node not in self.graph.parent:
                raise InvariantViolation("forest", f"{node} has no parent")
        for child, parent in self.graph.parent.items():
            if parent not in seen:
                raise InvariantViolation("forest", f"unknown parent {parent}")
            if not self.obj(parent).attrs.receptacle:
                raise InvariantViolation(
                    "receptacle-parent", f"parent {parent} is not a receptacle"
                )
        for node in self.graph.nodes:
            if self.graph.depth(node) > MAX_DEPTH:  # also detects cycles
                raise InvariantViolation("depth", f"{node} deeper than {MAX_DEPTH}")
        nav = set(self.navigable_receptacles())
        if not self.initially_visible <= nav:
            raise InvariantViolation(
                "initially_visible", "initially_visible must be navigable receptacles"
            )
        for item in self.items():
            chain = self.graph.ancestors(item)
            if not any(
                self.obj(a).attrs.receptacle for a in chain if a != ROOT_ID
            ):
                raise InvariantViolation(
                    "item-ancestor", f"{item} has no receptacle ancestor"
                )
        return self

    def to_dict(self):
        return {
            "id": self.id,
            "room_type": self.room_type,
            "seed": self.seed,
            "objects": [o.to_dict() for o in sorted(self.objects, key=lambda o: o.id)],
            "parent": {c: p for c, p in sorted(self.graph.parent.items())},
            "initially_visible": sorted(self.initially_visible),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            objects = [SceneObject.from_dict(od) for od in d["objects"]]
            scene = cls(
                id=d["id"],
                room_type=d["room_type"],
                objects=objects,
                graph=AffiliationGraph(
                    nodes=[o.id for o in objects], parent=d["parent"]
                ),
                initially_visible=set(d["initially_visible"]),
                seed=int(d["seed"]),
            )
        except KeyError as e:
            raise ParseError(f"scene missing field {e}", field=str(e))
        return scene.validate()


@dataclass
class SceneSpec:
    room_type: str
    n_receptacles: int
    n_items: int
    seed: int
    visible_fraction: float = DEFAULT_VISIBLE_FRACTION
    hidden_fraction: float = 0.5


def generate_scene(spec: SceneSpec, catalog=DEFAULT_CATALOG) -> Scene:
    """Procedurally build a valid scene, deterministic in the spec seed.

    Receptacle and item classes are sampled without replacement so every
    class name resolves to exactly one object, which keeps text-level
    action targets unambiguous.
    """
    if spec.room_type not in ROOM_TYPES:
        raise SpecInfeasible(f"unknown room type {spec.room_type}")
    if spec.n_receptacles < 1 or spec.n_items < 1:
        raise SpecInfeasible("need at least one receptacle and one item")
    rec_pool = catalog.room_receptacles[spec.room_type]
    item_pool = catalog.room_items[spec.room_type]
    if spec.n_receptacles > len(rec_pool) or spec.n_items > len(item_pool):
        raise SpecInfeasible(
            f"catalog cannot satisfy counts for {spec.room_type}: "
            f"{spec.n_receptacles} receptacles / {spec.n_items} items"
        )
    rng = random.Random(spec.seed)
    rec_classes = rng.sample(rec_pool, spec.n_receptacles)
    n_hidden = round(spec.hidden_fraction * spec.n_items)
    if n_hidden > 0 and not any(catalog.attrs(c).openable for c in rec_classes):
        openable = [c for c in rec_pool if catalog.attrs(c).openable]
        if not openable:
            n_hidden = 0
        else:
            rec_classes[-1] = rng.choice(
                [c for c in openable if c not in rec_classes]
            )
    item_classes = rng.sample(item_pool, spec.n_items)

    objects = [
        SceneObject(ROOT_ID, spec.room_type, ObjectAttr(receptacle=True))
    ]
    parent = {}
    receptacle_ids = []
    for c in rec_classes:
        oid = f"{c}_1"
        objects.append(SceneObject(oid, c, catalog.attrs(c)))
        parent[oid] = ROOT_ID
        receptacle_ids.append(oid)
    open_recs = [r for r in receptacle_ids if catalog.attrs(r.rsplit("_", 1)[0]).openable]
    surface_recs = [r for r in receptacle_ids if r not in open_recs]
    for i, c in enumerate(item_classes):
        oid = f"{c}_1"
        attrs = catalog.attrs(c)
        hide = i < n_hidden and attrs.pickupable and open_recs
        if hide:
            home = rng.choice(open_recs)
        elif surface_recs:
            home = rng.choice(surface_recs)
        else:
            home = rng.choice(receptacle_ids)
        objects.append(SceneObject(oid, c, attrs))
        parent[oid] = home

    nav = sorted(r for r in receptacle_ids)
    k = max(1, round(spec.visible_fraction * len(nav)))
    initially_visible = set(rng.sample(nav, min(k, len(nav))))

    scene = Scene(
        id=f"{spec.room_type}-{spec.seed}",
        room_type=spec.room_type,
        objects=objects,
        graph=AffiliationGraph(nodes=[o.id for o in objects], parent=parent),
        initially_visible=initially_visible,
        seed=spec.seed,
    )
    return scene.validate()


def save_scene(scene: Scene) -> bytes:
    """Canonical UTF-8 serialization; key-sorted so bytes are comparable."""
    return (json.dumps(scene.to_dict(), sort_keys=True, indent=2) + "\n").encode(
        "utf-8"
    )


def load_scene(data: bytes) -> Scene:
    try:
        d = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"not a scene document: {e}")
    return Scene.from_dict(d)


def ancestors(scene: Scene, object_id: str):
    """Affiliation path root -> ... -> parent(object)."""
    return scene.graph.ancestors(object_id)
