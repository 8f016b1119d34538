"""Object class catalog: class name -> default attribute flags.

The catalog is a static table bundled with the repo so constraint checks
and scene generation stay deterministic. A custom catalog can be loaded
from JSON (same shape as `to_dict`).
"""

import json
from dataclasses import dataclass

CATALOG_VERSION = "builtin-1"


@dataclass(frozen=True)
class ObjectAttr:
    pickupable: bool = False
    openable: bool = False
    toggleable: bool = False
    receptacle: bool = False
    navigable: bool = False

    def validate(self):
        from .errors import InvariantViolation

        if self.openable and not self.receptacle:
            raise InvariantViolation("openable", "openable requires receptacle")
        if self.navigable and not self.receptacle:
            raise InvariantViolation("navigable", "navigable requires receptacle")
        if self.navigable and self.pickupable:
            raise InvariantViolation(
                "navigable", "an object cannot be both navigable and pickupable"
            )

    def to_dict(self):
        return {
            "pickupable": self.pickupable,
            "openable": self.openable,
            "toggleable": self.toggleable,
            "receptacle": self.receptacle,
            "navigable": self.navigable,
        }

    @classmethod
    def from_dict(cls, d):
        attr = cls(
            pickupable=bool(d.get("pickupable", False)),
            openable=bool(d.get("openable", False)),
            toggleable=bool(d.get("toggleable", False)),
            receptacle=bool(d.get("receptacle", False)),
            navigable=bool(d.get("navigable", False)),
        )
        attr.validate()
        return attr


def _surface(**kw):
    return ObjectAttr(receptacle=True, navigable=True, **kw)


def _container(**kw):
    return ObjectAttr(receptacle=True, navigable=True, openable=True, **kw)


def _item(**kw):
    return ObjectAttr(pickupable=True, **kw)


# Large navigable receptacles (non-openable surfaces), openable containers,
# and pickupable items. Classes follow the simulator-metadata naming style
# (CounterTop, SinkBasin, ...).
DEFAULT_CLASSES = {
    # surfaces
    "CounterTop": _surface(),
    "DiningTable": _surface(),
    "Desk": _surface(),
    "Sofa": _surface(),
    "Shelf": _surface(),
    "SideTable": _surface(),
    "Sidetable": _surface(),
    "Bed": _surface(),
    "GarbageCan": _surface(),
    "SinkBasin": _surface(),
    "CoffeeTable": _surface(),
    "Bathtub": _surface(),
    "Dresser": _surface(),
    "Toilet": _surface(),
    "CoffeeMachine": ObjectAttr(receptacle=True, navigable=True, toggleable=True),
    "Mudroom": _surface(),
    # openable containers
    "Fridge": _container(),
    "Microwave": _container(toggleable=True),
    "Cabinet": _container(),
    "Drawer": _container(),
    "Safe": _container(),
    "LaundryHamper": _container(),
    # items
    "Apple": _item(),
    "Egg": _item(),
    "Potato": _item(),
    "Bread": _item(),
    "Tomato": _item(),
    "Lettuce": _item(),
    "Bowl": ObjectAttr(pickupable=True, receptacle=True),
    "Mug": ObjectAttr(pickupable=True, receptacle=True),
    "Cup": ObjectAttr(pickupable=True, receptacle=True),
    "Plate": ObjectAttr(pickupable=True, receptacle=True),
    "Spoon": _item(),
    "Fork": _item(),
    "Knife": _item(),
    "KeyChain": _item(),
    "CreditCard": _item(),
    "AlarmClock": _item(),
    "Laptop": _item(toggleable=True),
    "CellPhone": _item(toggleable=True),
    "Candle": _item(toggleable=True),
    "DeskLamp": ObjectAttr(toggleable=True),
    "FloorLamp": ObjectAttr(toggleable=True),
    "Faucet": ObjectAttr(toggleable=True),
    "Television": ObjectAttr(toggleable=True),
    "Book": _item(),
    "Pen": _item(),
    "Pencil": _item(),
    "Watch": _item(),
    "TeddyBear": _item(),
    "RemoteControl": _item(toggleable=True),
    "SoapBar": _item(),
    "TissueBox": _item(),
    "Cloth": _item(),
    "Towel": _item(),
    "SprayBottle": _item(),
}

ROOM_TYPES = ("Kitchen", "LivingRoom", "Bedroom", "Bathroom")

# Per-room pools used by the scene generator. Receptacles and items are
# sampled without replacement so class names resolve unambiguously.
ROOM_RECEPTACLES = {
    "Kitchen": [
        "CounterTop", "DiningTable", "SinkBasin", "GarbageCan", "Shelf",
        "Fridge", "Microwave", "Cabinet", "Drawer", "CoffeeMachine",
    ],
    "LivingRoom": [
        "Sofa", "CoffeeTable", "SideTable", "Shelf", "GarbageCan",
        "Desk", "Cabinet", "Drawer", "Dresser", "Safe",
    ],
    "Bedroom": [
        "Bed", "Desk", "SideTable", "Shelf", "GarbageCan",
        "Dresser", "Drawer", "Safe", "Cabinet", "LaundryHamper",
    ],
    "Bathroom": [
        "Bathtub", "SinkBasin", "Toilet", "GarbageCan", "Shelf",
        "Cabinet", "Drawer", "Dresser", "LaundryHamper", "SideTable",
    ],
}

ROOM_ITEMS = {
    "Kitchen": [
        "Apple", "Egg", "Potato", "Bread", "Tomato", "Lettuce", "Bowl",
        "Mug", "Cup", "Plate", "Spoon", "Fork", "Knife", "Candle",
    ],
    "LivingRoom": [
        "RemoteControl", "KeyChain", "CreditCard", "Book", "Laptop",
        "CellPhone", "Candle", "Mug", "Watch", "Pen", "Pencil", "TissueBox",
    ],
    "Bedroom": [
        "Laptop", "CellPhone", "Book", "AlarmClock", "KeyChain",
        "CreditCard", "Pen", "Pencil", "TeddyBear", "Watch", "Candle",
    ],
    "Bathroom": [
        "SoapBar", "Candle", "TissueBox", "Cloth", "Towel", "SprayBottle",
        "Plate", "Cup", "Mug", "Bowl",
    ],
}


class Catalog:
    """Lookup table of class attributes plus per-room sampling pools."""

    def __init__(self, classes=None, room_receptacles=None, room_items=None,
                 version=CATALOG_VERSION):
        self.classes = dict(classes if classes is not None else DEFAULT_CLASSES)
        self.room_receptacles = dict(
            room_receptacles if room_receptacles is not None else ROOM_RECEPTACLES
        )
        self.room_items = dict(room_items if room_items is not None else ROOM_ITEMS)
        self.version = version

    def attrs(self, class_name: str) -> ObjectAttr:
        from .errors import UnknownObject

        try:
            return self.classes[class_name]
        except KeyError:
            raise UnknownObject(f"class not in catalog: {class_name}")

    def __contains__(self, class_name):
        return class_name in self.classes

    def resolve_class(self, phrase: str):
        """Match a free-text class phrase: exact first, then case-folded."""
        if phrase in self.classes:
            return phrase
        folded = phrase.strip().casefold().replace(" ", "")
        for name in self.classes:
            if name.casefold() == folded:
                return name
        return None

    def to_dict(self):
        return {
            "version": self.version,
            "classes": {k: v.to_dict() for k, v in sorted(self.classes.items())},
            "room_receptacles": self.room_receptacles,
            "room_items": self.room_items,
        }

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
        return cls(
            classes={k: ObjectAttr.from_dict(v) for k, v in d["classes"].items()},
            room_receptacles=d.get("room_receptacles", ROOM_RECEPTACLES),
            room_items=d.get("room_items", ROOM_ITEMS),
            version=d.get("version", "custom"),
        )


DEFAULT_CATALOG = Catalog()
