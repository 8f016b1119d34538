"""Hand-built fixture scenes whose derived key actions must reproduce the
documented per-sub-task exemplar sequences verbatim (the Sidetable /
SideTable spelling split in the sources is intentional and preserved)."""

from houseworld.scene import ROOT_ID
from houseworld.tasks import Goal, TaskInstruction

from conftest import build_scene


def _task(scene, sub_task, text, goals, bindings):
    return TaskInstruction(
        id=f"{scene.id}/{sub_task}/0",
        scene_id=scene.id,
        sub_task=sub_task,
        bindings=bindings,
        text=text,
        goal=goals,
    )


def exemplar_cases():
    """(sub_task, scene, task, expected rendered key lines) tuples."""
    cases = []

    s = build_scene("ex-exposed-search", "Kitchen", {
        "CounterTop_1": ("CounterTop", ROOT_ID),
        "Apple_1": ("Apple", "CounterTop_1"),
    })
    cases.append((
        "ExposedSearch", s,
        _task(s, "ExposedSearch", "Could you please find the Apple in the room?",
              [Goal("search", "Apple_1")], {"A": "Apple_1"}),
        ["navigate to CounterTop", "end"],
    ))

    s = build_scene("ex-enclosed-search", "Kitchen", {
        "Fridge_1": ("Fridge", ROOT_ID),
        "Apple_1": ("Apple", "Fridge_1"),
    })
    cases.append((
        "EnclosedSearch", s,
        _task(s, "EnclosedSearch", "Could you please find the Apple in the room?",
              [Goal("search", "Apple_1")], {"A": "Apple_1"}),
        ["navigate to Fridge", "open Fridge", "end"],
    ))

    s = build_scene("ex-exposed-toggle", "Bedroom", {
        "Desk_1": ("Desk", ROOT_ID),
        "Laptop_1": ("Laptop", "Desk_1"),
    })
    cases.append((
        "ExposedToggle", s,
        _task(s, "ExposedToggle", "Would you mind powering on the Laptop for me?",
              [Goal("toggle", "Laptop_1")], {"A": "Laptop_1"}),
        ["navigate to Desk", "toggle Laptop", "end"],
    ))

    s = build_scene("ex-exposed-grasp", "LivingRoom", {
        "SideTable_1": ("SideTable", ROOT_ID),
        "CreditCard_1": ("CreditCard", "SideTable_1"),
    })
    cases.append((
        "ExposedGrasp", s,
        _task(s, "ExposedGrasp",
              "I want to pick up a CreditCard from the room, can you help me?",
              [Goal("grasp", "CreditCard_1")], {"A": "CreditCard_1"}),
        ["navigate to SideTable", "pickup CreditCard", "end"],
    ))

    s = build_scene("ex-enclosed-grasp", "LivingRoom", {
        "Drawer_1": ("Drawer", ROOT_ID),
        "CreditCard_1": ("CreditCard", "Drawer_1"),
    })
    cases.append((
        "EnclosedGrasp", s,
        _task(s, "EnclosedGrasp",
              "Would it be possible for you to pick up a CreditCard from the room?",
              [Goal("grasp", "CreditCard_1")], {"A": "CreditCard_1"}),
        ["navigate to Drawer", "open Drawer", "pickup CreditCard", "end"],
    ))

    s = build_scene("ex-exp2exp", "Bedroom", {
        "Sidetable_1": ("Sidetable", ROOT_ID),
        "Shelf_1": ("Shelf", ROOT_ID),
        "AlarmClock_1": ("AlarmClock", "Sidetable_1"),
    })
    cases.append((
        "Exp2ExpTransfer", s,
        _task(s, "Exp2ExpTransfer",
              "Could you please put the AlarmClock on the Shelf?",
              [Goal("transfer", "AlarmClock_1", "Shelf_1")],
              {"A": "AlarmClock_1", "B": "Shelf_1"}),
        ["navigate to Sidetable", "pickup AlarmClock",
         "navigate to Shelf", "put in Shelf", "end"],
    ))

    s = build_scene("ex-exp2enc", "Kitchen", {
        "CounterTop_1": ("CounterTop", ROOT_ID),
        "Cabinet_1": ("Cabinet", ROOT_ID),
        "Bowl_1": ("Bowl", "CounterTop_1"),
    })
    cases.append((
        "Exp2EncTransfer", s,
        _task(s, "Exp2EncTransfer",
              "Would you mind placing the Bowl in the Cabinet, please?",
              [Goal("transfer", "Bowl_1", "Cabinet_1")],
              {"A": "Bowl_1", "B": "Cabinet_1"}),
        ["navigate to CounterTop", "pickup Bowl",
         "navigate to Cabinet", "open Cabinet", "put in Cabinet", "end"],
    ))

    s = build_scene("ex-enc2exp", "Bathroom", {
        "Cabinet_1": ("Cabinet", ROOT_ID),
        "Bathtub_1": ("Bathtub", ROOT_ID),
        "Candle_1": ("Candle", "Cabinet_1"),
    })
    cases.append((
        "Enc2ExpTransfer", s,
        _task(s, "Enc2ExpTransfer",
              "Is it okay to put the Candle on the Bathtub?",
              [Goal("transfer", "Candle_1", "Bathtub_1")],
              {"A": "Candle_1", "B": "Bathtub_1"}),
        ["navigate to Cabinet", "open Cabinet", "pickup Candle",
         "close Cabinet", "navigate to Bathtub", "put in Bathtub", "end"],
    ))

    s = build_scene("ex-enc2enc", "Kitchen", {
        "Fridge_1": ("Fridge", ROOT_ID),
        "Microwave_1": ("Microwave", ROOT_ID),
        "Potato_1": ("Potato", "Fridge_1"),
    })
    cases.append((
        "Enc2EncTransfer", s,
        _task(s, "Enc2EncTransfer",
              "May I ask you to put the Potato in the Microwave?",
              [Goal("transfer", "Potato_1", "Microwave_1")],
              {"A": "Potato_1", "B": "Microwave_1"}),
        ["navigate to Fridge", "open Fridge", "pickup Potato", "close Fridge",
         "navigate to Microwave", "open Microwave", "put in Microwave", "end"],
    ))

    return cases


def sequential_case():
    """Bonus two-part transfer exemplar (matched beyond the 9 templated
    sub-task rows)."""
    s = build_scene("ex-sequential", "Bedroom", {
        "Bed_1": ("Bed", ROOT_ID),
        "CoffeeTable_1": ("CoffeeTable", ROOT_ID),
        "Desk_1": ("Desk", ROOT_ID),
        "GarbageCan_1": ("GarbageCan", ROOT_ID),
        "TeddyBear_1": ("TeddyBear", "Bed_1"),
        "Pen_1": ("Pen", "Desk_1"),
    })
    task = _task(
        s, "SequentialTransfer",
        "Could you please first place the TeddyBear on the CoffeeTable, "
        "and then place the Pen on the GarbageCan?",
        [Goal("transfer", "TeddyBear_1", "CoffeeTable_1"),
         Goal("transfer", "Pen_1", "GarbageCan_1")],
        {"A1": "TeddyBear_1", "B1": "CoffeeTable_1",
         "A2": "Pen_1", "B2": "GarbageCan_1"},
    )
    expected = [
        "navigate to Bed", "pickup TeddyBear",
        "navigate to CoffeeTable", "put in CoffeeTable",
        "navigate to Desk", "pickup Pen",
        "navigate to GarbageCan", "put in GarbageCan", "end",
    ]
    return s, task, expected
