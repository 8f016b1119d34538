import pytest

from houseworld.catalog import DEFAULT_CLASSES, ObjectAttr
from houseworld.scene import (
    ROOT_ID,
    AffiliationGraph,
    Scene,
    SceneObject,
    SceneSpec,
    generate_scene,
)
from houseworld.tasks import synthesize_tasks


def build_scene(scene_id, room_type, layout, visible=None):
    """Hand-build a scene from {object_id: (class_name, parent_id)}.

    Attributes come from the builtin catalog; openables start closed.
    """
    objects = [SceneObject(ROOT_ID, room_type, ObjectAttr(receptacle=True))]
    parent = {}
    for oid, (cls, home) in layout.items():
        objects.append(SceneObject(oid, cls, DEFAULT_CLASSES[cls]))
        parent[oid] = home
    nav = [o.id for o in objects if o.attrs.navigable and o.id != ROOT_ID]
    scene = Scene(
        id=scene_id,
        room_type=room_type,
        objects=objects,
        graph=AffiliationGraph(nodes=[o.id for o in objects], parent=parent),
        initially_visible=set(visible) if visible is not None else set(nav),
        seed=0,
    )
    return scene.validate()


@pytest.fixture
def kitchen():
    return generate_scene(SceneSpec("Kitchen", 6, 10, seed=7))


@pytest.fixture
def kitchen_tasks(kitchen):
    mix = {
        "ExposedSearch": 2, "EnclosedSearch": 2, "ExposedGrasp": 2,
        "EnclosedGrasp": 2, "ExposedToggle": 1, "Exp2ExpTransfer": 2,
        "Exp2EncTransfer": 2, "Enc2ExpTransfer": 2, "Enc2EncTransfer": 2,
        "SequentialTransfer": 1, "LongTermComplex": 1,
    }
    return synthesize_tasks(kitchen, mix, seed=11)


@pytest.fixture
def tiny_scene():
    """Three-object scene: one surface, one container, one hidden item."""
    return build_scene("tiny", "Kitchen", {
        "CounterTop_1": ("CounterTop", ROOT_ID),
        "Fridge_1": ("Fridge", ROOT_ID),
        "Apple_1": ("Apple", "Fridge_1"),
    }, visible=["CounterTop_1", "Fridge_1"])
