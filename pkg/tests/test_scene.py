import pytest
from hypothesis import given, settings, strategies as st

from houseworld.catalog import DEFAULT_CLASSES, ROOM_TYPES, ObjectAttr
from houseworld.errors import InvariantViolation, ParseError, SpecInfeasible
from houseworld.scene import (
    MAX_DEPTH,
    ROOT_ID,
    AffiliationGraph,
    Scene,
    SceneObject,
    SceneSpec,
    ancestors,
    generate_scene,
    load_scene,
    save_scene,
)

from conftest import build_scene


def test_generate_is_deterministic():
    a = save_scene(generate_scene(SceneSpec("Kitchen", 6, 9, seed=3)))
    b = save_scene(generate_scene(SceneSpec("Kitchen", 6, 9, seed=3)))
    assert a == b
    c = save_scene(generate_scene(SceneSpec("Kitchen", 6, 9, seed=4)))
    assert a != c


def test_save_load_round_trip(kitchen):
    data = save_scene(kitchen)
    again = save_scene(load_scene(data))
    assert data == again


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10 ** 9),
    room=st.sampled_from(ROOM_TYPES),
    n_rec=st.integers(3, 8),
    n_items=st.integers(2, 8),
)
def test_generated_scenes_satisfy_invariants(seed, room, n_rec, n_items):
    scene = generate_scene(SceneSpec(room, n_rec, n_items, seed=seed))
    # forest depth bound, receptacle parents, class uniqueness
    classes = [o.class_name for o in scene.objects if o.id != ROOT_ID]
    assert len(classes) == len(set(classes))
    for node in scene.graph.nodes:
        assert scene.graph.depth(node) <= MAX_DEPTH
        if node != ROOT_ID:
            parent = scene.graph.parent[node]
            assert scene.obj(parent).attrs.receptacle
    for item in scene.items():
        chain = ancestors(scene, item)
        assert chain[0] == ROOT_ID
        assert any(scene.obj(a).attrs.receptacle for a in chain if a != ROOT_ID)
    assert scene.initially_visible <= set(scene.navigable_receptacles())


def test_ancestors_is_root_first(tiny_scene):
    assert ancestors(tiny_scene, "Apple_1") == [ROOT_ID, "Fridge_1"]
    assert ancestors(tiny_scene, "Fridge_1") == [ROOT_ID]


def test_cycle_is_rejected():
    objs = [
        SceneObject(ROOT_ID, "Kitchen", ObjectAttr(receptacle=True)),
        SceneObject("Bowl_1", "Bowl", DEFAULT_CLASSES["Bowl"]),
        SceneObject("Plate_1", "Plate", DEFAULT_CLASSES["Plate"]),
    ]
    graph = AffiliationGraph(
        nodes=[o.id for o in objs],
        parent={"Bowl_1": "Plate_1", "Plate_1": "Bowl_1"},
    )
    scene = Scene(id="cyc", room_type="Kitchen", objects=objs, graph=graph)
    with pytest.raises(InvariantViolation):
        scene.validate()


def test_non_receptacle_parent_is_rejected():
    with pytest.raises(InvariantViolation):
        build_scene("bad", "Kitchen", {
            "CounterTop_1": ("CounterTop", ROOT_ID),
            "Spoon_1": ("Spoon", ROOT_ID),
            "Apple_1": ("Apple", "Spoon_1"),
        })


def test_depth_bound_is_enforced():
    # room -> Fridge -> Bowl -> Mug -> Spoon is depth 4 for the spoon
    with pytest.raises(InvariantViolation):
        build_scene("deep", "Kitchen", {
            "Fridge_1": ("Fridge", ROOT_ID),
            "Bowl_1": ("Bowl", "Fridge_1"),
            "Mug_1": ("Mug", "Bowl_1"),
            "Spoon_1": ("Spoon", "Mug_1"),
        })


def test_initially_visible_must_be_navigable(tiny_scene):
    d = tiny_scene.to_dict()
    d["initially_visible"] = ["Apple_1"]
    with pytest.raises(InvariantViolation):
        Scene.from_dict(d)


def test_infeasible_spec_raises():
    with pytest.raises(SpecInfeasible):
        generate_scene(SceneSpec("Kitchen", 99, 5, seed=0))
    with pytest.raises(SpecInfeasible):
        generate_scene(SceneSpec("Hallway", 3, 3, seed=0))


def test_load_rejects_garbage():
    with pytest.raises(ParseError):
        load_scene(b"not json at all")
    with pytest.raises(ParseError):
        load_scene(b'{"id": "x"}')


def test_hidden_items_force_an_openable_receptacle():
    for seed in range(25):
        scene = generate_scene(SceneSpec("Bedroom", 3, 6, seed=seed,
                                         hidden_fraction=0.5))
        enclosed = [
            i for i in scene.items()
            if scene.obj(scene.graph.parent[i]).attrs.openable
        ]
        assert enclosed, f"seed {seed}: no enclosed item despite hidden_fraction"
