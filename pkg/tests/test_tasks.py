import itertools

from houseworld.scene import ROOT_ID, SceneSpec, generate_scene
from houseworld.tasks import (
    CATEGORY_OF,
    COMPOSITE_TYPES,
    SUB_TASKS,
    TEMPLATES,
    check_constraint,
    enumerate_bindings,
    paraphrase_hook,
    synthesize_tasks,
)


def test_every_template_has_three_text_forms():
    for sub in SUB_TASKS:
        assert len(TEMPLATES[sub].text_forms) >= 3, sub


def test_eleven_sub_tasks_in_four_categories():
    assert len(SUB_TASKS) == 11
    assert set(CATEGORY_OF.values()) == {
        "Search", "Manipulate", "Transport", "Composite"
    }


def _oracle_simple_bindings(sub, scene):
    """Brute-force re-derivation of valid bindings, independent of the
    predicate-algebra evaluator."""
    def parent_open(oid):
        p = scene.graph.parent.get(oid, ROOT_ID)
        return scene.obj(p).attrs.openable

    items = [o.id for o in scene.objects if o.attrs.pickupable]
    toggles = [o.id for o in scene.objects
               if o.attrs.toggleable and o.id != ROOT_ID]
    dests = []
    for o in scene.objects:
        if o.id == ROOT_ID or not o.attrs.receptacle or o.attrs.pickupable:
            continue
        p = scene.graph.parent.get(o.id)
        if o.attrs.navigable or (p and p != ROOT_ID
                                 and scene.obj(p).attrs.navigable):
            dests.append(o.id)

    if sub == "ExposedSearch":
        return [{"A": a} for a in items if not parent_open(a)]
    if sub == "EnclosedSearch":
        return [{"A": a} for a in items if parent_open(a)]
    if sub == "ExposedGrasp":
        return [{"A": a} for a in items if not parent_open(a)]
    if sub == "EnclosedGrasp":
        return [{"A": a} for a in items if parent_open(a)]
    if sub == "ExposedToggle":
        return [{"A": a} for a in toggles if not parent_open(a)]
    src_enc = sub.startswith("Enc")
    dst_enc = sub.endswith("EncTransfer")
    out = []
    for a, b in itertools.product(items, dests):
        if parent_open(a) != src_enc:
            continue
        if scene.obj(b).attrs.openable != dst_enc:
            continue
        if a == b or scene.graph.parent.get(a) == b:
            continue
        out.append({"A": a, "B": b})
    return out


def test_enumerate_bindings_matches_brute_force(kitchen):
    for sub in SUB_TASKS:
        if sub in COMPOSITE_TYPES:
            continue
        got = enumerate_bindings(TEMPLATES[sub], kitchen)
        want = _oracle_simple_bindings(sub, kitchen)
        key = lambda b: (b["A"], b.get("B", ""))
        assert sorted(got, key=key) == sorted(want, key=key), sub


def test_constraint_proofs_record_every_predicate(kitchen):
    for sub in ("ExposedSearch", "Enc2EncTransfer"):
        for binding in enumerate_bindings(TEMPLATES[sub], kitchen)[:3]:
            proof = check_constraint(TEMPLATES[sub], binding, kitchen)
            assert proof.passed
            assert len(proof.entries) == len(TEMPLATES[sub].constraint)
            assert proof.failed_predicates() == []


def test_failing_proof_names_the_predicate(kitchen):
    enclosed = enumerate_bindings(TEMPLATES["EnclosedSearch"], kitchen)
    assert enclosed
    proof = check_constraint(TEMPLATES["ExposedSearch"], enclosed[0], kitchen)
    assert not proof.passed
    assert any("Openable(Parent(A))" in p for p in proof.failed_predicates())


def test_synthesize_is_deterministic(kitchen):
    mix = {"ExposedSearch": 2, "Enc2EncTransfer": 2, "SequentialTransfer": 1}
    a = [t.to_dict() for t in synthesize_tasks(kitchen, mix, seed=5)]
    b = [t.to_dict() for t in synthesize_tasks(kitchen, mix, seed=5)]
    assert a == b
    c = [t.to_dict() for t in synthesize_tasks(kitchen, mix, seed=6)]
    assert a != c


def test_synthesized_tasks_are_well_formed(kitchen, kitchen_tasks):
    assert kitchen_tasks
    for task in kitchen_tasks:
        assert task.scene_id == kitchen.id
        assert task.proof.passed
        assert task.goal
        assert "{" not in task.text  # all slots filled
        for goal in task.goal:
            assert goal.target in kitchen
            if goal.dest is not None:
                assert goal.dest in kitchen
        round_trip = type(task).from_dict(task.to_dict())
        assert round_trip.to_dict() == task.to_dict()


def test_composites_have_distinct_sources(kitchen_tasks):
    comps = [t for t in kitchen_tasks if t.sub_task in COMPOSITE_TYPES]
    assert comps
    for t in comps:
        n = 2 if t.sub_task == "SequentialTransfer" else 4
        assert len(t.goal) == n
        sources = [g.target for g in t.goal]
        assert len(sources) == len(set(sources))


def test_composite_key_length_floor(kitchen, kitchen_tasks):
    from houseworld.planner import derive_key_actions

    for t in kitchen_tasks:
        if t.sub_task in COMPOSITE_TYPES:
            key = derive_key_actions(t, kitchen)
            assert len(key.actions) - 1 >= 8, t.id


def test_tasks_over_many_scenes_cover_all_sub_tasks():
    mix = {s: 1 for s in SUB_TASKS}
    seen = set()
    for seed in range(8):
        scene = generate_scene(SceneSpec("Kitchen", 7, 10, seed=seed))
        for t in synthesize_tasks(scene, mix, seed=seed):
            seen.add(t.sub_task)
    assert seen == set(SUB_TASKS)


def test_builtin_paraphrase_styles():
    text = "find the Apple in the room."
    out = {paraphrase_hook(text, s) for s in
           ("polite-request", "direct", "urgent")}
    assert len(out) == 3
    for variant in out:
        assert "Apple" in variant


def test_paraphrase_endpoint_failure_degrades():
    text = "Could you please put the Bowl in the Cabinet?"
    out = paraphrase_hook(text, "direct",
                          endpoint="http://127.0.0.1:1/never", timeout=0.2)
    assert out == paraphrase_hook(text, "direct")
