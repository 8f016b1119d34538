import pytest

from houseworld.errors import InvariantViolation
from houseworld.planner import SearchPolicy, derive_key_actions, insert_search_process
from houseworld.thoughts import (
    ACT,
    MAX_THOUGHTS_PER_ACTION,
    PATTERNS,
    TransitionModel,
    annotate,
    default_transition_model,
    estimate_matrix,
    empirical_pattern_counts,
    sample_transitions,
    thought_templates,
)


def test_default_model_rows_sum_to_one():
    model = default_transition_model()
    for state, row in model.rows.items():
        assert abs(sum(row.values()) - 1.0) < 1e-9, state


def test_default_model_pins_published_cells():
    rows = default_transition_model().rows
    assert rows["start"]["task_planning"] == pytest.approx(0.55)
    assert rows["start"]["spatial_reasoning"] == pytest.approx(0.45)
    assert rows["after_action"]["spatial_reasoning"] == pytest.approx(0.42)
    assert rows["after_action"]["self_reflection"] == pytest.approx(0.33)
    assert rows["after_action"]["double_verification"] == pytest.approx(0.03)
    assert rows["after_spatial_reasoning"]["double_verification"] == \
        pytest.approx(0.06)


def test_invalid_models_are_rejected():
    model = default_transition_model()
    broken = {k: dict(v) for k, v in model.rows.items()}
    broken["start"]["task_planning"] = 0.9
    with pytest.raises(InvariantViolation):
        TransitionModel(rows=broken).validate()
    with pytest.raises(InvariantViolation):
        TransitionModel(rows={"start": {"task_planning": 1.0}}).validate()
    with pytest.raises(InvariantViolation):
        TransitionModel(rows={"start": {"warp": 1.0}}).validate()


def test_gated_mass_folds_into_act():
    model = default_transition_model()
    row = model.effective_row("after_action", failed_search=False,
                              subgoal_done=False)
    assert "self_reflection" not in row
    assert "double_verification" not in row
    assert row[ACT] == pytest.approx(0.11 + 0.33 + 0.03)
    full = model.effective_row("after_action", failed_search=True,
                               subgoal_done=True)
    assert full["self_reflection"] == pytest.approx(0.33)


def test_calibration_quick():
    model = default_transition_model()
    pairs = sample_transitions(model, 20000, seed=9)
    est = estimate_matrix(pairs)
    assert abs(est["start"]["task_planning"] - 0.55) <= 0.02
    assert abs(est["start"]["spatial_reasoning"] - 0.45) <= 0.02
    assert abs(est["after_action"]["spatial_reasoning"] - 0.42) <= 0.02
    assert abs(est["after_action"]["self_reflection"] - 0.33) <= 0.02
    assert abs(est["after_action"]["double_verification"] - 0.03) <= 0.02
    assert abs(est["after_spatial_reasoning"]["double_verification"] - 0.06) \
        <= 0.02


def test_templates_cover_all_patterns():
    templates = thought_templates()
    for p in PATTERNS:
        assert len(templates[p]) >= 4, p
    assert templates["anomaly_reflection"]
    assert templates["correction_reflection"]


def _annotated(kitchen, task, detours=0, seed=0):
    key = derive_key_actions(task, kitchen)
    plan = insert_search_process(key, kitchen, SearchPolicy(detours), seed)
    return plan, annotate(plan, kitchen, task, seed=seed)


def test_annotate_grammar_and_caps(kitchen, kitchen_tasks):
    for task in kitchen_tasks:
        _, traj = _annotated(kitchen, task, detours=2, seed=4)
        traj.check_grammar()
        streak = 0
        for rec in traj.records:
            if rec.kind == "thought":
                streak += 1
                assert streak <= MAX_THOUGHTS_PER_ACTION
                assert rec.loss_mask
                assert "{" not in rec.payload.text  # slots filled
            else:
                streak = 0


def test_annotate_is_deterministic(kitchen, kitchen_tasks):
    task = kitchen_tasks[0]
    _, a = _annotated(kitchen, task, detours=2, seed=7)
    _, b = _annotated(kitchen, task, detours=2, seed=7)
    assert a.to_dict() == b.to_dict()
    _, c = _annotated(kitchen, task, detours=2, seed=8)
    assert a.to_dict() != c.to_dict()


def test_reflection_requires_failed_search(kitchen, kitchen_tasks):
    """With zero detours the oracle plan never misses, so the gated
    self-reflection pattern must not appear."""
    for task in kitchen_tasks:
        if task.sub_task not in ("ExposedSearch", "ExposedGrasp",
                                 "ExposedToggle"):
            continue
        for seed in range(6):
            _, traj = _annotated(kitchen, task, detours=0, seed=seed)
            kinds = [t.kind for t in traj.thoughts()]
            assert "self_reflection" not in kinds


def test_pattern_counts(kitchen, kitchen_tasks):
    trajs = [_annotated(kitchen, t, detours=2, seed=i)[1]
             for i, t in enumerate(kitchen_tasks)]
    counts = empirical_pattern_counts(trajs)
    assert set(counts) == set(PATTERNS)
    assert sum(counts.values()) == sum(len(t.thoughts()) for t in trajs)
    # the two always-eligible patterns dominate
    assert counts["task_planning"] + counts["spatial_reasoning"] > 0
