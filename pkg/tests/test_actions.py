import pytest
from hypothesis import given, strategies as st

from houseworld.actions import (
    Action,
    INTERACTION_VERBS,
    TARGETED_VERBS,
    Verb,
    parse_action_text,
)
from houseworld.errors import InvariantViolation, ParseError


def test_verb_surface_forms():
    assert Verb.NAVIGATE_TO.value == "navigate to"
    assert Verb.PUT_IN.value == "put in"
    assert Verb.MOVE_FORWARD.value == "move forward"
    assert len(Verb) == 9


def test_interaction_verbs_exclude_exploration():
    assert Verb.OBSERVE not in INTERACTION_VERBS
    assert Verb.MOVE_FORWARD not in INTERACTION_VERBS
    assert Verb.END in INTERACTION_VERBS


def test_arity_checks():
    with pytest.raises(InvariantViolation):
        Action(Verb.PICKUP)
    with pytest.raises(InvariantViolation):
        Action(Verb.OBSERVE, "Fridge_1")
    Action(Verb.OBSERVE)
    Action(Verb.PICKUP, "Apple_1")


@given(
    verb=st.sampled_from(sorted(Verb, key=lambda v: v.value)),
    target=st.text(
        alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd")),
        min_size=1, max_size=12,
    ),
)
def test_parse_render_round_trip(verb, target):
    action = Action(verb, target if verb in TARGETED_VERBS else None)
    assert parse_action_text(action.render()) == action


def test_parse_is_case_and_space_insensitive():
    assert parse_action_text("  Navigate To   Fridge ") == \
        Action(Verb.NAVIGATE_TO, "Fridge")
    assert parse_action_text("PUT IN Cabinet") == Action(Verb.PUT_IN, "Cabinet")
    assert parse_action_text("End") == Action(Verb.END)


def test_parse_rejects_bad_arity_and_unknown_verbs():
    with pytest.raises(ParseError):
        parse_action_text("pickup")
    with pytest.raises(ParseError):
        parse_action_text("observe Fridge")
    with pytest.raises(ParseError):
        parse_action_text("teleport to Fridge")
    with pytest.raises(ParseError):
        parse_action_text("")


def test_render_uses_class_name_with_scene(tiny_scene):
    assert Action(Verb.NAVIGATE_TO, "Fridge_1").render(tiny_scene) == \
        "navigate to Fridge"
    assert Action(Verb.NAVIGATE_TO, "Fridge_1").render() == "navigate to Fridge_1"


def test_dict_round_trip():
    for a in (Action(Verb.END), Action(Verb.OPEN, "Fridge_1")):
        assert Action.from_dict(a.to_dict()) == a
