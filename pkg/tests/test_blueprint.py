from __future__ import annotations

import dataclasses
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stagecraft.blueprint import (
    Absolute,
    ActorProfile,
    Act,
    FlagSpec,
    LiteraryWork,
    NarrativeBlueprint,
    Point,
    Prop,
    RelativeTo,
    Scene,
    parse_document,
    parse_text,
    serialize,
    to_document,
    validate,
)
from stagecraft.errors import BlueprintSchemaError
from tests.conftest import elsinore_blueprint, make_prop


def play_within_a_play() -> NarrativeBlueprint:
    """The travelling players perform before the king; his reaction is the tell."""
    return NarrativeBlueprint(
        topic="A staged murder performed to catch the conscience of a king",
        source=LiteraryWork("Hamlet"),
        actors=(
            ActorProfile(
                name="Hamlet",
                persona="A prince directing a play with a hidden purpose.",
                relationships={"Claudius": "the uncle he suspects of murder"},
                initial_goal="Watch the king's face during the poisoning scene",
            ),
            ActorProfile(
                name="Claudius",
                persona="A king with a heavy conscience.",
                relationships={"Hamlet": "a nephew turned threat"},
                initial_goal="Sit through the entertainment unmoved",
            ),
            ActorProfile(
                name="First Player",
                persona="The lead of the travelling troupe.",
                initial_goal="Perform the commissioned scene",
            ),
        ),
        scenes=(
            Scene(
                id="great-hall",
                environment_description="The great hall of Elsinore, a small stage erected at its center.",
                props=(
                    make_prop("stage", state={"occupied": "players"}),
                    make_prop(
                        "vial",
                        "prop vial of poison",
                        placement=RelativeTo("stage", "on the boards, center stage"),
                        state={"used": "no"},
                    ),
                    make_prop("throne", state={"occupied": "Claudius"}),
                ),
            ),
        ),
        acts=(
            Act(
                id="act-1",
                scene_ids=("great-hall",),
                points=(
                    Point(
                        id="performance-begins",
                        description="The players begin the murder scene.",
                        flag=FlagSpec("The player pours the poison", "The mirror is held up"),
                        entry_list=("Hamlet", "Claudius", "First Player"),
                    ),
                    Point(
                        id="the-king-rises",
                        description="The king can bear no more.",
                        flag=FlagSpec("Claudius rises and calls for light", "Guilt revealed"),
                        leave_list=("Claudius",),
                    ),
                ),
                end_point_id="the-king-rises",
            ),
        ),
    )


# --- validation -----------------------------------------------------------------


def test_valid_blueprint_has_no_violations():
    assert validate(play_within_a_play()) == []
    assert validate(elsinore_blueprint()) == []


def test_undefined_entry_actor_is_flagged():
    blueprint = elsinore_blueprint()
    act = blueprint.acts[0]
    bad_point = dataclasses.replace(act.points[0], entry_list=("Hamlet", "Yorick"))
    bad = dataclasses.replace(
        blueprint,
        acts=(dataclasses.replace(act, points=(bad_point, act.points[1])),),
    )
    violations = validate(bad)
    assert len(violations) == 1
    assert "Yorick" in violations[0].message
    assert violations[0].path == "acts[0].points[0]"


def test_self_relative_prop_is_a_cycle():
    prop = make_prop("mirror", placement=RelativeTo("mirror", "on itself"))
    scene = Scene(id="s", environment_description="room", props=(prop,))
    blueprint = dataclasses.replace(
        elsinore_blueprint(),
        scenes=(scene,),
        acts=tuple(
            dataclasses.replace(act, scene_ids=("s",)) for act in elsinore_blueprint().acts
        ),
    )
    assert any("cycle" in v.message for v in validate(blueprint))


def test_two_prop_placement_cycle():
    a = make_prop("a", placement=RelativeTo("b", "on b"))
    b = make_prop("b", placement=RelativeTo("a", "on a"))
    scene = Scene(id="s", environment_description="room", props=(a, b))
    blueprint = dataclasses.replace(
        elsinore_blueprint(),
        scenes=(scene,),
        acts=tuple(
            dataclasses.replace(act, scene_ids=("s",)) for act in elsinore_blueprint().acts
        ),
    )
    assert sum("cycle" in v.message for v in validate(blueprint)) == 2


def test_relationship_to_unknown_name_flagged_unless_external():
    blueprint = elsinore_blueprint()
    actor = blueprint.actors[0]
    with_ghost = dataclasses.replace(
        blueprint,
        actors=(
            dataclasses.replace(
                actor, relationships={**actor.relationships, "The Ghost": "a terrible summons"}
            ),
            *blueprint.actors[1:],
        ),
    )
    assert any("The Ghost" in str(v) for v in validate(with_ghost))
    marked = dataclasses.replace(with_ghost, external_actors=("The Ghost",))
    assert validate(marked) == []


def test_end_point_must_anchor_the_act():
    blueprint = elsinore_blueprint()
    act = blueprint.acts[0]
    bad = dataclasses.replace(blueprint, acts=(dataclasses.replace(act, end_point_id="point-1"),))
    assert any("end point" in v.message for v in validate(bad))


def test_duplicate_actor_names_flagged():
    blueprint = elsinore_blueprint()
    dupe = dataclasses.replace(
        blueprint, actors=(*blueprint.actors, dataclasses.replace(blueprint.actors[0]))
    )
    assert any("duplicate actor name" in v.message for v in validate(dupe))


def test_validate_never_raises_on_odd_text():
    blueprint = elsinore_blueprint()
    weird = dataclasses.replace(blueprint, topic="\x00<>\"'\\ 𝕌nicode")
    assert validate(weird) == []


# --- serialization ---------------------------------------------------------------


def test_round_trip_play_within_a_play():
    original = play_within_a_play()
    assert parse_text(serialize(original)) == original


def test_round_trip_preserves_unknown_fields():
    doc = to_document(play_within_a_play())
    doc["mood"] = "ominous"
    doc["actors"][0]["voice"] = "low"
    parsed = parse_document(doc)
    assert parsed.extra["mood"] == "ominous"
    assert parsed.actors[0].extra["voice"] == "low"
    round_tripped = to_document(parsed)
    assert round_tripped["mood"] == "ominous"
    assert round_tripped["actors"][0]["voice"] == "low"


def test_serialization_is_canonical():
    # Structurally equal blueprints built independently serialize identically.
    assert serialize(play_within_a_play()) == serialize(play_within_a_play())
    blueprint = play_within_a_play()
    assert serialize(parse_text(serialize(blueprint))) == serialize(blueprint)


def test_empty_acts_rejected_by_schema():
    doc = to_document(play_within_a_play())
    doc["acts"] = []
    with pytest.raises(BlueprintSchemaError, match="acts"):
        parse_document(doc)


def test_missing_required_field_has_path():
    doc = to_document(play_within_a_play())
    del doc["actors"][1]["persona"]
    with pytest.raises(BlueprintSchemaError, match=r"actors\[1\].persona"):
        parse_document(doc)


def test_wrong_type_reports_expected_and_found():
    doc = to_document(play_within_a_play())
    doc["actors"][0]["memory"] = "not a list"
    with pytest.raises(BlueprintSchemaError, match="expected list, found str"):
        parse_document(doc)


def test_parse_rejects_non_json_text():
    with pytest.raises(BlueprintSchemaError, match="line 1"):
        parse_text("{not json")


def test_unknown_placement_kind_rejected():
    doc = to_document(play_within_a_play())
    doc["scenes"][0]["props"][0]["placement"] = {"kind": "floating", "description": "x"}
    with pytest.raises(BlueprintSchemaError, match="absolute"):
        parse_document(doc)


@given(st.text(min_size=0, max_size=40))
def test_text_fields_survive_round_trip(topic):
    blueprint = dataclasses.replace(play_within_a_play(), topic=topic)
    assert parse_text(serialize(blueprint)).topic == topic


def test_document_is_sorted_json():
    text = serialize(play_within_a_play())
    doc = json.loads(text)
    assert list(doc.keys()) == sorted(doc.keys())
    assert text.endswith("\n")
