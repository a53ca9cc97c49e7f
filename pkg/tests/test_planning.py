from __future__ import annotations

import json

import pytest

from stagecraft.blueprint import validate
from stagecraft.errors import ContractViolation, ParseFailure
from stagecraft.gateway import RawReply, ScriptedBackend
from stagecraft.planning import (
    AuditTrail,
    FixtureSearch,
    ReviewResult,
    assemble_blueprint,
    generate_actor_list,
    generate_actor_profiles,
    generate_plot,
    generate_scene_props,
    plan_from_topic,
    review_loop,
    segment_literary_work,
)
from tests.conftest import backend_from

TOPIC = (
    "A wealthy man is murdered in his study, and the killer is among the guests "
    "present that night."
)


def _point(pid: str, flag: str, entry=(), leave=()) -> dict:
    return {
        "id": pid,
        "description": f"the events of {pid}",
        "entry_name_list": list(entry),
        "leave_name_list": list(leave),
        "flag": {"description": flag, "result": f"{pid} done"},
    }


PROFILE_REPLY = json.dumps(
    {
        "persona": "A consulting detective of razor deduction.",
        "background": "Famous in London.",
        "relationships": {"Dr. Watson": "a trusted companion"},
        "initial_goal": "Identify the murderer",
    }
)
WATSON_REPLY = json.dumps(
    {
        "persona": "A steadfast doctor and chronicler.",
        "background": "Army surgeon, retired.",
        "relationships": {"Sherlock Holmes": "a brilliant friend"},
        "initial_goal": "Assist the investigation",
    }
)
APPROVE = json.dumps({"approved": True, "issues": [], "suggestions": []})
REJECT = json.dumps(
    {"approved": False, "issues": ["too thin"], "suggestions": ["add depth"]}
)


# --- actor list -------------------------------------------------------------------


def test_actor_list_from_topic():
    backend = backend_from({"actor_list": ['["Sherlock Holmes", "Dr. Watson"]']})
    assert generate_actor_list(TOPIC, backend) == ["Sherlock Holmes", "Dr. Watson"]


def test_actor_list_drops_duplicates(caplog):
    backend = backend_from({"actor_list": ['["Holmes", "Watson", "Holmes"]']})
    with caplog.at_level("WARNING"):
        names = generate_actor_list(TOPIC, backend)
    assert names == ["Holmes", "Watson"]
    assert any("duplicate" in r.message for r in caplog.records)


def test_actor_list_empty_array_fails_after_retry():
    backend = backend_from({"actor_list": ["[]", "[]"]})
    with pytest.raises(ParseFailure):
        generate_actor_list(TOPIC, backend)


def test_actor_list_repairs_broken_json_once():
    backend = backend_from({"actor_list": ["not json at all", '["Holmes"]']})
    assert generate_actor_list(TOPIC, backend) == ["Holmes"]


def test_actor_list_requires_topic():
    with pytest.raises(ContractViolation):
        generate_actor_list("", ScriptedBackend())


# --- profiles ----------------------------------------------------------------------


def test_profiles_one_per_name_and_valid():
    backend = backend_from(
        {"profile:Sherlock Holmes": [PROFILE_REPLY], "profile:Dr. Watson": [WATSON_REPLY]}
    )
    search = FixtureSearch()
    profiles = generate_actor_profiles(
        TOPIC, ["Sherlock Holmes", "Dr. Watson"], backend, search
    )
    assert [p.name for p in profiles] == ["Sherlock Holmes", "Dr. Watson"]
    assert search.queries == [f"{TOPIC} Sherlock Holmes", f"{TOPIC} Dr. Watson"]


def test_profiles_degrade_when_search_unavailable(caplog):
    backend = backend_from({"profile:Holmes": [PROFILE_REPLY]})
    audit = AuditTrail()
    with caplog.at_level("WARNING"):
        profiles = generate_actor_profiles(
            TOPIC, ["Holmes"], backend, FixtureSearch(available=False), audit=audit
        )
    assert len(profiles) == 1
    assert any(r.get("degraded") for r in audit.records if r["step"] == "search")


def test_profile_missing_persona_reports_field_path():
    backend = backend_from(
        {"profile:Holmes": ['{"background": "x"}', '{"background": "x"}']}
    )
    with pytest.raises(ParseFailure, match="persona"):
        generate_actor_profiles(TOPIC, ["Holmes"], backend, None)


# --- review loop --------------------------------------------------------------------


def test_review_approves_first_round():
    backend = backend_from({"reviewer:actors": [APPROVE]})
    artifact, rounds = review_loop("draft", "actors", backend, lambda a, r: a + "!")
    assert (artifact, rounds) == ("draft", 1)


def test_review_rejects_five_times_then_forces_approval():
    backend = backend_from({"reviewer:plot": [REJECT] * 5})
    revisions = []

    def reviser(artifact, review):
        revisions.append(review.round)
        return artifact + "+"

    artifact, rounds = review_loop("v1", "plot", backend, reviser)
    assert rounds == 6
    assert artifact == "v1+++++"  # five revisions: the sixth version ships
    assert revisions == [1, 2, 3, 4, 5]


def test_review_terminates_against_rejecting_forever_stub():
    class RejectingForever:
        def generate(self, request):
            return RawReply(REJECT, 0.0)

    artifact, rounds = review_loop("x", "actors", RejectingForever(), lambda a, r: a)
    assert rounds == 6


def test_review_with_four_suggestions_is_a_parse_failure():
    bad = json.dumps(
        {"approved": False, "issues": ["i"], "suggestions": ["a", "b", "c", "d"]}
    )
    backend = backend_from({"reviewer:actors": [bad, bad]})
    with pytest.raises(ParseFailure, match="between 1 and 3"):
        review_loop("x", "actors", backend, lambda a, r: a)


def test_review_result_round_six_must_be_approved():
    with pytest.raises(ValueError, match="sixth"):
        ReviewResult(approved=False, issues=(), suggestions=("s",), round=6)


# --- plot -------------------------------------------------------------------------


def _plot_backend(points_backwards: list[dict], end: dict) -> ScriptedBackend:
    return backend_from(
        {
            "plot_end": [json.dumps({"narrative": "a tale of greed", "end_point": end})],
            "plot_body": [json.dumps({"points": points_backwards})],
        }
    )


def test_plot_generates_ending_first_but_stores_it_last():
    end = _point("p-end", "the murderer is named")
    backend = _plot_backend(
        [_point("p-2", "the key clue surfaces"), _point("p-1", "the body is found")], end
    )
    draft = generate_plot(TOPIC, [], backend)
    assert [p.id for p in draft.points] == ["p-1", "p-2", "p-end"]
    assert draft.end_point.id == "p-end"
    assert draft.narrative_text == "a tale of greed"


def test_single_point_plot():
    backend = _plot_backend([], _point("p-end", "the end"))
    draft = generate_plot(TOPIC, [], backend)
    assert [p.id for p in draft.points] == ["p-end"]


def test_plot_point_with_empty_flag_fails():
    bad_end = _point("p-end", "")
    backend = backend_from(
        {
            "plot_end": [
                json.dumps({"end_point": bad_end}),
                json.dumps({"end_point": bad_end}),
            ]
        }
    )
    with pytest.raises(ParseFailure, match="flag"):
        generate_plot(TOPIC, [], backend)


# --- scenes ------------------------------------------------------------------------


def _scene_reply(props: list[dict]) -> str:
    return json.dumps(
        {
            "scenes": [
                {
                    "id": "study",
                    "environment_description": "The victim's study.",
                    "props": props,
                }
            ]
        }
    )


def _prop(pid: str, placement: dict) -> dict:
    return {"id": pid, "name": pid, "description": pid, "placement": placement}


def test_scene_with_absolute_and_relative_props():
    backend = backend_from(
        {
            "scenes": [
                _scene_reply(
                    [
                        _prop("table", {"kind": "absolute", "description": "center of the room"}),
                        _prop(
                            "teacup",
                            {
                                "kind": "relative",
                                "parent": "table",
                                "description": "on the left side of the table",
                            },
                        ),
                    ]
                )
            ]
        }
    )
    draft = generate_plot_dummy()
    scenes = generate_scene_props(TOPIC, draft, backend)
    assert len(scenes) == 1
    assert {p.id for p in scenes[0].props} == {"table", "teacup"}


def test_scene_with_zero_props_is_valid():
    backend = backend_from({"scenes": [_scene_reply([])]})
    assert generate_scene_props(TOPIC, generate_plot_dummy(), backend)[0].props == ()


def test_dangling_relative_parent_rejected():
    reply = _scene_reply(
        [_prop("teacup", {"kind": "relative", "parent": "desk", "description": "on the desk"})]
    )
    backend = backend_from({"scenes": [reply, reply]})
    with pytest.raises(ParseFailure, match="desk"):
        generate_scene_props(TOPIC, generate_plot_dummy(), backend)


def generate_plot_dummy():
    from stagecraft.blueprint import FlagSpec, Point
    from stagecraft.planning import PlotDraft

    end = Point(id="p-end", description="the end", flag=FlagSpec("it ends", "done"))
    return PlotDraft(end_point=end, points=(end,))


# --- assembly and the full pipeline -------------------------------------------------


def _pipeline_backend() -> ScriptedBackend:
    scene_props = [
        _prop("desk", {"kind": "absolute", "description": "by the window"}),
        _prop(
            "check",
            {"kind": "relative", "parent": "desk", "description": "inside the drawer"},
        ),
    ]
    return backend_from(
        {
            "actor_list": ['["Sherlock Holmes", "Dr. Watson"]'],
            "profile:Sherlock Holmes": [PROFILE_REPLY],
            "profile:Dr. Watson": [WATSON_REPLY],
            "reviewer:actors": [APPROVE],
            "reviewer:plot": [APPROVE],
            "plot_end": [
                json.dumps(
                    {
                        "narrative": "greed unmasked",
                        "end_point": _point(
                            "p-end",
                            "the murderer is named with evidence",
                            entry=("Sherlock Holmes", "Dr. Watson"),
                        ),
                    }
                )
            ],
            "plot_body": [
                json.dumps(
                    {
                        "points": [
                            _point("p-1", "the study is searched", entry=("Sherlock Holmes", "Dr. Watson"))
                        ]
                    }
                )
            ],
            "scenes": [_scene_reply(scene_props)],
        }
    )


def test_full_topic_pipeline_output_validates():
    blueprint, audit = plan_from_topic(TOPIC, _pipeline_backend(), FixtureSearch())
    assert validate(blueprint) == []
    assert len(blueprint.acts) == 1  # a topic yields one complete act
    assert blueprint.acts[0].end_point_id == "p-end"
    assert blueprint.acts[0].points[-1].id == "p-end"
    steps = [r["step"] for r in audit.records]
    assert steps.count("review") == 2
    assert "assemble" in steps


def test_pipeline_is_deterministic_given_fixture():
    from stagecraft.blueprint import serialize

    first, _ = plan_from_topic(TOPIC, _pipeline_backend(), FixtureSearch())
    second, _ = plan_from_topic(TOPIC, _pipeline_backend(), FixtureSearch())
    assert serialize(first) == serialize(second)


def test_assemble_rejects_draft_referencing_unknown_actor():
    from stagecraft.errors import ValidationFailure

    draft = generate_plot_dummy()
    bad_points = (
        draft.end_point.__class__(
            id="p-end",
            description="x",
            flag=draft.end_point.flag,
            entry_list=("Nobody",),
        ),
    )
    from stagecraft.planning import PlotDraft

    bad_draft = PlotDraft(end_point=bad_points[0], points=bad_points)
    scenes = [
        __import__("stagecraft.blueprint", fromlist=["Scene"]).Scene(
            id="s", environment_description="room"
        )
    ]
    profiles = generate_actor_profiles(
        TOPIC, ["Holmes"], backend_from({"profile:Holmes": [PROFILE_REPLY]}), None
    )
    with pytest.raises(ValidationFailure):
        assemble_blueprint(TOPIC, profiles, bad_draft, scenes)


# --- literary segmentation ------------------------------------------------------------


def test_heading_driven_segmentation():
    text = (
        "Chapter 1\nThe body is discovered at dawn.\n\n"
        "Chapter 2\nThe detective arrives by the evening train.\n\n"
        "Chapter 3\nAn accusation at midnight.\n"
    )
    segments = segment_literary_work(text, ScriptedBackend())
    assert len(segments) == 3
    assert segments[0].startswith("Chapter 1")
    assert segments[2].startswith("Chapter 3")


def test_headingless_text_uses_scripted_split():
    text = "The body is found. The detective arrives. The butler confesses."
    backend = backend_from(
        {"segment": [json.dumps({"split_phrases": ["The detective arrives."]})]}
    )
    segments = segment_literary_work(text, backend)
    assert segments == [
        "The body is found.",
        "The detective arrives. The butler confesses.",
    ]


def test_empty_text_is_a_precondition_error():
    with pytest.raises(ContractViolation):
        segment_literary_work("   ", ScriptedBackend())


def test_unknown_split_phrase_is_a_parse_failure():
    reply = json.dumps({"split_phrases": ["never appears"]})
    backend = backend_from({"segment": [reply, reply]})
    with pytest.raises(ParseFailure, match="not found"):
        segment_literary_work("some plain text without headings", backend)
