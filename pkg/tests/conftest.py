from __future__ import annotations

import pytest

from stagecraft.blueprint import (
    Absolute,
    ActorProfile,
    Act,
    FlagSpec,
    NarrativeBlueprint,
    Point,
    Prop,
    RelativeTo,
    Scene,
)
from stagecraft.gateway import ScriptedBackend


def make_prop(prop_id: str, name: str | None = None, *, state=None, placement=None, interactable=True) -> Prop:
    return Prop(
        id=prop_id,
        name=name or prop_id,
        description=f"a {name or prop_id}",
        placement=placement or Absolute("somewhere in the room"),
        state=state or {},
        interactable=interactable,
    )


def elsinore_blueprint(hamlet_controller: str = "ai") -> NarrativeBlueprint:
    """Two-point chamber scene: a hidden listener behind a curtain."""
    return NarrativeBlueprint(
        topic="A prince confronts a hidden listener in the royal chamber",
        actors=(
            ActorProfile(
                name="Hamlet",
                persona="A brooding prince, quick to anger and quicker to doubt.",
                background="Heir of Denmark, grieving his father.",
                relationships={"Polonius": "a meddling counselor he distrusts"},
                initial_goal="Expose the rot in the court",
                controller=hamlet_controller,
            ),
            ActorProfile(
                name="Polonius",
                persona="The king's counselor, servile and scheming.",
                background="Chief counselor to the crown.",
                relationships={"Hamlet": "an unstable prince to be watched"},
                initial_goal="Spy on the prince for the king",
            ),
        ),
        scenes=(
            Scene(
                id="closet",
                environment_description="The queen's closet, dimly lit, a heavy curtain along one wall.",
                props=(
                    make_prop("curtain", state={"intact": "yes"}),
                    make_prop(
                        "dagger",
                        placement=Absolute("at Hamlet's belt"),
                        state={"held_by": "Hamlet", "drawn": "no"},
                    ),
                ),
            ),
        ),
        acts=(
            Act(
                id="act-1",
                scene_ids=("closet",),
                points=(
                    Point(
                        id="point-1",
                        description="The prince senses a hidden listener in the chamber.",
                        flag=FlagSpec(
                            "Hamlet stabs through the curtain",
                            "The hidden listener is struck",
                        ),
                        entry_list=("Hamlet",),
                    ),
                    Point(
                        id="point-2",
                        description="The listener behind the curtain is revealed.",
                        flag=FlagSpec(
                            "Hamlet discovers who was behind the curtain",
                            "The deed cannot be undone",
                        ),
                        entry_list=("Polonius",),
                    ),
                ),
                end_point_id="point-2",
            ),
        ),
    )


def study_blueprint(on_stage_all: bool = False) -> NarrativeBlueprint:
    """Murder-mystery study: physical-evidence and testimony paths both work."""
    cast = ("Sherlock Holmes", "Mr. Bates", "The Maid", "The Partner")
    return NarrativeBlueprint(
        topic="A wealthy man is murdered in his study; the killer is among the guests",
        actors=(
            ActorProfile(
                name="Sherlock Holmes",
                persona="A consulting detective of razor deduction.",
                initial_goal="Identify the murderer",
                relationships={"Mr. Bates": "the household butler, nervous tonight"},
            ),
            ActorProfile(
                name="Mr. Bates",
                persona="The butler, outwardly composed, inwardly desperate.",
                initial_goal="Avoid suspicion",
            ),
            ActorProfile(
                name="The Maid",
                persona="A timid maid who sees everything.",
                initial_goal="Keep her position",
            ),
            ActorProfile(
                name="The Partner",
                persona="The victim's business partner, all charm and evasion.",
                initial_goal="Protect the firm's reputation",
            ),
        ),
        scenes=(
            Scene(
                id="study",
                environment_description="The victim's study: desk, carpet, bookshelf, a cold fireplace.",
                props=(
                    make_prop("desk", state={"searched": "no"}),
                    make_prop("carpet", state={"searched": "no"}),
                    make_prop("bookshelf", state={"searched": "no"}),
                    make_prop(
                        "check",
                        "torn-up check",
                        placement=RelativeTo("desk", "in the desk drawer"),
                        state={"discovered": "no"},
                    ),
                    make_prop(
                        "cufflink",
                        "silver cufflink",
                        placement=RelativeTo("carpet", "half under the carpet edge"),
                        state={"discovered": "no"},
                    ),
                    make_prop(
                        "letter",
                        "blackmail letter",
                        placement=RelativeTo("bookshelf", "behind a pulled-out book"),
                        state={"discovered": "no"},
                    ),
                ),
            ),
        ),
        acts=(
            Act(
                id="act-1",
                scene_ids=("study",),
                points=(
                    Point(
                        id="point-1",
                        description="The investigation of the study.",
                        flag=FlagSpec(
                            "Sherlock Holmes names the butler as the murderer with supporting evidence",
                            "The butler is exposed",
                        ),
                        entry_list=cast if on_stage_all else ("Sherlock Holmes",),
                    ),
                    Point(
                        id="point-2",
                        description="The confrontation and arrest.",
                        flag=FlagSpec("The butler confesses or is taken away", "Justice is served"),
                        entry_list=() if on_stage_all else ("Mr. Bates",),
                    ),
                ),
                end_point_id="point-2",
            ),
        ),
    )


def backend_from(entries: dict[str, list[str]]) -> ScriptedBackend:
    """Scripted backend from {route: [reply, reply, ...]}."""
    backend = ScriptedBackend()
    for key, texts in entries.items():
        for text in texts:
            backend.add(key, text)
    return backend


@pytest.fixture
def elsinore() -> NarrativeBlueprint:
    return elsinore_blueprint()
