"""Narrative-blueprint data model, canonical JSON serialization, validation.

A blueprint is the integrated offline plan handed to the live stage: actor
profiles plus acts, scenes, points, and props.  Instances are treated as
immutable after validation; the stage runtime clones the mutable parts
(actor memory and goals, prop state) into its own session state.

Serialization is canonical: lexicographic key order, two-space indent, UTF-8
without ASCII escaping, trailing newline.  Two structurally equal blueprints
therefore serialize to byte-identical documents, which golden-file tests rely
on.  Unknown document fields are preserved through a round-trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from .errors import BlueprintSchemaError

SCHEMA_VERSION = 1

CONTROLLER_AI = "ai"
CONTROLLER_HUMAN = "human"


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class Absolute:
    """Placement described in room coordinates ('the table is in the center')."""

    description: str


@dataclass(frozen=True)
class RelativeTo:
    """Placement relative to another prop ('the teacup is on the table')."""

    parent: str
    description: str


Placement = Absolute | RelativeTo


@dataclass(frozen=True)
class Prop:
    id: str
    name: str
    description: str
    placement: Placement
    state: Mapping[str, str] = field(default_factory=dict)
    interactable: bool = True
    extra: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class FlagSpec:
    """The condition that completes a point, and what its fulfillment means."""

    description: str
    result: str = ""


@dataclass(frozen=True)
class Point:
    id: str
    description: str
    flag: FlagSpec
    entry_list: tuple[str, ...] = ()
    leave_list: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entry_list", tuple(self.entry_list))
        object.__setattr__(self, "leave_list", tuple(self.leave_list))


@dataclass(frozen=True)
class Scene:
    id: str
    environment_description: str
    props: tuple[Prop, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "props", tuple(self.props))


@dataclass(frozen=True)
class Act:
    id: str
    scene_ids: tuple[str, ...]
    points: tuple[Point, ...]
    end_point_id: str
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scene_ids", tuple(self.scene_ids))
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True)
class ActorProfile:
    name: str
    persona: str
    background: str = ""
    relationships: Mapping[str, str] = field(default_factory=dict)
    initial_goal: str = ""
    private_goal: str = ""
    memory: tuple[str, ...] = ()
    controller: str = CONTROLLER_AI
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "memory", tuple(self.memory))


@dataclass(frozen=True)
class Topic:
    pass


@dataclass(frozen=True)
class LiteraryWork:
    title: str


Source = Topic | LiteraryWork


@dataclass(frozen=True)
class NarrativeBlueprint:
    topic: str
    actors: tuple[ActorProfile, ...]
    acts: tuple[Act, ...]
    scenes: tuple[Scene, ...]
    source: Source = Topic()
    external_actors: tuple[str, ...] = ()
    schema_version: int = SCHEMA_VERSION
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "actors", tuple(self.actors))
        object.__setattr__(self, "acts", tuple(self.acts))
        object.__setattr__(self, "scenes", tuple(self.scenes))
        object.__setattr__(self, "external_actors", tuple(self.external_actors))

    def actor_names(self) -> list[str]:
        return [a.name for a in self.actors]

    def scene_by_id(self, scene_id: str) -> Scene | None:
        for scene in self.scenes:
            if scene.id == scene_id:
                return scene
        return None

    def all_points(self) -> Iterator[Point]:
        for act in self.acts:
            yield from act.points


def validate(blueprint: NarrativeBlueprint) -> list[Violation]:
    """Check every structural invariant.  Pure and total: never raises."""
    violations: list[Violation] = []
    out = violations.append

    if not blueprint.actors:
        out(Violation("actors", "at least one actor is required"))
    if not blueprint.acts:
        out(Violation("acts", "at least one act is required"))
    if not any(act.points for act in blueprint.acts):
        out(Violation("acts", "at least one point is required overall"))

    seen_names: set[str] = set()
    for i, actor in enumerate(blueprint.actors):
        path = f"actors[{i}]"
        if not actor.name:
            out(Violation(f"{path}.name", "actor name must be non-empty"))
        elif actor.name in seen_names:
            out(Violation(f"{path}.name", f"duplicate actor name {actor.name!r}"))
        seen_names.add(actor.name)
        if actor.controller not in (CONTROLLER_AI, CONTROLLER_HUMAN):
            out(Violation(f"{path}.controller", f"unknown controller {actor.controller!r}"))

    known = seen_names | set(blueprint.external_actors)
    for i, actor in enumerate(blueprint.actors):
        for other in actor.relationships:
            if other not in known:
                out(
                    Violation(
                        f"actors[{i}].relationships[{other!r}]",
                        "references a name that is neither an actor nor marked external",
                    )
                )

    scene_ids: set[str] = set()
    for i, scene in enumerate(blueprint.scenes):
        path = f"scenes[{i}]"
        if scene.id in scene_ids:
            out(Violation(f"{path}.id", f"duplicate scene id {scene.id!r}"))
        scene_ids.add(scene.id)
        prop_ids: dict[str, Prop] = {}
        for j, prop in enumerate(scene.props):
            ppath = f"{path}.props[{j}]"
            if prop.id in prop_ids:
                out(Violation(f"{ppath}.id", f"duplicate prop id {prop.id!r}"))
            prop_ids[prop.id] = prop
        for j, prop in enumerate(scene.props):
            ppath = f"{path}.props[{j}]"
            if isinstance(prop.placement, RelativeTo):
                if prop.placement.parent not in prop_ids:
                    out(
                        Violation(
                            f"{ppath}.placement",
                            f"relative parent {prop.placement.parent!r} not in scene",
                        )
                    )
                elif _placement_cycle(prop, prop_ids):
                    out(Violation(f"{ppath}.placement", "placement cycle detected"))

    for i, act in enumerate(blueprint.acts):
        path = f"acts[{i}]"
        if not act.scene_ids:
            out(Violation(f"{path}.scene_ids", "act must reference at least one scene"))
        for sid in act.scene_ids:
            if sid not in scene_ids:
                out(Violation(f"{path}.scene_ids", f"unknown scene id {sid!r}"))
        if not act.points:
            out(Violation(f"{path}.points", "act must contain at least one point"))
            continue
        point_ids: set[str] = set()
        for j, point in enumerate(act.points):
            ppath = f"{path}.points[{j}]"
            if point.id in point_ids:
                out(Violation(f"{ppath}.id", f"duplicate point id {point.id!r}"))
            point_ids.add(point.id)
            if not point.flag.description:
                out(Violation(f"{ppath}.flag.description", "flag description must be non-empty"))
            for name in (*point.entry_list, *point.leave_list):
                if name not in seen_names:
                    out(Violation(f"{ppath}", f"unknown actor {name!r} in entry/leave list"))
        if act.end_point_id != act.points[-1].id:
            out(
                Violation(
                    f"{path}.end_point_id",
                    "end point must be the last point of the act (the ending anchors the act)",
                )
            )

    return violations


def _placement_cycle(prop: Prop, props: Mapping[str, Prop]) -> bool:
    seen = {prop.id}
    current = prop
    while isinstance(current.placement, RelativeTo):
        parent_id = current.placement.parent
        if parent_id in seen:
            return True
        seen.add(parent_id)
        parent = props.get(parent_id)
        if parent is None:
            return False
        current = parent
    return False


# --- serialization ---------------------------------------------------------


def _with_extra(obj: dict[str, Any], extra: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(extra)
    merged.update(obj)
    return merged


def _placement_doc(placement: Placement) -> dict[str, Any]:
    if isinstance(placement, Absolute):
        return {"kind": "absolute", "description": placement.description}
    return {"kind": "relative", "parent": placement.parent, "description": placement.description}


def _source_doc(source: Source) -> dict[str, Any]:
    if isinstance(source, LiteraryWork):
        return {"kind": "literary_work", "title": source.title}
    return {"kind": "topic"}


def to_document(blueprint: NarrativeBlueprint) -> dict[str, Any]:
    return _with_extra(
        {
            "schema_version": blueprint.schema_version,
            "topic": blueprint.topic,
            "source": _source_doc(blueprint.source),
            "external_actors": list(blueprint.external_actors),
            "actors": [
                _with_extra(
                    {
                        "name": a.name,
                        "persona": a.persona,
                        "background": a.background,
                        "relationships": dict(a.relationships),
                        "initial_goal": a.initial_goal,
                        "private_goal": a.private_goal,
                        "memory": list(a.memory),
                        "controller": a.controller,
                    },
                    a.extra,
                )
                for a in blueprint.actors
            ],
            "scenes": [
                _with_extra(
                    {
                        "id": s.id,
                        "environment_description": s.environment_description,
                        "props": [
                            _with_extra(
                                {
                                    "id": p.id,
                                    "name": p.name,
                                    "description": p.description,
                                    "placement": _placement_doc(p.placement),
                                    "state": dict(p.state),
                                    "interactable": p.interactable,
                                },
                                p.extra,
                            )
                            for p in s.props
                        ],
                    },
                    s.extra,
                )
                for s in blueprint.scenes
            ],
            "acts": [
                _with_extra(
                    {
                        "id": act.id,
                        "scene_ids": list(act.scene_ids),
                        "points": [
                            _with_extra(
                                {
                                    "id": p.id,
                                    "description": p.description,
                                    "entry_list": list(p.entry_list),
                                    "leave_list": list(p.leave_list),
                                    "flag": {
                                        "description": p.flag.description,
                                        "result": p.flag.result,
                                    },
                                },
                                p.extra,
                            )
                            for p in act.points
                        ],
                        "end_point_id": act.end_point_id,
                    },
                    act.extra,
                )
                for act in blueprint.acts
            ],
        },
        blueprint.extra,
    )


def serialize(blueprint: NarrativeBlueprint) -> str:
    """Canonical JSON text for a blueprint (see module docstring)."""
    return json.dumps(to_document(blueprint), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class _Reader:
    """Typed field access over a document node with positioned diagnostics."""

    def __init__(self, node: Any, path: str) -> None:
        if not isinstance(node, dict):
            raise BlueprintSchemaError(path, "object", type(node).__name__)
        self.node = node
        self.path = path
        self.consumed: set[str] = set()

    def _get(self, key: str, expected: type, default: Any, required: bool) -> Any:
        self.consumed.add(key)
        if key not in self.node:
            if required:
                raise BlueprintSchemaError(f"{self.path}.{key}", expected.__name__, "missing")
            return default
        value = self.node[key]
        if expected is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, expected) or (expected is not bool and isinstance(value, bool)):
            raise BlueprintSchemaError(f"{self.path}.{key}", expected.__name__, type(value).__name__)
        return value

    def str_(self, key: str, default: str | None = None) -> str:
        return self._get(key, str, default, default is None)

    def bool_(self, key: str, default: bool = True) -> bool:
        return self._get(key, bool, default, False)

    def int_(self, key: str, default: int | None = None) -> int:
        return self._get(key, int, default, default is None)

    def list_(self, key: str, required: bool = True, nonempty: bool = False) -> list[Any]:
        value = self._get(key, list, [], required)
        if nonempty and not value:
            raise BlueprintSchemaError(f"{self.path}.{key}", "non-empty array", "empty array")
        return value

    def str_list(self, key: str, required: bool = False) -> tuple[str, ...]:
        values = self.list_(key, required=required)
        for i, v in enumerate(values):
            if not isinstance(v, str):
                raise BlueprintSchemaError(f"{self.path}.{key}[{i}]", "string", type(v).__name__)
        return tuple(values)

    def str_map(self, key: str) -> dict[str, str]:
        self.consumed.add(key)
        value = self.node.get(key, {})
        if not isinstance(value, dict):
            raise BlueprintSchemaError(f"{self.path}.{key}", "object", type(value).__name__)
        for k, v in value.items():
            if not isinstance(v, str):
                raise BlueprintSchemaError(f"{self.path}.{key}[{k!r}]", "string", type(v).__name__)
        return dict(value)

    def child(self, key: str) -> "_Reader":
        self.consumed.add(key)
        if key not in self.node:
            raise BlueprintSchemaError(f"{self.path}.{key}", "object", "missing")
        return _Reader(self.node[key], f"{self.path}.{key}")

    def children(self, key: str, required: bool = True, nonempty: bool = False) -> list["_Reader"]:
        values = self.list_(key, required=required, nonempty=nonempty)
        return [_Reader(v, f"{self.path}.{key}[{i}]") for i, v in enumerate(values)]

    def extra(self) -> dict[str, Any]:
        return {k: v for k, v in self.node.items() if k not in self.consumed}


def _parse_placement(reader: _Reader) -> Placement:
    kind = reader.str_("kind")
    if kind == "absolute":
        return Absolute(reader.str_("description"))
    if kind == "relative":
        return RelativeTo(reader.str_("parent"), reader.str_("description"))
    raise BlueprintSchemaError(f"{reader.path}.kind", "'absolute' or 'relative'", repr(kind))


def _parse_source(reader: _Reader) -> Source:
    kind = reader.str_("kind")
    if kind == "topic":
        return Topic()
    if kind == "literary_work":
        return LiteraryWork(reader.str_("title"))
    raise BlueprintSchemaError(f"{reader.path}.kind", "'topic' or 'literary_work'", repr(kind))


def parse_document(doc: Any) -> NarrativeBlueprint:
    """Build a blueprint from a JSON document, rejecting schema violations.

    Shape errors (wrong types, missing required fields, empty act/point lists)
    raise BlueprintSchemaError; cross-reference problems are left to validate().
    """
    root = _Reader(doc, "$")
    source = _parse_source(root.child("source")) if "source" in root.node else Topic()

    actors = []
    for r in root.children("actors", nonempty=True):
        actors.append(
            ActorProfile(
                name=r.str_("name"),
                persona=r.str_("persona"),
                background=r.str_("background", ""),
                relationships=r.str_map("relationships"),
                initial_goal=r.str_("initial_goal", ""),
                private_goal=r.str_("private_goal", ""),
                memory=r.str_list("memory"),
                controller=r.str_("controller", CONTROLLER_AI),
                extra=r.extra(),
            )
        )

    scenes = []
    for r in root.children("scenes", nonempty=True):
        props = []
        for pr in r.children("props", required=False):
            props.append(
                Prop(
                    id=pr.str_("id"),
                    name=pr.str_("name"),
                    description=pr.str_("description", ""),
                    placement=_parse_placement(pr.child("placement")),
                    state=pr.str_map("state"),
                    interactable=pr.bool_("interactable", True),
                    extra=pr.extra(),
                )
            )
        scenes.append(
            Scene(
                id=r.str_("id"),
                environment_description=r.str_("environment_description"),
                props=tuple(props),
                extra=r.extra(),
            )
        )

    acts = []
    for r in root.children("acts", nonempty=True):
        points = []
        for pr in r.children("points", nonempty=True):
            flag = pr.child("flag")
            points.append(
                Point(
                    id=pr.str_("id"),
                    description=pr.str_("description", ""),
                    flag=FlagSpec(flag.str_("description"), flag.str_("result", "")),
                    entry_list=pr.str_list("entry_list"),
                    leave_list=pr.str_list("leave_list"),
                    extra=pr.extra(),
                )
            )
        acts.append(
            Act(
                id=r.str_("id"),
                scene_ids=r.str_list("scene_ids", required=True),
                points=tuple(points),
                end_point_id=r.str_("end_point_id"),
                extra=r.extra(),
            )
        )

    return NarrativeBlueprint(
        topic=root.str_("topic"),
        actors=tuple(actors),
        acts=tuple(acts),
        scenes=tuple(scenes),
        source=source,
        external_actors=root.str_list("external_actors"),
        schema_version=root.int_("schema_version", SCHEMA_VERSION),
        extra=root.extra(),
    )


def parse_text(text: str) -> NarrativeBlueprint:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BlueprintSchemaError(f"$ (line {exc.lineno})", "JSON document", exc.msg) from exc
    return parse_document(doc)


def load(path) -> NarrativeBlueprint:
    with open(path, encoding="utf-8") as handle:
        return parse_text(handle.read())
