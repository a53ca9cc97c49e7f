"""Offline planning: topic (or literary work) to validated blueprint.

The workflow chains four agent roles: the actor designer proposes a cast and
writes profiles (consulting a pluggable search handle), the reviewer
approves or demands revisions (at most five; the sixth round is forced
through), the plot designer drafts the point sequence ending-first, and the
director integrates everything into a blueprint.

With a scripted backend the whole pipeline is a pure function of
(topic, fixture file); every step appends to an audit trail that can be
persisted alongside the output.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

from .blueprint import (
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
    Source,
    Topic,
    validate,
)
from .errors import ContractViolation, ParseFailure, ValidationFailure
from .gateway import Backend, ModelReply, complete, user_request

logger = logging.getLogger(__name__)

MAX_REVIEW_ROUNDS = 6

_HEADING_RE = re.compile(r"^\s*(chapter|act)\s+([ivxlcdm]+|\d+)\b.*$", re.IGNORECASE | re.MULTILINE)


@dataclass(frozen=True)
class ReviewResult:
    approved: bool
    issues: tuple[str, ...]
    suggestions: tuple[str, ...]
    round: int

    def __post_init__(self) -> None:
        if self.round < 1 or self.round > MAX_REVIEW_ROUNDS:
            raise ValueError(f"round must be in 1..{MAX_REVIEW_ROUNDS}")
        if self.round == MAX_REVIEW_ROUNDS and not self.approved:
            raise ValueError("the sixth round must be approved")
        if not self.approved and not 1 <= len(self.suggestions) <= 3:
            raise ValueError("a rejection must carry between 1 and 3 suggestions")


@dataclass(frozen=True)
class PlotDraft:
    end_point: Point
    points: tuple[Point, ...]
    narrative_text: str = ""

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("a plot draft needs at least one point")
        if self.points[-1].id != self.end_point.id:
            raise ValueError("the end point must be the last point of the draft")


@dataclass(frozen=True)
class SearchResult:
    title: str
    snippet: str
    url: str = ""


class SearchHandle(Protocol):
    """External knowledge lookup used while writing actor profiles."""

    def search(self, query: str) -> list[SearchResult]: ...


class FixtureSearch:
    """Deterministic search stub; raises when constructed as unavailable."""

    def __init__(self, results: dict[str, list[SearchResult]] | None = None, available: bool = True):
        self.results = results or {}
        self.available = available
        self.queries: list[str] = []

    def search(self, query: str) -> list[SearchResult]:
        if not self.available:
            raise ConnectionError("search backend unavailable")
        self.queries.append(query)
        return self.results.get(query, [])


class HttpSearch:
    """Minimal client for one pluggable search API returning JSON results."""

    def __init__(self, url: str, api_key: str = "") -> None:
        self.url = url
        self.api_key = api_key

    def search(self, query: str) -> list[SearchResult]:
        import requests

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        response = requests.get(self.url, params={"q": query}, headers=headers, timeout=15)
        response.raise_for_status()
        return [
            SearchResult(r.get("title", ""), r.get("snippet", ""), r.get("url", ""))
            for r in response.json().get("results", [])
        ]


@dataclass
class AuditTrail:
    records: list[dict[str, Any]] = field(default_factory=list)

    def add(self, step: str, **details: Any) -> None:
        self.records.append({"step": step, **details})

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in self.records)


def _reply_json(reply: ModelReply) -> Any:
    text = reply.visible.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-z]*\n?|```$", "", text.strip(), flags=re.MULTILINE).strip()
    return json.loads(text)


def _call_json(
    backend: Backend,
    route: str,
    prompt: str,
    schema_note: str,
    *,
    session: str = "",
) -> Any:
    """One structured call with a single repair re-prompt on parse failure."""
    reply = complete(user_request("", prompt, route=route, session=session), backend)
    try:
        return _reply_json(reply)
    except json.JSONDecodeError:
        logger.warning("unparsable %s reply; re-prompting once with the schema", route)
    repair = f"{prompt}\n\nYour previous reply was not valid JSON. {schema_note}"
    reply = complete(user_request("", repair, route=route, session=session), backend)
    try:
        return _reply_json(reply)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"{route} reply is not valid JSON after one repair attempt: {exc.msg}")


def generate_actor_list(
    topic: str,
    backend: Backend,
    *,
    session: str = "",
    audit: AuditTrail | None = None,
) -> list[str]:
    """Propose a duplicate-free cast list for a topic."""
    if not topic:
        raise ContractViolation("topic must be non-empty")
    prompt = (
        f'For the drama theme "{topic}", propose the cast: a list of character names that '
        "fit the theme, without duplicates and without unrelated characters.\n"
        'Reply with a JSON array of name strings, e.g. ["Name A", "Name B"].'
    )
    data = _call_json(backend, "actor_list", prompt, "Reply with a JSON array of strings.", session=session)
    if not isinstance(data, list) or not data or not all(isinstance(n, str) and n for n in data):
        data = _call_json(
            backend, "actor_list", prompt + "\nReply with a non-empty JSON array of strings.",
            "Reply with a non-empty JSON array of strings.", session=session,
        )
        if not isinstance(data, list) or not data or not all(isinstance(n, str) and n for n in data):
            raise ParseFailure("actor list reply is not a non-empty array of names")
    names: list[str] = []
    for name in data:
        if name in names:
            logger.warning("duplicate actor name %r dropped", name)
        else:
            names.append(name)
    if audit is not None:
        audit.add("actor_list", topic=topic, names=names)
    return names


_PROFILE_SCHEMA_NOTE = (
    'Reply with a JSON object: {"persona": "...", "background": "...", '
    '"relationships": {"Other Name": "subjective view"}, "initial_goal": "..."}'
)


def generate_actor_profiles(
    topic: str,
    names: Sequence[str],
    backend: Backend,
    search: SearchHandle | None = None,
    *,
    session: str = "",
    audit: AuditTrail | None = None,
    guidance: str = "",
) -> list[ActorProfile]:
    """Write one profile per name, consulting search where available.

    Search failures degrade gracefully: profiles are still produced and the
    audit trail records the degraded mode.
    """
    if not names:
        raise ContractViolation("names must be non-empty")
    profiles: list[ActorProfile] = []
    for name in names:
        references = ""
        if search is not None:
            try:
                results = search.search(f"{topic} {name}")
                if audit is not None:
                    audit.add("search", query=f"{topic} {name}", hits=len(results))
                if results:
                    references = "\n".join(f"- {r.title}: {r.snippet}" for r in results[:5])
            except Exception as exc:
                logger.warning("search unavailable for %r: %s; continuing without it", name, exc)
                if audit is not None:
                    audit.add("search", query=f"{topic} {name}", degraded=True, error=str(exc))
        prompt = (
            f'Write the character profile of "{name}" for the drama theme "{topic}". '
            "Cover the persona, background, subjective relationships to the other "
            "characters, and an initial goal.\n"
            + (f"Reference material:\n{references}\n" if references else "")
            + (f"Reviewer guidance to incorporate:\n{guidance}\n" if guidance else "")
            + _PROFILE_SCHEMA_NOTE
        )
        data = _call_json(backend, f"profile:{name}", prompt, _PROFILE_SCHEMA_NOTE, session=session)
        profile = _parse_profile(name, data)
        profiles.append(profile)
        if audit is not None:
            audit.add("profile", name=name)
    return profiles


def _parse_profile(name: str, data: Any) -> ActorProfile:
    if not isinstance(data, dict):
        raise ParseFailure("profile reply must be a JSON object", path=name)
    if not isinstance(data.get("persona"), str) or not data["persona"]:
        raise ParseFailure("missing or empty field", path=f"{name}.persona")
    relationships = data.get("relationships", {})
    if not isinstance(relationships, dict):
        raise ParseFailure("must be an object", path=f"{name}.relationships")
    return ActorProfile(
        name=name,
        persona=data["persona"],
        background=str(data.get("background", "")),
        relationships={str(k): str(v) for k, v in relationships.items()},
        initial_goal=str(data.get("initial_goal", "")),
    )


def review_loop(
    artifact: Any,
    kind: str,
    backend: Backend,
    reviser: Callable[[Any, ReviewResult], Any],
    *,
    session: str = "",
    audit: AuditTrail | None = None,
    describe: Callable[[Any], str] = str,
) -> tuple[Any, int]:
    """Submit an artifact for review, revising until approval.

    Rounds 1 to 5 consult the reviewer; a fifth rejection forces approval in
    round 6 without another model call, so the loop always terminates.
    """
    for round_no in range(1, MAX_REVIEW_ROUNDS):
        prompt = (
            f"You review the {kind} design of a drama script for soundness: the material "
            "must fit the theme and the plot must be vivid, coherent, and true to the "
            "characters. If there are problems, list them and give 1-3 concrete "
            "suggestions for revision.\n\n"
            f"Material under review:\n{describe(artifact)}\n\n"
            'Reply with JSON only: {"approved": true|false, "issues": ["..."], '
            '"suggestions": ["..."]}'
        )
        data = _call_json(
            backend, f"reviewer:{kind}", prompt, "Reply with the JSON object only.", session=session
        )
        result = _parse_review(data, round_no)
        if audit is not None:
            audit.add("review", kind=kind, round=round_no, approved=result.approved)
        if result.approved:
            return artifact, round_no
        artifact = reviser(artifact, result)
    logger.warning("review of %s reached round %d; approval forced", kind, MAX_REVIEW_ROUNDS)
    if audit is not None:
        audit.add("review", kind=kind, round=MAX_REVIEW_ROUNDS, approved=True, forced=True)
    return artifact, MAX_REVIEW_ROUNDS


def _parse_review(data: Any, round_no: int) -> ReviewResult:
    if not isinstance(data, dict) or not isinstance(data.get("approved"), bool):
        raise ParseFailure("review reply must be an object with a boolean 'approved'")
    issues = data.get("issues", [])
    suggestions = data.get("suggestions", [])
    if not isinstance(issues, list) or not isinstance(suggestions, list):
        raise ParseFailure("'issues' and 'suggestions' must be arrays")
    try:
        return ReviewResult(
            approved=data["approved"],
            issues=tuple(str(i) for i in issues),
            suggestions=tuple(str(s) for s in suggestions),
            round=round_no,
        )
    except ValueError as exc:
        raise ParseFailure(str(exc)) from exc


_POINT_SCHEMA_NOTE = (
    'Each point is {"id": "...", "description": "...", "entry_name_list": ["..."], '
    '"leave_name_list": ["..."], "flag": {"description": "...", "result": "..."}}'
)


def _parse_point(data: Any, path: str) -> Point:
    if not isinstance(data, dict):
        raise ParseFailure("point must be an object", path=path)
    flag = data.get("flag")
    if not isinstance(flag, dict) or not isinstance(flag.get("description"), str):
        raise ParseFailure("point flag needs a description", path=f"{path}.flag")
    if not flag["description"]:
        raise ParseFailure("flag description must be non-empty", path=f"{path}.flag.description")
    if not isinstance(data.get("id"), str) or not data["id"]:
        raise ParseFailure("point needs an id", path=f"{path}.id")
    entry = data.get("entry_name_list", data.get("entry_list", []))
    leave = data.get("leave_name_list", data.get("leave_list", []))
    return Point(
        id=data["id"],
        description=str(data.get("description", "")),
        flag=FlagSpec(flag["description"], str(flag.get("result", ""))),
        entry_list=tuple(str(n) for n in entry),
        leave_list=tuple(str(n) for n in leave),
    )


def generate_plot(
    topic: str,
    profiles: Sequence[ActorProfile],
    backend: Backend,
    *,
    session: str = "",
    audit: AuditTrail | None = None,
    guidance: str = "",
) -> PlotDraft:
    """Draft the point sequence, ending first.

    The ending is generated before anything else so the plot cannot drift;
    the preceding points are then constructed backwards from it and stored in
    performance order (ending last).
    """
    cast = "\n".join(f"- {p.name}: {p.persona}" for p in profiles)
    end_prompt = (
        f'The drama theme is "{topic}". The characters are:\n{cast}\n\n'
        + (f"Reviewer guidance to incorporate:\n{guidance}\n\n" if guidance else "")
        + "First, plan the ending: the single final point of the drama, with a flag (a "
        "concrete dramatic marker such as an action, a spoken line, or an event outcome) "
        "that ends it, plus who enters and leaves.\n"
        'Reply with JSON: {"narrative": "...", "end_point": <point>}. ' + _POINT_SCHEMA_NOTE
    )
    end_data = _call_json(backend, "plot_end", end_prompt, _POINT_SCHEMA_NOTE, session=session)
    if not isinstance(end_data, dict) or "end_point" not in end_data:
        raise ParseFailure("plot ending reply must carry an 'end_point'")
    end_point = _parse_point(end_data["end_point"], "end_point")
    narrative = str(end_data.get("narrative", ""))

    body_prompt = (
        f'The drama theme is "{topic}" and its planned ending point is: '
        f"{end_point.description} (flag: {end_point.flag.description}).\n"
        "Now construct the logically coherent preceding points that lead to this ending, "
        "working backwards from it: nearest-to-the-ending first. Each point should carry "
        "conflict, tension, or irreversible change; the number of points is free.\n"
        'Reply with JSON: {"points": [<point nearest the ending>, ..., <opening point>]}. '
        + _POINT_SCHEMA_NOTE
    )
    body_data = _call_json(backend, "plot_body", body_prompt, _POINT_SCHEMA_NOTE, session=session)
    if not isinstance(body_data, dict) or not isinstance(body_data.get("points"), list):
        raise ParseFailure("plot body reply must carry a 'points' array")
    backwards = [
        _parse_point(p, f"points[{i}]") for i, p in enumerate(body_data["points"])
    ]
    points = tuple(reversed(backwards)) + (end_point,)
    if audit is not None:
        audit.add("plot", points=[p.id for p in points], end_point=end_point.id)
    return PlotDraft(end_point=end_point, points=points, narrative_text=narrative)


_SCENE_SCHEMA_NOTE = (
    'Reply with JSON: {"scenes": [{"id": "...", "environment_description": "...", '
    '"props": [{"id": "...", "name": "...", "description": "...", '
    '"placement": {"kind": "absolute"|"relative", "parent": "<prop-id, relative only>", '
    '"description": "..."}, "interactable": true}]}]}'
)


def generate_scene_props(
    topic: str,
    draft: PlotDraft,
    backend: Backend,
    *,
    session: str = "",
    audit: AuditTrail | None = None,
) -> list[Scene]:
    """Design the physical environment and its interactive props.

    Large, visually obvious items get absolute positions; small or hidden
    items are placed relative to a parent prop.
    """
    plot_lines = "\n".join(f"- {p.id}: {p.description}" for p in draft.points)
    prompt = (
        f'The drama theme is "{topic}". The plot points are:\n{plot_lines}\n\n'
        "Generate the scene(s): a detailed environment description and the interactive "
        "props the plot needs. Describe the absolute position of large, visually obvious "
        "items; describe smaller or hidden items relative to a parent prop.\n"
        + _SCENE_SCHEMA_NOTE
    )
    data = _call_json(backend, "scenes", prompt, _SCENE_SCHEMA_NOTE, session=session)
    if not isinstance(data, dict) or not isinstance(data.get("scenes"), list) or not data["scenes"]:
        raise ParseFailure("scene reply must carry a non-empty 'scenes' array")
    scenes: list[Scene] = []
    for i, scene_data in enumerate(data["scenes"]):
        path = f"scenes[{i}]"
        if not isinstance(scene_data, dict) or not isinstance(scene_data.get("id"), str):
            raise ParseFailure("scene needs an id", path=path)
        props: list[Prop] = []
        for j, prop_data in enumerate(scene_data.get("props", [])):
            props.append(_parse_prop(prop_data, f"{path}.props[{j}]"))
        ids = {p.id for p in props}
        for prop in props:
            if isinstance(prop.placement, RelativeTo) and prop.placement.parent not in ids:
                raise ParseFailure(
                    f"prop {prop.id!r} is placed relative to unknown parent "
                    f"{prop.placement.parent!r}",
                    path=path,
                )
        scenes.append(
            Scene(
                id=scene_data["id"],
                environment_description=str(scene_data.get("environment_description", "")),
                props=tuple(props),
            )
        )
    if audit is not None:
        audit.add("scenes", ids=[s.id for s in scenes])
    return scenes


def _parse_prop(data: Any, path: str) -> Prop:
    if not isinstance(data, dict) or not isinstance(data.get("id"), str):
        raise ParseFailure("prop needs an id", path=path)
    placement_data = data.get("placement")
    if not isinstance(placement_data, dict) or "kind" not in placement_data:
        raise ParseFailure("prop needs a placement with a kind", path=f"{path}.placement")
    if placement_data["kind"] == "absolute":
        placement: Absolute | RelativeTo = Absolute(str(placement_data.get("description", "")))
    elif placement_data["kind"] == "relative":
        if not isinstance(placement_data.get("parent"), str):
            raise ParseFailure("relative placement needs a parent", path=f"{path}.placement")
        placement = RelativeTo(placement_data["parent"], str(placement_data.get("description", "")))
    else:
        raise ParseFailure(
            f"unknown placement kind {placement_data['kind']!r}", path=f"{path}.placement"
        )
    state = data.get("state", {})
    if not isinstance(state, dict):
        raise ParseFailure("prop state must be an object", path=f"{path}.state")
    return Prop(
        id=data["id"],
        name=str(data.get("name", data["id"])),
        description=str(data.get("description", "")),
        placement=placement,
        state={str(k): str(v) for k, v in state.items()},
        interactable=bool(data.get("interactable", True)),
    )


def assemble_blueprint(
    topic: str,
    profiles: Sequence[ActorProfile],
    drafts: PlotDraft | Sequence[PlotDraft],
    scenes: Sequence[Scene] | Sequence[Sequence[Scene]],
    source: Source = Topic(),
) -> NarrativeBlueprint:
    """Integrate profiles, plot, and scenes into a validated blueprint.

    A topic input yields a single act holding all draft points; a literary
    work yields one act per draft segment, each anchored on its own end point.
    The integration itself is deterministic structural work, so no model call
    is involved.
    """
    draft_list = [drafts] if isinstance(drafts, PlotDraft) else list(drafts)
    if not draft_list:
        raise ContractViolation("at least one plot draft is required")
    if scenes and isinstance(scenes[0], Scene):
        scenes_per_act = [list(scenes)] * len(draft_list)  # type: ignore[arg-type]
        all_scenes = list(scenes)  # type: ignore[arg-type]
    else:
        scenes_per_act = [list(group) for group in scenes]  # type: ignore[union-attr]
        if len(scenes_per_act) != len(draft_list):
            raise ContractViolation("one scene group per act is required")
        seen_ids: set[str] = set()
        for i, group in enumerate(scenes_per_act):
            for j, scene in enumerate(group):
                if scene.id in seen_ids:
                    # Segment generators may reuse ids; namespace per act.
                    group[j] = dataclasses.replace(scene, id=f"act{i + 1}-{scene.id}")
                seen_ids.add(group[j].id)
        all_scenes = [s for group in scenes_per_act for s in group]

    acts = []
    for i, draft in enumerate(draft_list):
        act_scenes = scenes_per_act[i]
        if not act_scenes:
            raise ContractViolation(f"act {i + 1} has no scenes")
        acts.append(
            Act(
                id=f"act-{i + 1}",
                scene_ids=tuple(s.id for s in act_scenes),
                points=draft.points,
                end_point_id=draft.end_point.id,
            )
        )
    blueprint = NarrativeBlueprint(
        topic=topic,
        actors=tuple(profiles),
        acts=tuple(acts),
        scenes=tuple(all_scenes),
        source=source,
    )
    violations = validate(blueprint)
    if violations:
        raise ValidationFailure(violations)
    return blueprint


def segment_literary_work(
    full_text: str,
    backend: Backend,
    *,
    session: str = "",
    audit: AuditTrail | None = None,
) -> list[str]:
    """Split a literary work into act-sized segments.

    Explicit chapter/act headings drive a deterministic split; headingless
    texts fall back to a model-proposed segmentation by split phrases.
    """
    if not full_text.strip():
        raise ContractViolation("full_text must be non-empty")
    headings = list(_HEADING_RE.finditer(full_text))
    if len(headings) >= 2:
        segments = []
        for i, match in enumerate(headings):
            end = headings[i + 1].start() if i + 1 < len(headings) else len(full_text)
            segment = full_text[match.start() : end].strip()
            if segment:
                segments.append(segment)
        if audit is not None:
            audit.add("segment", mode="headings", count=len(segments))
        return segments

    prompt = (
        "Split the following text into act-sized segments for dramatization, following "
        "its content structure. Identify the phrase that begins each segment after the "
        "first.\n\n"
        f"{full_text}\n\n"
        'Reply with JSON: {"split_phrases": ["first words of segment 2", ...]} '
        "(an empty array means the text is a single segment). Each phrase must occur "
        "verbatim in the text."
    )
    data = _call_json(
        backend, "segment", prompt, 'Reply with {"split_phrases": [...]} only.', session=session
    )
    if not isinstance(data, dict) or not isinstance(data.get("split_phrases"), list):
        raise ParseFailure("segmentation reply must carry a 'split_phrases' array")
    offsets = [0]
    cursor = 0
    for phrase in data["split_phrases"]:
        index = full_text.find(str(phrase), cursor)
        if index == -1:
            raise ParseFailure(f"split phrase {str(phrase)[:40]!r} not found in the text")
        offsets.append(index)
        cursor = index + 1
    segments = [
        full_text[start:end].strip()
        for start, end in zip(offsets, offsets[1:] + [len(full_text)])
    ]
    segments = [s for s in segments if s]
    if audit is not None:
        audit.add("segment", mode="model", count=len(segments))
    return segments


def _profile_reviser(
    topic: str, names: Sequence[str], backend: Backend, search: SearchHandle | None,
    session: str, audit: AuditTrail | None,
) -> Callable[[Any, ReviewResult], Any]:
    def revise(_old: Sequence[ActorProfile], review: ReviewResult) -> list[ActorProfile]:
        guidance = "\n".join((*review.issues, *review.suggestions))
        return generate_actor_profiles(
            topic, names, backend, search, session=session, audit=audit, guidance=guidance
        )

    return revise


def _plot_reviser(
    topic: str, profiles: Sequence[ActorProfile], backend: Backend,
    session: str, audit: AuditTrail | None,
) -> Callable[[Any, ReviewResult], Any]:
    def revise(_old: PlotDraft, review: ReviewResult) -> PlotDraft:
        guidance = "\n".join((*review.issues, *review.suggestions))
        return generate_plot(
            topic, profiles, backend, session=session, audit=audit, guidance=guidance
        )

    return revise


def _describe_profiles(profiles: Sequence[ActorProfile]) -> str:
    return "\n".join(
        f"- {p.name}: persona={p.persona}; background={p.background}; goal={p.initial_goal}"
        for p in profiles
    )


def _describe_draft(draft: PlotDraft) -> str:
    return "\n".join(f"- {p.id}: {p.description} (flag: {p.flag.description})" for p in draft.points)


def plan_from_topic(
    topic: str,
    backend: Backend,
    search: SearchHandle | None = None,
    *,
    session: str = "",
) -> tuple[NarrativeBlueprint, AuditTrail]:
    """The full offline pipeline for a topic input (a single complete act)."""
    audit = AuditTrail()
    names = generate_actor_list(topic, backend, session=session, audit=audit)
    profiles = generate_actor_profiles(topic, names, backend, search, session=session, audit=audit)
    profiles, _ = review_loop(
        profiles,
        "actors",
        backend,
        _profile_reviser(topic, names, backend, search, session, audit),
        session=session,
        audit=audit,
        describe=_describe_profiles,
    )
    draft = generate_plot(topic, profiles, backend, session=session, audit=audit)
    draft, _ = review_loop(
        draft,
        "plot",
        backend,
        _plot_reviser(topic, profiles, backend, session, audit),
        session=session,
        audit=audit,
        describe=_describe_draft,
    )
    scenes = generate_scene_props(topic, draft, backend, session=session, audit=audit)
    blueprint = assemble_blueprint(topic, profiles, draft, scenes, source=Topic())
    audit.add("assemble", actors=len(profiles), acts=len(blueprint.acts))
    return blueprint, audit


def plan_from_work(
    title: str,
    full_text: str,
    backend: Backend,
    search: SearchHandle | None = None,
    *,
    session: str = "",
) -> tuple[NarrativeBlueprint, AuditTrail]:
    """The full offline pipeline for a literary work: one act per segment."""
    audit = AuditTrail()
    segments = segment_literary_work(full_text, backend, session=session, audit=audit)
    names = generate_actor_list(title, backend, session=session, audit=audit)
    profiles = generate_actor_profiles(title, names, backend, search, session=session, audit=audit)
    profiles, _ = review_loop(
        profiles,
        "actors",
        backend,
        _profile_reviser(title, names, backend, search, session, audit),
        session=session,
        audit=audit,
        describe=_describe_profiles,
    )
    drafts: list[PlotDraft] = []
    scene_groups: list[list[Scene]] = []
    for i, segment in enumerate(segments):
        act_topic = f"{title} (act {i + 1}): {segment[:2000]}"
        draft = generate_plot(act_topic, profiles, backend, session=session, audit=audit)
        draft, _ = review_loop(
            draft,
            "plot",
            backend,
            _plot_reviser(act_topic, profiles, backend, session, audit),
            session=session,
            audit=audit,
            describe=_describe_draft,
        )
        scenes = generate_scene_props(act_topic, draft, backend, session=session, audit=audit)
        drafts.append(draft)
        scene_groups.append(scenes)
    blueprint = assemble_blueprint(
        title, profiles, drafts, scene_groups, source=LiteraryWork(title)
    )
    audit.add("assemble", actors=len(profiles), acts=len(blueprint.acts))
    return blueprint, audit
