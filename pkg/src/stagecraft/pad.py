"""Perceive-and-decide: per-actor strategy selection before each response.

Every AI actor runs this module before speaking.  It assembles a perception
prompt from the actor's internal state (persona, relationships, memory, goal)
and the external situation (scene, actors, dialogue history, interactable
objects), asks the backend for tool calls, and reduces the reply to a
strategy in {FAST, SLOW, SILENCE} plus an optional subject-verb-object
action.  An action's object must be one of the scene's interactable objects;
anything else is dropped.

The module also owns the response markup grammar shared with human players:
``(`` action ``)``, ``[`` thinking ``]``, residual text is speech.  Nested
delimiters are not supported; inner delimiters are literal characters.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import ContractViolation
from .events import ResponseParts
from .gateway import Backend, ToolParam, ToolSpec, complete, user_request

logger = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    FAST = "FAST"
    SLOW = "SLOW"
    SILENCE = "SILENCE"


TOOL_RESPOND_FAST = "respond_fast"
TOOL_RESPOND_SLOW = "respond_slow"
TOOL_KEEP_SILENCE = "keep_silence"
TOOL_TAKE_ACTION = "take_action"

_STRATEGY_BY_TOOL = {
    TOOL_RESPOND_FAST: Strategy.FAST,
    TOOL_RESPOND_SLOW: Strategy.SLOW,
    TOOL_KEEP_SILENCE: Strategy.SILENCE,
}

_ARTICLES = ("the", "a", "an")


@dataclass(frozen=True)
class InteractableObject:
    id: str
    name: str


@dataclass(frozen=True)
class Action:
    """A parsed subject-verb-object action whose object passed the scene gate."""

    subject: str
    verb: str
    object: str


@dataclass(frozen=True)
class PadContext:
    persona: str
    relationships: Mapping[str, str]
    memory: Sequence[str]
    goal: str
    environment_description: str
    actor_list: Sequence[str]
    dialogue_history: Sequence[str]
    interactable_objects: Sequence[InteractableObject]
    last_stimulus: str


@dataclass(frozen=True)
class PadDecision:
    strategy: Strategy
    thinking: str | None = None
    action: Action | None = None


def pad_tool_specs(objects: Sequence[InteractableObject]) -> tuple[ToolSpec, ...]:
    """The four strategy tools, with the action tool enumerating object choices."""
    choices = ", ".join(o.id for o in objects) or "none available"
    return (
        ToolSpec(TOOL_RESPOND_FAST, "React immediately with an instinctive, unfiltered reply."),
        ToolSpec(TOOL_RESPOND_SLOW, "Deliberate first, then reply with the reasoning spelled out."),
        ToolSpec(TOOL_KEEP_SILENCE, "Deliberately say nothing this moment."),
        ToolSpec(
            TOOL_TAKE_ACTION,
            "Physically act on one interactable object in the scene.",
            (
                ToolParam("verb", "string", True, "what to do with the object"),
                ToolParam("object", "string", True, f"target object id; one of: {choices}"),
            ),
        ),
    )


def encode_strategy(actor: str, context: PadContext) -> str:
    """Deterministic assembly of the perception prompt for one actor."""
    if not context.goal:
        raise ContractViolation(f"pad context for {actor!r} is missing a goal")
    if not context.persona:
        raise ContractViolation(f"pad context for {actor!r} is missing a persona")

    tools_json = json.dumps([t.to_schema() for t in pad_tool_specs(context.interactable_objects)])
    relationships = (
        "\n".join(f"- {name}: {view}" for name, view in sorted(context.relationships.items()))
        or "(none)"
    )
    memory = "\n".join(f"- {entry}" for entry in context.memory) or "(none)"
    history = "\n".join(context.dialogue_history) or "(empty)"
    objects = (
        "\n".join(f"- {o.id}: {o.name}" for o in context.interactable_objects) or "(none)"
    )
    return (
        f"You are the decision-making mind of the character {actor}. Perceive the scene "
        "and choose the most fitting way to respond to the current moment. You may call "
        "one or more of the provided functions.\n\n"
        "Function signatures are given within <tools></tools> XML tags:\n"
        f"<tools>{tools_json}</tools>\n\n"
        "To call a function, reply with a JSON object carrying the function name and its "
        "arguments, wrapped in <tool_call></tool_call> XML tags:\n"
        '<tool_call>{"name": <function-name>, "arguments": <args-json-object>}</tool_call>\n\n'
        "## Environment description\n"
        f"{context.environment_description}\n\n"
        "## Actor list\n"
        f"{', '.join(context.actor_list)}\n\n"
        "## Dialogue history\n"
        f"{history}\n\n"
        "## Interactable objects\n"
        f"{objects}\n\n"
        "## Your persona\n"
        f"{context.persona}\n\n"
        "## Your relationships\n"
        f"{relationships}\n\n"
        "## Your memory\n"
        f"{memory}\n\n"
        "## Your goal\n"
        f"{context.goal}\n\n"
        "## Current stimulus\n"
        f"{context.last_stimulus}\n\n"
        "Decide the most appropriate responding strategy now, with the most fitting tool "
        "call or tool call combination."
    )


def decide(
    actor: str,
    context: PadContext,
    backend: Backend,
    *,
    session: str = "",
) -> PadDecision:
    """Run one perceive-and-decide cycle for an actor.

    Never fails: replies without a parseable strategy tool call fall back to
    FAST when visible text is present and SILENCE otherwise, so the loop
    always gets one of the three strategies.
    """
    prompt = encode_strategy(actor, context)
    request = user_request(
        "",
        prompt,
        tool_specs=pad_tool_specs(context.interactable_objects),
        route=f"pad:{actor}",
        session=session,
    )
    reply = complete(request, backend)

    strategy: Strategy | None = None
    action: Action | None = None
    for call in reply.tool_calls:
        if call.name in _STRATEGY_BY_TOOL:
            if strategy is None:
                strategy = _STRATEGY_BY_TOOL[call.name]
            else:
                logger.warning("extra strategy tool call %r ignored (first wins)", call.name)
        elif call.name == TOOL_TAKE_ACTION:
            if action is not None:
                logger.warning("extra take_action call ignored (first wins)")
                continue
            parsed = parse_action(call.arguments, actor, context.interactable_objects)
            if parsed is None:
                logger.warning(
                    "take_action dropped for %s: object not interactable or verb missing", actor
                )
            else:
                action = parsed
        else:
            logger.warning("unknown tool call %r ignored", call.name)

    if strategy is None:
        strategy = Strategy.FAST if reply.visible.strip() else Strategy.SILENCE
        logger.warning("no strategy tool call parsed for %s; falling back to %s", actor, strategy.value)

    return PadDecision(strategy=strategy, thinking=reply.thinking, action=action)


def parse_action(
    raw: str | Mapping[str, Any],
    actor: str,
    objects: Sequence[InteractableObject],
) -> Action | None:
    """Extract a subject-verb-object triple, or None when no gated action exists.

    The subject is always the acting actor.  The object must match an
    interactable object by exact id, then exact name, then case-insensitively;
    anything else (including a missing verb or object) yields None.
    """
    if isinstance(raw, Mapping):
        verb = str(raw.get("verb", "") or "").strip()
        target = str(raw.get("object", "") or "").strip()
    else:
        tokens = raw.split()
        if len(tokens) < 2:
            return None
        verb = tokens[0]
        rest = tokens[1:]
        while rest and rest[0].lower() in _ARTICLES:
            rest = rest[1:]
        target = " ".join(rest)
    if not verb or not target:
        return None
    matched = _match_object(target, objects)
    if matched is None:
        return None
    return Action(subject=actor, verb=verb, object=matched.id)


def _match_object(
    target: str, objects: Sequence[InteractableObject]
) -> InteractableObject | None:
    for obj in objects:
        if obj.id == target:
            return obj
    for obj in objects:
        if obj.name == target:
            return obj
    lowered = target.lower()
    for obj in objects:
        if obj.id.lower() == lowered or obj.name.lower() == lowered:
            return obj
    return None


def format_response(
    decision: PadDecision,
    speech: str | None = None,
    action_text: str | None = None,
) -> str:
    """Render a turn per the strategy/action mapping.

    FAST -> speech; SLOW -> [thinking] speech; SILENCE -> empty; each variant
    gains a leading (action) segment when the decision carries an action.
    """
    has_action = action_text is not None or decision.action is not None
    if decision.strategy is Strategy.SILENCE:
        if speech:
            raise ContractViolation("SILENCE cannot carry speech")
    else:
        if not speech:
            raise ContractViolation(f"{decision.strategy.value} requires speech")
    if decision.strategy is Strategy.SLOW and not decision.thinking:
        raise ContractViolation("SLOW requires thinking text")

    segments: list[str] = []
    if has_action:
        text = action_text if action_text is not None else (
            f"{decision.action.verb} {decision.action.object}"
        )
        segments.append(f"({text})")
    if decision.strategy is Strategy.SLOW:
        segments.append(f"[{decision.thinking}]")
    if speech:
        segments.append(speech)
    return " ".join(segments)


_PART_SEPARATOR = " | "


def parse_response(raw: str) -> ResponseParts:
    """Segment a raw turn into action, thinking, and speech channels.

    Greedy left-to-right scan: a ``(`` opens an action span ending at the next
    ``)``, a ``[`` opens a thinking span ending at the next ``]``, everything
    else is speech.  Multiple spans of a kind are concatenated in order with
    a `` | `` separator.  An unclosed delimiter downgrades the tail to speech
    with a warning.
    """
    actions: list[str] = []
    thoughts: list[str] = []
    speech_chunks: list[str] = []
    buffer: list[str] = []

    def flush() -> None:
        chunk = "".join(buffer).strip()
        if chunk:
            speech_chunks.append(chunk)
        buffer.clear()

    i = 0
    while i < len(raw):
        char = raw[i]
        if char in "([":
            closing = ")" if char == "(" else "]"
            end = raw.find(closing, i + 1)
            if end == -1:
                logger.warning("unbalanced %r at offset %d; tail treated as speech", char, i)
                buffer.append(raw[i:])
                break
            flush()
            span = raw[i + 1 : end].strip()
            if span:
                (actions if char == "(" else thoughts).append(span)
            i = end + 1
        else:
            buffer.append(char)
            i += 1
    flush()

    return ResponseParts(
        speech=" ".join(speech_chunks) or None,
        action=_PART_SEPARATOR.join(actions) or None,
        thinking=_PART_SEPARATOR.join(thoughts) or None,
    )
