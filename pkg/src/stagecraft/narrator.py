"""Adjudication of physical actions against the environment state.

The narrator rules every attempted physical action success or failure, based
on the scene's props and plain physical plausibility, updates prop state on
success, and broadcasts an objective description to all participants.  A
failed action never touches state and always broadcasts the canonical
failure line.

Reply grammar (bit-exact, shared by live prompts and scripted fixtures)::

    <think>reasoning</think>
    VERDICT: success|failure
    <objective one-line description>
    SET <prop-id>.<key>=<value>     (zero or more, success only)

A compound attempt ("grab the knife and step forward") is adjudicated in one
model call that may emit several VERDICT blocks, in attempt order.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

from .errors import ContractViolation
from .events import KIND_ACTION_RESULT, SPEAKER_NARRATOR, ResponseParts, Visibility
from .gateway import Backend, complete, user_request
from .pad import Action

if TYPE_CHECKING:  # pragma: no cover
    from .events import TranscriptEvent
    from .runtime import Session

logger = logging.getLogger(__name__)

VERDICT_SUCCESS = "success"
VERDICT_FAILURE = "failure"

FAILURE_LINE = "Action failure, nothing happened."

_VERDICT_RE = re.compile(r"^VERDICT:\s*(success|failure)\s*$", re.IGNORECASE)
_SET_RE = re.compile(r"^SET\s+([^.\s=]+)\.([^=]+?)\s*=\s*(.*)$")


@dataclass(frozen=True)
class ScenePropView:
    """A prop as the narrator sees it: blueprint identity plus live state."""

    id: str
    name: str
    description: str
    state: Mapping[str, str]
    interactable: bool = True


@dataclass(frozen=True)
class ActionAttempt:
    actor: str
    raw_action: str
    parsed: Action | None
    scene_snapshot: tuple[ScenePropView, ...]
    originating_event: int

    def __post_init__(self) -> None:
        if not self.raw_action:
            raise ContractViolation("an action attempt needs non-empty action text")
        object.__setattr__(self, "scene_snapshot", tuple(self.scene_snapshot))


@dataclass(frozen=True)
class AdjudicationResult:
    verdict: str
    reasoning: str
    objective_description: str
    state_updates: tuple[tuple[str, str, str], ...] = ()
    resolved_prop: str | None = None

    def __post_init__(self) -> None:
        if self.verdict not in (VERDICT_SUCCESS, VERDICT_FAILURE):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == VERDICT_FAILURE:
            if self.state_updates:
                raise ValueError("a failed action cannot carry state updates")
            if self.objective_description != FAILURE_LINE:
                raise ValueError("failure must broadcast the canonical failure line")
        else:
            if not self.objective_description:
                raise ValueError("success requires a non-empty objective description")

    @property
    def success(self) -> bool:
        return self.verdict == VERDICT_SUCCESS


@dataclass(frozen=True)
class AppliedUpdate:
    prop_id: str
    key: str
    old: str | None
    new: str


def failure(reasoning: str) -> AdjudicationResult:
    return AdjudicationResult(VERDICT_FAILURE, reasoning, FAILURE_LINE)


def build_prompt(attempt: ActionAttempt) -> str:
    props = "\n".join(
        f"- {p.id} ({p.name}): {p.description or 'no description'}; state: "
        + (", ".join(f"{k}={v}" for k, v in sorted(p.state.items())) or "default")
        for p in attempt.scene_snapshot
    ) or "(the scene has no props)"
    return (
        "You adjudicate physical actions on a drama stage. Judge each attempted action "
        "against the props listed below and ordinary physical plausibility. An action on "
        "something that is not in the scene fails; so does anything physically impossible "
        "for the character. A worded reference may match a listed prop (judge that "
        "yourself), but only listed prop ids may appear in SET lines.\n\n"
        f"Props in the scene:\n{props}\n\n"
        f"{attempt.actor} attempts: {attempt.raw_action}\n\n"
        "Reply with your reasoning between <think> and </think> tags. Then, for each "
        "attempted action in order, emit exactly:\n"
        "VERDICT: success|failure\n"
        "<one objective third-person description line>\n"
        "SET <prop-id>.<key>=<value>   (zero or more lines, success only)\n\n"
        f"For a failure the description line must be exactly: {FAILURE_LINE}"
    )


def parse_adjudication(visible: str, reasoning: str) -> list[AdjudicationResult]:
    """Split a narrator reply body into verdict blocks.

    An unparseable reply (no VERDICT line) degrades to a single failure so an
    ill-behaved backend can never crash the performance.
    """
    blocks: list[AdjudicationResult] = []
    verdict: str | None = None
    description: str | None = None
    updates: list[tuple[str, str, str]] = []

    def close_block() -> None:
        nonlocal verdict, description, updates
        if verdict is None:
            return
        if verdict == VERDICT_FAILURE:
            if updates:
                logger.warning("state updates on a failed verdict dropped")
            blocks.append(failure(reasoning))
        elif description is None:
            logger.warning("success verdict without a description; downgraded to failure")
            blocks.append(failure(f"{reasoning} [missing description line]".strip()))
        else:
            blocks.append(
                AdjudicationResult(
                    VERDICT_SUCCESS,
                    reasoning,
                    description,
                    tuple(updates),
                    resolved_prop=updates[0][0] if updates else None,
                )
            )
        verdict, description, updates = None, None, []

    for line in visible.splitlines():
        line = line.strip()
        if not line:
            continue
        verdict_match = _VERDICT_RE.match(line)
        if verdict_match:
            close_block()
            verdict = verdict_match.group(1).lower()
            continue
        set_match = _SET_RE.match(line)
        if set_match:
            if verdict is None:
                logger.warning("SET line before any VERDICT ignored: %r", line)
            else:
                updates.append((set_match.group(1), set_match.group(2).strip(), set_match.group(3)))
            continue
        if verdict is not None and description is None:
            description = line
    close_block()

    if not blocks:
        return [failure(f"unparseable narrator reply: {visible[:120]!r}")]
    return blocks


def adjudicate(attempt: ActionAttempt, backend: Backend, *, session: str = "") -> list[AdjudicationResult]:
    """Judge one (possibly compound) action attempt.  Returns >= 1 results."""
    request = user_request(
        "", build_prompt(attempt), route="narrator", session=session, timeout=60.0
    )
    reply = complete(request, backend)
    return parse_adjudication(reply.visible, reply.thinking or "")


def apply_updates(
    prop_states: dict[str, dict[str, str]],
    result: AdjudicationResult,
) -> tuple[AdjudicationResult, list[AppliedUpdate]]:
    """Apply a successful result's updates atomically.

    An update naming a prop outside the given scene state rejects the whole
    batch and downgrades the verdict to failure: state must stay consistent
    even when the backend hallucinates a prop.
    """
    if not result.success:
        raise ContractViolation("apply_updates requires a success verdict")
    for prop_id, _, _ in result.state_updates:
        if prop_id not in prop_states:
            logger.warning("unknown prop id %r in state update; verdict downgraded", prop_id)
            return failure(f"{result.reasoning} [unknown prop id {prop_id!r}]".strip()), []
    applied: list[AppliedUpdate] = []
    for prop_id, key, value in result.state_updates:
        old = prop_states[prop_id].get(key)
        prop_states[prop_id][key] = value
        applied.append(AppliedUpdate(prop_id, key, old, value))
    return result, applied


def broadcast(
    session: "Session",
    result: AdjudicationResult,
    applied: Sequence[AppliedUpdate],
    attempt_seq: int,
) -> "TranscriptEvent":
    """Append the narrator's objective description as an all-visible event."""
    return session.append_event(
        KIND_ACTION_RESULT,
        SPEAKER_NARRATOR,
        ResponseParts(speech=result.objective_description),
        Visibility.everyone(),
        data={
            "verdict": result.verdict,
            "reasoning": result.reasoning,
            "resolved_prop": result.resolved_prop,
            "state_updates": [
                {"prop": u.prop_id, "key": u.key, "old": u.old, "new": u.new} for u in applied
            ],
            "attempt_seq": attempt_seq,
        },
    )
