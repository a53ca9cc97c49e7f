"""Control agents steering the live performance.

Three agents keep improvisation on the rails:

* the planner pre-designs candidate beat trajectories between two consecutive
  points and reviews realized trajectories to reject flag hacking;
* the transfer checks after performer activity whether the current point's
  flag has been fulfilled and triggers the transition;
* the advancer recovers stalled plots with targeted instructions.

Conclusion grammars (bit-exact):

* transfer: final line ``FLAG_MET: true|false``, optional ``CITED: 3,5``
* planner review: final line ``TRAJECTORY: pass|reject``, optional ``REASON: ...``
* advancer: lines ``Instruction to <name>[, <name>]: <text>`` with the target
  ``all`` meaning a broadcast to every on-stage actor
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Sequence

from .blueprint import FlagSpec, NarrativeBlueprint, Point
from .errors import ContractViolation, ParseFailure
from .events import Beat, TranscriptEvent
from .gateway import Backend, complete, user_request

logger = logging.getLogger(__name__)

_FLAG_MET_RE = re.compile(r"^FLAG_MET:\s*(true|false)\s*$", re.IGNORECASE)
_CITED_RE = re.compile(r"^CITED:\s*([0-9,\s]+)$", re.IGNORECASE)
_TRAJECTORY_RE = re.compile(r"^TRAJECTORY:\s*(pass|reject)\s*$", re.IGNORECASE)
_REASON_RE = re.compile(r"^REASON:\s*(.*)$", re.IGNORECASE)
_INSTRUCTION_RE = re.compile(r"^Instruction to ([^:]+):\s*(.+)$")


@dataclass(frozen=True)
class BeatSketch:
    """One planned step of a trajectory: who does roughly what."""

    actor: str
    gist: str


@dataclass(frozen=True)
class TrajectoryPlan:
    from_point: str
    to_point: str
    candidates: tuple[tuple[BeatSketch, ...], ...]

    def __post_init__(self) -> None:
        if not self.candidates or any(not c for c in self.candidates):
            raise ValueError("a trajectory plan needs at least one non-empty candidate")


@dataclass(frozen=True)
class FlagCheck:
    point_id: str
    met: bool
    reasoning: str
    cited_events: tuple[int, ...]
    conclusion: str = ""

    def __post_init__(self) -> None:
        if self.met and not self.cited_events:
            raise ValueError("a met flag check must cite at least one event")


@dataclass(frozen=True)
class TrajectoryReview:
    passed: bool
    reason: str
    conclusion: str = ""


@dataclass(frozen=True)
class AdvancerDirective:
    targets: tuple[str, ...]
    instruction: str
    reasoning: str
    broadcast: bool = False

    def __post_init__(self) -> None:
        if not self.targets and not self.broadcast:
            raise ValueError("a directive needs targets or the broadcast flag")


def _strip_grammar_lines(visible: str, *patterns: re.Pattern[str]) -> str:
    kept = [
        line
        for line in visible.splitlines()
        if line.strip() and not any(p.match(line.strip()) for p in patterns)
    ]
    return "\n".join(kept).strip()


def render_history(events: Sequence[TranscriptEvent]) -> list[str]:
    """Dialogue-history lines as control agents see them."""
    lines = []
    for event in events:
        text = event.text
        if event.kind == "action_attempt":
            text = f"({event.parts.action})"
        lines.append(f"[{event.seq}] {event.speaker}: {text}")
    return lines


def plan_trajectories(
    point_pair: tuple[Point, Point],
    blueprint: NarrativeBlueprint,
    backend: Backend,
    *,
    session: str = "",
) -> TrajectoryPlan:
    """Pre-design candidate beat sequences leading from one point to the next."""
    start, target = point_pair
    _require_consecutive(start, target, blueprint)
    prompt = (
        "You design candidate trajectories between two plot points of a drama: ordered "
        "beat sequences an actor ensemble could realistically play to reach the target "
        "point. Offer one or more alternatives with sensible pacing and escalation.\n\n"
        f"Drama topic: {blueprint.topic}\n"
        f"Current point: {start.description}\n"
        f"Target point: {target.description}\n"
        f"Target flag: {target.flag.description}\n\n"
        "Reply with a JSON object of the shape "
        '{"candidates": [[{"actor": "...", "gist": "..."}, ...], ...]} and nothing else.'
    )
    reply = complete(user_request("", prompt, route="planner", session=session), backend)
    try:
        doc = json.loads(reply.visible)
        candidates = tuple(
            tuple(BeatSketch(str(b["actor"]), str(b["gist"])) for b in candidate)
            for candidate in doc["candidates"]
        )
        return TrajectoryPlan(start.id, target.id, candidates)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseFailure(f"planner reply is not a valid trajectory plan: {exc}") from exc


def _require_consecutive(start: Point, target: Point, blueprint: NarrativeBlueprint) -> None:
    for act in blueprint.acts:
        ids = [p.id for p in act.points]
        if start.id in ids and target.id in ids:
            if ids.index(target.id) - ids.index(start.id) == 1:
                return
            raise ContractViolation(f"points {start.id!r} and {target.id!r} are not consecutive")
    raise ContractViolation(f"points {start.id!r} and {target.id!r} are not in the same act")


def check_flag(
    history_window: Sequence[TranscriptEvent],
    flag: FlagSpec,
    point_id: str,
    backend: Backend,
    *,
    session: str = "",
) -> FlagCheck:
    """Decide whether the flag has been fulfilled by the windowed history.

    Conservative by construction: a reply without a parseable FLAG_MET line
    counts as not met, so an ill-behaved backend can never cause a transition.
    """
    if not history_window:
        raise ContractViolation("check_flag needs a non-empty history window")
    lines = "\n".join(render_history(history_window))
    prompt = (
        "You monitor a live drama and decide whether a specific flag has been fulfilled "
        "at this exact moment, judging only from the dialogue history below.\n\n"
        f"Dialogue history:\n{lines}\n\n"
        f"Flag description: {flag.description}\n\n"
        "Analyze and explain the reasoning process between <think> and </think> xml tags, "
        "then state a clear conclusion. End with the line "
        "'FLAG_MET: true' or 'FLAG_MET: false'; when the flag is met you may add a line "
        "'CITED: <comma-separated event numbers>' naming the fulfilling events."
    )
    reply = complete(user_request("", prompt, route="transfer", session=session), backend)

    met: bool | None = None
    cited: list[int] = []
    for line in reply.visible.splitlines():
        line = line.strip()
        met_match = _FLAG_MET_RE.match(line)
        if met_match:
            met = met_match.group(1).lower() == "true"
            continue
        cited_match = _CITED_RE.match(line)
        if cited_match:
            cited = [int(s) for s in cited_match.group(1).replace(" ", "").split(",") if s]

    conclusion = _strip_grammar_lines(reply.visible, _FLAG_MET_RE, _CITED_RE)
    if met is None:
        logger.warning("transfer reply had no FLAG_MET line; treating flag as not met")
        return FlagCheck(point_id, False, reply.thinking or "", (), conclusion or "unparseable reply")
    if not reply.thinking:
        logger.warning("transfer reply had an empty think span")

    window_seqs = {e.seq for e in history_window}
    valid_cited = tuple(seq for seq in cited if seq in window_seqs)
    if cited and len(valid_cited) != len(cited):
        logger.warning("transfer cited events outside the history window; dropped")
    if met and not valid_cited:
        valid_cited = (history_window[-1].seq,)
    return FlagCheck(point_id, met, reply.thinking or "", valid_cited, conclusion)


def review_trajectory(
    actual_beats: Sequence[Beat],
    plan: TrajectoryPlan | None,
    flag: FlagSpec,
    backend: Backend,
    *,
    session: str = "",
    beat_lines: Sequence[str] = (),
) -> TrajectoryReview:
    """Check that a realized beat sequence earned the flag it fulfilled.

    Guards against flag hacking: a participant who knows the flag in advance
    must not skip the dramatic build-up and trigger the result directly.
    Fail-open on unparseable replies: the show must go on.
    """
    if not actual_beats:
        return TrajectoryReview(False, "no causal path: the flag was met without any beats")
    planned = ""
    if plan is not None:
        planned = "\n".join(
            f"- option {i + 1}: " + "; ".join(f"{b.actor}: {b.gist}" for b in candidate)
            for i, candidate in enumerate(plan.candidates)
        )
    realized = "\n".join(beat_lines) or "\n".join(
        f"- {beat.actor} acted (events {', '.join(map(str, beat.event_refs))})"
        for beat in actual_beats
    )
    prompt = (
        "You review the trajectory that just fulfilled a drama flag. Decide whether the "
        "realized beat sequence is causally coherent and narratively justified, or whether "
        "it skipped the natural build-up and jumped straight to the result (flag hacking). "
        "A single beat that merely recites the flag's result without grounding must be "
        "rejected.\n\n"
        f"Flag: {flag.description}\n"
        + (f"Planned trajectories:\n{planned}\n" if planned else "")
        + f"Realized beats:\n{realized}\n\n"
        "Analyze between <think> and </think> xml tags, give a one-line conclusion, then "
        "end with the line 'TRAJECTORY: pass' or 'TRAJECTORY: reject', optionally followed "
        "by 'REASON: <why>'."
    )
    reply = complete(user_request("", prompt, route="planner", session=session), backend)

    verdict: bool | None = None
    reason = ""
    for line in reply.visible.splitlines():
        line = line.strip()
        match = _TRAJECTORY_RE.match(line)
        if match:
            verdict = match.group(1).lower() == "pass"
            continue
        reason_match = _REASON_RE.match(line)
        if reason_match:
            reason = reason_match.group(1)
    conclusion = _strip_grammar_lines(reply.visible, _TRAJECTORY_RE, _REASON_RE)
    if verdict is None:
        logger.warning("planner review reply unparseable; failing open to pass")
        return TrajectoryReview(True, "unparseable review reply (fail-open)", conclusion)
    return TrajectoryReview(verdict, reason, conclusion)


@dataclass(frozen=True)
class AdvancerView:
    """What the advancer is shown when a stall must be recovered."""

    point_id: str
    point_description: str
    flag_description: str
    on_stage: tuple[str, ...]
    history_lines: tuple[str, ...]
    plot_summary: str = ""


def stall_recover(
    view: AdvancerView,
    plan: TrajectoryPlan | None,
    backend: Backend,
    *,
    session: str = "",
) -> AdvancerDirective:
    """Produce instructions that push a stalled plot toward the current flag.

    Directives targeting nobody on stage (or unparseable replies) fall back to
    restating the flag to everyone on stage.
    """
    planned = ""
    if plan is not None and plan.candidates:
        planned = "Planned beats for reference:\n" + "; ".join(
            f"{b.actor}: {b.gist}" for b in plan.candidates[0]
        )
    prompt = (
        "The drama has stalled and must progress now. Analyze the situation and issue "
        "specific, clear instructions to the actor(s) you deem necessary; if needed you "
        "may broadcast to all actors.\n\n"
        f"Current point: {view.point_description}\n"
        f"Current flag: {view.flag_description}\n"
        f"On-stage actors: {', '.join(view.on_stage)}\n"
        + (f"{view.plot_summary}\n" if view.plot_summary else "")
        + (f"{planned}\n" if planned else "")
        + "Recent history:\n"
        + "\n".join(view.history_lines)
        + "\n\nAnalyze between <think> and </think> xml tags, then give one line per "
        "directive in exactly the form 'Instruction to <name>: <text>' (use the name "
        "'all' to broadcast)."
    )
    reply = complete(user_request("", prompt, route="advancer", session=session), backend)

    directive: AdvancerDirective | None = None
    for line in reply.visible.splitlines():
        match = _INSTRUCTION_RE.match(line.strip())
        if not match:
            continue
        if directive is not None:
            logger.warning("extra advancer instruction line ignored (first wins)")
            break
        names = [n.strip() for n in match.group(1).split(",") if n.strip()]
        text = match.group(2).strip()
        if any(n.lower() == "all" for n in names):
            directive = AdvancerDirective((), text, reply.thinking or "", broadcast=True)
            continue
        on_stage = [n for n in names if n in view.on_stage]
        dropped = sorted(set(names) - set(on_stage))
        if dropped:
            logger.warning("advancer targeted off-stage actors %s; dropped", dropped)
        if on_stage:
            directive = AdvancerDirective(tuple(on_stage), text, reply.thinking or "")

    if directive is None:
        logger.warning("advancer reply yielded no usable directive; restating the flag")
        return AdvancerDirective(
            tuple(view.on_stage),
            f"Focus on the current objective: {view.flag_description}",
            reply.thinking or "fallback after unparseable advancer reply",
            broadcast=True,
        )
    return directive
