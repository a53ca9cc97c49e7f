"""The online performance engine.

A session takes a validated blueprint and a roster, walks the act/point state
machine, schedules turns across AI actors and human players, accumulates the
append-only transcript, and wires the narrator and control agents into the
loop:

* every performer turn with an action is adjudicated synchronously;
* the transfer agent is polled after each completed beat (batchable);
* the advancer fires when the stall counter crosses the threshold;
* private goals are refreshed at every act entry.

All state mutations are serialized through the session lock: one logical
writer per session.  Sessions are independent and may run in parallel.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Mapping, Sequence

from . import control, narrator, pad
from .blueprint import (
    CONTROLLER_AI,
    CONTROLLER_HUMAN,
    Act,
    NarrativeBlueprint,
    Point,
    Scene,
    to_document,
    validate,
)
from .errors import (
    ContractViolation,
    EmptyTurn,
    InputQueueFull,
    OffStage,
    RosterMismatch,
    StageError,
    ValidationFailure,
)
from .events import (
    KIND_ACTION_ATTEMPT,
    KIND_ACTION_RESULT,
    KIND_BROADCAST,
    KIND_INSTRUCTION,
    KIND_SPEECH,
    KIND_SYSTEM,
    KIND_THINKING,
    SPEAKER_ADVANCER,
    SPEAKER_ENVIRONMENT,
    SPEAKER_PLANNER,
    SPEAKER_SYSTEM,
    SPEAKER_TRANSFER,
    Beat,
    ResponseParts,
    TranscriptEvent,
    Visibility,
    visible_to,
)
from .gateway import Backend, complete, user_request

logger = logging.getLogger(__name__)

CLOCK_TURNS = "turns"
CLOCK_WALL = "wall"

REVIEW_HUMAN = "human"
REVIEW_ALWAYS = "always"
REVIEW_NEVER = "never"

STATUS_PERFORMING = "performing"
STATUS_COMPLETED = "completed"
STATUS_ABORTED = "aborted"

SESSION_CREATED_TEXT = "Session created."
ADVANCER_ACTIVATED_TEXT = "Time accumulation has surpassed the threshold, Advancer is activated."
PERFORMANCE_COMPLETED_TEXT = "Performance completed."
TURN_BUDGET_TEXT = "Turn budget exhausted."
GOAL_UPDATED_TEXT = "Private goal updated."


@dataclass(frozen=True)
class StageConfig:
    clock: str = CLOCK_TURNS
    stall_threshold: float | None = None  # default: 6 rounds (turns) / 60 s (wall)
    turn_budget: int = 200
    history_window: int = 30
    refresh_goals: bool = True
    review_trajectories: str = REVIEW_HUMAN
    transfer_batch: int = 1
    human_wait_seconds: float = 30.0
    hide_flags_from_humans: bool = True
    transcript_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.clock not in (CLOCK_TURNS, CLOCK_WALL):
            raise ValueError(f"unknown clock mode {self.clock!r}")
        if self.review_trajectories not in (REVIEW_HUMAN, REVIEW_ALWAYS, REVIEW_NEVER):
            raise ValueError(f"unknown review mode {self.review_trajectories!r}")
        if self.transfer_batch < 1:
            raise ValueError("transfer_batch must be >= 1")
        if self.stall_threshold is not None and self.stall_threshold <= 0:
            raise ValueError("stall_threshold must be positive")

    @property
    def effective_stall_threshold(self) -> float:
        if self.stall_threshold is not None:
            return self.stall_threshold
        return 6 if self.clock == CLOCK_TURNS else 60.0


@dataclass
class LiveProfile:
    """Per-session mutable copy of an actor's dynamic attributes."""

    persona: str
    background: str
    relationships: dict[str, str]
    goal: str
    memory: list[str]
    controller: str


@dataclass(frozen=True)
class PointTransition:
    from_act: str
    from_point: str
    to_act: str | None
    to_point: str | None
    completed: bool
    entered: tuple[str, ...] = ()
    left: tuple[str, ...] = ()


@dataclass(frozen=True)
class PerformanceTranscript:
    events: tuple[TranscriptEvent, ...]
    completed: bool
    rounds: int
    incomplete_reason: str | None = None
    final_checksum: str = ""


class Session:
    """One live performance.  All mutation happens under ``self.lock``."""

    def __init__(
        self,
        blueprint: NarrativeBlueprint,
        roster: Mapping[str, str] | None = None,
        backend: Backend | None = None,
        config: StageConfig | None = None,
        session_id: str | None = None,
    ) -> None:
        violations = validate(blueprint)
        if violations:
            raise ValidationFailure(violations)
        self.blueprint = blueprint
        self.config = config or StageConfig()
        self.backend = backend
        self.session_id = session_id or uuid.uuid4().hex

        names = blueprint.actor_names()
        if roster is None:
            roster = {a.name: a.controller for a in blueprint.actors}
        missing = [n for n in names if n not in roster]
        unknown = [n for n in roster if n not in names]
        if missing or unknown:
            raise RosterMismatch(
                f"roster must cover the blueprint actors exactly "
                f"(missing: {missing or 'none'}, unknown: {unknown or 'none'})"
            )
        for name, controller in roster.items():
            if controller not in (CONTROLLER_AI, CONTROLLER_HUMAN):
                raise RosterMismatch(f"unknown controller {controller!r} for {name!r}")
        self.roster: dict[str, str] = {n: roster[n] for n in names}

        self.lock = threading.RLock()
        self.new_event = threading.Condition(self.lock)
        self.transcript: list[TranscriptEvent] = []
        self.status = STATUS_PERFORMING
        self.incomplete_reason: str | None = None

        self.act_index = 0
        self.point_index = 0
        self.on_stage: set[str] = set()
        self.prop_states: dict[str, dict[str, str]] = {
            p.id: dict(p.state) for scene in blueprint.scenes for p in scene.props
        }
        self.live: dict[str, LiveProfile] = {
            a.name: LiveProfile(
                persona=a.persona,
                background=a.background,
                relationships=dict(a.relationships),
                goal=a.private_goal or a.initial_goal,
                memory=list(a.memory),
                controller=self.roster[a.name],
            )
            for a in blueprint.actors
        }

        self._seq = 0
        self._last_ts = 0.0
        self._stall_rounds = 0
        self._last_progress = time.monotonic()
        self._rounds_in_act = 0
        self._rounds_total = 0
        self._rr_pointer = 0
        self._announced_waiting: tuple[str, ...] = ()
        self._beats: list[Beat] = []
        self._beats_since_poll = 0
        self._pending_inputs: dict[str, deque[tuple[int, str]]] = {}
        self._input_results: dict[tuple[str, int], tuple[int, int]] = {}
        self.trajectory_plan: control.TrajectoryPlan | None = None
        self._sink: IO[str] | None = None
        if self.config.transcript_path is not None:
            self._sink = open(self.config.transcript_path, "a", encoding="utf-8")

    # -- event plumbing ----------------------------------------------------

    def _timestamp(self) -> float:
        if self.config.clock == CLOCK_TURNS:
            return float(self._seq)
        now = time.time()
        now = max(now, self._last_ts + 1e-6)
        self._last_ts = now
        return now

    def append_event(
        self,
        kind: str,
        speaker: str,
        parts: ResponseParts,
        visibility: Visibility,
        data: Mapping[str, Any] | None = None,
    ) -> TranscriptEvent:
        with self.lock:
            event = TranscriptEvent(
                seq=self._seq,
                timestamp=self._timestamp(),
                kind=kind,
                speaker=speaker,
                parts=parts,
                visibility=visibility,
                data=data,
            )
            self._seq += 1
            self.transcript.append(event)
            if self._sink is not None:
                self._sink.write(event.to_json() + "\n")
                self._sink.flush()
            self.new_event.notify_all()
            return event

    def _system(self, text: str, data: Mapping[str, Any] | None = None) -> TranscriptEvent:
        return self.append_event(
            KIND_SYSTEM, SPEAKER_SYSTEM, ResponseParts(speech=text), Visibility.everyone(), data
        )

    # -- structure accessors -------------------------------------------------

    @property
    def current_act(self) -> Act:
        return self.blueprint.acts[self.act_index]

    @property
    def current_point(self) -> Point:
        return self.current_act.points[self.point_index]

    @property
    def current_scene(self) -> Scene:
        scene = self.blueprint.scene_by_id(self.current_act.scene_ids[0])
        if scene is None:  # validated blueprints cannot reach this
            raise StageError(f"act {self.current_act.id!r} references a missing scene")
        return scene

    def state_checksum(self) -> str:
        from .transcript import compute_state_checksum

        return compute_state_checksum(
            self.act_index, self.point_index, self.on_stage, self.prop_states
        )

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        """Emit the session header and enter act 0 / point 0."""
        with self.lock:
            if self.transcript:
                raise StageError("session already started")
            self._system(
                SESSION_CREATED_TEXT,
                data={
                    "session_id": self.session_id,
                    "blueprint": to_document(self.blueprint),
                    "roster": dict(self.roster),
                    "clock": self.config.clock,
                },
            )
            self._enter_act()
            self._enter_point(self.current_point)

    def _enter_act(self) -> None:
        scene = self.current_scene
        self.append_event(
            KIND_SYSTEM,
            SPEAKER_ENVIRONMENT,
            ResponseParts(speech=scene.environment_description),
            Visibility.everyone(),
            data={"scene_id": scene.id, "act_id": self.current_act.id},
        )
        self._rounds_in_act = 0
        if self.config.refresh_goals and self.backend is not None:
            refresh_private_goals(self, self.backend)

    def _enter_point(self, point: Point) -> tuple[tuple[str, ...], tuple[str, ...]]:
        left: list[str] = []
        entered: list[str] = []
        for name in point.leave_list:
            if name in self.on_stage:
                self.on_stage.discard(name)
                left.append(name)
                self._system(f"{name} leaves.", data={"actor": name, "movement": "leave"})
            else:
                logger.warning("leave_list names %r who is not on stage; ignored", name)
        for name in point.entry_list:
            if name in self.on_stage:
                logger.warning("entry_list names %r who is already on stage; ignored", name)
            else:
                self.on_stage.add(name)
                entered.append(name)
                self._system(f"{name} enters.", data={"actor": name, "movement": "enter"})
        if not self.config.hide_flags_from_humans:
            # Flags never appear in events otherwise; revealing them invites
            # flag hacking, which is why hiding is the default.
            for name in sorted(self.on_stage):
                if self.roster[name] == CONTROLLER_HUMAN:
                    self.append_event(
                        KIND_SYSTEM,
                        SPEAKER_SYSTEM,
                        ResponseParts(speech=f"Current objective: {point.flag.description}"),
                        Visibility.private_to(name),
                        data={"flag_reveal": point.id},
                    )
        return tuple(entered), tuple(left)

    def abort(self, reason: str) -> None:
        with self.lock:
            if self.status != STATUS_PERFORMING:
                return
            self.status = STATUS_ABORTED
            self.incomplete_reason = reason
            self._system(
                TURN_BUDGET_TEXT if "budget" in reason else f"Session aborted: {reason}",
                data={"reason": reason, "checksum": self.state_checksum()},
            )
            self._close_sink()

    def _close_sink(self) -> None:
        if self._sink is not None:
            self._sink.close()
            self._sink = None

    # -- turns ---------------------------------------------------------------

    def submit_turn(self, actor: str, raw_text: str) -> list[TranscriptEvent]:
        """Execute one performer turn: parse markup, append events, adjudicate.

        Any action part triggers narrator adjudication synchronously before
        the next turn can run; results and prop-state diffs are appended as
        all-visible events.
        """
        with self.lock:
            if self.status != STATUS_PERFORMING:
                raise StageError(f"session is {self.status}, not performing")
            if actor not in self.on_stage:
                raise OffStage(f"{actor!r} is not on stage")
            parts = pad.parse_response(raw_text)
            if not parts.present():
                raise EmptyTurn(f"turn by {actor!r} has no parseable part")

            produced: list[TranscriptEvent] = []
            effective = False
            attempt_event: TranscriptEvent | None = None

            if parts.action:
                parsed = pad.parse_action(parts.action, actor, self._interactables())
                attempt_event = self.append_event(
                    KIND_ACTION_ATTEMPT,
                    actor,
                    ResponseParts(action=parts.action),
                    Visibility.everyone(),
                    data={"svo": None if parsed is None else vars(parsed)},
                )
                produced.append(attempt_event)
            if parts.thinking:
                produced.append(
                    self.append_event(
                        KIND_THINKING,
                        actor,
                        ResponseParts(thinking=parts.thinking),
                        Visibility.private_to(actor),
                    )
                )
            if parts.speech:
                produced.append(
                    self.append_event(
                        KIND_SPEECH, actor, ResponseParts(speech=parts.speech), Visibility.everyone()
                    )
                )

            if parts.action and attempt_event is not None:
                if self.backend is None:
                    raise StageError("an action turn needs a backend for adjudication")
                attempt = narrator.ActionAttempt(
                    actor=actor,
                    raw_action=parts.action,
                    parsed=pad.parse_action(parts.action, actor, self._interactables()),
                    scene_snapshot=self._scene_snapshot(),
                    originating_event=attempt_event.seq,
                )
                results = narrator.adjudicate(attempt, self.backend, session=self.session_id)
                scene_states = self._scene_states()
                for result in results:
                    applied: list[narrator.AppliedUpdate] = []
                    if result.success:
                        result, applied = narrator.apply_updates(scene_states, result)
                    produced.append(narrator.broadcast(self, result, applied, attempt_event.seq))
                    if result.success:
                        effective = True

            beat = Beat(actor, tuple(e.seq for e in produced), effective)
            self._beats.append(beat)
            if effective:
                self._mark_progress()
            else:
                self._stall_rounds += 1
            return produced

    def _interactables(self) -> list[pad.InteractableObject]:
        return [
            pad.InteractableObject(p.id, p.name)
            for p in self.current_scene.props
            if p.interactable
        ]

    def _scene_snapshot(self) -> tuple[narrator.ScenePropView, ...]:
        return tuple(
            narrator.ScenePropView(
                id=p.id,
                name=p.name,
                description=p.description,
                state=dict(self.prop_states[p.id]),
                interactable=p.interactable,
            )
            for p in self.current_scene.props
        )

    def _scene_states(self) -> dict[str, dict[str, str]]:
        # Shared dict objects: narrator updates flow into session prop state.
        return {p.id: self.prop_states[p.id] for p in self.current_scene.props}

    def _mark_progress(self) -> None:
        self._stall_rounds = 0
        self._last_progress = time.monotonic()

    def _stalled(self) -> bool:
        threshold = self.config.effective_stall_threshold
        if self.config.clock == CLOCK_TURNS:
            return self._stall_rounds >= threshold
        return (time.monotonic() - self._last_progress) >= threshold

    def inject_broadcast(self, text: str, speaker: str = SPEAKER_ENVIRONMENT) -> TranscriptEvent:
        """Stage management: an ambient description all performers perceive."""
        with self.lock:
            event = self.append_event(
                KIND_BROADCAST, speaker, ResponseParts(speech=text), Visibility.everyone()
            )
            self._beats_since_poll += 1
            return event

    # -- transitions -----------------------------------------------------------

    def advance_point(self) -> PointTransition:
        """Move to the next point (or act); completes the session at the end."""
        with self.lock:
            if self.status != STATUS_PERFORMING:
                raise StageError(f"session is {self.status}, not performing")
            act = self.current_act
            from_act_id = act.id
            from_point_id = self.current_point.id
            at_act_end = self.point_index == len(act.points) - 1

            if at_act_end and self.act_index == len(self.blueprint.acts) - 1:
                self.status = STATUS_COMPLETED
                self._system(
                    PERFORMANCE_COMPLETED_TEXT,
                    data={"checksum": self.state_checksum(), "final": True},
                )
                self._close_sink()
                self._beats.clear()
                self._mark_progress()
                return PointTransition(from_act_id, from_point_id, None, None, completed=True)

            if at_act_end:
                self.act_index += 1
                self.point_index = 0
            else:
                self.point_index += 1
            to_point = self.current_point
            self._system(
                f"Point advanced: {from_point_id} -> {to_point.id}.",
                data={
                    "transition": {
                        "from_act": from_act_id,
                        "from_point": from_point_id,
                        "to_act": self.current_act.id,
                        "to_point": to_point.id,
                        "act_index": self.act_index,
                        "point_index": self.point_index,
                    }
                },
            )
            if at_act_end:
                self._enter_act()
            entered, left = self._enter_point(to_point)
            self._beats.clear()
            self._beats_since_poll = 0
            self._mark_progress()
            return PointTransition(
                from_act_id, from_point_id, self.current_act.id, to_point.id, False, entered, left
            )

    # -- human input -----------------------------------------------------------

    def queue_player_input(self, actor: str, raw_text: str, client_seq: int) -> dict[str, Any]:
        """Queue one human turn; duplicates by (actor, client_seq) are no-ops."""
        with self.lock:
            if self.status != STATUS_PERFORMING:
                raise StageError(f"session is {self.status}, not performing")
            if self.roster.get(actor) != CONTROLLER_HUMAN:
                raise ContractViolation(f"{actor!r} is not a human-controlled actor")
            done = self._input_results.get((actor, client_seq))
            if done is not None:
                return {
                    "status": "duplicate",
                    "executed": True,
                    "seq_start": done[0],
                    "seq_end": done[1],
                }
            queue = self._pending_inputs.setdefault(actor, deque())
            if any(cs == client_seq for cs, _ in queue):
                return {"status": "duplicate", "executed": False}
            if queue:
                raise InputQueueFull(
                    f"{actor!r} already has a pending input; one turn may be queued"
                )
            queue.append((client_seq, raw_text))
            self.new_event.notify_all()
            return {"status": "accepted", "executed": False}

    def _pop_input(self, actor: str) -> tuple[int, str] | None:
        queue = self._pending_inputs.get(actor)
        if queue:
            return queue.popleft()
        return None

    # -- pad integration ---------------------------------------------------------

    def _history_lines(self, viewer: str) -> list[str]:
        lines: list[str] = []
        for event in self.transcript:
            if not visible_to(event, viewer):
                continue
            if event.kind == KIND_SYSTEM:
                continue
            if event.kind == KIND_THINKING:
                lines.append(f"{event.speaker} (thinking): [{event.parts.thinking}]")
            elif event.kind == KIND_ACTION_ATTEMPT:
                lines.append(f"{event.speaker}: ({event.parts.action})")
            elif event.kind == KIND_INSTRUCTION:
                lines.append(f"{SPEAKER_ADVANCER} to {viewer}: {event.text}")
            else:
                lines.append(f"{event.speaker}: {event.text}")
        return lines[-self.config.history_window :]

    def build_pad_context(self, actor: str) -> pad.PadContext:
        profile = self.live[actor]
        history = self._history_lines(actor)
        return pad.PadContext(
            persona=profile.persona,
            relationships=profile.relationships,
            memory=profile.memory,
            goal=profile.goal,
            environment_description=self.current_scene.environment_description,
            actor_list=[n for n in self.blueprint.actor_names() if n in self.on_stage],
            dialogue_history=history,
            interactable_objects=self._interactables(),
            last_stimulus=history[-1] if history else self.current_scene.environment_description,
        )

    def _record_decision(self, actor: str, decision: pad.PadDecision) -> None:
        summary = f"PAD decision: {decision.strategy.value}"
        if decision.action is not None:
            summary += f" + action({decision.action.verb} {decision.action.object})"
        self.append_event(
            KIND_SYSTEM,
            actor,
            ResponseParts(speech=summary),
            Visibility.private_to(actor),
            data={
                "pad": {
                    "strategy": decision.strategy.value,
                    "thinking": decision.thinking,
                    "action": None if decision.action is None else vars(decision.action),
                }
            },
        )

    def _generate_actor_turn(self, actor: str, decision: pad.PadDecision) -> str:
        profile = self.live[actor]
        strategy_note = decision.strategy.value
        if decision.action is not None:
            strategy_note += f" with action {decision.action.verb} {decision.action.object}"
        prompt = (
            f"You are role-playing {actor} in a live drama. Use colloquial language and "
            "stay in character.\n\n"
            f"Persona: {profile.persona}\n"
            f"Goal: {profile.goal}\n"
            f"Scene: {self.current_scene.environment_description}\n"
            "Recent dialogue:\n" + "\n".join(self._history_lines(actor)) + "\n\n"
            f"Your decided reaction strategy is {strategy_note}.\n"
            "Compose the turn from any combination of speech, action, and thinking. "
            "Add () outside the action. Add [] outside the thinking. A FAST strategy is "
            "plain speech; SLOW adds your [thinking] before the speech; SILENCE means no "
            "speech (an action alone is allowed)."
        )
        reply = complete(
            user_request("", prompt, route=f"actor:{actor}", session=self.session_id),
            self.backend,
        )
        return reply.visible

    # -- control integration --------------------------------------------------

    def _history_window_events(self) -> list[TranscriptEvent]:
        """Events since the last transition, as the transfer agent sees them."""
        start = 0
        for i, event in enumerate(self.transcript):
            if event.data and "transition" in event.data:
                start = i + 1
        return [
            e
            for e in self.transcript[start:]
            if e.kind in (KIND_SPEECH, KIND_ACTION_ATTEMPT, KIND_ACTION_RESULT, KIND_BROADCAST)
        ]

    def _poll_transfer(self) -> bool:
        """Run a flag check; on a met flag (and passing review) advance the point.

        Returns True when a transition happened.
        """
        window = self._history_window_events()
        if not window:
            return False
        point = self.current_point
        check = control.check_flag(
            window, point.flag, point.id, self.backend, session=self.session_id
        )
        self.append_event(
            KIND_SYSTEM,
            SPEAKER_TRANSFER,
            ResponseParts(speech=check.conclusion or f"Flag check: {'met' if check.met else 'not met'}."),
            Visibility.everyone(),
            data={
                "flag_check": {
                    "point_id": check.point_id,
                    "met": check.met,
                    "cited_events": list(check.cited_events),
                    "reasoning": check.reasoning,
                }
            },
        )
        if not check.met:
            return False
        if self._review_required():
            review = control.review_trajectory(
                self._beats,
                self.trajectory_plan,
                point.flag,
                self.backend,
                session=self.session_id,
                beat_lines=self._beat_lines(),
            )
            self.append_event(
                KIND_SYSTEM,
                SPEAKER_PLANNER,
                ResponseParts(
                    speech=review.conclusion
                    or ("Trajectory check passed." if review.passed else "Trajectory rejected.")
                ),
                Visibility.everyone(),
                data={"trajectory_review": {"passed": review.passed, "reason": review.reason}},
            )
            if not review.passed:
                return False
        self.advance_point()
        return True

    def _review_required(self) -> bool:
        mode = self.config.review_trajectories
        if mode == REVIEW_ALWAYS:
            return True
        if mode == REVIEW_NEVER:
            return False
        return any(self.roster.get(b.actor) == CONTROLLER_HUMAN for b in self._beats)

    def _beat_lines(self) -> list[str]:
        by_seq = {e.seq: e for e in self.transcript}
        lines = []
        for beat in self._beats:
            texts = []
            for ref in beat.event_refs:
                event = by_seq.get(ref)
                if event is None or event.kind == KIND_THINKING:
                    continue
                if event.kind == KIND_ACTION_ATTEMPT:
                    texts.append(f"({event.parts.action})")
                else:
                    texts.append(event.text)
            lines.append(f"- {beat.actor}: " + " ".join(texts))
        return lines

    def _run_advancer(self) -> None:
        self._system(ADVANCER_ACTIVATED_TEXT, data={"advancer": True})
        point = self.current_point
        view = control.AdvancerView(
            point_id=point.id,
            point_description=point.description,
            flag_description=point.flag.description,
            on_stage=tuple(n for n in self.blueprint.actor_names() if n in self.on_stage),
            history_lines=tuple(control.render_history(self._history_window_events())[-10:]),
            plot_summary="",
        )
        directive = control.stall_recover(
            view, self.trajectory_plan, self.backend, session=self.session_id
        )
        data = {"reasoning": directive.reasoning}
        if directive.broadcast:
            self.append_event(
                KIND_INSTRUCTION,
                SPEAKER_ADVANCER,
                ResponseParts(speech=directive.instruction),
                Visibility.everyone(),
                data=data,
            )
        else:
            for target in directive.targets:
                self.append_event(
                    KIND_INSTRUCTION,
                    SPEAKER_ADVANCER,
                    ResponseParts(speech=directive.instruction),
                    Visibility.private_to(target),
                    data={**data, "target": target},
                )
        self._mark_progress()

    # -- the round loop -----------------------------------------------------------

    def _round_robin_pick(self, candidates: Sequence[str]) -> str:
        order = self.blueprint.actor_names()
        n = len(order)
        for offset in range(n):
            name = order[(self._rr_pointer + offset) % n]
            if name in candidates:
                self._rr_pointer = (order.index(name) + 1) % n
                return name
        return candidates[0]  # unreachable for non-empty candidates

    def _stimulus_speaker(self) -> str | None:
        """The actor whose event is the current stimulus, or None.

        Narrator results, broadcasts, and instructions stimulate every
        on-stage actor, so only a trailing actor-originated event excludes
        its speaker from the next perceive-and-decide fan-out.
        """
        for event in reversed(self.transcript):
            if event.kind in (
                KIND_SPEECH,
                KIND_ACTION_ATTEMPT,
                KIND_ACTION_RESULT,
                KIND_BROADCAST,
                KIND_INSTRUCTION,
            ):
                return event.speaker if event.speaker in self.roster else None
        return None

    def step(self) -> bool:
        """Run one scheduling round.  Returns False once the session is over."""
        with self.lock:
            if self.status != STATUS_PERFORMING:
                return False
            if self._rounds_in_act >= self.config.turn_budget:
                self.abort("turn budget exhausted")
                return False

            acted = False
            order = self.blueprint.actor_names()

            # Queued human input takes the round: players are the scarce resource.
            for name in order:
                if name in self.on_stage and self.roster[name] == CONTROLLER_HUMAN:
                    pending = self._pop_input(name)
                    if pending is not None:
                        client_seq, raw = pending
                        events = self.submit_turn(name, raw)
                        self._input_results[(name, client_seq)] = (
                            events[0].seq,
                            events[-1].seq,
                        )
                        acted = True
                        break

            if not acted:
                excluded = self._stimulus_speaker()
                decisions: dict[str, pad.PadDecision] = {}
                for name in order:
                    if (
                        name in self.on_stage
                        and self.roster[name] == CONTROLLER_AI
                        and name != excluded
                    ):
                        decision = pad.decide(
                            name, self.build_pad_context(name), self.backend, session=self.session_id
                        )
                        self._record_decision(name, decision)
                        decisions[name] = decision
                responders = [
                    name
                    for name in order
                    if name in decisions
                    and (
                        decisions[name].strategy is not pad.Strategy.SILENCE
                        or decisions[name].action is not None
                    )
                ]
                if responders:
                    speaker = self._round_robin_pick(responders)
                    raw = self._generate_actor_turn(speaker, decisions[speaker])
                    if raw.strip():
                        self.submit_turn(speaker, raw)
                        acted = True
                    else:
                        logger.warning("actor %s produced an empty turn; treated as silence", speaker)

            if acted:
                self._announced_waiting = ()
            else:
                waiting = tuple(
                    n
                    for n in order
                    if n in self.on_stage
                    and self.roster[n] == CONTROLLER_HUMAN
                    and not self._pending_inputs.get(n)
                )
                if waiting and waiting != self._announced_waiting:
                    self._system(f"Waiting for {waiting[0]}.", data={"waiting_for": list(waiting)})
                    self._announced_waiting = waiting
                if waiting and self.config.clock == CLOCK_WALL:
                    self.new_event.wait(timeout=self.config.human_wait_seconds)
                self._stall_rounds += 1

            transitioned = False
            if acted:
                self._beats_since_poll += 1
            if self._beats_since_poll >= self.config.transfer_batch:
                self._beats_since_poll = 0
                transitioned = self._poll_transfer()

            if self.status == STATUS_PERFORMING and not transitioned and self._stalled():
                self._run_advancer()

            self._rounds_in_act += 1
            self._rounds_total += 1
            return self.status == STATUS_PERFORMING


def start_session(
    blueprint: NarrativeBlueprint,
    roster: Mapping[str, str] | None = None,
    backend: Backend | None = None,
    config: StageConfig | None = None,
    session_id: str | None = None,
) -> Session:
    """Create a session and enter act 0 / point 0."""
    session = Session(blueprint, roster, backend, config, session_id)
    session.start()
    return session


def refresh_private_goals(session: Session, backend: Backend) -> dict[str, str]:
    """Refresh every roster actor's private goal at act entry.

    An empty reply keeps the previous goal; the refreshed goal lands in the
    actor's live profile and a private bookkeeping event.
    """
    goals: dict[str, str] = {}
    for name in session.blueprint.actor_names():
        profile = session.live[name]
        prompt = (
            f"Refresh the private goal of {name} for the act that is starting.\n"
            f"Persona: {profile.persona}\n"
            f"Previous goal: {profile.goal}\n"
            f"Act: {session.current_act.id}\n"
            f"Scene: {session.current_scene.environment_description}\n"
            "Reply with one short goal sentence only."
        )
        reply = complete(
            user_request("", prompt, route=f"goal:{name}", session=session.session_id), backend
        )
        goal = reply.visible.strip()
        if not goal:
            logger.warning("empty goal reply for %s; retaining previous goal", name)
            goal = profile.goal
        profile.goal = goal
        goals[name] = goal
        session.append_event(
            KIND_SYSTEM,
            SPEAKER_SYSTEM,
            ResponseParts(speech=GOAL_UPDATED_TEXT),
            Visibility.private_to(name),
            data={"actor": name, "goal": goal},
        )
    return goals


def run_loop(session: Session) -> PerformanceTranscript:
    """Drive rounds until the final act completes or the budget runs out.

    Backend failures abort the session rather than killing the loop: the
    persisted transcript stays the replayable source of record.
    """
    from .errors import StagecraftError

    if not session.transcript:
        session.start()
    while True:
        try:
            if not session.step():
                break
        except StagecraftError as exc:
            logger.error("performance aborted by backend error: %s", exc)
            session.abort(f"backend error: {exc}")
            break
    return PerformanceTranscript(
        events=tuple(session.transcript),
        completed=session.status == STATUS_COMPLETED,
        rounds=session._rounds_total,
        incomplete_reason=session.incomplete_reason,
        final_checksum=session.state_checksum(),
    )


def resume_session(
    replayed: "Any",
    roster: Mapping[str, str] | None = None,
    backend: Backend | None = None,
    config: StageConfig | None = None,
    session_id: str | None = None,
    events: Sequence[TranscriptEvent] = (),
) -> Session:
    """Rebuild a live session from a replayed transcript state.

    Control bookkeeping (stall clock, beats, round-robin cursor) restarts
    fresh; the structural state and the transcript continue seamlessly.
    """
    session = Session(replayed.blueprint, roster, backend, config, session_id)
    with session.lock:
        session.act_index = replayed.act_index
        session.point_index = replayed.point_index
        session.on_stage = set(replayed.on_stage)
        session.prop_states = {k: dict(v) for k, v in replayed.prop_states.items()}
        for name, goal in replayed.goals.items():
            if name in session.live:
                session.live[name].goal = goal
        session.transcript = list(events)
        session._seq = (replayed.last_seq + 1) if events else 0
        if session.transcript:
            session._last_ts = session.transcript[-1].timestamp
        if replayed.status != STATUS_PERFORMING:
            session.status = replayed.status
    return session
