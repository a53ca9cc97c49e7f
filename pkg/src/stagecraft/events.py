"""Typed transcript events shared by the stage runtime, narrator, and service.

The transcript is the session's source of record: append-only, one event per
line when persisted as JSONL, and sufficient to replay prop states and the
point cursor.  Visibility is attached per event; internal monologue is never
broadcast.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

KIND_SPEECH = "speech"
KIND_ACTION_ATTEMPT = "action_attempt"
KIND_ACTION_RESULT = "action_result"
KIND_BROADCAST = "broadcast"
KIND_THINKING = "thinking"
KIND_INSTRUCTION = "instruction"
KIND_SYSTEM = "system"

EVENT_KINDS = (
    KIND_SPEECH,
    KIND_ACTION_ATTEMPT,
    KIND_ACTION_RESULT,
    KIND_BROADCAST,
    KIND_THINKING,
    KIND_INSTRUCTION,
    KIND_SYSTEM,
)

SPEAKER_NARRATOR = "Narrator"
SPEAKER_SYSTEM = "System"
SPEAKER_TRANSFER = "Transfer"
SPEAKER_ADVANCER = "Advancer"
SPEAKER_PLANNER = "Planner"
SPEAKER_ENVIRONMENT = "Environment"


@dataclass(frozen=True)
class Visibility:
    scope: str  # "all" | "private"
    actor: str | None = None

    def __post_init__(self) -> None:
        if self.scope not in ("all", "private"):
            raise ValueError(f"unknown visibility scope {self.scope!r}")
        if self.scope == "private" and not self.actor:
            raise ValueError("private visibility requires an actor")

    @classmethod
    def everyone(cls) -> "Visibility":
        return cls("all")

    @classmethod
    def private_to(cls, actor: str) -> "Visibility":
        return cls("private", actor)


@dataclass(frozen=True)
class ResponseParts:
    """The three markup channels of one turn: (action), [thinking], speech."""

    speech: str | None = None
    action: str | None = None
    thinking: str | None = None

    def present(self) -> bool:
        return any(p is not None and p != "" for p in (self.speech, self.action, self.thinking))


@dataclass(frozen=True)
class TranscriptEvent:
    seq: int
    timestamp: float
    kind: str
    speaker: str
    parts: ResponseParts
    visibility: Visibility = field(default_factory=Visibility.everyone)
    data: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == KIND_THINKING and (
            self.visibility.scope != "private" or self.visibility.actor != self.speaker
        ):
            raise ValueError("thinking events must be private to their speaker")

    @property
    def text(self) -> str:
        """The primary display text of the event."""
        for part in (self.parts.speech, self.parts.action, self.parts.thinking):
            if part:
                return part
        return ""

    def to_obj(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "ts": self.timestamp,
            "kind": self.kind,
            "speaker": self.speaker,
            "parts": {
                "speech": self.parts.speech,
                "action": self.parts.action,
                "thinking": self.parts.thinking,
            },
            "visibility": {"scope": self.visibility.scope, "actor": self.visibility.actor},
            "data": dict(self.data) if self.data is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_obj(cls, obj: Mapping[str, Any]) -> "TranscriptEvent":
        parts = obj.get("parts") or {}
        vis = obj.get("visibility") or {"scope": "all", "actor": None}
        return cls(
            seq=int(obj["seq"]),
            timestamp=float(obj["ts"]),
            kind=str(obj["kind"]),
            speaker=str(obj["speaker"]),
            parts=ResponseParts(
                speech=parts.get("speech"),
                action=parts.get("action"),
                thinking=parts.get("thinking"),
            ),
            visibility=Visibility(vis.get("scope", "all"), vis.get("actor")),
            data=obj.get("data"),
        )


def visible_to(event: TranscriptEvent, viewer: str | None) -> bool:
    """Whether a viewer may see an event.  viewer=None is a spectator."""
    if event.visibility.scope == "all":
        return True
    return viewer is not None and event.visibility.actor == viewer


@dataclass(frozen=True)
class Beat:
    """One interaction step by an actor: the events of one turn.

    A beat is effective when it changed the world (a successful adjudicated
    action) or when the transfer agent cited its speech in a met flag check.
    """

    actor: str
    event_refs: tuple[int, ...]
    effective: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "event_refs", tuple(self.event_refs))
