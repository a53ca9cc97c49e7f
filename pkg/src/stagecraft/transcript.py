"""Transcript persistence, visibility filtering, and deterministic replay.

The persisted JSONL transcript (one event per line, flushed per event) is a
session's source of record.  Replaying it reconstructs prop states, the point
cursor, and the on-stage set purely from events: prop state changes only ever
travel inside narrator action results, so the reconstruction doubles as an
audit of that invariant.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .blueprint import NarrativeBlueprint, parse_document
from .errors import ContractViolation, CorruptTranscript
from .events import KIND_ACTION_RESULT, KIND_SYSTEM, TranscriptEvent, visible_to


def compute_state_checksum(
    act_index: int,
    point_index: int,
    on_stage: Iterable[str],
    prop_states: dict[str, dict[str, str]],
) -> str:
    doc = {
        "act_index": act_index,
        "point_index": point_index,
        "on_stage": sorted(on_stage),
        "prop_states": {k: dict(sorted(v.items())) for k, v in sorted(prop_states.items())},
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


def write_transcript(events: Sequence[TranscriptEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(event.to_json() + "\n")


def read_events(path: str | Path) -> list[TranscriptEvent]:
    events: list[TranscriptEvent] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                events.append(TranscriptEvent.from_obj(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptTranscript(f"unreadable event: {exc}", line_no) from exc
    return events


def filter_for_viewer(
    events: Sequence[TranscriptEvent], viewer: str | None
) -> list[TranscriptEvent]:
    """The exact event subsequence a viewer is entitled to see."""
    return [e for e in events if visible_to(e, viewer)]


def transcript_hash(events: Sequence[TranscriptEvent]) -> str:
    digest = hashlib.sha256()
    for event in events:
        digest.update(event.to_json().encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


@dataclass
class ReplayState:
    """State reconstructed from a transcript."""

    blueprint: NarrativeBlueprint
    act_index: int = 0
    point_index: int = 0
    on_stage: set[str] = field(default_factory=set)
    prop_states: dict[str, dict[str, str]] = field(default_factory=dict)
    goals: dict[str, str] = field(default_factory=dict)
    last_seq: int = -1
    status: str = "performing"
    checksum_ok: bool | None = None
    mismatches: list[str] = field(default_factory=list)

    def checksum(self) -> str:
        return compute_state_checksum(
            self.act_index, self.point_index, self.on_stage, self.prop_states
        )


def replay(
    source: str | Path | Sequence[TranscriptEvent],
    blueprint: NarrativeBlueprint | None = None,
) -> ReplayState:
    """Reconstruct the final stage state from a transcript.

    The session header event embeds the blueprint, making a persisted file
    self-contained; an explicit blueprint covers headerless (e.g. empty)
    transcripts.  Embedded checksums are verified and mismatches reported.
    """
    if isinstance(source, (str, Path)):
        events = read_events(source)
    else:
        events = list(source)

    for event in events:
        if event.data and "blueprint" in event.data:
            blueprint = parse_document(event.data["blueprint"])
            break
    if blueprint is None:
        if events:
            raise CorruptTranscript("no session header with a blueprint found", 1)
        raise ContractViolation("an empty transcript needs an explicit blueprint")

    state = ReplayState(
        blueprint=blueprint,
        prop_states={p.id: dict(p.state) for scene in blueprint.scenes for p in scene.props},
    )

    expected_seq = None
    for event in events:
        if expected_seq is not None and event.seq != expected_seq:
            state.mismatches.append(
                f"seq gap: expected {expected_seq}, found {event.seq}"
            )
        expected_seq = event.seq + 1
        state.last_seq = event.seq
        data = event.data or {}

        if event.kind == KIND_SYSTEM and "movement" in data:
            if data["movement"] == "enter":
                state.on_stage.add(data["actor"])
            else:
                state.on_stage.discard(data["actor"])
        elif event.kind == KIND_SYSTEM and "transition" in data:
            transition = data["transition"]
            state.act_index = int(transition["act_index"])
            state.point_index = int(transition["point_index"])
        elif event.kind == KIND_SYSTEM and "goal" in data and "actor" in data:
            state.goals[data["actor"]] = data["goal"]
        elif event.kind == KIND_ACTION_RESULT and data.get("verdict") == "success":
            for update in data.get("state_updates", []):
                prop = update["prop"]
                if prop not in state.prop_states:
                    state.mismatches.append(f"state update for unknown prop {prop!r}")
                    continue
                state.prop_states[prop][update["key"]] = update["new"]

        if event.kind == KIND_SYSTEM and "checksum" in data:
            recorded = data["checksum"]
            computed = state.checksum()
            if recorded == computed:
                state.checksum_ok = True
            else:
                state.checksum_ok = False
                state.mismatches.append(
                    f"checksum mismatch at seq {event.seq}: recorded {recorded[:12]}..., "
                    f"computed {computed[:12]}..."
                )
            if data.get("final"):
                state.status = "completed"
            elif "reason" in data:
                state.status = "aborted"

    return state
