"""Uniform interface to text-generation backends plus the shared wire parsers.

Two wire conventions are used by every agent in the engine and are bit-exact:

* tool calls: ``<tool_call>`` + one JSON object with exactly the keys
  ``name`` and ``arguments`` + ``</tool_call>``
* reasoning spans: literal ASCII ``<think>`` / ``</think>`` tags

Backends are pluggable.  ``ScriptedBackend`` replays fixture replies from a
JSONL file and is the deterministic workhorse of the test suite;
``HttpChatBackend`` talks to a remote chat-completion service configured via
environment variables.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

from .errors import BackendTimeout, BackendUnavailable, ScriptExhausted

logger = logging.getLogger(__name__)

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
TOOL_CALL_OPEN = "<tool_call>"
TOOL_CALL_CLOSE = "</tool_call>"

VALID_ROLES = ("system", "user", "assistant", "tool")


@dataclass(frozen=True)
class SamplingPolicy:
    """Greedy when ``temperature`` is None, else temperature sampling (t >= 0)."""

    temperature: float | None = None

    def __post_init__(self) -> None:
        if self.temperature is not None and self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def greedy(self) -> bool:
        return self.temperature is None


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str = "string"
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: tuple[ToolParam, ...] = ()

    def to_schema(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": {
                    p.name: {"type": p.type, "description": p.description}
                    for p in self.parameters
                },
                "required": [p.name for p in self.parameters if p.required],
            },
        }


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str


@dataclass(frozen=True)
class ChatRequest:
    """One completion request.

    ``route`` is the agent-role routing key used by the scripted backend;
    ``session`` namespaces the per-role call counter so concurrent sessions
    replay independently.  Live backends ignore both.
    """

    system_text: str
    messages: tuple[ChatMessage, ...]
    tool_specs: tuple[ToolSpec, ...] = ()
    sampling: SamplingPolicy = SamplingPolicy()
    timeout: float = 60.0
    route: str = ""
    session: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "tool_specs", tuple(self.tool_specs))
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for m in self.messages:
            if m.role not in VALID_ROLES:
                raise ValueError(f"unknown role {m.role!r}")
        for a, b in zip(self.messages, self.messages[1:]):
            if a.role == b.role == "assistant":
                raise ValueError("two consecutive assistant messages")
        names = [t.name for t in self.tool_specs]
        if len(names) != len(set(names)):
            raise ValueError("tool spec names must be unique within a request")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


def user_request(
    system_text: str,
    user_text: str,
    *,
    tool_specs: Sequence[ToolSpec] = (),
    route: str = "",
    session: str = "",
    timeout: float = 60.0,
) -> ChatRequest:
    """The common single-user-message request shape."""
    return ChatRequest(
        system_text=system_text,
        messages=(ChatMessage("user", user_text),),
        tool_specs=tuple(tool_specs),
        route=route,
        session=session,
        timeout=timeout,
    )


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class MalformedCall:
    """A ``<tool_call>`` span whose body could not be parsed."""

    offset: int
    body: str
    reason: str


@dataclass(frozen=True)
class Segment:
    """One span of a raw reply: kind is 'text', 'think', or 'tool_call'.

    Segments partition the raw string; joining raw[start:end] over all
    segments in order reproduces the input byte-for-byte.
    """

    kind: str
    start: int
    end: int


@dataclass(frozen=True)
class ModelReply:
    """Parsed backend output.  Immutable and safe to share across threads."""

    raw_text: str
    thinking: str | None
    visible: str
    tool_calls: tuple[ToolCall, ...]
    latency: float
    segments: tuple[Segment, ...] = ()
    malformed: tuple[MalformedCall, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


def _seam_join(left: str, right: str) -> str:
    """Join two visible pieces across a removed span, trimming the seam.

    Whitespace adjacent to the removed span collapses to a single space;
    pieces that touch with no whitespace stay glued.
    """
    stripped_left = left.rstrip()
    stripped_right = right.lstrip()
    had_gap = stripped_left != left or stripped_right != right
    if stripped_left and stripped_right and had_gap:
        return stripped_left + " " + stripped_right
    if not stripped_left:
        return stripped_right
    if not stripped_right:
        return stripped_left
    return left + right


def _find_think_span(raw: str) -> tuple[int, int, str] | None:
    """Locate the first think span; an unclosed tag swallows the remainder."""
    start = raw.find(THINK_OPEN)
    if start == -1:
        return None
    close = raw.find(THINK_CLOSE, start + len(THINK_OPEN))
    if close == -1:
        return (start, len(raw), raw[start + len(THINK_OPEN) :])
    return (start, close + len(THINK_CLOSE), raw[start + len(THINK_OPEN) : close])


def _scan_segments(raw: str) -> tuple[list[Segment], str | None, list[ToolCall], list[MalformedCall], list[str]]:
    warnings: list[str] = []
    think = _find_think_span(raw)
    thinking: str | None = None
    marked: list[tuple[int, int, str, Any]] = []
    if think is not None:
        t_start, t_end, thinking = think
        if t_end == len(raw) and not raw.endswith(THINK_CLOSE):
            warnings.append("unclosed-think: treating remainder as thinking")
        marked.append((t_start, t_end, "think", None))
        if raw.find(THINK_OPEN, t_end) != -1:
            warnings.append("extra think span ignored (only the first is extracted)")

    pos = 0
    while True:
        start = raw.find(TOOL_CALL_OPEN, pos)
        if start == -1:
            break
        if think is not None and think[0] <= start < think[1]:
            pos = think[1]
            continue
        close = raw.find(TOOL_CALL_CLOSE, start + len(TOOL_CALL_OPEN))
        if close == -1:
            warnings.append(f"unclosed tool_call tag at offset {start} left as text")
            break
        end = close + len(TOOL_CALL_CLOSE)
        body = raw[start + len(TOOL_CALL_OPEN) : close]
        marked.append((start, end, "tool_call", body))
        pos = end

    marked.sort(key=lambda m: m[0])
    segments: list[Segment] = []
    calls: list[ToolCall] = []
    malformed: list[MalformedCall] = []
    cursor = 0
    for start, end, kind, body in marked:
        if start < cursor:
            # Overlapping spans only arise from pathological input; first wins.
            continue
        if start > cursor:
            segments.append(Segment("text", cursor, start))
        segments.append(Segment(kind, start, end))
        if kind == "tool_call":
            parsed = _parse_call_body(body, start)
            if isinstance(parsed, ToolCall):
                calls.append(parsed)
            else:
                malformed.append(parsed)
        cursor = end
    if cursor < len(raw):
        segments.append(Segment("text", cursor, len(raw)))
    return segments, thinking, calls, malformed, warnings


def _parse_call_body(body: str, offset: int) -> ToolCall | MalformedCall:
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        return MalformedCall(offset, body, f"invalid JSON: {exc.msg}")
    if not isinstance(data, dict):
        return MalformedCall(offset, body, "body must be a single JSON object")
    if set(data) != {"name", "arguments"}:
        return MalformedCall(offset, body, "object must have exactly the keys 'name' and 'arguments'")
    if not isinstance(data["name"], str) or not data["name"]:
        return MalformedCall(offset, body, "'name' must be a non-empty string")
    if not isinstance(data["arguments"], dict):
        return MalformedCall(offset, body, "'arguments' must be an object")
    return ToolCall(data["name"], data["arguments"])


def parse_reply(raw: str, latency: float = 0.0) -> ModelReply:
    """Segment a raw backend reply into thinking, tool calls, and visible text."""
    segments, thinking, calls, malformed, warnings = _scan_segments(raw)
    visible = ""
    for seg in segments:
        if seg.kind == "text":
            visible = _seam_join(visible, raw[seg.start : seg.end])
    visible = visible.strip()
    for w in warnings:
        logger.warning("%s", w)
    for bad in malformed:
        logger.warning("malformed tool call at offset %d: %s", bad.offset, bad.reason)
    return ModelReply(
        raw_text=raw,
        thinking=thinking,
        visible=visible,
        tool_calls=tuple(calls),
        latency=latency,
        segments=tuple(segments),
        malformed=tuple(malformed),
        warnings=tuple(warnings),
    )


def parse_tool_calls(raw: str) -> tuple[list[ToolCall], list[MalformedCall]]:
    """Extract well-formed tool calls in document order, reporting bad spans."""
    _, _, calls, malformed, _ = _scan_segments(raw)
    return calls, malformed


def render_tool_calls(calls: Iterable[ToolCall]) -> str:
    """Inverse of parse_tool_calls for well-formed calls."""
    return "".join(
        TOOL_CALL_OPEN + json.dumps({"name": c.name, "arguments": c.arguments}) + TOOL_CALL_CLOSE
        for c in calls
    )


def extract_think(raw: str) -> tuple[str | None, str]:
    """Extract the first think span; returns (thinking, visible remainder)."""
    span = _find_think_span(raw)
    if span is None:
        return None, raw.strip()
    start, end, thinking = span
    if end == len(raw) and not raw.endswith(THINK_CLOSE):
        logger.warning("unclosed-think: treating remainder as thinking")
    return thinking, _seam_join(raw[:start], raw[end:]).strip()


class Backend(Protocol):
    """A text-generation backend: produces raw text plus measured latency."""

    def generate(self, request: ChatRequest) -> "RawReply": ...


@dataclass(frozen=True)
class RawReply:
    text: str
    latency: float


class ScriptedBackend:
    """Deterministic backend replaying fixture replies.

    Replies are grouped by routing key; each (session, key) pair keeps its own
    call counter, so a reply is a pure function of (key, call index) and
    replaying a session reproduces identical transcripts.
    """

    def __init__(self, entries: Iterable[tuple[str, str]] | Iterable[dict[str, Any]] = ()) -> None:
        self._by_key: dict[str, list[tuple[str, float]]] = {}
        self._counters: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()
        for entry in entries:
            if isinstance(entry, dict):
                self.add(entry["key"], entry["text"], float(entry.get("latency", 0.0)))
            else:
                key, text = entry
                self.add(key, text)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ScriptedBackend":
        backend = cls()
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: invalid fixture line: {exc.msg}") from exc
                backend.add(obj["key"], obj["text"], float(obj.get("latency", 0.0)))
        return backend

    def add(self, key: str, text: str, latency: float = 0.0) -> None:
        self._by_key.setdefault(key, []).append((text, latency))

    def generate(self, request: ChatRequest) -> RawReply:
        with self._lock:
            counter_key = (request.session, request.route)
            index = self._counters.get(counter_key, 0)
            entries = self._by_key.get(request.route, [])
            if index >= len(entries):
                raise ScriptExhausted(
                    f"no scripted reply for key {request.route!r} (call #{index + 1})"
                )
            self._counters[counter_key] = index + 1
            text, latency = entries[index]
        return RawReply(text, latency)


ENV_API_URL = "STAGECRAFT_API_URL"
ENV_API_KEY = "STAGECRAFT_API_KEY"
ENV_MODEL = "STAGECRAFT_MODEL"


class HttpChatBackend:
    """Remote chat-completion backend configured through environment variables."""

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
    ) -> None:
        self.url = url or os.environ.get(ENV_API_URL, "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "gpt-4o")
        if not self.url:
            raise BackendUnavailable(f"no backend endpoint configured (set {ENV_API_URL})")

    def generate(self, request: ChatRequest) -> RawReply:
        import requests

        messages = [{"role": "system", "content": request.system_text}] if request.system_text else []
        messages += [{"role": m.role, "content": m.text} for m in request.messages]
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": messages,
            "temperature": 0.0 if request.sampling.greedy else request.sampling.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        started = time.monotonic()
        try:
            response = requests.post(self.url, json=payload, headers=headers, timeout=request.timeout)
        except requests.Timeout as exc:
            raise BackendTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        latency = time.monotonic() - started
        if response.status_code >= 500:
            raise BackendUnavailable(f"backend returned {response.status_code}")
        body = response.json()
        text = body["choices"][0]["message"]["content"] or ""
        return RawReply(text, latency)


def complete(request: ChatRequest, backend: Backend) -> ModelReply:
    """Run one completion, retrying once on timeout, and parse the reply.

    Real-time drama cannot stall on a backend, so a second timeout is an error
    rather than an open-ended retry loop.
    """
    try:
        raw = backend.generate(request)
    except BackendTimeout:
        logger.warning("backend timeout on route %r, retrying once", request.route)
        raw = backend.generate(request)
    return parse_reply(raw.text, raw.latency)
