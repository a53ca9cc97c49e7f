"""Generate the fixtures shared between the Python suite and the frontend.

Outputs (committed; kept in sync by tests/test_frontend_fixtures.py):

* frontend/fixtures/markup_vectors.json -- 50 composed (speech, action,
  thinking) triples with their wire text and engine-parsed parts, plus parse
  edge cases; both suites must agree on every entry.
* frontend/fixtures/case_stubborn.jsonl -- the deterministic transcript of
  the stubborn-choice case, used by the frontend playback tests.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO))

from stagecraft.pad import parse_response  # noqa: E402

WORDS = (
    "the night air tastes of treachery hold steady watch that door now speak "
    "softly strike true my lord it ends tonight nothing moves behind us"
).split()

COMBOS = [
    (True, False, False),
    (False, True, False),
    (False, False, True),
    (True, True, False),
    (True, False, True),
    (False, True, True),
    (True, True, True),
]

PARSE_EDGE_CASES = [
    "(Raising the gun with trembling hands, tears welling up) "
    "[If I hesitate now, it's all over.] Don't move— (Voice wavers) I'm warning you.",
    "(unclosed action and then words",
    "[a thought] (a deed)",
    "plain speech only",
    "",
    "(first) middle words (second) [inner] tail",
]


def compose_wire(speech: str | None, action: str | None, thinking: str | None) -> str:
    segments = []
    if action:
        segments.append(f"({action})")
    if thinking:
        segments.append(f"[{thinking}]")
    if speech:
        segments.append(speech)
    return " ".join(segments)


def parts_obj(raw: str) -> dict:
    parts = parse_response(raw)
    return {"speech": parts.speech, "action": parts.action, "thinking": parts.thinking}


def build_vectors() -> dict:
    rng = random.Random(20240817)

    def phrase(min_words: int, max_words: int, tail: str = ".") -> str:
        words = [rng.choice(WORDS) for _ in range(rng.randint(min_words, max_words))]
        return (" ".join(words)).capitalize() + tail

    compose = []
    for i in range(50):
        has_speech, has_action, has_thinking = COMBOS[i % len(COMBOS)]
        speech = phrase(2, 6, rng.choice([".", "!", "?"])) if has_speech else None
        action = phrase(2, 5, "") if has_action else None
        thinking = phrase(2, 6, rng.choice([".", "..."])) if has_thinking else None
        wire = compose_wire(speech, action, thinking)
        compose.append(
            {
                "fields": {"speech": speech, "action": action, "thinking": thinking},
                "wire": wire,
                "parts": parts_obj(wire),
            }
        )

    parse = [{"raw": raw, "parts": parts_obj(raw)} for raw in PARSE_EDGE_CASES]
    return {"compose": compose, "parse": parse}


def render_vectors() -> str:
    return json.dumps(build_vectors(), indent=2, ensure_ascii=False) + "\n"


def render_case_transcript() -> str:
    from tests.cases import run_case_stubborn_choice

    session = run_case_stubborn_choice()
    return "".join(event.to_json() + "\n" for event in session.transcript)


def main() -> None:
    fixtures = REPO / "frontend" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    (fixtures / "markup_vectors.json").write_text(render_vectors(), encoding="utf-8")
    (fixtures / "case_stubborn.jsonl").write_text(render_case_transcript(), encoding="utf-8")
    print(f"fixtures written to {fixtures}")


if __name__ == "__main__":
    main()
