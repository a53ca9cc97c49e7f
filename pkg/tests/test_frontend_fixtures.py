"""Keep the fixtures shared with the frontend in sync with the engine."""

from __future__ import annotations

import json
from pathlib import Path

from tools.generate_frontend_fixtures import render_case_transcript, render_vectors

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"


def test_markup_vectors_match_engine():
    committed = (FIXTURES / "markup_vectors.json").read_text(encoding="utf-8")
    assert committed == render_vectors(), (
        "regenerate with: python3 tools/generate_frontend_fixtures.py"
    )
    doc = json.loads(committed)
    assert len(doc["compose"]) == 50
    # Every composed wire parses back to exactly the fields it was built from.
    for vector in doc["compose"]:
        assert vector["parts"] == vector["fields"]


def test_case_transcript_fixture_matches_engine():
    committed = (FIXTURES / "case_stubborn.jsonl").read_text(encoding="utf-8")
    assert committed == render_case_transcript(), (
        "regenerate with: python3 tools/generate_frontend_fixtures.py"
    )
