from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagecraft.errors import ContractViolation, UnparseableVerdict
from stagecraft.evaluation import (
    DIMENSION_CP,
    DIMENSIONS,
    JudgeVerdict,
    aggregate_leaderboard,
    credit,
    judge_pairwise,
    latency_to_penalty,
    load_verdicts,
    pad_eval_row,
    pad_final_score,
    pad_strategy_accuracy,
    pearson,
    round_half_up,
    win_rate,
)
from stagecraft.pad import PadDecision, Strategy
from tests.conftest import backend_from


def oracle_pearson(xs, ys):
    """Independent direct-formula implementation (plain covariance sums)."""
    n = len(xs)
    sx = sum(xs)
    sy = sum(ys)
    sxy = sum(x * y for x, y in zip(xs, ys))
    sxx = sum(x * x for x in xs)
    syy = sum(y * y for y in ys)
    num = n * sxy - sx * sy
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    return num / den


# --- verdict parsing and consistency ---------------------------------------------


def _verdict(score: int, choice: str) -> JudgeVerdict:
    return JudgeVerdict(DIMENSION_CP, "because", score, choice)


def test_score_choice_consistency_enforced():
    assert _verdict(1, "model_a").choice == "model_a"
    assert _verdict(3, "tie").choice == "tie"
    assert _verdict(5, "model_b").choice == "model_b"
    with pytest.raises(ValueError, match="inconsistent"):
        _verdict(2, "model_b")
    with pytest.raises(ValueError, match="inconsistent"):
        _verdict(3, "model_a")


def test_judge_parses_structured_reply():
    backend = backend_from(
        {
            "judge": [
                "explanation: Model B builds a sharper mystery with a planted riddle.\n"
                "score: 5\n"
                "choice: Model B"
            ]
        }
    )
    verdict = judge_pairwise("transcript a", "transcript b", "NQ", backend)
    assert verdict.score == 5
    assert verdict.choice == "model_b"
    assert "riddle" in verdict.explanation


def test_judge_tie_reply():
    backend = backend_from({"judge": ["explanation: even match\nscore: 3\nchoice: tie"]})
    verdict = judge_pairwise("a", "b", "CP", backend)
    assert verdict.choice == "tie"


def test_inconsistent_reply_reprompted_then_rejected():
    bad = "explanation: confused\nscore: 2\nchoice: Model B"
    backend = backend_from({"judge": [bad, bad]})
    with pytest.raises(UnparseableVerdict):
        judge_pairwise("a", "b", "IE", backend)


def test_inconsistent_reply_recovers_on_reprompt():
    backend = backend_from(
        {
            "judge": [
                "explanation: confused\nscore: 2\nchoice: Model B",
                "explanation: corrected\nscore: 4\nchoice: Model B",
            ]
        }
    )
    verdict = judge_pairwise("a", "b", "IE", backend)
    assert verdict.score == 4


def test_load_verdicts_reasserts_invariant():
    lines = [
        '{"dimension": "CP", "explanation": "", "score": 2, "choice": "model_a"}',
        '{"dimension": "CP", "explanation": "", "score": 2, "choice": "model_b"}',
    ]
    assert load_verdicts(lines[:1]) == [JudgeVerdict("CP", "", 2, "model_a")]
    with pytest.raises(ValueError):
        load_verdicts(lines)


# --- win rate ----------------------------------------------------------------------


def _verdicts(scores):
    return [_verdict(s, {1: "model_a", 2: "model_a", 3: "tie", 4: "model_b", 5: "model_b"}[s]) for s in scores]


def test_win_rate_all_ties_is_fifty():
    assert win_rate(_verdicts([3, 3, 3])) == 50.0


def test_win_rate_symmetric_pair_is_fifty():
    assert win_rate(_verdicts([1, 1, 5, 5])) == 50.0


def test_win_rate_hand_arithmetic():
    # credit(1)=1, credit(2)=0.75, credit(3)=0.5 -> 100*(2.25/3) = 75.0
    assert win_rate(_verdicts([1, 2, 3])) == 75.0


def test_win_rate_empty_rejected():
    with pytest.raises(ContractViolation):
        win_rate([])


@given(st.lists(st.integers(1, 5), min_size=1, max_size=60))
@settings(max_examples=1000)
def test_win_rate_antisymmetric_under_score_reflection(scores):
    direct = win_rate(_verdicts(scores))
    reflected = win_rate(_verdicts([6 - s for s in scores]))
    assert direct + reflected == pytest.approx(100.0, abs=1e-9)


def test_credit_map_endpoints():
    assert credit(1) == 1.0 and credit(3) == 0.5 and credit(5) == 0.0


# --- leaderboard aggregation: full table regression -----------------------------------

# Transcribed per-dimension cells: (model, en C/N/I, en Avg, zh C/N/I, zh Avg, overall).
LEADERBOARD_TABLE = [
    ("Claude-4-sonnet", (76.50, 77.30, 76.96), 76.92, (80.18, 79.20, 79.66), 79.68, 78.30),
    ("Claude-3.7-sonnet", (65.80, 66.94, 65.98), 66.24, (76.00, 75.20, 75.48), 75.56, 70.90),
    ("Claude-3.5-sonnet", (61.00, 62.15, 62.10), 61.75, (60.50, 59.00, 59.99), 59.83, 60.79),
    ("Gemini-2.5-flash", (46.00, 47.10, 46.70), 46.60, (52.00, 52.90, 52.15), 52.35, 49.48),
    ("GPT-4.5-preview", (59.21, 60.00, 59.92), 59.71, (61.50, 62.50, 61.91), 61.97, 60.84),
    ("GPT-4.1", (63.50, 62.49, 62.98), 62.99, (62.00, 62.80, 62.64), 62.48, 62.74),
    ("Mistral-Small-3.2-24B", (48.00, 48.50, 48.22), 48.24, (51.00, 51.83, 52.00), 51.61, 49.93),
    ("DeepSeek-V3-0324", (54.00, 55.13, 55.00), 54.71, (64.50, 64.00, 64.01), 64.17, 59.44),
    ("Llama-3.1-70B", (49.80, 49.00, 48.86), 49.22, (42.00, 42.81, 42.00), 42.27, 45.75),
    ("Llama-3.1-8B", (35.00, 36.01, 35.52), 35.51, (33.50, 34.00, 33.99), 33.83, 34.67),
    ("Higgs-Llama-3-70B", (72.00, 78.50, 66.22), 72.24, (64.00, 64.50, 63.95), 64.15, 68.20),
    ("Qwen3-8B", (47.50, 46.80, 47.00), 47.10, (58.00, 57.50, 58.05), 57.85, 52.48),
    ("Qwen3-32B", (65.00, 65.88, 65.20), 65.36, (66.00, 65.50, 65.84), 65.78, 65.57),
    ("Qwen3-235B-A22B", (69.50, 69.80, 69.65), 69.65, (72.50, 73.00, 72.78), 72.76, 71.21),
    ("Gemini-2.5-pro", (61.00, 62.22, 61.70), 61.64, (62.00, 62.80, 62.25), 62.35, 62.00),
    ("Claude-4-sonnet-Thinking", (79.50, 78.40, 79.04), 78.98, (78.42, 80.32, 81.03), 79.92, 79.45),
    ("Minimax-M1", (51.50, 52.32, 52.00), 51.94, (65.00, 65.50, 65.19), 65.23, 58.59),
    ("OpenAI-o3", (69.00, 69.95, 69.40), 69.45, (78.00, 77.50, 78.17), 77.89, 73.67),
    ("Magistral-Small-2506", (59.00, 60.00, 59.74), 59.58, (58.50, 59.30, 58.90), 58.90, 59.24),
    ("DeepSeek-R1-0528", (66.00, 67.10, 66.64), 66.58, (79.00, 79.50, 79.61), 79.37, 72.98),
    ("Qwen3-8B-Thinking", (50.00, 51.61, 51.00), 50.87, (65.80, 65.00, 65.55), 65.45, 58.16),
    ("Qwen3-32B-Thinking", (69.50, 68.80, 69.00), 69.10, (78.00, 79.00, 78.77), 78.59, 73.85),
    ("Qwen3-235B-A22B-Thinking", (70.50, 71.00, 70.72), 70.74, (76.00, 75.80, 75.96), 75.92, 73.33),
]


def _row_scores(en, zh):
    return {
        "en": dict(zip(DIMENSIONS, en)),
        "zh": dict(zip(DIMENSIONS, zh)),
    }


# Exactly-half overall averages (e.g. 49.925) sit on the +/-0.005 boundary;
# the epsilon absorbs binary float representation there.
HALF_CELL_TOLERANCE = 0.005 + 1e-9


@pytest.mark.parametrize("row", LEADERBOARD_TABLE, ids=lambda r: r[0])
def test_leaderboard_reproduces_every_average_and_overall(row):
    _, en, en_avg, zh, zh_avg, overall = row
    aggregated = aggregate_leaderboard(_row_scores(en, zh))
    assert aggregated.language_averages["en"] == pytest.approx(en_avg, abs=HALF_CELL_TOLERANCE)
    assert aggregated.language_averages["zh"] == pytest.approx(zh_avg, abs=HALF_CELL_TOLERANCE)
    assert aggregated.overall == pytest.approx(overall, abs=HALF_CELL_TOLERANCE)
    display = aggregated.display()
    assert display["en"] == en_avg
    assert display["zh"] == zh_avg
    assert display["overall"] == overall


def test_leaderboard_spot_check_display_rounding():
    row = aggregate_leaderboard(
        _row_scores((76.50, 77.30, 76.96), (80.18, 79.20, 79.66))
    )
    assert row.display() == {"en": 76.92, "zh": 79.68, "overall": 78.30}


def test_equal_dimensions_average_to_themselves():
    row = aggregate_leaderboard({"en": {d: 42.0 for d in DIMENSIONS}})
    assert row.language_averages["en"] == 42.0
    assert row.overall == 42.0


def test_missing_dimension_rejected():
    with pytest.raises(ContractViolation, match="missing"):
        aggregate_leaderboard({"en": {"CP": 1.0, "NQ": 2.0}})


def test_round_half_up_behaves_at_the_boundary():
    assert round_half_up(49.475) == 49.48
    assert round_half_up(62.735) == 62.74
    assert round_half_up(45.745) == 45.75


# --- pearson -------------------------------------------------------------------------


def test_pearson_perfect_correlation():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)


def test_pearson_perfect_anticorrelation():
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_pearson_matches_direct_formula_oracle_on_fixed_vector():
    xs, ys = [1, 2, 3, 4], [2, 4, 5, 9]
    assert pearson(xs, ys) == pytest.approx(oracle_pearson(xs, ys), abs=1e-12)


def test_pearson_matches_oracle_on_random_vectors():
    rng = random.Random(20240817)
    for _ in range(100):
        n = rng.randint(2, 40)
        xs = [rng.uniform(-50, 50) for _ in range(n)]
        ys = [rng.uniform(-50, 50) for _ in range(n)]
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            continue
        assert pearson(xs, ys) == pytest.approx(oracle_pearson(xs, ys), abs=1e-12)


def test_pearson_degenerate_variance_rejected():
    with pytest.raises(ContractViolation, match="variance"):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ContractViolation):
        pearson([1], [2])
    with pytest.raises(ContractViolation):
        pearson([1, 2], [1, 2, 3])


# --- latency penalty -------------------------------------------------------------------

PENALTY_TABLE = [
    (0.32, 0.0),
    (1.02, 0.0),
    (0.35, 0.0),
    (0.41, 0.0),
    (6.89, 0.05),
    (15.12, 0.10),
    (1.89, 0.0),
    (0.75, 0.0),
    (49.50, 0.15),
    (21.80, 0.10),
    (0.36, 0.0),
]


@pytest.mark.parametrize("seconds,expected", PENALTY_TABLE)
def test_latency_penalty_published_rows(seconds, expected):
    assert latency_to_penalty(seconds) == expected


def test_latency_penalty_boundaries_inclusive_on_the_right():
    assert latency_to_penalty(0.0) == 0.0
    assert latency_to_penalty(2.0) == 0.05
    assert latency_to_penalty(10.0) == 0.10
    assert latency_to_penalty(30.0) == 0.15


def test_negative_latency_rejected():
    with pytest.raises(ContractViolation):
        latency_to_penalty(-0.1)


# --- strategy scores ---------------------------------------------------------------------

# Rows whose published final score equals mean(accuracies) - penalty to 3 decimals.
CONSISTENT_STRATEGY_ROWS = [
    ((0.779, 0.359, 0.131), 0.0, 0.423),
    ((0.699, 0.452, 0.066), 0.0, 0.406),
    ((0.773, 0.396, 0.098), 0.0, 0.422),
    ((0.556, 0.623, 0.328), 0.0, 0.502),
    ((0.909, 0.132, 0.180), 0.0, 0.407),
    ((0.723, 0.615, 0.470), 0.15, 0.453),
    ((0.822, 0.736, 0.711), 0.0, 0.756),
]


@pytest.mark.parametrize("accuracies,penalty,expected", CONSISTENT_STRATEGY_ROWS)
def test_final_score_reproduces_consistent_rows(accuracies, penalty, expected):
    assert pad_final_score(accuracies, penalty) == pytest.approx(expected, abs=5e-4)


def test_final_score_floors_at_zero():
    assert pad_final_score((0.0, 0.05, 0.04), 0.15) == 0.0


def test_strategy_accuracy_all_correct():
    gold = [Strategy.FAST, Strategy.SLOW, Strategy.SILENCE]
    assert pad_strategy_accuracy(gold, gold) == {
        Strategy.FAST: 1.0,
        Strategy.SLOW: 1.0,
        Strategy.SILENCE: 1.0,
    }


def test_strategy_accuracy_absent_class_is_absent():
    gold = [Strategy.FAST, Strategy.FAST]
    predictions = [Strategy.FAST, Strategy.SLOW]
    accuracy = pad_strategy_accuracy(predictions, gold)
    assert accuracy == {Strategy.FAST: 0.5}


def test_strategy_accuracy_hand_counted_confusion():
    # 12 items: FAST 4/6 correct, SLOW 1/3 correct, SILENCE 2/3 correct.
    gold = [Strategy.FAST] * 6 + [Strategy.SLOW] * 3 + [Strategy.SILENCE] * 3
    predictions = (
        [Strategy.FAST] * 4 + [Strategy.SLOW, Strategy.SILENCE]
        + [Strategy.SLOW, Strategy.FAST, Strategy.FAST]
        + [Strategy.SILENCE, Strategy.SILENCE, Strategy.FAST]
    )
    accuracy = pad_strategy_accuracy(predictions, gold)
    assert accuracy[Strategy.FAST] == pytest.approx(4 / 6)
    assert accuracy[Strategy.SLOW] == pytest.approx(1 / 3)
    assert accuracy[Strategy.SILENCE] == pytest.approx(2 / 3)


def test_strategy_accuracy_accepts_decisions_and_ignores_actions():
    from stagecraft.pad import Action

    predictions = [
        PadDecision(Strategy.FAST, action=Action("A", "open", "door")),
        PadDecision(Strategy.SLOW),
    ]
    gold = [Strategy.FAST, Strategy.SLOW]
    assert pad_strategy_accuracy(predictions, gold) == {
        Strategy.FAST: 1.0,
        Strategy.SLOW: 1.0,
    }


def test_strategy_accuracy_length_mismatch():
    with pytest.raises(ContractViolation):
        pad_strategy_accuracy([Strategy.FAST], [])


def test_pad_eval_row_combines_accuracy_and_penalty():
    gold = [Strategy.FAST, Strategy.SLOW, Strategy.SILENCE]
    row = pad_eval_row(gold, gold, avg_latency=15.12)
    assert row.penalty == 0.10
    assert row.final_score == pytest.approx(0.9)
    assert row.to_obj()["strategy_accuracy"]["fast"] == 1.0
