"""Pairwise performance judging and the score arithmetic around it.

Whole performances are compared pairwise on three dimensions -- character
performance (CP), narrative quality (NQ), interaction experience (IE) -- on
a 1..5 preference scale where 1/2 favor model A, 3 is a tie, and 4/5 favor
model B.  Judging is holistic: a judge always sees complete transcripts,
never single turns, because an odd-looking turn may be deliberate setup.

Scores aggregate to a win rate for the evaluated model (always model A) with
the affine credit map (5 - score) / 4, which sends a strong win to 1, a tie
to 0.5, and a strong loss to 0 -- the unique map making win rates
antisymmetric under score reflection.

Strategy-selection evaluation scores per-class accuracy over FAST/SLOW/
SILENCE decisions and charges a step-function latency penalty: 0 below 2 s,
0.05 for 2-10 s, 0.10 for 10-30 s, 0.15 from 30 s up.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .errors import ContractViolation, UnparseableVerdict
from .gateway import Backend, complete, user_request
from .pad import PadDecision, Strategy

logger = logging.getLogger(__name__)

DIMENSION_CP = "CP"
DIMENSION_NQ = "NQ"
DIMENSION_IE = "IE"
DIMENSIONS = (DIMENSION_CP, DIMENSION_NQ, DIMENSION_IE)

DIMENSION_TITLES = {
    DIMENSION_CP: "Character Performance",
    DIMENSION_NQ: "Narrative Quality",
    DIMENSION_IE: "Interaction Experience",
}

# Judging rubric per dimension, shown verbatim to the judge backend.
DIMENSION_CRITERIA = {
    DIMENSION_CP: (
        "Judge the characters themselves. Consistency: do actions and dialogue stay true "
        "to each character's stated persona, motivation, and background, or do they break "
        "character? Depth: are the characters multi-dimensional and capable of growth, or "
        "flat stereotypes? Believability: does the dialogue sound natural for these "
        "people, with plausible emotional reactions and decisions in context?"
    ),
    DIMENSION_NQ: (
        "Judge the story as craft. Advancement: does the plot move forward and build to a "
        "meaningful conclusion, or stall in filler? Creativity: is the narrative "
        "inventive and engaging rather than predictable? Coherence: is the plot "
        "internally consistent, with twists that are set up rather than arbitrary?"
    ),
    DIMENSION_IE: (
        "Judge the experience of following the performance. Flow and pacing: are "
        "transitions smooth, with tension built and released at the right moments? "
        "Content effectiveness: how much of the text is meaningful rather than "
        "repetitive or vague? Immersion: which version reads like genuine theatre and "
        "pulls the reader into the story?"
    ),
}

MODEL_A = "model_a"
MODEL_B = "model_b"
TIE = "tie"


def _choice_for_score(score: int) -> str:
    if score in (1, 2):
        return MODEL_A
    if score == 3:
        return TIE
    return MODEL_B


@dataclass(frozen=True)
class JudgeVerdict:
    dimension: str
    explanation: str
    score: int
    choice: str

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"score must be 1..5, got {self.score}")
        if self.choice != _choice_for_score(self.score):
            raise ValueError(
                f"score {self.score} is inconsistent with choice {self.choice!r}"
            )

    def to_obj(self) -> dict:
        return {
            "dimension": self.dimension,
            "explanation": self.explanation,
            "score": self.score,
            "choice": self.choice,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "JudgeVerdict":
        return cls(
            dimension=str(obj["dimension"]),
            explanation=str(obj.get("explanation", "")),
            score=int(obj["score"]),
            choice=str(obj["choice"]),
        )


@dataclass(frozen=True)
class DimensionScore:
    dimension: str
    language: str
    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"dimension score must be in [0, 100], got {self.value}")


@dataclass(frozen=True)
class PadEvalRow:
    fast: float | None
    slow: float | None
    silence: float | None
    avg_latency: float
    penalty: float
    final_score: float

    def to_obj(self) -> dict:
        return {
            "strategy_accuracy": {"fast": self.fast, "slow": self.slow, "silence": self.silence},
            "avg_latency": self.avg_latency,
            "penalty": self.penalty,
            "final_score": self.final_score,
        }


def build_judge_prompt(transcript_a: str, transcript_b: str, dimension: str) -> str:
    title = DIMENSION_TITLES[dimension]
    return (
        "You are an expert judge of drama performances. Compare the two complete "
        "performance transcripts below pairwise, on one dimension only.\n\n"
        f"Dimension under judgment: {title} ({dimension}).\n"
        f"Criteria: {DIMENSION_CRITERIA[dimension]}\n\n"
        f"Model A result:\n{transcript_a}\n\n"
        f"Model B result:\n{transcript_b}\n\n"
        "Scoring guidelines (5-point preference scale):\n"
        "- 1: Strong preference for Model A - Model A is significantly better\n"
        "- 2: Moderate preference for Model A - Model A is somewhat better\n"
        "- 3: Tie - both are roughly equivalent in quality\n"
        "- 4: Moderate preference for Model B - Model B is somewhat better\n"
        "- 5: Strong preference for Model B - Model B is significantly better\n\n"
        "Your output format:\n"
        "explanation: <detailed explanation of the choice, citing both transcripts>\n"
        "score: <1 or 2 or 3 or 4 or 5>\n"
        "choice: <Model A or Model B or tie>"
    )


def _parse_verdict_reply(visible: str, dimension: str) -> JudgeVerdict:
    explanation = ""
    score: int | None = None
    choice: str | None = None
    for line in visible.splitlines():
        stripped = line.strip()
        lowered = stripped.lower()
        if lowered.startswith("explanation:"):
            explanation = stripped[len("explanation:") :].strip()
        elif lowered.startswith("score:"):
            token = stripped[len("score:") :].strip().rstrip(".,")
            if not token.isdigit():
                raise UnparseableVerdict(f"score line is not a digit: {stripped!r}")
            score = int(token)
        elif lowered.startswith("choice:"):
            token = stripped[len("choice:") :].strip().strip(".").lower()
            if token == "model a":
                choice = MODEL_A
            elif token == "model b":
                choice = MODEL_B
            elif token == "tie":
                choice = TIE
            else:
                raise UnparseableVerdict(f"choice line not recognized: {stripped!r}")
    if score is None or choice is None:
        raise UnparseableVerdict("reply is missing a score or choice line")
    return JudgeVerdict(dimension, explanation, score, choice)


def judge_pairwise(
    transcript_a: str,
    transcript_b: str,
    dimension: str,
    backend: Backend,
    *,
    session: str = "",
) -> JudgeVerdict:
    """Compare two complete transcripts on one dimension.

    A score/choice inconsistency (or unparseable reply) is re-prompted once;
    a second bad reply is rejected.
    """
    if dimension not in DIMENSIONS:
        raise ContractViolation(f"unknown dimension {dimension!r}")
    prompt = build_judge_prompt(transcript_a, transcript_b, dimension)
    reply = complete(user_request("", prompt, route="judge", session=session), backend)
    try:
        return _parse_verdict_reply(reply.visible, dimension)
    except (UnparseableVerdict, ValueError) as exc:
        logger.warning("judge verdict rejected (%s); re-prompting once", exc)
    repair = (
        prompt
        + "\n\nYour previous verdict was invalid or internally inconsistent: a score of 1 "
        "or 2 must choose Model A, 3 must be a tie, 4 or 5 must choose Model B. Answer "
        "again in the exact output format."
    )
    reply = complete(user_request("", repair, route="judge", session=session), backend)
    try:
        return _parse_verdict_reply(reply.visible, dimension)
    except ValueError as exc:
        raise UnparseableVerdict(str(exc)) from exc


def load_verdicts(lines: Iterable[str]) -> list[JudgeVerdict]:
    """Load stored verdicts, re-asserting the score/choice invariant."""
    return [JudgeVerdict.from_obj(json.loads(line)) for line in lines if line.strip()]


def credit(score: int) -> float:
    """Per-comparison credit for the evaluated model (model A)."""
    if score not in (1, 2, 3, 4, 5):
        raise ContractViolation(f"score must be 1..5, got {score}")
    return (5 - score) / 4


def win_rate(verdicts: Sequence[JudgeVerdict]) -> float:
    """Win rate (0..100) of the evaluated model over a verdict set."""
    if not verdicts:
        raise ContractViolation("win_rate needs at least one verdict")
    return 100.0 * sum(credit(v.score) for v in verdicts) / len(verdicts)


def round_half_up(value: float, digits: int = 2) -> float:
    quantum = Decimal(10) ** -digits
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class LeaderboardRow:
    """Aggregated scores for one model: per-language averages plus overall."""

    language_averages: Mapping[str, float]
    overall: float

    def display(self) -> dict[str, float]:
        out = {lang: round_half_up(avg) for lang, avg in self.language_averages.items()}
        out["overall"] = round_half_up(self.overall)
        return out


def aggregate_leaderboard(scores: Mapping[str, Mapping[str, float]]) -> LeaderboardRow:
    """Fold per-dimension scores into language averages and the overall score.

    ``scores`` maps language -> dimension -> value.  Every language must carry
    all three dimensions; the language average is their arithmetic mean and
    the overall score is the mean of the language averages.
    """
    if not scores:
        raise ContractViolation("at least one language is required")
    averages: dict[str, float] = {}
    for language, dims in scores.items():
        missing = [d for d in DIMENSIONS if d not in dims]
        if missing:
            raise ContractViolation(f"language {language!r} is missing dimensions {missing}")
        averages[language] = sum(dims[d] for d in DIMENSIONS) / len(DIMENSIONS)
    overall = sum(averages.values()) / len(averages)
    return LeaderboardRow(averages, overall)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise ContractViolation("input vectors must have equal length")
    n = len(xs)
    if n < 2:
        raise ContractViolation("at least two points are required")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        raise ContractViolation("degenerate variance: a vector is constant")
    return cov / math.sqrt(var_x * var_y)


def latency_to_penalty(seconds: float) -> float:
    """Step-function penalty for average per-decision response latency."""
    if seconds < 0:
        raise ContractViolation(f"latency must be >= 0, got {seconds}")
    if seconds < 2:
        return 0.0
    if seconds < 10:
        return 0.05
    if seconds < 30:
        return 0.10
    return 0.15


def pad_final_score(
    accuracies: Sequence[float] | Mapping[str, float],
    penalty: float,
) -> float:
    """Mean of the three per-strategy accuracies minus the penalty, floored at 0."""
    if isinstance(accuracies, Mapping):
        values = [accuracies[k] for k in ("fast", "slow", "silence")]
    else:
        values = list(accuracies)
    if len(values) != 3:
        raise ContractViolation("exactly three strategy accuracies are required")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ContractViolation(f"accuracy must be in [0, 1], got {v}")
    return max(0.0, sum(values) / 3 - penalty)


def pad_strategy_accuracy(
    predictions: Sequence[PadDecision | Strategy],
    gold: Sequence[Strategy],
) -> dict[Strategy, float]:
    """Per-class accuracy of strategy selection.

    Action correctness is deliberately not part of the metric: whether to act,
    and on what, can both be justifiable in the same scenario.  Classes absent
    from the gold labels are reported absent rather than as zero.
    """
    if len(predictions) != len(gold):
        raise ContractViolation("predictions and gold labels must align")
    totals: dict[Strategy, int] = {}
    hits: dict[Strategy, int] = {}
    for predicted, expected in zip(predictions, gold):
        strategy = predicted.strategy if isinstance(predicted, PadDecision) else predicted
        totals[expected] = totals.get(expected, 0) + 1
        if strategy is expected:
            hits[expected] = hits.get(expected, 0) + 1
    return {cls: hits.get(cls, 0) / total for cls, total in totals.items()}


def pad_eval_row(
    predictions: Sequence[PadDecision | Strategy],
    gold: Sequence[Strategy],
    avg_latency: float,
) -> PadEvalRow:
    """The full strategy-evaluation row: accuracies, penalty, final score."""
    accuracy = pad_strategy_accuracy(predictions, gold)
    penalty = latency_to_penalty(avg_latency)
    parts = {
        "fast": accuracy.get(Strategy.FAST),
        "slow": accuracy.get(Strategy.SLOW),
        "silence": accuracy.get(Strategy.SILENCE),
    }
    present = [v for v in parts.values() if v is not None]
    mean = sum(present) / len(present) if present else 0.0
    return PadEvalRow(
        fast=parts["fast"],
        slow=parts["slow"],
        silence=parts["silence"],
        avg_latency=avg_latency,
        penalty=penalty,
        final_score=max(0.0, mean - penalty),
    )
