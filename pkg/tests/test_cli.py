from __future__ import annotations

import json

from click.testing import CliRunner

from stagecraft.blueprint import load, serialize, validate
from stagecraft.cli import main
from stagecraft.transcript import write_transcript
from tests import cases
from tests.conftest import elsinore_blueprint
from tests.test_planning import _pipeline_backend  # reuse the pipeline fixture script
from tests.test_service import write_script


def test_validate_accepts_good_blueprint(tmp_path):
    path = tmp_path / "bp.json"
    path.write_text(serialize(elsinore_blueprint()), encoding="utf-8")
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 0
    assert "OK" in result.output


def test_validate_exits_nonzero_on_violation(tmp_path):
    doc = json.loads(serialize(elsinore_blueprint()))
    doc["acts"][0]["end_point_id"] = "point-1"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 1
    assert "end point" in result.output


def test_validate_exits_two_on_schema_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"topic": 3}', encoding="utf-8")
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 2


def _pipeline_script_entries():
    backend = _pipeline_backend()
    return {key: [text for text, _ in entries] for key, entries in backend._by_key.items()}


def test_plan_writes_blueprint_and_audit(tmp_path):
    script = write_script(tmp_path, _pipeline_script_entries())
    out = tmp_path / "blueprint.json"
    result = CliRunner().invoke(
        main,
        ["plan", "--topic", "A murder in the study", "--out", str(out), "--scripted", script],
    )
    assert result.exit_code == 0, result.output
    blueprint = load(out)
    assert validate(blueprint) == []
    audit = (tmp_path / "blueprint.audit.jsonl").read_text(encoding="utf-8")
    assert '"step": "assemble"' in audit


def test_perform_runs_scripted_session_to_completion(tmp_path):
    from tests.cases import evidence_entries
    from tests.conftest import study_blueprint

    blueprint_path = tmp_path / "study.json"
    blueprint_path.write_text(serialize(study_blueprint(False)), encoding="utf-8")
    script = write_script(tmp_path, evidence_entries())
    out = tmp_path / "transcript.jsonl"
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "stage": {
                    "refresh_goals": False,
                    "stall_threshold": 10,
                    "review_trajectories": "always",
                }
            }
        ),
        encoding="utf-8",
    )
    result = CliRunner().invoke(
        main,
        [
            "perform",
            "--blueprint", str(blueprint_path),
            "--scripted", script,
            "--out", str(out),
            "--config", str(config),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "performance completed" in result.output
    assert out.exists()


def test_replay_command_reports_state(tmp_path):
    session = cases.run_case_stubborn_choice()
    path = tmp_path / "t.jsonl"
    write_transcript(session.transcript, path)
    result = CliRunner().invoke(main, ["replay", str(path)])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["prop_states"]["curtain"]["intact"] == "no"
    assert payload["point_index"] == 1


def test_evaluate_emits_report_and_verdicts(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    session = cases.run_case_alias_success()
    write_transcript(session.transcript, a)
    write_transcript(session.transcript, b)
    script = write_script(
        tmp_path,
        {
            "judge": [
                "explanation: the evaluated run holds character better\nscore: 2\nchoice: Model A",
                "explanation: even\nscore: 3\nchoice: tie",
            ]
        },
    )
    verdicts_path = tmp_path / "verdicts.jsonl"
    result = CliRunner().invoke(
        main,
        [
            "evaluate",
            "--a", str(a),
            "--b", str(b),
            "--dims", "cp,nq",
            "--scripted", script,
            "--verdicts", str(verdicts_path),
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["CP"]["score"] == 2
    assert report["NQ"]["choice"] == "tie"
    assert report["overall_win_rate"] == 62.5  # (0.75 + 0.5) / 2 * 100
    lines = verdicts_path.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 2


def test_evaluate_judge_flag_selects_backend(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    session = cases.run_case_alias_success()
    write_transcript(session.transcript, a)
    write_transcript(session.transcript, b)
    script = write_script(
        tmp_path, {"judge": ["explanation: even\nscore: 3\nchoice: tie"]}
    )
    result = CliRunner().invoke(
        main,
        ["evaluate", "--a", str(a), "--b", str(b), "--dims", "cp", "--judge", f"scripted:{script}"],
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["CP"]["choice"] == "tie"


def test_pad_eval_command(tmp_path):
    pred = tmp_path / "pred.jsonl"
    gold = tmp_path / "gold.jsonl"
    pred.write_text(
        "\n".join(json.dumps({"strategy": s}) for s in ["FAST", "SLOW", "FAST"]) + "\n",
        encoding="utf-8",
    )
    gold.write_text(
        "\n".join(json.dumps({"strategy": s}) for s in ["FAST", "SLOW", "SILENCE"]) + "\n",
        encoding="utf-8",
    )
    result = CliRunner().invoke(
        main, ["pad-eval", "--pred", str(pred), "--gold", str(gold), "--latency", "6.89"]
    )
    assert result.exit_code == 0, result.output
    row = json.loads(result.output)
    assert row["strategy_accuracy"] == {"fast": 1.0, "slow": 1.0, "silence": 0.0}
    assert row["penalty"] == 0.05
    assert row["final_score"] == (2 / 3) - 0.05
