"""Command-line entry points: plan, perform, evaluate, pad-eval, replay, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import blueprint as bp
from . import evaluation, planning, transcript
from .errors import BlueprintSchemaError, StagecraftError
from .gateway import Backend, HttpChatBackend, ScriptedBackend
from .pad import Strategy
from .runtime import StageConfig, Session, run_loop
from .service import SessionRegistry, create_app


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def _backend_from_options(scripted: str | None, config: dict) -> Backend:
    if scripted:
        return ScriptedBackend.from_jsonl(scripted)
    backend_cfg = config.get("backend", {})
    return HttpChatBackend(
        url=backend_cfg.get("url"),
        api_key=backend_cfg.get("api_key"),
        model=backend_cfg.get("model"),
    )


def _stage_config(config: dict, **overrides) -> StageConfig:
    values = dict(config.get("stage", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return StageConfig(**values)


@click.group()
def main() -> None:
    """Interactive-drama engine: offline planning, live performance, evaluation."""


@main.command()
@click.argument("path", type=click.Path(exists=True))
def validate(path: str) -> None:
    """Validate a blueprint file; exits nonzero on violations."""
    try:
        document = bp.load(path)
    except BlueprintSchemaError as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(2)
    violations = bp.validate(document)
    if violations:
        for violation in violations:
            click.echo(str(violation), err=True)
        sys.exit(1)
    click.echo("OK")


@main.command()
@click.option("--topic", default=None, help="Drama topic to plan from.")
@click.option("--work", type=click.Path(exists=True), default=None, help="Literary work file.")
@click.option("--title", default=None, help="Title of the literary work.")
@click.option("--out", type=click.Path(), required=True, help="Blueprint output path.")
@click.option("--scripted", type=click.Path(exists=True), default=None, help="Scripted replies JSONL.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def plan(topic, work, title, out, scripted, config_path) -> None:
    """Plan a narrative blueprint from a topic or a literary work."""
    if (topic is None) == (work is None):
        raise click.UsageError("exactly one of --topic or --work is required")
    config = _load_config_file(config_path)
    backend = _backend_from_options(scripted, config)
    try:
        if topic is not None:
            result, audit = planning.plan_from_topic(topic, backend)
        else:
            text = Path(work).read_text(encoding="utf-8")
            result, audit = planning.plan_from_work(title or Path(work).stem, text, backend)
    except StagecraftError as exc:
        click.echo(f"planning failed: {exc}", err=True)
        sys.exit(1)
    Path(out).write_text(bp.serialize(result), encoding="utf-8")
    audit_path = Path(out).with_suffix(".audit.jsonl")
    audit_path.write_text(audit.to_jsonl(), encoding="utf-8")
    click.echo(f"blueprint written to {out} (audit: {audit_path})")


@main.command()
@click.option("--blueprint", "blueprint_path", type=click.Path(exists=True), required=True)
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--human", "humans", multiple=True, help="Actor to hand to a human player.")
@click.option("--out", type=click.Path(), default=None, help="Transcript JSONL output path.")
@click.option("--turn-budget", type=int, default=None)
@click.option("--stall-threshold", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def perform(blueprint_path, scripted, humans, out, turn_budget, stall_threshold, config_path) -> None:
    """Run a full performance of a blueprint."""
    config = _load_config_file(config_path)
    document = bp.load(blueprint_path)
    roster = {a.name: a.controller for a in document.actors}
    for name in humans:
        if name not in roster:
            raise click.UsageError(f"--human {name!r} is not a blueprint actor")
        roster[name] = "human"
    stage = _stage_config(
        config, turn_budget=turn_budget, stall_threshold=stall_threshold, transcript_path=out
    )
    backend = _backend_from_options(scripted, config)
    session = Session(document, roster, backend, stage)
    session.start()
    result = run_loop(session)
    status = "completed" if result.completed else f"incomplete ({result.incomplete_reason})"
    click.echo(f"performance {status}: {len(result.events)} events, {result.rounds} rounds")
    if out:
        click.echo(f"transcript written to {out}")
    if not result.completed:
        sys.exit(1)


@main.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--blueprint", "blueprint_path", type=click.Path(exists=True), default=None)
def replay(path, blueprint_path) -> None:
    """Recompute the final stage state from a persisted transcript."""
    document = bp.load(blueprint_path) if blueprint_path else None
    try:
        state = transcript.replay(path, document)
    except StagecraftError as exc:
        click.echo(f"replay failed: {exc}", err=True)
        sys.exit(2)
    click.echo(
        json.dumps(
            {
                "act_index": state.act_index,
                "point_index": state.point_index,
                "on_stage": sorted(state.on_stage),
                "prop_states": state.prop_states,
                "status": state.status,
                "last_seq": state.last_seq,
                "checksum_ok": state.checksum_ok,
                "mismatches": state.mismatches,
            },
            indent=2,
            ensure_ascii=False,
        )
    )
    if state.mismatches:
        sys.exit(1)


@main.command()
@click.option("--a", "path_a", type=click.Path(exists=True), required=True, help="Evaluated transcript.")
@click.option("--b", "path_b", type=click.Path(exists=True), required=True, help="Baseline transcript.")
@click.option("--dims", default="cp,nq,ie", help="Comma-separated dimensions.")
@click.option("--judge", default=None, help="Judge backend: 'scripted:<path>' or a model name.")
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None, help="Report JSON output path.")
@click.option("--verdicts", "verdicts_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def evaluate(path_a, path_b, dims, judge, scripted, out, verdicts_path, config_path) -> None:
    """Judge two performance transcripts pairwise."""
    config = _load_config_file(config_path)
    if judge and judge.startswith("scripted:"):
        backend = ScriptedBackend.from_jsonl(judge[len("scripted:") :])
    elif judge:
        backend = HttpChatBackend(model=judge)
    else:
        backend = _backend_from_options(scripted, config)
    text_a = _render_transcript(path_a)
    text_b = _render_transcript(path_b)
    requested = [d.strip().upper() for d in dims.split(",") if d.strip()]
    unknown = [d for d in requested if d not in evaluation.DIMENSIONS]
    if unknown:
        raise click.UsageError(f"unknown dimensions: {unknown}")
    verdicts = []
    report: dict[str, dict] = {}
    for dimension in requested:
        verdict = evaluation.judge_pairwise(text_a, text_b, dimension, backend)
        verdicts.append(verdict)
        report[dimension] = {
            "score": verdict.score,
            "choice": verdict.choice,
            "win_rate": evaluation.win_rate([verdict]),
            "explanation": verdict.explanation,
        }
    report["overall_win_rate"] = evaluation.win_rate(verdicts)
    payload = json.dumps(report, indent=2, ensure_ascii=False)
    click.echo(payload)
    if out:
        Path(out).write_text(payload + "\n", encoding="utf-8")
    if verdicts_path:
        Path(verdicts_path).write_text(
            "".join(json.dumps(v.to_obj(), ensure_ascii=False) + "\n" for v in verdicts),
            encoding="utf-8",
        )


def _render_transcript(path: str) -> str:
    events = transcript.read_events(path)
    lines = []
    for event in transcript.filter_for_viewer(events, None):
        if event.kind == "action_attempt":
            lines.append(f"{event.speaker}: ({event.parts.action})")
        else:
            lines.append(f"{event.speaker}: {event.text}")
    return "\n".join(lines)


@main.command(name="pad-eval")
@click.option("--pred", type=click.Path(exists=True), required=True, help="Predictions JSONL.")
@click.option("--gold", type=click.Path(exists=True), required=True, help="Gold labels JSONL.")
@click.option("--latency", type=float, required=True, help="Average decision latency in seconds.")
def pad_eval(pred, gold, latency) -> None:
    """Score strategy-selection predictions against gold labels."""
    predictions = _read_strategies(pred)
    labels = _read_strategies(gold)
    row = evaluation.pad_eval_row(predictions, labels, latency)
    click.echo(json.dumps(row.to_obj(), indent=2))


def _read_strategies(path: str) -> list[Strategy]:
    strategies = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                strategies.append(Strategy(json.loads(line)["strategy"].upper()))
    return strategies


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
def serve(port, host) -> None:
    """Run the live-session HTTP service."""
    import uvicorn

    uvicorn.run(create_app(SessionRegistry()), host=host, port=port)


if __name__ == "__main__":
    main()
