"""Command line entry points: batch evaluation, terminal chat, and the server.

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import algebra as algebra_mod
from . import quarel as quarel_mod
from .concierge import (
    ChatSession,
    Close,
    action_kind,
    default_db_path,
    default_preferences_path,
    load_db,
    load_preference_rules,
    run_turn,
)
from .errors import DataError, ExtractionError, TransportError
from .llm import (
    ExtractorConfig,
    GREETING,
    ReplayTransport,
    default_template,
    extract_predicates,
    make_extractor,
    make_responder,
    quarel_input,
    serialize_bundle,
)
from .logic import LogicError

EXTRACT_CHOICES = click.Choice(["llm", "stub", "gold"])


def _extractor_config(mode: str, endpoint: str, model: str) -> ExtractorConfig:
    return ExtractorConfig(mode=mode, endpoint=endpoint, model_id=model)


def _transport(replay: str | None):
    return ReplayTransport(replay) if replay else None


@click.group()
@click.version_option(package_name="artifact", prog_name="star")
def cli() -> None:
    """Predicate extraction, goal-directed reasoning, justified answers."""


# --- quarel ------------------------------------------------------------------


@cli.group()
def quarel() -> None:
    """Qualitative comparison questions."""


@quarel.command("eval")
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Property table file (defaults to the shipped 19-property table).")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--extract", "mode", type=EXTRACT_CHOICES, default="stub", show_default=True)
@click.option("--endpoint", default="", help="Completion endpoint for --extract llm.")
@click.option("--model", default="", help="Model id for --extract llm.")
@click.option("--replay", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Replay transport fixture instead of a live endpoint.")
def quarel_eval(kb_path, data_path, mode, endpoint, model, replay) -> None:
    """Score logical-form answering over a dataset file."""
    table = quarel_mod.load_property_table(kb_path or quarel_mod.default_table_path())
    kb = quarel_mod.compile_kb(table)
    form_source = None
    if mode != "gold":
        cfg = _extractor_config(mode, endpoint, model)
        template = default_template("quarel")
        transport = _transport(replay)

        def form_source(record):  # noqa: F811
            if not record.question_text:
                raise DataError(f"record {record.record_id} has no question text")
            bundle = extract_predicates(
                cfg, template, quarel_input(record.question_text, record.world1, record.world2),
                transport,
            )
            return serialize_bundle(bundle)

    report = quarel_mod.evaluate(kb, data_path, form_source)
    click.echo(report.render())


# --- algebra ------------------------------------------------------------------


@cli.group()
def algebra() -> None:
    """Addition/subtraction word problems."""


@algebra.command("solve")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--extract", "mode", type=EXTRACT_CHOICES, default="stub", show_default=True)
@click.option("--show-proof", is_flag=True, default=False)
@click.option("--endpoint", default="")
@click.option("--model", default="")
@click.option("--replay", type=click.Path(exists=True, dir_okay=False), default=None)
def algebra_solve(data_path, mode, show_proof, endpoint, model, replay) -> None:
    """Solve each problem block in a file; ``# answer: N`` lines are scored."""
    blocks = algebra_mod.read_problem_file(data_path)
    cfg = _extractor_config(mode, endpoint, model)
    template = default_template("algebra")
    transport = _transport(replay)
    correct = 0
    scored = 0
    for i, block in enumerate(blocks, start=1):
        if mode == "gold":
            problem = algebra_mod.parse_facts(block.source)
        else:
            bundle = extract_predicates(cfg, template, block.source, transport)
            assert isinstance(bundle.predicates, algebra_mod.AlgebraProblem)
            problem = bundle.predicates
        try:
            solution = algebra_mod.solve_problem(problem)
        except algebra_mod.AmbiguousAnswerError as exc:
            click.echo(f"problem {i}: ambiguous: {exc.answers}")
            if block.expected_answer is not None:
                scored += 1
            continue
        line = f"problem {i}: {solution.answer}"
        if block.expected_answer is not None:
            scored += 1
            if solution.answer == block.expected_answer:
                correct += 1
                line += " correct"
            else:
                line += f" incorrect (expected {block.expected_answer})"
        click.echo(line)
        if show_proof:
            click.echo(solution.rendered())
    if scored:
        click.echo(f"correct: {correct}/{scored}")


# --- concierge -----------------------------------------------------------------


@cli.group()
def concierge() -> None:
    """Goal-directed restaurant recommendation."""


def _chat_session(db_path, prefs_path, mode, endpoint, model, replay) -> ChatSession:
    db = load_db(db_path or default_db_path())
    rules = load_preference_rules(prefs_path or default_preferences_path())
    cfg = _extractor_config(mode, endpoint, model)
    transport = _transport(replay)
    return ChatSession(
        db=db,
        extract=make_extractor(cfg, "concierge-extract", transport),
        respond=make_responder(cfg, transport),
        preference_rules=rules,
    )


@concierge.command("chat")
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--prefs", "prefs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--extract", "mode", type=click.Choice(["llm", "stub"]), default="stub",
              show_default=True)
@click.option("--endpoint", default="")
@click.option("--model", default="")
@click.option("--replay", type=click.Path(exists=True, dir_okay=False), default=None)
def concierge_chat(db_path, prefs_path, mode, endpoint, model, replay) -> None:
    """Interactive terminal conversation."""
    session = _chat_session(db_path, prefs_path, mode, endpoint, model, replay)
    click.echo(f"Bot: {GREETING}")
    while True:
        try:
            user_text = click.prompt("You", prompt_suffix=": ")
        except (EOFError, click.Abort):
            click.echo("Bot: It's no problem, I'm happy to assist.")
            return
        bot_text, action, _state = run_turn(session, user_text)
        click.echo(f"Bot: {bot_text}")
        if action is not None and isinstance(action, Close):
            return


def _parse_script(path: str) -> list[tuple[str, str]]:
    turns: list[tuple[str, str]] = []
    pending: str | None = None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("expect "):
            if pending is None:
                raise DataError(f"expectation without a user line: {line!r}")
            turns.append((pending, line[len("expect "):].strip()))
            pending = None
        else:
            if pending is not None:
                raise DataError(f"two user lines in a row at {line!r}")
            pending = line
    if pending is not None:
        raise DataError("script ends with a user line missing its expectation")
    if not turns:
        raise DataError(f"empty script: {path}")
    return turns


def _action_tag(action) -> str:
    if action is None:
        return "rephrase"
    kind = action_kind(action)
    if kind == "ask":
        return f"ask {action.attribute}"
    if kind == "recommend":
        return f"recommend {action.records[0].name}"
    return kind


@concierge.command("replay")
@click.option("--script", "script_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--prefs", "prefs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--extract", "mode", type=click.Choice(["llm", "stub"]), default="stub",
              show_default=True)
@click.option("--endpoint", default="")
@click.option("--model", default="")
@click.option("--replay", "replay_fixture", type=click.Path(exists=True, dir_okay=False), default=None)
def concierge_replay(script_path, db_path, prefs_path, mode, endpoint, model, replay_fixture) -> None:
    """Replay a scripted conversation and compare action tags."""
    session = _chat_session(db_path, prefs_path, mode, endpoint, model, replay_fixture)
    turns = _parse_script(script_path)
    mismatches = []
    for i, (user_text, expected) in enumerate(turns, start=1):
        _bot_text, action, _state = run_turn(session, user_text)
        got = _action_tag(action)
        if got != expected:
            mismatches.append(f"turn {i}: expected {expected!r}, got {got!r}")
    if mismatches:
        raise DataError("replay mismatches:\n" + "\n".join(mismatches))
    click.echo(f"replay ok: {len(turns)} turns")


# --- server --------------------------------------------------------------------


@cli.command("serve")
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--prefs", "prefs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--extract", "mode", type=click.Choice(["llm", "stub"]), default="stub",
              show_default=True)
@click.option("--endpoint", default="")
@click.option("--model", default="")
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Origin allowed to call the API (repeatable).")
def serve(db_path, prefs_path, port, host, mode, endpoint, model, cors_origins) -> None:
    """Run the HTTP session API for the chat frontend."""
    import uvicorn

    from .service import create_app

    db = load_db(db_path or default_db_path())
    rules = load_preference_rules(prefs_path or default_preferences_path())
    app = create_app(
        db,
        extractor_cfg=_extractor_config(mode, endpoint, model),
        preference_rules=rules,
        cors_origins=cors_origins,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run(argv: list[str] | None = None) -> None:
    sys.exit(main(argv))


def main(argv: list[str] | None = None) -> int:
    """Invoke the CLI, mapping error classes onto documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        return 1
    except (DataError, ExtractionError, LogicError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    run()
