"""Command line entry points.

`serve` imports the HTTP stack lazily so `ask`/`explore`/`eval` start
without paying for FastAPI; in scripted-provider setups those commands
are expected to finish in seconds.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..config import load_config
from ..errors import Conflict, CopilotError, ExplorationInterrupted
from .engine import (
    Engine,
    RunOptions,
    install_snapshot,
    run_eval as eval_flow,
    run_explore_sync,
    run_request_sync,
)


def build_engine() -> Engine:
    return Engine(load_config(), data_dir=Path.cwd())


@click.group()
def cli():
    """Exploration-deployment analysis engine."""


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True, type=int)
def serve(host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    from .app import create_app

    uvicorn.run(create_app(build_engine()), host=host, port=port)


@cli.command()
@click.argument("request")
@click.option("--mode", default="interface_workflow", show_default=True,
              type=click.Choice(["interface_workflow", "direct_code"]))
@click.option("--no-hybrid", is_flag=True,
              help="Fail instead of generating code for uncovered steps.")
def ask(request: str, mode: str, no_hybrid: bool):
    """Answer one request and print where the artifacts landed."""
    engine = build_engine()
    options = RunOptions(mode=mode, hybrid=False if no_hybrid else None)
    record = run_request_sync(engine, request, options)
    run_dir = engine.store.run_dir(record.id)

    click.echo(f"run {record.id}: {record.status}")
    if record.error:
        click.echo(f"error: {record.error}", err=True)
    summary = run_dir / "summary.md"
    if summary.exists():
        click.echo(summary.read_text(encoding="utf-8").rstrip("\n"))
    artifacts = sorted(
        p.relative_to(run_dir)
        for p in run_dir.rglob("*")
        if p.is_file() and p.suffix in (".csv", ".json", ".md")
        and p.name not in ("run.json", "events.jsonl")
    )
    for rel in artifacts:
        click.echo(f"  {run_dir / rel}")
    if record.status != "done":
        sys.exit(1)


@cli.command()
@click.option("--no-merge", is_flag=True, help="Keep overlapping drafts separate.")
@click.option("--seed-only", is_flag=True,
              help="Explore only the bundled corpus, ignoring uncovered requests.")
@click.option("--corpus", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Alternative request corpus (JSONL).")
def explore(no_merge: bool, seed_only: bool, corpus: str | None):
    """Grow the interface library from the request corpus."""
    engine = build_engine()

    def on_event(kind: str, **payload) -> None:
        if kind == "request":
            click.echo(f"exploring: {payload['text']}")
        elif kind == "certified":
            repairs = payload.get("repairs", 0)
            note = f" ({repairs} repair{'s' if repairs != 1 else ''})" if repairs else ""
            click.echo(f"  certified {payload['name']}{note}")
        elif kind == "certify_failed":
            click.echo(f"  gave up on {payload['name']}")
        elif kind == "merged":
            click.echo(f"  merged {' + '.join(payload['originals'])} -> {payload['name']}")
        elif kind == "uncovered":
            click.echo(f"  uncovered: {payload['text']}")

    try:
        result = run_explore_sync(
            engine, merge=not no_merge, seed_only=seed_only,
            corpus_path=corpus, on_event=on_event,
        )
    except ExplorationInterrupted as exc:
        click.echo(f"interrupted; progress kept at {exc.checkpoint_path}", err=True)
        click.echo("rerun `copilot explore` to resume", err=True)
        sys.exit(1)

    click.echo(f"library v{result['version']}: {result['interfaces']} active interfaces")
    click.echo(f"covered {len(result['covered'])} requests; "
               f"{len(result['uncovered'])} uncovered; "
               f"{len(result['merges'])} merges; "
               f"{len(result['resolved'])} uncovered entries resolved")
    click.echo(f"snapshot: {result['snapshot_path']}")


@cli.command("eval")
@click.option("--cases", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", default="interface_workflow", show_default=True,
              type=click.Choice(["interface_workflow", "direct_code"]))
@click.option("--name", default=None, help="Report name (default: <cases>-<mode>).")
def eval_cmd(cases: str, mode: str, name: str | None):
    """Score benchmark cases and write a report."""
    engine = build_engine()
    bench_id, report = eval_flow(engine, cases, mode, name=name)
    click.echo(f"report: {engine.workspace / 'benchmarks' / (bench_id + '.json')}")
    click.echo(f"accuracy: {report.accuracy:.3f} over {len(report.results)} cases")
    click.echo(f"output tokens: {report.token_totals['output_tokens']}")


@cli.group()
def library():
    """Inspect and move interface library snapshots."""


@library.command("list")
def library_list():
    engine = build_engine()
    records = sorted(engine.registry.active_records(), key=lambda r: r.id)
    click.echo(f"library v{engine.library_version()}: {len(records)} active interfaces")
    for rec in records:
        tags = ",".join(sorted(rec.task_tags))
        click.echo(f"  {rec.id}  {rec.signature()}  [{rec.category}; {tags}]")


@library.command("export")
@click.argument("dest", type=click.Path(dir_okay=False, writable=True))
def library_export(dest: str):
    engine = build_engine()
    snapshots = sorted(engine.registry.library_dir.glob("snapshot-v*.json"))
    if snapshots:
        text = snapshots[-1].read_text(encoding="utf-8")
    else:
        obj = engine.registry.snapshot_obj(engine.library_version())
        text = json.dumps(obj, ensure_ascii=False, indent=2) + "\n"
    Path(dest).write_text(text, encoding="utf-8")
    click.echo(f"wrote {dest}")


@library.command("import")
@click.argument("src", type=click.Path(exists=True, dir_okay=False))
def library_import(src: str):
    engine = build_engine()
    if engine.registry._records:
        raise Conflict("the workspace library is not empty; import needs a fresh one")
    version = install_snapshot(engine.registry, src)
    count = len(engine.registry.active_records())
    click.echo(f"imported v{version} from {src}: {count} active interfaces")


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(130)
    except CopilotError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
