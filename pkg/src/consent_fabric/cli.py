"""``consent-fabric`` command line front end."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .audit import AuditLog
from .engine import Engine
from .errors import EngineError
from .scenario import ScenarioRunner, run_scenario


def _save(engine: Engine, state_path: str | None, audit_path: str | None) -> None:
    if state_path:
        Path(state_path).write_text(engine.state_json() + "\n", encoding="utf-8")
    if audit_path:
        with open(audit_path, "w", encoding="utf-8") as fh:
            engine.audit.write_ndjson(fh)


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        text = Path(args.script).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read {args.script}: {exc}", file=sys.stderr)
        return 2
    code, engine = run_scenario(text, sys.stdout)
    _save(engine, args.state, args.audit)
    return code


def _cmd_replay(args: argparse.Namespace) -> int:
    try:
        with open(args.log, encoding="utf-8") as fh:
            events = AuditLog.read_ndjson(fh)
        engine = Engine.replay(events)
    except (OSError, EngineError) as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    print(f"replay ok: {len(events)} events, state {engine.state_hash()}")
    _save(engine, args.state, None)
    return 0


def _cmd_repl(args: argparse.Namespace) -> int:
    runner = ScenarioRunner()
    interactive = sys.stdin.isatty()
    lineno = 0
    while True:
        if interactive:
            sys.stdout.write("> ")
            sys.stdout.flush()
        line = sys.stdin.readline()
        if not line:
            break
        lineno += 1
        stripped = line.strip()
        if stripped in {"quit", "exit"}:
            break
        try:
            runner.run_line(line, lineno, sys.stdout)
        except EngineError as exc:
            print(f"{exc.code}: {exc}")
    _save(runner.engine, args.state, args.audit)
    return 0 if runner.failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consent-fabric",
        description="Consent-aware data fabric: scenario runner and audit tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario script")
    p_run.add_argument("script")
    p_run.add_argument("--state", help="write final state JSON here")
    p_run.add_argument("--audit", help="write the audit log (NDJSON) here")
    p_run.set_defaults(func=_cmd_run)

    p_replay = sub.add_parser("replay", help="re-execute an audit log and verify it")
    p_replay.add_argument("log")
    p_replay.add_argument("--state", help="write replayed state JSON here")
    p_replay.set_defaults(func=_cmd_replay)

    p_repl = sub.add_parser("repl", help="interactive scenario shell")
    p_repl.add_argument("--state", help="write final state JSON here")
    p_repl.add_argument("--audit", help="write the audit log (NDJSON) here")
    p_repl.set_defaults(func=_cmd_repl)

    return parser


def entry(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(entry())
