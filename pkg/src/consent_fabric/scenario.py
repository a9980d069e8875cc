"""Line-oriented scenario scripts.

Each non-blank, non-comment line is ``verb key=value ...``.  Values with
spaces are quoted; ``#`` starts a comment.  Three meta constructs:

* ``expect ok`` / ``expect error=<Code>`` — check the previous command.
* ``assert <subject>=<id> <prop>=<want> ...`` — check engine state.
* ``<verb> ... as=<name>`` — bind ``$name`` to the command's main result id
  (and ``$name.<key>`` to the others) for later lines.

The exit code is 0 when every expect/assert held, 1 otherwise, 2 on parse
errors.  Transcripts are deterministic byte-for-byte: engine ids are
monotonic and every result is rendered as canonical JSON.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, TextIO, Tuple

from .audit import canonical_json
from .engine import Engine
from .errors import ALL_CODES, EngineError, ParseError
from .model import set_path


@dataclass(frozen=True)
class VerbSpec:
    kind: str
    primary: Optional[str] = None
    ints: frozenset = frozenset()
    lists: frozenset = frozenset()
    repeats: Dict[str, str] = field(default_factory=dict)   # dsl key -> engine list kwarg
    prefixes: Dict[str, str] = field(default_factory=dict)  # dsl prefix -> engine dict kwarg
    renames: Dict[str, str] = field(default_factory=dict)
    bools: frozenset = frozenset()


_EXCHANGE_EXTRAS = dict(lists=frozenset({"deny", "forbid"}))

VERBS: Dict[str, VerbSpec] = {
    "agent": VerbSpec("create-agent", primary="agent"),
    "locker": VerbSpec("create-locker", primary="locker"),
    "resource": VerbSpec("create-resource", primary="node",
                         prefixes={"field": "content"}),
    "template": VerbSpec("define-template", primary="template",
                         repeats={"rule": "rules"},
                         renames={"desc": "description"}),
    "ctype": VerbSpec("define-ctype", primary="ctype",
                      repeats={"rule": "rules", "template": "templates"}),
    "publish-endpoint": VerbSpec("publish-endpoint", primary="endpoint"),
    "close-endpoint": VerbSpec("close-endpoint"),
    "connect": VerbSpec("connect", primary="connection",
                        prefixes={"attr": "attrs"}),
    "fulfill": VerbSpec("fulfill", ints=frozenset({"obligation"})),
    "close": VerbSpec("close"),
    "revoke-connection": VerbSpec("revoke-connection"),
    "share": VerbSpec("share", primary="node",
                      ints=frozenset({"validity"}), **_EXCHANGE_EXTRAS),
    "confer": VerbSpec("confer", primary="node", **_EXCHANGE_EXTRAS),
    "transfer": VerbSpec("transfer", primary="node"),
    "collateral": VerbSpec("collateral", primary="pledged", **_EXCHANGE_EXTRAS),
    "revoke-artifact": VerbSpec("revoke-artifact"),
    "revert": VerbSpec("revert"),
    "subset": VerbSpec("subset", primary="node", lists=frozenset({"mask"})),
    "set-post": VerbSpec("set-post", prefixes={"set": "updates"}),
    "read": VerbSpec("read"),
    "edit": VerbSpec("edit", prefixes={"set": "updates"}),
    "delete": VerbSpec("delete"),
    "download": VerbSpec("download"),
    "verify": VerbSpec("verify"),
    "tick": VerbSpec("tick", ints=frozenset({"n"})),
}


def _literal(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text == "true":
        return True
    if text == "false":
        return False
    return text


def _split_pairs(tokens: List[str], lineno: int) -> List[Tuple[str, str]]:
    pairs = []
    for token in tokens:
        key, eq, value = token.partition("=")
        if not eq or not key:
            raise ParseError(f"line {lineno}: expected key=value, got {token!r}")
        pairs.append((key, value))
    return pairs


class ScenarioRunner:
    def __init__(self, engine: Optional[Engine] = None):
        self.engine = engine or Engine()
        self.aliases: Dict[str, str] = {}
        self.last_outcome: Optional[str] = None   # "ok" or error code
        self.last_error: Optional[str] = None
        self.failures = 0
        self.checks = 0

    # --- value plumbing --------------------------------------------------

    def _resolve(self, value: str, lineno: int) -> str:
        if not value.startswith("$"):
            return value
        name = value[1:]
        if name in self.aliases:
            return self.aliases[name]
        raise ParseError(f"line {lineno}: unknown reference {value}")

    def _bind(self, alias: str, spec: VerbSpec, result: Dict[str, Any]) -> None:
        if spec.primary and spec.primary in result:
            self.aliases[alias] = result[spec.primary]
        for key, value in result.items():
            if isinstance(value, str):
                self.aliases[f"{alias}.{key}"] = value

    def _build_args(self, spec: VerbSpec, pairs: List[Tuple[str, str]],
                    lineno: int) -> Tuple[Dict[str, Any], Optional[str]]:
        args: Dict[str, Any] = {}
        alias: Optional[str] = None
        for key, raw in pairs:
            if key == "as":
                alias = raw
                continue
            value = self._resolve(raw, lineno)
            if key in spec.repeats:
                args.setdefault(spec.repeats[key], []).append(value)
                continue
            prefix, dot, path = key.partition(".")
            if dot and prefix in spec.prefixes:
                bucket = args.setdefault(spec.prefixes[prefix], {})
                if spec.prefixes[prefix] == "content":
                    set_path(bucket, path, _literal(value))
                else:
                    bucket[path] = _literal(value)
                continue
            if key in spec.ints:
                try:
                    args[key] = int(value)
                except ValueError:
                    raise ParseError(
                        f"line {lineno}: {key} wants an integer, got {value!r}")
                continue
            if key in spec.lists:
                args[key] = [v for v in value.split(",") if v]
                continue
            args[spec.renames.get(key, key)] = value
        return args, alias

    # --- line execution --------------------------------------------------

    def run_line(self, line: str, lineno: int, out: TextIO) -> None:
        tokens = shlex.split(line, comments=True)
        if not tokens:
            return
        verb = tokens[0]
        out.write(f"[{lineno:3d}] {line.strip()}\n")
        if verb == "expect":
            self._do_expect(tokens[1:], lineno, out)
        elif verb == "assert":
            self._do_assert(tokens[1:], lineno, out)
        elif verb == "browse":
            pairs = _split_pairs(tokens[1:], lineno)
            locker = self._resolve(dict(pairs).get("locker", ""), lineno)
            self._run_command_raw(
                lambda: {"endpoints": self.engine.browse(locker)}, out)
        elif verb in VERBS:
            spec = VERBS[verb]
            pairs = _split_pairs(tokens[1:], lineno)
            args, alias = self._build_args(spec, pairs, lineno)
            result = self._run_command_raw(
                lambda: self.engine.execute(spec.kind, **args), out)
            if result is not None and alias:
                self._bind(alias, spec, result)
        else:
            raise ParseError(f"line {lineno}: unknown verb {verb!r}")

    def _run_command_raw(self, thunk, out: TextIO) -> Optional[Dict[str, Any]]:
        try:
            result = thunk()
        except EngineError as exc:
            self.last_outcome = exc.code
            self.last_error = str(exc)
            out.write(f"      error {exc.code}: {exc}\n")
            return None
        self.last_outcome = "ok"
        self.last_error = None
        out.write(f"      ok {canonical_json(result)}\n")
        return result

    def _do_expect(self, tokens: List[str], lineno: int, out: TextIO) -> None:
        if self.last_outcome is None:
            raise ParseError(f"line {lineno}: expect before any command")
        if tokens == ["ok"]:
            wanted = "ok"
        elif len(tokens) == 1 and tokens[0].startswith("error="):
            wanted = tokens[0][len("error="):]
            if wanted not in ALL_CODES:
                raise ParseError(f"line {lineno}: unknown error code {wanted!r}")
        else:
            raise ParseError(f"line {lineno}: expect ok | expect error=<Code>")
        self.checks += 1
        if self.last_outcome == wanted:
            out.write("      PASS\n")
        else:
            self.failures += 1
            out.write(f"      FAIL expected {wanted}, got {self.last_outcome}\n")

    def _do_assert(self, tokens: List[str], lineno: int, out: TextIO) -> None:
        pairs = _split_pairs(tokens, lineno)
        if not pairs:
            raise ParseError(f"line {lineno}: empty assert")
        resolved = [(k, self._resolve(v, lineno)) for k, v in pairs]
        self.checks += 1
        ok, detail = self._evaluate_assert(resolved, lineno)
        if ok:
            out.write("      PASS\n")
        else:
            self.failures += 1
            out.write(f"      FAIL {detail}\n")

    def _evaluate_assert(self, pairs: List[Tuple[str, str]],
                         lineno: int) -> Tuple[bool, str]:
        subject, target = pairs[0]
        checks = pairs[1:]
        eng = self.engine
        if subject == "node":
            node = eng.nodes.get(target)
            if node is None:
                return False, f"no node {target}"
            for prop, want in checks:
                if prop == "locked":
                    got = "true" if node.is_locked() else "false"
                elif prop == "in":
                    got = node.located_in or "nowhere"
                elif prop == "po":
                    got = node.primary_owner or "none"
                elif prop == "co":
                    got = node.current_owner
                elif prop == "kind":
                    got = node.kind
                elif prop == "purpose":
                    got = node.purpose
                elif prop == "gone":
                    got = "true" if node.deleted else "false"
                elif prop == "invalidated":
                    got = "true" if node.invalidated else "false"
                elif prop == "expired":
                    got = "true" if node.expired else "false"
                else:
                    raise ParseError(f"line {lineno}: unknown node property {prop!r}")
                if got != want:
                    return False, f"{target} {prop} is {got}, wanted {want}"
            return True, ""
        if subject == "conn":
            link = eng.connections.get(target)
            if link is None:
                return False, f"no connection {target}"
            for prop, want in checks:
                if prop == "state":
                    if link.state != want:
                        return False, f"{target} is {link.state}, wanted {want}"
                elif prop == "pending":
                    got = str(len(link.ledger.pending()))
                    if got != want:
                        return False, f"{target} has {got} pending obligations, wanted {want}"
                else:
                    raise ParseError(f"line {lineno}: unknown conn property {prop!r}")
            return True, ""
        if subject == "resource":
            res = eng.resources.get(target)
            if res is None:
                return False, f"no resource {target}"
            for prop, want in checks:
                if prop == "version":
                    if str(res.version) != want:
                        return False, f"{target} is at version {res.version}, wanted {want}"
                elif prop == "deleted":
                    got = "true" if res.deleted else "false"
                    if got != want:
                        return False, f"{target} deleted is {got}, wanted {want}"
                else:
                    raise ParseError(f"line {lineno}: unknown resource property {prop!r}")
            return True, ""
        if subject == "inbox":
            messages = eng.inboxes.get(target, [])
            kind = dict(checks).get("kind")
            if kind is not None:
                messages = [m for m in messages if m.get("kind") == kind]
            want = dict(checks).get("count")
            if want is None:
                raise ParseError(f"line {lineno}: inbox assert wants count=")
            if str(len(messages)) != want:
                return False, f"{target} has {len(messages)} messages, wanted {want}"
            return True, ""
        raise ParseError(f"line {lineno}: unknown assert subject {subject!r}")

    # --- whole scripts ---------------------------------------------------

    def run_text(self, text: str, out: TextIO) -> int:
        for lineno, line in enumerate(text.splitlines(), start=1):
            self.run_line(line, lineno, out)
        out.write(f"checks: {self.checks} failures: {self.failures}\n")
        return 0 if self.failures == 0 else 1


def run_scenario(text: str, out: TextIO,
                 engine: Optional[Engine] = None) -> Tuple[int, Engine]:
    """Run a script, writing the transcript to ``out``; returns (exit, engine)."""
    runner = ScenarioRunner(engine=engine)
    try:
        code = runner.run_text(text, out)
    except ParseError as exc:
        out.write(f"parse error: {exc}\n")
        return 2, runner.engine
    return code, runner.engine
