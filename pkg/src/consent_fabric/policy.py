"""Event-condition-modality-action rules and their evaluation.

A rule is ``(event, condition, modality, action)``.  The one-line text form
used by the CLI and by template/ctype commands is::

    [event] [if <condition>] <MODALITY> <action>

* event: ``connection_requested`` | ``obligation_fulfilled`` |
  ``access_performed`` | ``close_requested`` | ``artifact_requested(<kind>)``.
  Omitted means the rule applies at every event.
* condition: and/or/not combinations of ``key op literal`` comparisons with
  ops ``= != < <= > >=`` (unicode aliases accepted), parenthesised freely.
  A comparison over a missing attribute is false; conditions always evaluate.
* modality: ``O`` / ``P`` / ``F`` (or Obligated / Permitted / Forbidden).
* action: ``share confer transfer collateral subset download read edit
  delete`` or parameterised ``purpose_use(tag)`` / ``provide_document(kind)``.

Verdict precedence is Forbidden > Obligated > Permitted regardless of rule
order; ``provide_document`` only occurs with modality Obligated.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import InvalidArgument


class Modality(Enum):
    OBLIGATED = "O"
    PERMITTED = "P"
    FORBIDDEN = "F"


_MODALITY_WORDS = {
    "O": Modality.OBLIGATED, "OBLIGATED": Modality.OBLIGATED,
    "P": Modality.PERMITTED, "PERMITTED": Modality.PERMITTED,
    "F": Modality.FORBIDDEN, "FORBIDDEN": Modality.FORBIDDEN,
}

SIMPLE_ACTIONS = ("share", "confer", "transfer", "collateral", "subset",
                  "download", "read", "edit", "delete")
PARAM_ACTIONS = ("purpose_use", "provide_document")
EVENT_KINDS = ("connection_requested", "obligation_fulfilled",
               "artifact_requested", "access_performed", "close_requested")


@dataclass(frozen=True)
class Action:
    name: str
    param: Optional[str] = None

    def __post_init__(self):
        if self.name in SIMPLE_ACTIONS:
            if self.param is not None:
                raise InvalidArgument(f"action {self.name} takes no parameter")
        elif self.name in PARAM_ACTIONS:
            if not self.param:
                raise InvalidArgument(f"action {self.name} needs a parameter")
        else:
            raise InvalidArgument(f"unknown action {self.name!r}")

    @classmethod
    def parse(cls, text: str) -> "Action":
        if text.endswith(")") and "(" in text:
            name, _, rest = text.partition("(")
            return cls(name, rest[:-1])
        return cls(text)

    def text(self) -> str:
        return f"{self.name}({self.param})" if self.param is not None else self.name


@dataclass(frozen=True)
class Event:
    """Something the engine did, offered to the rule set for matching."""

    kind: str
    artifact_kind: Optional[str] = None


@dataclass(frozen=True)
class EventPattern:
    kind: str
    artifact_kind: Optional[str] = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InvalidArgument(f"unknown event {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "EventPattern":
        if text.endswith(")") and "(" in text:
            name, _, rest = text.partition("(")
            return cls(name, rest[:-1])
        return cls(text)

    def matches(self, event: Optional[Event]) -> bool:
        if event is None or event.kind != self.kind:
            return False
        if self.artifact_kind is None:
            return True
        return event.artifact_kind == self.artifact_kind

    def text(self) -> str:
        if self.artifact_kind is not None:
            return f"{self.kind}({self.artifact_kind})"
        return self.kind


# --- condition algebra ----------------------------------------------------

_OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_OP_ALIASES = {"==": "=", "≠": "!=", "≤": "<=", "≥": ">="}


@dataclass(frozen=True)
class Cmp:
    key: str
    op: str
    literal: Any

    def holds(self, attrs: Mapping[str, Any]) -> bool:
        if self.key not in attrs:
            return False
        try:
            return bool(_OPS[self.op](attrs[self.key], self.literal))
        except TypeError:
            return False

    def text(self) -> str:
        lit = self.literal
        if isinstance(lit, str):
            lit = f'"{lit}"' if (" " in lit or not lit) else lit
        elif isinstance(lit, bool):
            lit = "true" if lit else "false"
        return f"{self.key} {self.op} {lit}"

    def to_json(self):
        return {"cmp": [self.key, self.op, self.literal]}


@dataclass(frozen=True)
class And:
    terms: Tuple[Any, ...]

    def holds(self, attrs) -> bool:
        return all(t.holds(attrs) for t in self.terms)

    def text(self) -> str:
        return "(" + " and ".join(t.text() for t in self.terms) + ")"

    def to_json(self):
        return {"and": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Or:
    terms: Tuple[Any, ...]

    def holds(self, attrs) -> bool:
        return any(t.holds(attrs) for t in self.terms)

    def text(self) -> str:
        return "(" + " or ".join(t.text() for t in self.terms) + ")"

    def to_json(self):
        return {"or": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Not:
    term: Any

    def holds(self, attrs) -> bool:
        return not self.term.holds(attrs)

    def text(self) -> str:
        return f"not {self.term.text()}"

    def to_json(self):
        return {"not": self.term.to_json()}


Condition = Union[Cmp, And, Or, Not]


def condition_from_json(data: Dict[str, Any]) -> Condition:
    if "cmp" in data:
        key, op, literal = data["cmp"]
        return Cmp(key, op, literal)
    if "and" in data:
        return And(tuple(condition_from_json(t) for t in data["and"]))
    if "or" in data:
        return Or(tuple(condition_from_json(t) for t in data["or"]))
    if "not" in data:
        return Not(condition_from_json(data["not"]))
    raise InvalidArgument(f"bad condition json {data!r}")


# --- rules ----------------------------------------------------------------

@dataclass(frozen=True)
class EcmaRule:
    modality: Modality
    action: Action
    event: Optional[EventPattern] = None
    condition: Optional[Condition] = None

    def __post_init__(self):
        if self.action.name == "provide_document" and self.modality is not Modality.OBLIGATED:
            raise InvalidArgument("provide_document rules must be Obligated")

    def fires(self, event: Optional[Event], attrs: Mapping[str, Any]) -> bool:
        if self.event is not None and not self.event.matches(event):
            return False
        if self.condition is not None and not self.condition.holds(attrs):
            return False
        return True

    def text(self) -> str:
        parts: List[str] = []
        if self.event is not None:
            parts.append(self.event.text())
        if self.condition is not None:
            parts.append("if " + self.condition.text())
        parts.append(self.modality.value)
        parts.append(self.action.text())
        return " ".join(parts)

    def to_json(self) -> Dict[str, Any]:
        return {
            "event": self.event.text() if self.event else None,
            "condition": self.condition.to_json() if self.condition else None,
            "modality": self.modality.value,
            "action": self.action.text(),
        }


@dataclass(frozen=True)
class Template:
    """Reusable named rule bundle; immutable once published."""

    id: str
    rules: Tuple[EcmaRule, ...]
    description: str = ""

    def to_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "rules": [r.text() for r in self.rules],
            "description": self.description,
        }


@dataclass(frozen=True)
class ConnectionType:
    id: str
    rules: Tuple[EcmaRule, ...]
    purpose: str = ""
    template_refs: Tuple[str, ...] = ()

    def to_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "rules": [r.to_json() for r in self.rules],
            "purpose": self.purpose,
            "templates": list(self.template_refs),
        }


def compose_connection_type(ctype_id: str,
                            templates: Sequence[Template],
                            extra_rules: Sequence[EcmaRule],
                            purpose: str = "") -> ConnectionType:
    """Concatenate template rules with connection-specific ones.

    Conflicting modalities are kept; precedence is resolved at evaluation.
    """
    rules: List[EcmaRule] = []
    for tpl in templates:
        rules.extend(tpl.rules)
    rules.extend(extra_rules)
    return ConnectionType(id=ctype_id, rules=tuple(rules), purpose=purpose,
                          template_refs=tuple(t.id for t in templates))


def evaluate(rules: Union[ConnectionType, Iterable[EcmaRule]],
             event: Optional[Event],
             attrs: Mapping[str, Any],
             action: Action,
             default: Modality = Modality.PERMITTED) -> Modality:
    """Fold every firing rule for ``action`` into one verdict.

    Forbidden beats Obligated beats Permitted; with no firing rule the
    caller-supplied default applies (the engine passes the rights-holder
    default, Permitted — non-holders are rejected before policy is asked).
    """
    if isinstance(rules, ConnectionType):
        rules = rules.rules
    fired = [r.modality for r in rules
             if r.action == action and r.fires(event, attrs)]
    if Modality.FORBIDDEN in fired:
        return Modality.FORBIDDEN
    if Modality.OBLIGATED in fired:
        return Modality.OBLIGATED
    if fired:
        return Modality.PERMITTED
    return default


# --- obligation ledger ----------------------------------------------------

@dataclass
class ObligationEntry:
    rule: EcmaRule
    status: str = "pending"        # pending | fulfilled
    evidence: Optional[str] = None  # NodeId of the accepted document

    def demanded_tag(self) -> Optional[str]:
        """Purpose tag an evidence artifact must carry, if any."""
        if self.rule.action.name in PARAM_ACTIONS:
            return self.rule.action.param
        return None

    def to_json(self) -> Dict[str, Any]:
        return {"rule": self.rule.text(), "status": self.status,
                "evidence": self.evidence}


@dataclass
class ObligationLedger:
    entries: List[ObligationEntry] = field(default_factory=list)

    def pending(self) -> List[ObligationEntry]:
        return [e for e in self.entries if e.status == "pending"]

    def all_fulfilled(self) -> bool:
        return not self.pending()

    def reset(self) -> None:
        for e in self.entries:
            e.status = "pending"
            e.evidence = None

    def to_json(self) -> List[Dict[str, Any]]:
        return [e.to_json() for e in self.entries]


# --- text form ------------------------------------------------------------

def _tokenize(text: str) -> List[str]:
    """Whitespace split with quoted strings kept whole and parens standalone."""
    tokens: List[str] = []
    buf: List[str] = []
    quote: Optional[str] = None
    for ch in text:
        if quote:
            if ch == quote:
                tokens.append("".join(buf))
                buf = []
                quote = None
            else:
                buf.append(ch)
        elif ch in "\"'":
            if buf:
                tokens.append("".join(buf))
                buf = []
            quote = ch
            buf.append("\0")  # marker: token was quoted
        elif ch in "()":
            if buf:
                tokens.append("".join(buf))
                buf = []
            tokens.append(ch)
        elif ch.isspace():
            if buf:
                tokens.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if quote:
        raise InvalidArgument(f"unterminated quote in {text!r}")
    if buf:
        tokens.append("".join(buf))
    return tokens


def _parse_literal(token: str) -> Any:
    if token.startswith("\0"):
        return token[1:]
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    if token == "true":
        return True
    if token == "false":
        return False
    return token


class _CondParser:
    def __init__(self, tokens: List[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise InvalidArgument("unexpected end of condition")
        self.pos += 1
        return tok

    def parse(self) -> Condition:
        cond = self.or_expr()
        if self.peek() is not None:
            raise InvalidArgument(f"trailing condition tokens at {self.peek()!r}")
        return cond

    def or_expr(self) -> Condition:
        terms = [self.and_expr()]
        while self.peek() == "or":
            self.take()
            terms.append(self.and_expr())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def and_expr(self) -> Condition:
        terms = [self.unary()]
        while self.peek() == "and":
            self.take()
            terms.append(self.unary())
        return terms[0] if len(terms) == 1 else And(tuple(terms))

    def unary(self) -> Condition:
        if self.peek() == "not":
            self.take()
            return Not(self.unary())
        if self.peek() == "(":
            self.take()
            inner = self.or_expr()
            if self.take() != ")":
                raise InvalidArgument("missing ) in condition")
            return inner
        key = self.take()
        op = self.take()
        op = _OP_ALIASES.get(op, op)
        if op not in _OPS:
            raise InvalidArgument(f"unknown comparison operator {op!r}")
        literal = _parse_literal(self.take())
        return Cmp(key, op, literal)


def parse_condition(text: str) -> Condition:
    return _CondParser(_tokenize(text)).parse()


def parse_rule(text: str) -> EcmaRule:
    """Parse the one-line rule form; raises InvalidArgument on bad syntax.

    Modality and action are always the final two whitespace-delimited
    words, so the split happens from the right and the condition text (which
    may contain quotes and parentheses) is handed to the condition parser
    untouched.
    """
    parts = text.strip().rsplit(None, 2)
    if len(parts) < 2:
        raise InvalidArgument(f"rule too short: {text!r}")
    action = Action.parse(parts[-1])
    mod_tok = parts[-2]
    modality = _MODALITY_WORDS.get(mod_tok if len(mod_tok) == 1 else mod_tok.upper())
    if modality is None:
        raise InvalidArgument(f"unknown modality {mod_tok!r}")
    head = parts[0] if len(parts) == 3 else ""
    event = None
    condition = None
    if head:
        first, _, remainder = head.partition(" ")
        if first.split("(")[0] in EVENT_KINDS:
            event = EventPattern.parse(first)
            head = remainder.strip()
        if head:
            if head != "if" and not head.startswith("if "):
                raise InvalidArgument(f"expected 'if' before condition in {text!r}")
            condition = parse_condition(head[2:].strip())
    return EcmaRule(modality=modality, action=action, event=event,
                    condition=condition)
