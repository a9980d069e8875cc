"""Append-only audit log.

Events carry a gapless sequence number, the logical tick, the acting agent,
the command kind, a canonical-JSON payload ({"args": ..., "result": ...}),
the outcome ("ok" or an error code) and a digest of the engine state after
the command.  Canonical JSON means sorted keys, no insignificant whitespace,
UTF-8.  The log persists as newline-delimited JSON and is the authoritative
record: state snapshots are derivable, the log is not.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, TextIO

from .errors import CorruptLog, SequenceGap


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def state_digest(state: Dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(state).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    tick: int
    actor: str
    kind: str
    payload: Dict[str, Any]
    outcome: str
    state_hash: str

    def to_json(self) -> Dict[str, Any]:
        return {"seq": self.seq, "tick": self.tick, "actor": self.actor,
                "kind": self.kind, "payload": self.payload,
                "outcome": self.outcome, "state_hash": self.state_hash}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "AuditEvent":
        try:
            return cls(seq=data["seq"], tick=data["tick"], actor=data["actor"],
                       kind=data["kind"], payload=data["payload"],
                       outcome=data["outcome"], state_hash=data["state_hash"])
        except (KeyError, TypeError) as exc:
            raise CorruptLog(f"malformed audit event: {exc}") from exc

    def line(self) -> str:
        return canonical_json(self.to_json())


class AuditLog:
    def __init__(self) -> None:
        self.events: List[AuditEvent] = []

    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else 0

    def append(self, event: AuditEvent) -> int:
        expected = self.last_seq() + 1
        if event.seq != expected:
            raise SequenceGap(f"expected seq {expected}, got {event.seq}")
        self.events.append(event)
        return event.seq

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[AuditEvent]:
        return iter(self.events)

    def events_referencing(self, token: str) -> List[AuditEvent]:
        """Every event whose payload mentions the given identifier."""
        return [e for e in self.events if _mentions(e.payload, token)]

    def write_ndjson(self, stream: TextIO) -> None:
        for event in self.events:
            stream.write(event.line())
            stream.write("\n")

    @staticmethod
    def read_ndjson(stream: TextIO) -> List[AuditEvent]:
        events: List[AuditEvent] = []
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLog(f"line {lineno}: not valid JSON") from exc
            events.append(AuditEvent.from_json(data))
        for i, event in enumerate(events, start=1):
            if event.seq != i:
                raise CorruptLog(f"sequence gap at seq {event.seq} (expected {i})")
        return events


def _mentions(obj: Any, token: str) -> bool:
    if isinstance(obj, str):
        return obj == token
    if isinstance(obj, dict):
        return any(_mentions(v, token) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return any(_mentions(v, token) for v in obj)
    return False
