"""The engine: single-writer command loop over the whole fabric state.

Every mutating entry point goes through :meth:`Engine.execute`, which
validates, applies, re-checks structural invariants, and appends one audit
event (plus any derived notification events).  Failed commands raise an
EngineError, are logged with the error code as outcome, and leave the
exported state untouched.  Identifiers are engine-assigned monotonic tokens
("agent-1", "node-17") and are never reused.
"""

from __future__ import annotations

import copy
import inspect
from typing import Any, Callable, Dict, List, Optional

from .access import AccessOps
from .audit import AuditEvent, AuditLog, canonical_json, state_digest
from .connections import ConnectionOps
from .errors import (CorruptLog, EngineError, InvalidArgument, KindMismatch,
                     UnknownAgent, UnknownConnection, UnknownConnectionType,
                     UnknownEndpoint, UnknownLocker, UnknownNode,
                     UnknownResource, UnknownTemplate)
from .exchange import ExchangeOps
from .invariants import check_engine
from .registry import RegistryOps
from .xnode import ProvenanceEntry, XNode, XNodeOps


COMMANDS = {
    "create-agent": "_cmd_create_agent",
    "create-locker": "_cmd_create_locker",
    "create-resource": "_cmd_create_resource",
    "define-template": "_cmd_define_template",
    "define-ctype": "_cmd_define_ctype",
    "publish-endpoint": "_cmd_publish_endpoint",
    "close-endpoint": "_cmd_close_endpoint",
    "connect": "_cmd_connect",
    "fulfill": "_cmd_fulfill",
    "close": "_cmd_close",
    "revoke-connection": "_cmd_revoke_connection",
    "share": "_cmd_share",
    "confer": "_cmd_confer",
    "transfer": "_cmd_transfer",
    "collateral": "_cmd_collateral",
    "revoke-artifact": "_cmd_revoke_artifact",
    "revert": "_cmd_revert",
    "subset": "_cmd_subset",
    "set-post": "_cmd_set_post",
    "read": "_cmd_read",
    "edit": "_cmd_edit",
    "delete": "_cmd_delete",
    "download": "_cmd_download",
    "verify": "_cmd_verify",
    "tick": "_cmd_tick",
}

_ACTOR_KEYS = ("actor", "owner", "approver")

_SIGNATURES: Dict[str, inspect.Signature] = {}


class Engine(RegistryOps, XNodeOps, ConnectionOps, ExchangeOps, AccessOps):
    def __init__(self) -> None:
        self.agents: Dict[str, Any] = {}
        self.lockers: Dict[str, Any] = {}
        self.resources: Dict[str, Any] = {}
        self.nodes: Dict[str, XNode] = {}
        self.endpoints: Dict[str, Any] = {}
        self.connections: Dict[str, Any] = {}
        self.templates: Dict[str, Any] = {}
        self.ctypes: Dict[str, Any] = {}
        self.tick_now = 0
        self.audit = AuditLog()
        self.inboxes: Dict[str, List[Dict[str, Any]]] = {}
        self.pending_reverts: Dict[str, List[str]] = {}
        self._counters: Dict[str, int] = {}
        self._derived: List[tuple] = []

    # --- command loop ----------------------------------------------------

    def execute(self, kind: str, **args: Any) -> Dict[str, Any]:
        method_name = COMMANDS.get(kind)
        if method_name is None:
            raise InvalidArgument(f"unknown command {kind!r}")
        handler: Callable = getattr(self, method_name)
        sig = _SIGNATURES.get(method_name)
        if sig is None:
            sig = _SIGNATURES[method_name] = inspect.signature(handler)
        try:
            sig.bind(**args)
        except TypeError as exc:
            raise InvalidArgument(f"{kind}: {exc}") from None
        actor = next((args[k] for k in _ACTOR_KEYS if k in args), "")
        self._derived = []
        try:
            result = handler(**args)
        except EngineError as exc:
            self._append_event(kind, actor, args, None, exc.code)
            raise
        check_engine(self)
        digest = self.state_hash()
        self._append_event(kind, actor, args, result, "ok", digest)
        for derived_kind, derived_actor, payload in self._derived:
            self._append_event(derived_kind, derived_actor, payload, None,
                               "ok", digest)
        self._derived = []
        return result

    def _append_event(self, kind: str, actor: str, args: Any,
                      result: Optional[Dict[str, Any]], outcome: str,
                      digest: Optional[str] = None) -> None:
        # snapshot, or later in-place edits would rewrite journalled args
        payload: Dict[str, Any] = {"args": copy.deepcopy(args)}
        if result is not None:
            payload["result"] = copy.deepcopy(result)
        if digest is None:
            if self.audit.events:
                # refused commands leave the state untouched, so the digest
                # of the previous event still describes it
                digest = self.audit.events[-1].state_hash
            else:
                digest = self.state_hash()
        event = AuditEvent(seq=self.audit.last_seq() + 1, tick=self.tick_now,
                           actor=actor, kind=kind, payload=payload,
                           outcome=outcome, state_hash=digest)
        self.audit.append(event)

    def _derived_event(self, kind: str, actor: str,
                       payload: Dict[str, Any]) -> None:
        self._derived.append((kind, actor, payload))

    # --- id assignment and lookups ---------------------------------------

    def _new_id(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        return f"{prefix}-{n}"

    def _agent(self, agent_id: str):
        try:
            return self.agents[agent_id]
        except KeyError:
            raise UnknownAgent(agent_id) from None

    def _require_agent(self, agent_id: str) -> None:
        self._agent(agent_id)

    def _locker(self, locker_id: str):
        try:
            return self.lockers[locker_id]
        except KeyError:
            raise UnknownLocker(str(locker_id)) from None

    def _resource(self, resource_id: str):
        try:
            return self.resources[resource_id]
        except KeyError:
            raise UnknownResource(resource_id) from None

    def _node(self, node_id: str) -> XNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(str(node_id)) from None

    def _live_node(self, node_id: str) -> XNode:
        node = self._node(node_id)
        if node.deleted:
            raise UnknownNode(f"{node_id} was deleted")
        return node

    def _connection(self, conn_id: str):
        try:
            return self.connections[conn_id]
        except KeyError:
            raise UnknownConnection(str(conn_id)) from None

    def _endpoint(self, endpoint_id: str):
        try:
            return self.endpoints[endpoint_id]
        except KeyError:
            raise UnknownEndpoint(str(endpoint_id)) from None

    def _ctype(self, ctype_id: str):
        try:
            return self.ctypes[ctype_id]
        except KeyError:
            raise UnknownConnectionType(str(ctype_id)) from None

    # --- shared mutation helpers -----------------------------------------

    def _relocate(self, node: XNode, locker_id: str) -> None:
        if node.located_in is not None:
            self._locker(node.located_in).nodes.discard(node.id)
        node.located_in = locker_id
        self._locker(locker_id).nodes.add(node.id)

    def _delete_node(self, node: XNode, reason: str,
                     connection: Optional[str] = None) -> None:
        node.provenance.append(ProvenanceEntry(
            reason, node.current_owner, node.current_owner, self.tick_now,
            connection))
        if node.located_in is not None:
            self._locker(node.located_in).nodes.discard(node.id)
        node.located_in = None
        node.deleted = True
        parent = self.nodes.get(node.pointer_to_original or "")
        if parent is not None:
            parent.shadows_list.discard(node.id)
            parent.vnode_list.discard(node.id)
        if node.pledge_partner is not None:
            partner = self.nodes.get(node.pledge_partner)
            if partner is not None:
                partner.pledge_partner = None
            node.pledge_partner = None
        node.pledge_role = None

    def _notify(self, agent_id: str, message: Dict[str, Any]) -> None:
        self.inboxes.setdefault(agent_id, []).append(message)

    # --- queries ----------------------------------------------------------

    def is_locked(self, node_id: str) -> bool:
        return self._live_node(node_id).is_locked()

    def pending_obligations(self, conn_id: str) -> List[Dict[str, Any]]:
        link = self._connection(conn_id)
        return [e.to_json() for e in link.ledger.pending()]

    def provenance_of(self, node_id: str) -> Dict[str, Any]:
        """Lifetime trail of a node: its own entries plus audit mentions."""
        node = self._node(node_id)
        return {
            "node": node_id,
            "provenance": [p.to_json() for p in node.provenance],
            "audit": [e.to_json() for e in self.audit.events_referencing(node_id)],
        }

    # --- serialization ----------------------------------------------------

    def state_dict(self) -> Dict[str, Any]:
        ctype_json = {cid: ct.to_json() for cid, ct in self.ctypes.items()}
        return {
            "agents": {a.id: a.to_json() for a in self.agents.values()},
            "lockers": {l.id: l.to_json() for l in self.lockers.values()},
            "resources": {r.id: r.to_json() for r in self.resources.values()},
            "nodes": {n.id: n.to_json() for n in self.nodes.values()},
            "connections": {c.id: c.to_json(ctype_json[c.ctype_id])
                            for c in self.connections.values()},
            "endpoints": {e.id: e.to_json(ctype_json[e.ctype_id])
                          for e in self.endpoints.values()},
            "tick": self.tick_now,
        }

    def state_json(self) -> str:
        return canonical_json(self.state_dict())

    def state_hash(self) -> str:
        return state_digest(self.state_dict())

    # --- replay ------------------------------------------------------------

    @classmethod
    def replay(cls, events) -> "Engine":
        """Rebuild an engine by re-running a journal, verifying as we go."""
        engine = cls()
        events = list(events)
        pos = 0
        while pos < len(events):
            event = events[pos]
            if event.kind not in COMMANDS:
                raise CorruptLog(f"seq {event.seq}: unknown kind {event.kind!r}")
            args = event.payload.get("args")
            if not isinstance(args, dict):
                raise CorruptLog(f"seq {event.seq}: payload has no args")
            before = engine.audit.last_seq()
            try:
                engine.execute(event.kind, **args)
                outcome = "ok"
            except EngineError as exc:
                outcome = exc.code
            if outcome != event.outcome:
                raise CorruptLog(
                    f"seq {event.seq}: outcome {outcome} != recorded {event.outcome}")
            replayed = engine.audit.events[before:]
            expected = events[pos:pos + len(replayed)]
            for new, old in zip(replayed, expected):
                if new.to_json() != old.to_json():
                    raise CorruptLog(
                        f"seq {old.seq}: replay diverged from recorded event")
            pos += len(replayed)
        return engine
