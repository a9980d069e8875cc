"""Endpoints and the connection lifecycle.

A connection joins a guest locker to an endpoint published on a host locker
and moves through requested -> pending_obligations -> live -> closed, with
revoked reachable from pending_obligations and live.  Closed and revoked are
terminal.  Obligations materialize when the connection is requested, from
the Obligated rules of the endpoint's connection type; the connection only
goes live once every ledger entry is fulfilled by a matching document in the
host locker.  Revoking a connection rolls back its exchanges newest-first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .errors import (AlreadyReverted, CrossBorderUnsupported, EndpointClosed,
                     EvidenceMismatch, InvalidArgument, Locked, NotAuthorized,
                     NotLockerOwner, SelfConnection, UnknownNode, WrongState)
from .policy import Event, Modality, ObligationEntry, ObligationLedger
from .xnode import ProvenanceEntry

STATES = ("requested", "pending_obligations", "live", "closed", "revoked")

ALLOWED_TRANSITIONS = {
    ("requested", "pending_obligations"),
    ("pending_obligations", "live"),
    ("pending_obligations", "revoked"),
    ("live", "closed"),
    ("live", "revoked"),
}


@dataclass
class Endpoint:
    id: str
    host_locker: str
    ctype_id: str
    open: bool = True
    jurisdiction: Optional[str] = None

    def to_json(self, ctype_json: Dict[str, Any]) -> Dict[str, Any]:
        return {"id": self.id, "host_locker": self.host_locker,
                "ctype": ctype_json, "open": self.open,
                "jurisdiction": self.jurisdiction}


@dataclass
class ExchangeRecord:
    operator: str                      # share | confer | transfer | collateral
    node: str                          # artifact created or moved
    sender: str
    counterpart_node: Optional[str] = None
    reverted: bool = False
    rollback: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {"operator": self.operator, "node": self.node,
                "counterpart_node": self.counterpart_node,
                "reverted": self.reverted}


@dataclass
class Connection:
    id: str
    host_locker: str
    guest_locker: str
    ctype_id: str
    state: str = "requested"
    attrs: Dict[str, Any] = field(default_factory=dict)
    ledger: ObligationLedger = field(default_factory=ObligationLedger)
    records: List[ExchangeRecord] = field(default_factory=list)
    history: List[str] = field(default_factory=lambda: ["requested"])

    def move_to(self, state: str) -> None:
        if (self.state, state) not in ALLOWED_TRANSITIONS:
            raise WrongState(f"{self.id} cannot go {self.state} -> {state}")
        self.state = state
        self.history.append(state)

    def to_json(self, ctype_json: Dict[str, Any]) -> Dict[str, Any]:
        return {"id": self.id, "host_locker": self.host_locker,
                "guest_locker": self.guest_locker, "ctype": ctype_json,
                "state": self.state, "attrs": dict(sorted(self.attrs.items())),
                "obligations": self.ledger.to_json(),
                "records": [r.to_json() for r in self.records],
                "history": list(self.history)}


class ConnectionOps:
    def _cmd_publish_endpoint(self, host: str, ctype: str, actor: str,
                              jurisdiction: Optional[str] = None) -> Dict[str, Any]:
        locker = self._locker(host)
        if locker.owner != actor:
            raise NotLockerOwner(f"{actor} does not own {host}")
        self._ctype(ctype)
        endpoint = Endpoint(id=self._new_id("endpoint"), host_locker=host,
                            ctype_id=ctype, jurisdiction=jurisdiction)
        self.endpoints[endpoint.id] = endpoint
        locker.endpoints.add(endpoint.id)
        return {"endpoint": endpoint.id}

    def _cmd_close_endpoint(self, endpoint: str, actor: str) -> Dict[str, Any]:
        ep = self._endpoint(endpoint)
        if self._locker(ep.host_locker).owner != actor:
            raise NotLockerOwner(f"{actor} does not own {ep.host_locker}")
        if not ep.open:
            raise WrongState(f"{endpoint} is already closed")
        ep.open = False
        return {"endpoint": endpoint}

    def _cmd_connect(self, guest: str, endpoint: str, actor: str,
                     attrs: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        ep = self._endpoint(endpoint)
        guest_locker = self._locker(guest)
        if guest_locker.owner != actor:
            raise NotLockerOwner(f"{actor} does not own {guest}")
        if not ep.open:
            raise EndpointClosed(endpoint)
        if ep.host_locker == guest:
            raise SelfConnection(f"{guest} cannot connect to itself")
        attrs = dict(attrs or {})
        declared = attrs.get("jurisdiction")
        if (ep.jurisdiction is not None and declared is not None
                and ep.jurisdiction != declared):
            raise CrossBorderUnsupported(
                f"host declares {ep.jurisdiction}, guest declares {declared}")
        ctype = self._ctype(ep.ctype_id)
        if ctype.purpose and "purpose" not in attrs:
            attrs["purpose"] = ctype.purpose
        conn = Connection(id=self._new_id("conn"), host_locker=ep.host_locker,
                          guest_locker=guest, ctype_id=ep.ctype_id, attrs=attrs)
        requested = Event("connection_requested")
        for rule in ctype.rules:
            if rule.modality is Modality.OBLIGATED and rule.fires(requested, attrs):
                conn.ledger.entries.append(ObligationEntry(rule=rule))
        # requested and (with no obligations) pending_obligations are
        # zero-duration, but every connection walks the same graph
        conn.move_to("pending_obligations")
        if not conn.ledger.entries:
            conn.move_to("live")
        self.connections[conn.id] = conn
        guest_locker.connections.add(conn.id)
        self._locker(ep.host_locker).connections.add(conn.id)
        return {"connection": conn.id, "state": conn.state}

    def _cmd_fulfill(self, conn: str, obligation: int, evidence: str,
                     actor: str) -> Dict[str, Any]:
        """Cite a document already delivered to the host locker as evidence."""
        link = self._connection(conn)
        self._require_party(link, actor)
        if link.state != "pending_obligations":
            raise WrongState(f"{conn} is {link.state}")
        if not isinstance(obligation, int) or isinstance(obligation, bool) \
                or not 0 <= obligation < len(link.ledger.entries):
            raise InvalidArgument(f"no obligation #{obligation} on {conn}")
        entry = link.ledger.entries[obligation]
        if entry.status != "pending":
            raise InvalidArgument(f"obligation #{obligation} already fulfilled")
        node = self.nodes.get(evidence)
        if node is None or not node.live():
            raise UnknownNode(evidence)
        guest_agent = self._locker(link.guest_locker).owner
        demanded = entry.demanded_tag()
        if demanded is None:
            raise EvidenceMismatch(
                f"obligation #{obligation} names no document kind")
        if (node.located_in != link.host_locker or node.kind not in ("v", "s")
                or node.creator != guest_agent or node.invalidated
                or not node.usable_at(self.tick_now)
                or node.purpose != demanded):
            raise EvidenceMismatch(
                f"{evidence} does not satisfy {demanded!r}")
        entry.status = "fulfilled"
        entry.evidence = evidence
        if link.ledger.all_fulfilled():
            link.move_to("live")
        return {"connection": conn, "state": link.state}

    def _cmd_close(self, conn: str, actor: str) -> Dict[str, Any]:
        link = self._connection(conn)
        self._require_party(link, actor)
        if link.state != "live":
            raise WrongState(f"{conn} is {link.state}")
        link.move_to("closed")
        return {"connection": conn, "state": link.state}

    def _cmd_revoke_connection(self, conn: str, actor: str) -> Dict[str, Any]:
        link = self._connection(conn)
        self._require_party(link, actor)
        if link.state not in ("pending_obligations", "live"):
            raise WrongState(f"{conn} is {link.state}")
        # refuse outright rather than strand a composition built on top of
        # one of our artifacts; the sweep below must never partially apply
        for record in link.records:
            if record.reverted:
                continue
            node = self.nodes[record.node]
            if not node.live():
                continue
            if node.kind != "v" and node.is_locked():
                raise Locked(f"{record.node} is locked into a newer "
                             f"composition; revert that first")
            if (record.operator == "transfer"
                    and node.located_in != record.rollback["dest_locker"]):
                raise WrongState(f"{record.node} has moved on; "
                                 f"revoke the newer exchange first")
        for record in reversed(link.records):
            if record.reverted:
                continue
            if not self.nodes[record.node].live():
                record.reverted = True
                continue
            self._rollback_record(link, record)
            record.reverted = True
        link.ledger.reset()
        link.move_to("revoked")
        return {"connection": conn, "state": link.state}

    def _require_party(self, link: Connection, actor: str) -> None:
        owners = {self._locker(link.host_locker).owner,
                  self._locker(link.guest_locker).owner}
        if actor not in owners:
            raise NotAuthorized(f"{actor} is not a party to {link.id}")

    # --- rollback shared by revoke-connection and revoke-artifact --------

    def _rollback_record(self, link: Connection, record: ExchangeRecord) -> None:
        if record.operator == "share":
            child = self.nodes[record.node]
            self._delete_node(child, reason="revoked", connection=link.id)
        elif record.operator == "transfer":
            node = self.nodes[record.node]
            self._relocate(node, record.rollback["prev_locker"])
            if node.kind != "v":
                node.primary_owner = record.rollback["prev_po"]
            node.current_owner = record.rollback["prev_co"]
            for child_id in record.rollback.get("invalidated", ()):
                child = self.nodes[child_id]
                child.invalidated = False
                child.provenance.append(ProvenanceEntry(
                    "restored", node.current_owner, child.current_owner,
                    self.tick_now, link.id))
            origin_co = record.rollback.get("origin_prev_co")
            if origin_co is not None:
                origin = self.nodes.get(node.pointer_to_original)
                if origin is not None:
                    origin.current_owner = origin_co
            node.provenance.append(ProvenanceEntry(
                "returned", record.rollback["prev_co"],
                record.rollback["prev_co"], self.tick_now, link.id))
        elif record.operator == "confer":
            child = self.nodes[record.node]
            origin = self.nodes[record.counterpart_node]
            conferred_owner = child.current_owner
            self._delete_node(child, reason="revoked", connection=link.id)
            origin.current_owner = origin.primary_owner
            origin.provenance.append(ProvenanceEntry(
                "reverted", conferred_owner, origin.primary_owner,
                self.tick_now, link.id))
            self._notify(conferred_owner, {
                "kind": "conferment_reverted", "node": child.id,
                "tick": self.tick_now})
        elif record.operator == "collateral":
            self._unwind_pledge(self.nodes[record.node], record, link.id)
        else:  # pragma: no cover - defensive
            raise InvalidArgument(f"unknown operator {record.operator!r}")

    def _unwind_pledge(self, pledged, record: ExchangeRecord,
                       conn_id: Optional[str]) -> None:
        receipt = self.nodes[record.counterpart_node]
        pledger = pledged.primary_owner
        holder = pledged.current_owner
        self._relocate(pledged, record.rollback["prev_locker"])
        pledged.current_owner = pledger
        pledged.pledge_partner = None
        pledged.pledge_role = None
        self._delete_node(receipt, reason="reverted", connection=conn_id)
        pledged.provenance.append(ProvenanceEntry(
            "reverted", holder, pledger, self.tick_now, conn_id))
        self.pending_reverts.pop(pledged.id, None)
