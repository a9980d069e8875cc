"""Structural invariants re-checked after every mutating command.

A violation here is an engine bug, not a user error, so it raises
InvariantViolation (a RuntimeError) rather than an EngineError code.
"""

from __future__ import annotations

from .connections import ALLOWED_TRANSITIONS
from .xnode import POST_APPLICABLE


class InvariantViolation(RuntimeError):
    pass


def _fail(msg: str) -> None:
    raise InvariantViolation(msg)


def check_engine(engine) -> None:
    _check_registry(engine)
    _check_nodes(engine)
    _check_connections(engine)


def _check_registry(engine) -> None:
    for agent in engine.agents.values():
        for lid in agent.lockers:
            if lid not in engine.lockers:
                _fail(f"{agent.id} references missing locker {lid}")
            if engine.lockers[lid].owner != agent.id:
                _fail(f"{lid} owner disagrees with {agent.id}")
    for locker in engine.lockers.values():
        if locker.owner not in engine.agents:
            _fail(f"{locker.id} owned by missing agent {locker.owner}")
        for nid in locker.nodes:
            node = engine.nodes.get(nid)
            if node is None:
                _fail(f"{locker.id} holds missing node {nid}")
            if node.deleted:
                _fail(f"{locker.id} holds deleted node {nid}")
            if node.located_in != locker.id:
                _fail(f"{nid} located_in disagrees with {locker.id}")
        for eid in locker.endpoints:
            if eid not in engine.endpoints:
                _fail(f"{locker.id} lists missing endpoint {eid}")
        for cid in locker.connections:
            if cid not in engine.connections:
                _fail(f"{locker.id} lists missing connection {cid}")


def _check_nodes(engine) -> None:
    located = {}
    for locker in engine.lockers.values():
        for nid in locker.nodes:
            if nid in located:
                _fail(f"{nid} held by two lockers")
            located[nid] = locker.id
    for node in engine.nodes.values():
        if node.kind not in ("i", "v", "s"):
            _fail(f"{node.id} has kind {node.kind!r}")
        if node.deleted:
            if node.id in located:
                _fail(f"deleted {node.id} still held")
            continue
        if located.get(node.id) != node.located_in:
            _fail(f"{node.id} not held by its locker {node.located_in}")
        if not node.provenance or node.provenance[0].event != "created":
            _fail(f"{node.id} provenance does not start with created")
        if node.current_owner not in engine.agents:
            _fail(f"{node.id} current_owner unknown")
        for flag in node.post.flags:
            if flag not in POST_APPLICABLE[node.kind]:
                _fail(f"{node.id} carries inapplicable flag {flag}")
        for name in node.post.creator_forbidden:
            if node.post.flags.get(name):
                _fail(f"{node.id} grants creator-forbidden {name}")
        if node.kind == "i":
            if node.pointer_to_original is not None:
                _fail(f"i-node {node.id} has pointer_to_original")
            if node.pointer_to_resource is None:
                _fail(f"i-node {node.id} lacks resource pointer")
            if node.primary_owner is None:
                _fail(f"i-node {node.id} lacks primary_owner")
        elif node.kind == "v":
            if node.primary_owner is not None:
                _fail(f"v-node {node.id} has primary_owner")
            if node.pointer_to_resource is not None:
                _fail(f"v-node {node.id} has resource pointer")
            if node.shadows_list:
                _fail(f"v-node {node.id} has shadows")
            if node.validity is None:
                _fail(f"v-node {node.id} lacks validity")
            if node.pointer_to_original is None:
                _fail(f"v-node {node.id} lacks pointer_to_original")
        else:
            if node.pointer_to_original is None:
                _fail(f"s-node {node.id} lacks pointer_to_original")
            if node.pointer_to_resource is None:
                _fail(f"s-node {node.id} lacks resource pointer")
            if node.primary_owner is None:
                _fail(f"s-node {node.id} lacks primary_owner")
        if node.pointer_to_resource is not None:
            rid = node.pointer_to_resource[0]
            if rid not in engine.resources:
                _fail(f"{node.id} points at missing resource {rid}")
        # pointer symmetry, child -> parent
        if node.pointer_to_original is not None:
            parent = engine.nodes.get(node.pointer_to_original)
            if parent is None:
                _fail(f"{node.id} points at missing parent")
            if not parent.deleted and node.id not in (parent.shadows_list
                                                      | parent.vnode_list):
                _fail(f"{node.id} missing from parent lists of {parent.id}")
        # pointer symmetry, parent -> child
        for child_id in node.shadows_list:
            child = engine.nodes.get(child_id)
            if child is None:
                _fail(f"{node.id} shadow {child_id} missing")
            if child.kind != "s":
                _fail(f"{node.id} shadow {child_id} is not an s-node")
            if child.pointer_to_original != node.id:
                _fail(f"{node.id} shadow {child_id} points elsewhere")
        for child_id in node.vnode_list:
            child = engine.nodes.get(child_id)
            if child is None:
                _fail(f"{node.id} v-child {child_id} missing")
            if child.kind != "v":
                _fail(f"{node.id} v-child {child_id} is not a v-node")
            if child.pointer_to_original != node.id:
                _fail(f"{node.id} v-child {child_id} points elsewhere")
        if node.pledge_partner is not None:
            partner = engine.nodes.get(node.pledge_partner)
            if partner is None or partner.deleted:
                _fail(f"{node.id} pledge partner missing")
            if partner.pledge_partner != node.id:
                _fail(f"pledge pointers between {node.id} and {partner.id} asymmetric")
        # lock coherence for i/s: locked iff pledged or conferred away
        if node.kind in ("i", "s") and not node.invalidated:
            locked = node.primary_owner != node.current_owner
            outstanding = node.pledge_partner is not None or node.pledge_role == "pledged"
            if not outstanding:
                for child_id in node.shadows_list:
                    child = engine.nodes[child_id]
                    # a conferred shadow keeps the origin locked even while
                    # it is itself pledged away; only receipts are excluded
                    if (child.live() and child.pledge_role != "receipt"
                            and child.primary_owner == node.current_owner):
                        outstanding = True
                        break
            if locked and not outstanding:
                _fail(f"{node.id} locked with no outstanding conferment/pledge")


def _check_connections(engine) -> None:
    for conn in engine.connections.values():
        if conn.host_locker not in engine.lockers:
            _fail(f"{conn.id} host locker missing")
        if conn.guest_locker not in engine.lockers:
            _fail(f"{conn.id} guest locker missing")
        if conn.host_locker == conn.guest_locker:
            _fail(f"{conn.id} connects a locker to itself")
        if conn.ctype_id not in engine.ctypes:
            _fail(f"{conn.id} ctype missing")
        if conn.state == "live" and not conn.ledger.all_fulfilled():
            _fail(f"{conn.id} live with pending obligations")
        for prev, nxt in zip(conn.history, conn.history[1:]):
            if (prev, nxt) not in ALLOWED_TRANSITIONS:
                _fail(f"{conn.id} made illegal transition {prev}->{nxt}")
        for record in conn.records:
            if record.node not in engine.nodes:
                _fail(f"{conn.id} record names missing node {record.node}")
            if (record.counterpart_node is not None
                    and record.counterpart_node not in engine.nodes):
                _fail(f"{conn.id} record names missing counterpart")
    for endpoint in engine.endpoints.values():
        if endpoint.host_locker not in engine.lockers:
            _fail(f"{endpoint.id} host locker missing")
        if endpoint.ctype_id not in engine.ctypes:
            _fail(f"{endpoint.id} ctype missing")
