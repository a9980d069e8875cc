"""Exchange operators: share, confer, transfer, collateral, and their undo.

All four run over a live connection and move or mint artifacts between the
two lockers.  Lock discipline: a locked i- or s-node (primary owner differs
from current owner) only ever admits SHARE, and the lock check runs before
the sender-identity check so a second confer or a transfer of a conferred
origin reports Locked rather than Forbidden.  Sender identity: the actor
must own the sending locker and be the node's current owner; SHARE alone
also accepts the primary owner as custodian, so an issuer can keep granting
reads on a conferred origin it still hosts.

revoke-artifact undoes one exchange on a still-live connection.  revert
works regardless of connection state: a conferment is undone unilaterally by
the primary owner, a pledge needs both parties to approve (the first
approval is recorded and answered with ApprovalPending).
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, List, Optional, Tuple

from .connections import Connection, ExchangeRecord
from .errors import (AlreadyReverted, ApprovalPending, Expired, Forbidden,
                     Invalidated, InvalidArgument, KindMismatch, Locked,
                     NotAuthorized, NotConferred, NotLive, NotPledged,
                     PostConditionDenied, UnknownNode, WrongState)
from .policy import Action, Event, Modality, evaluate
from .xnode import ProvenanceEntry, XNode


class ExchangeOps:
    def _exchange_context(self, conn_id: str, node_id: str, actor: str):
        link = self._connection(conn_id)
        node = self._live_node(node_id)
        if link.state != "live":
            raise NotLive(f"{conn_id} is {link.state}")
        if node.located_in == link.host_locker:
            sender_locker, recipient_locker = link.host_locker, link.guest_locker
        elif node.located_in == link.guest_locker:
            sender_locker, recipient_locker = link.guest_locker, link.host_locker
        else:
            raise Forbidden(f"{node_id} is not on {conn_id}")
        if self._locker(sender_locker).owner != actor:
            raise Forbidden(f"{actor} does not hold {node_id}")
        if node.invalidated:
            raise Invalidated(f"{node_id} was invalidated by a transfer")
        recipient = self._locker(recipient_locker).owner
        return link, node, sender_locker, recipient_locker, recipient

    @staticmethod
    def _require_holder(node: XNode, actor: str, primary_ok: bool = False,
                        both: bool = False) -> None:
        # Lock checks run before this, so requiring PO==CO==actor on i/s
        # nodes mirrors the "sender is primary and current owner" rule while
        # v-nodes (no primary owner) fall through to the plain CO check.
        if both and node.primary_owner is not None:
            if actor == node.current_owner and actor == node.primary_owner:
                return
        elif primary_ok and actor == node.primary_owner:
            return
        elif actor == node.current_owner:
            return
        raise Forbidden(f"{actor} has no rights on {node.id}")

    def _policy_gate(self, link: Connection, node: XNode, action_name: str) -> None:
        attrs = dict(link.attrs)
        attrs["artifact_purpose"] = node.purpose
        verdict = evaluate(self._ctype(link.ctype_id),
                           Event("artifact_requested", node.kind),
                           attrs, Action(action_name))
        if verdict is Modality.FORBIDDEN:
            raise Forbidden(f"{action_name} is forbidden on {link.id}")

    # --- operators -------------------------------------------------------

    def _cmd_share(self, conn: str, node: str, actor: str,
                   validity: Optional[int] = None, purpose: str = "",
                   deny: Iterable[str] = (), forbid: Iterable[str] = ()
                   ) -> Dict[str, Any]:
        """Mint a v-node access privilege in the counterpart locker."""
        link, source, _, recipient_locker, recipient = self._exchange_context(
            conn, node, actor)
        self._require_holder(source, actor, primary_ok=True)
        if validity is None:
            raise InvalidArgument("share requires validity=<tick>")
        if not isinstance(validity, int) or isinstance(validity, bool):
            raise InvalidArgument("validity must be an integer tick")
        if source.kind == "v" and not source.usable_at(self.tick_now):
            raise Expired(f"{node} expired at tick {source.validity}")
        if not source.post.allows("share"):
            raise PostConditionDenied(f"share is not granted on {node}")
        self._policy_gate(link, source, "share")
        child = XNode(
            id=self._new_id("node"), kind="v", creator=actor,
            current_owner=recipient, located_in=recipient_locker,
            purpose=purpose or source.purpose, pointer_to_original=source.id,
            validity=validity, post=source.post.derive("v", deny, forbid),
        )
        child.provenance.append(ProvenanceEntry(
            "created", actor, recipient, self.tick_now, link.id))
        self.nodes[child.id] = child
        self._locker(recipient_locker).nodes.add(child.id)
        source.vnode_list.add(child.id)
        source.provenance.append(ProvenanceEntry(
            "shared", actor, recipient, self.tick_now, link.id))
        link.records.append(ExchangeRecord(
            operator="share", node=child.id, sender=actor))
        return {"node": child.id}

    def _cmd_confer(self, conn: str, node: str, actor: str, purpose: str = "",
                    deny: Iterable[str] = (), forbid: Iterable[str] = ()
                    ) -> Dict[str, Any]:
        """Hand the counterpart its own shadow; the origin stays but locks."""
        link, source, _, recipient_locker, recipient = self._exchange_context(
            conn, node, actor)
        if source.kind == "v":
            raise KindMismatch("confer is undefined for v-nodes")
        if source.is_locked():
            raise Locked(f"{node} is locked")
        self._require_holder(source, actor, both=True)
        if not source.post.allows("confer"):
            raise PostConditionDenied(f"confer is not granted on {node}")
        self._policy_gate(link, source, "confer")
        rid, mask = source.pointer_to_resource
        child = XNode(
            id=self._new_id("node"), kind="s", creator=actor,
            current_owner=recipient, primary_owner=recipient,
            located_in=recipient_locker, purpose=purpose or source.purpose,
            pointer_to_original=source.id, pointer_to_resource=(rid, mask),
            resource_version=self.resources[rid].version,
            post=source.post.derive("s", deny, forbid),
        )
        child.provenance.append(ProvenanceEntry(
            "created", actor, recipient, self.tick_now, link.id))
        self.nodes[child.id] = child
        self._locker(recipient_locker).nodes.add(child.id)
        source.shadows_list.add(child.id)
        source.current_owner = recipient
        source.provenance.append(ProvenanceEntry(
            "conferred", actor, recipient, self.tick_now, link.id))
        link.records.append(ExchangeRecord(
            operator="confer", node=child.id, counterpart_node=source.id,
            sender=actor))
        return {"node": child.id}

    def _cmd_transfer(self, conn: str, node: str, actor: str) -> Dict[str, Any]:
        """Relocate the artifact itself; prior grants on it die."""
        link, source, sender_locker, recipient_locker, recipient = \
            self._exchange_context(conn, node, actor)
        if source.kind != "v" and source.is_locked():
            raise Locked(f"{node} is locked")
        self._require_holder(source, actor)
        if not source.post.allows("transfer"):
            raise PostConditionDenied(f"transfer is not granted on {node}")
        self._policy_gate(link, source, "transfer")
        rollback: Dict[str, Any] = {
            "prev_locker": sender_locker,
            "dest_locker": recipient_locker,
            "prev_po": source.primary_owner,
            "prev_co": source.current_owner,
        }
        invalidated: List[str] = []
        for child_id in sorted(source.shadows_list | source.vnode_list):
            child = self.nodes[child_id]
            if child.live() and not child.invalidated:
                child.invalidated = True
                child.provenance.append(ProvenanceEntry(
                    "invalidated", actor, child.current_owner,
                    self.tick_now, link.id))
                invalidated.append(child_id)
        rollback["invalidated"] = invalidated
        if source.kind == "s" and source.pointer_to_original is not None:
            origin = self.nodes.get(source.pointer_to_original)
            if origin is not None and origin.current_owner == source.current_owner:
                rollback["origin_prev_co"] = origin.current_owner
                origin.current_owner = recipient
        self._relocate(source, recipient_locker)
        if source.kind != "v":
            source.primary_owner = recipient
        source.current_owner = recipient
        source.provenance.append(ProvenanceEntry(
            "transferred", actor, recipient, self.tick_now, link.id))
        link.records.append(ExchangeRecord(
            operator="transfer", node=source.id, sender=actor,
            rollback=rollback))
        return {"node": source.id}

    def _cmd_collateral(self, conn: str, node: str, actor: str,
                        purpose: str = "", deny: Iterable[str] = (),
                        forbid: Iterable[str] = ()) -> Dict[str, Any]:
        """Pledge: artifact moves to the counterpart, a receipt shadow stays."""
        link, source, sender_locker, recipient_locker, recipient = \
            self._exchange_context(conn, node, actor)
        if source.kind == "v":
            raise KindMismatch("collateral is undefined for v-nodes")
        if source.is_locked():
            raise Locked(f"{node} is locked")
        self._require_holder(source, actor, both=True)
        if not source.post.allows("collateral"):
            raise PostConditionDenied(f"collateral is not granted on {node}")
        self._policy_gate(link, source, "collateral")
        rollback = {"prev_locker": sender_locker}
        self._relocate(source, recipient_locker)
        source.current_owner = recipient
        source.pledge_role = "pledged"
        rid, mask = source.pointer_to_resource
        receipt = XNode(
            id=self._new_id("node"), kind="s", creator=recipient,
            current_owner=actor, primary_owner=recipient,
            located_in=sender_locker, purpose=purpose or source.purpose,
            pointer_to_original=source.id, pointer_to_resource=(rid, mask),
            resource_version=self.resources[rid].version,
            post=source.post.derive("s", deny, forbid),
            pledge_partner=source.id, pledge_role="receipt",
        )
        receipt.provenance.append(ProvenanceEntry(
            "created", recipient, actor, self.tick_now, link.id))
        self.nodes[receipt.id] = receipt
        self._locker(sender_locker).nodes.add(receipt.id)
        source.shadows_list.add(receipt.id)
        source.pledge_partner = receipt.id
        source.provenance.append(ProvenanceEntry(
            "pledged", actor, recipient, self.tick_now, link.id))
        link.records.append(ExchangeRecord(
            operator="collateral", node=source.id, counterpart_node=receipt.id,
            sender=actor, rollback=rollback))
        return {"pledged": source.id, "receipt": receipt.id}

    # --- undo ------------------------------------------------------------

    def _cmd_revoke_artifact(self, conn: str, node: str, actor: str) -> Dict[str, Any]:
        link = self._connection(conn)
        if link.state != "live":
            raise WrongState(f"{conn} is {link.state}")
        record = None
        for rec in reversed(link.records):
            if rec.node == node:
                record = rec
                break
        if record is None:
            raise UnknownNode(f"no exchange of {node} on {conn}")
        if record.reverted:
            raise AlreadyReverted(f"{node} on {conn}")
        if actor != record.sender:
            raise NotAuthorized(f"{actor} did not send {node} on {conn}")
        child = self.nodes[record.node]
        if child.deleted:
            raise WrongState(f"{node} is gone; nothing left to roll back")
        if child.kind != "v" and child.is_locked():
            raise Locked(f"{node} is locked into a newer composition; "
                         f"revert that first")
        if (record.operator == "transfer"
                and child.located_in != record.rollback["dest_locker"]):
            raise WrongState(f"{node} has moved on; "
                             f"revoke the newer exchange first")
        self._rollback_record(link, record)
        record.reverted = True
        return {"connection": conn, "node": node}

    def _cmd_revert(self, node: str, approver: str) -> Dict[str, Any]:
        target = self._live_node(node)
        self._require_agent(approver)
        if target.pledge_partner is not None:
            return self._revert_pledge(target, approver)
        return self._revert_conferment(target, approver)

    def _revert_pledge(self, target: XNode, approver: str) -> Dict[str, Any]:
        if target.pledge_role == "pledged":
            pledged = target
        else:
            pledged = self._live_node(target.pledge_partner)
        pledger = pledged.primary_owner
        holder = pledged.current_owner
        if approver not in (pledger, holder):
            raise NotAuthorized(f"{approver} is not a party to the pledge of {pledged.id}")
        record = self._find_record("collateral", pledged.id)
        if record is None:  # pragma: no cover - defensive
            raise NotPledged(pledged.id)
        approvals = self.pending_reverts.setdefault(pledged.id, [])
        if approver not in approvals:
            approvals.append(approver)
        if set(approvals) != {pledger, holder}:
            raise ApprovalPending(
                f"revert of {pledged.id} needs approval from both parties")
        conn_id, rec = record
        self._unwind_pledge(pledged, rec, conn_id)
        rec.reverted = True
        return {"node": pledged.id, "status": "reverted"}

    def _revert_conferment(self, target: XNode, approver: str) -> Dict[str, Any]:
        shadow, origin = self._conferment_pair(target)
        if shadow is None:
            raise NotConferred(f"{target.id} is not part of a conferment or pledge")
        if approver != origin.primary_owner:
            raise NotAuthorized(
                f"only {origin.primary_owner} may revert the conferment of {origin.id}")
        if shadow.pledge_partner is not None:
            raise Locked(f"{shadow.id} is pledged; revert the pledge first")
        record = self._find_record("confer", shadow.id)
        conferred_owner = shadow.current_owner
        conn_id = record[0] if record else None
        self._delete_node(shadow, reason="reverted", connection=conn_id)
        origin.current_owner = origin.primary_owner
        origin.provenance.append(ProvenanceEntry(
            "reverted", conferred_owner, origin.primary_owner,
            self.tick_now, conn_id))
        self._notify(conferred_owner, {
            "kind": "conferment_reverted", "node": shadow.id,
            "tick": self.tick_now})
        if record is not None:
            record[1].reverted = True
        return {"node": origin.id, "status": "reverted"}

    def _conferment_pair(self, target: XNode):
        """(shadow, origin) for either half of a conferment, else (None, None)."""
        if target.kind == "s" and target.pointer_to_original is not None:
            origin = self.nodes.get(target.pointer_to_original)
            if (origin is not None and origin.live()
                    and target.id in origin.shadows_list
                    and target.pledge_partner is None
                    and origin.current_owner == target.primary_owner):
                return target, origin
        if target.kind in ("i", "s") and target.is_locked():
            for child_id in sorted(target.shadows_list):
                child = self.nodes[child_id]
                # a receipt also sits in a shadows_list, but it points at the
                # pledged node, never at a merely conferred one
                if (child.live() and child.pointer_to_original == target.id
                        and child.primary_owner == target.current_owner):
                    return child, target
        return None, None

    def _find_record(self, operator: str, node_id: str):
        for link in self.connections.values():
            for rec in reversed(link.records):
                if (rec.operator == operator and not rec.reverted
                        and (rec.node == node_id
                             or rec.counterpart_node == node_id)):
                    return link.id, rec
        return None
