"""Ownership artifacts: i-, v- and s-nodes.

An i-node is the primary artifact anchoring a resource.  A v-node is a
transferable access privilege pointing back at its parent artifact; it has a
mandatory validity tick and no direct resource pointer.  An s-node is a
shadow created by conferment or by the receipt half of a pledge; it carries
both a parent pointer and a direct read-only resource pointer.

Post-condition flags express what exchanges the holder may perform next.
Flags that make no sense for a kind are structurally absent: v-nodes carry
only transfer/share/download, s-nodes everything except confer.  Actions in
``creator_forbidden`` stay denied on every descendant forever.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .errors import (Forbidden, InvalidArgument, KindMismatch, Locked,
                     NotAuthorized, PostConditionDenied)
from .model import FieldMask

KINDS = ("i", "v", "s")

POST_FLAG_NAMES = ("transfer", "confer", "share", "collateral", "subset", "download")

POST_APPLICABLE = {
    "i": frozenset(POST_FLAG_NAMES),
    "v": frozenset({"transfer", "share", "download"}),
    "s": frozenset(POST_FLAG_NAMES) - {"confer"},
}


@dataclass
class PostConditions:
    flags: Dict[str, bool]
    creator_forbidden: FrozenSet[str] = frozenset()

    @classmethod
    def defaults(cls, kind: str, forbidden: Iterable[str] = ()) -> "PostConditions":
        forbidden = frozenset(forbidden)
        flags = {name: name not in forbidden for name in sorted(POST_APPLICABLE[kind])}
        return cls(flags=flags, creator_forbidden=forbidden)

    def allows(self, action_name: str) -> bool:
        if action_name in self.creator_forbidden:
            return False
        return self.flags.get(action_name, False)

    def derive(self, child_kind: str, deny: Iterable[str] = (),
               forbid: Iterable[str] = ()) -> "PostConditions":
        """Child post-conditions: parent grant AND issuer grant, narrowing only."""
        deny = set(deny)
        forbidden = frozenset(self.creator_forbidden) | frozenset(forbid)
        flags = {}
        for name in sorted(POST_APPLICABLE[child_kind]):
            flags[name] = (self.allows(name) and name not in deny
                           and name not in forbidden)
        return PostConditions(flags=flags, creator_forbidden=forbidden)

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = dict(sorted(self.flags.items()))
        out["creator_forbidden"] = sorted(self.creator_forbidden)
        return out


@dataclass
class ProvenanceEntry:
    event: str
    from_agent: str
    to_agent: str
    tick: int
    connection: Optional[str] = None

    def to_json(self) -> Dict[str, Any]:
        return {"event": self.event, "from": self.from_agent,
                "to": self.to_agent, "tick": self.tick,
                "connection": self.connection}


# Table of serialized fields per kind, in emission order.
_FIELDS = {
    "i": ("creator", "primary_owner", "current_owner", "shadows_list",
          "vnode_list", "pointer_to_resource", "purpose", "provenance"),
    "v": ("creator", "current_owner", "pointer_to_original", "validity",
          "vnode_list", "purpose", "provenance"),
    "s": ("creator", "primary_owner", "current_owner", "pointer_to_original",
          "shadows_list", "vnode_list", "pointer_to_resource", "purpose",
          "provenance"),
}


@dataclass
class XNode:
    id: str
    kind: str
    creator: str
    current_owner: str
    located_in: Optional[str]
    purpose: str = ""
    primary_owner: Optional[str] = None
    pointer_to_resource: Optional[Tuple[str, FieldMask]] = None
    pointer_to_original: Optional[str] = None
    validity: Optional[int] = None
    shadows_list: Set[str] = field(default_factory=set)
    vnode_list: Set[str] = field(default_factory=set)
    provenance: List[ProvenanceEntry] = field(default_factory=list)
    post: PostConditions = field(default_factory=lambda: PostConditions.defaults("i"))
    pledge_partner: Optional[str] = None
    pledge_role: Optional[str] = None  # "pledged" | "receipt"
    resource_version: Optional[int] = None
    invalidated: bool = False
    expired: bool = False
    deleted: bool = False

    def is_locked(self) -> bool:
        """Ownership split: held for someone else, so no onward disposal."""
        if self.kind == "v":
            raise KindMismatch(f"{self.id} is a v-node; lock state is undefined")
        return self.primary_owner != self.current_owner

    def usable_at(self, tick: int) -> bool:
        if self.expired:
            return False
        if self.kind == "v" and self.validity is not None:
            return tick <= self.validity
        return True

    def live(self) -> bool:
        return not self.deleted

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"id": self.id, "kind": self.kind,
                               "located_in": self.located_in}
        for name in _FIELDS[self.kind]:
            if name == "shadows_list":
                out[name] = sorted(self.shadows_list)
            elif name == "vnode_list":
                out[name] = sorted(self.vnode_list)
            elif name == "pointer_to_resource":
                if self.pointer_to_resource is None:
                    out[name] = None
                else:
                    rid, mask = self.pointer_to_resource
                    out[name] = {"resource": rid, "mask": mask.to_json()}
            elif name == "provenance":
                out[name] = [p.to_json() for p in self.provenance]
            else:
                out[name] = getattr(self, name)
        out["post"] = self.post.to_json()
        if self.kind != "v" and self.validity is not None:
            out["validity"] = self.validity
        if self.pledge_partner is not None:
            out["pledge_partner"] = self.pledge_partner
        if self.kind == "s" and self.resource_version is not None:
            out["resource_version"] = self.resource_version
        if self.invalidated:
            out["invalidated"] = True
        if self.expired:
            out["expired"] = True
        if self.deleted:
            out["deleted"] = True
        return out


def new_inode(node_id: str, creator: str, locker: str, resource: str,
              mask: FieldMask, purpose: str, tick: int,
              forbidden: Iterable[str] = ()) -> XNode:
    node = XNode(id=node_id, kind="i", creator=creator, current_owner=creator,
                 primary_owner=creator, located_in=locker, purpose=purpose,
                 pointer_to_resource=(resource, mask),
                 post=PostConditions.defaults("i", forbidden))
    node.provenance.append(ProvenanceEntry("created", creator, creator, tick))
    return node


class XNodeOps:
    """Engine command handlers for node-local operations."""

    def _cmd_subset(self, node: str, actor: str, mask: List[str]) -> Dict[str, Any]:
        """Derive a narrowed i-node over the same resource, in place."""
        source = self._live_node(node)
        if source.kind == "v":
            raise KindMismatch(f"{node} is a v-node; subset needs a resource pointer")
        self._require_agent(actor)
        locker = self._locker(source.located_in)
        if locker.owner != actor:
            raise Forbidden(f"{actor} does not hold {node}")
        if source.is_locked():
            raise Locked(f"{node} is locked")
        if source.current_owner != actor:
            raise Forbidden(f"{actor} does not hold {node}")
        if not source.post.allows("subset"):
            raise PostConditionDenied(f"subset is not granted on {node}")
        rid, parent_mask = source.pointer_to_resource
        child_mask = parent_mask.intersect(FieldMask.of(mask))
        child = XNode(
            id=self._new_id("node"), kind="i", creator=actor,
            current_owner=actor, primary_owner=actor,
            located_in=locker.id, purpose=source.purpose,
            pointer_to_resource=(rid, child_mask),
            post=source.post.derive("i"),
        )
        child.provenance.append(
            ProvenanceEntry("created", actor, actor, self.tick_now))
        child.provenance.append(
            ProvenanceEntry("derived", actor, actor, self.tick_now))
        self.nodes[child.id] = child
        locker.nodes.add(child.id)
        source.provenance.append(
            ProvenanceEntry("subset", actor, actor, self.tick_now))
        return {"node": child.id}

    def _cmd_set_post(self, node: str, actor: str,
                      updates: Dict[str, bool]) -> Dict[str, Any]:
        """Creator adjusts consent flags on an artifact they created."""
        target = self._live_node(node)
        self._require_agent(actor)
        if target.creator != actor:
            raise NotAuthorized(f"only the creator of {node} may change its post-conditions")
        applicable = POST_APPLICABLE[target.kind]
        for name, value in updates.items():
            if name not in POST_FLAG_NAMES:
                raise InvalidArgument(f"unknown post-condition {name!r}")
            if name not in applicable:
                raise InvalidArgument(
                    f"post-condition {name} does not apply to {target.kind}-nodes")
            if name in target.post.creator_forbidden:
                raise PostConditionDenied(
                    f"{name} was forbidden at creation of {node}")
            if not isinstance(value, bool):
                raise InvalidArgument(f"post-condition {name} wants true/false")
        for name, value in updates.items():
            target.post.flags[name] = value
        return {"node": node}

    def _expire_sweep(self) -> List[str]:
        """Flag every v-node whose validity lies behind the clock."""
        swept: List[str] = []
        for node in self.nodes.values():
            if (node.kind == "v" and node.live() and not node.expired
                    and node.validity is not None
                    and node.validity < self.tick_now):
                node.expired = True
                node.provenance.append(ProvenanceEntry(
                    "expired", node.current_owner, node.current_owner,
                    self.tick_now))
                swept.append(node.id)
        return sorted(swept)
