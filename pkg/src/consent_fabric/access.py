"""Access tunnels: resolving grants back to a servable artifact.

A tunnel is the hop list from the node an agent holds (the origin) to the
first i- or s-node reached over pointer_to_original links (the ground).
Only grounds touch resources.  Multi-hop tunnels are read/download only and
every such access is surfaced to the agent serving the ground; an s-node
ground answers its own holder directly.  Edits happen exclusively on an
unlocked-or-conferred i-node in the editor's own locker, by its primary
owner, and fan out change notices to every shadow.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

from .errors import (ActiveDependents, Expired, Forbidden, Invalidated,
                     InvalidArgument, Locked, PostConditionDenied,
                     ResourceDeleted, TunnelBroken)
from .model import FieldMask, Scalar, set_path, split_path
from .xnode import ProvenanceEntry, XNode


class AccessOps:
    def resolve(self, origin: str, actor: str) -> List[XNode]:
        """Walk origin -> ground, checking custody, linkage and validity."""
        node = self._node(origin)
        if not node.deleted:
            # a revoked grant resolves to TunnelBroken below, not Forbidden
            home = self._locker(node.located_in)
            holders = {node.current_owner}
            if node.primary_owner is not None:
                holders.add(node.primary_owner)
            if home.owner != actor or actor not in holders:
                raise Forbidden(f"{actor} does not hold {origin}")
        hops: List[XNode] = []
        current = node
        while True:
            if current.deleted:
                raise TunnelBroken(f"{current.id} was deleted")
            if current.invalidated:
                raise Invalidated(f"{current.id} was invalidated by a transfer")
            if current.kind == "v" and not current.usable_at(self.tick_now):
                raise Expired(f"{current.id} expired at tick {current.validity}")
            hops.append(current)
            if current.kind in ("i", "s"):
                break
            parent = self.nodes.get(current.pointer_to_original)
            if parent is None or current.id not in (parent.shadows_list
                                                    | parent.vnode_list):
                raise TunnelBroken(f"{current.id} has no parent artifact")
            current = parent
        ground = hops[-1]
        if ground.pointer_to_resource is None:
            raise TunnelBroken(f"{ground.id} has no resource pointer")
        ground_home = self.lockers.get(ground.located_in)
        if ground_home is None or ground_home.owner not in (
                ground.current_owner, ground.primary_owner):
            raise TunnelBroken(f"{ground.id} is not legitimately held")
        return hops

    def _ground_resource(self, ground: XNode):
        rid, mask = ground.pointer_to_resource
        resource = self.resources.get(rid)
        if resource is None or resource.deleted:
            raise ResourceDeleted(rid)
        return resource, mask

    def _surface(self, hops: List[XNode], actor: str, verb: str) -> None:
        """Multi-hop accesses are visible to whoever serves the ground."""
        ground = hops[-1]
        if hops[0].id == ground.id:
            return
        server = self._locker(ground.located_in).owner
        self._notify(server, {
            "kind": "access", "verb": verb, "origin": hops[0].id,
            "ground": ground.id, "agent": actor, "tick": self.tick_now})

    def _cmd_read(self, node: str, actor: str) -> Dict[str, Any]:
        hops = self.resolve(node, actor)
        resource, mask = self._ground_resource(hops[-1])
        self._surface(hops, actor, "read")
        return {"content": mask.project(resource.content),
                "version": resource.version}

    def _cmd_download(self, node: str, actor: str) -> Dict[str, Any]:
        hops = self.resolve(node, actor)
        for hop in hops:
            if not hop.post.allows("download"):
                raise PostConditionDenied(f"download is not granted on {hop.id}")
        resource, mask = self._ground_resource(hops[-1])
        origin = hops[0]
        origin.provenance.append(ProvenanceEntry(
            "downloaded", actor, actor, self.tick_now))
        self._surface(hops, actor, "download")
        return {"content": mask.project(resource.content),
                "version": resource.version, "detached": True}

    def _cmd_edit(self, node: str, actor: str,
                  updates: Dict[str, Scalar]) -> Dict[str, Any]:
        hops = self.resolve(node, actor)
        origin, ground = hops[0], hops[-1]
        if origin.id != ground.id or ground.kind != "i":
            raise Forbidden("edits must ground directly in an i-node")
        if ground.pledge_role == "pledged":
            # a conferment lock still lets the issuer edit from its own
            # locker; a pledge puts the node in the holder's custody and
            # freezes the content outright
            raise Locked(f"{ground.id} is pledged")
        if actor != ground.primary_owner:
            raise Forbidden(f"only {ground.primary_owner} may edit through {ground.id}")
        if not updates:
            raise InvalidArgument("edit needs at least one field update")
        resource, mask = self._ground_resource(ground)
        for path in updates:
            split_path(path)
            if not mask.covers(path):
                raise Forbidden(f"{ground.id} does not cover field {path}")
        for path, value in updates.items():
            set_path(resource.content, path, value)
        resource.version += 1
        recipients = []
        for shadow_id in sorted(ground.shadows_list):
            shadow = self.nodes[shadow_id]
            if shadow.live():
                recipients.append((shadow_id, shadow.current_owner))
        for shadow_id, owner in recipients:
            self._notify(owner, {
                "kind": "resource_edited", "node": shadow_id,
                "resource": resource.id, "version": resource.version,
                "tick": self.tick_now})
            self._derived_event("notify", owner, {
                "node": shadow_id, "resource": resource.id,
                "version": resource.version})
        return {"resource": resource.id, "version": resource.version}

    def _cmd_delete(self, node: str, actor: str) -> Dict[str, Any]:
        """Retire a resource via its i-node; refuses while grants are live."""
        hops = self.resolve(node, actor)
        origin, ground = hops[0], hops[-1]
        if origin.id != ground.id or ground.kind != "i":
            raise Forbidden("delete must ground directly in an i-node")
        if actor != ground.primary_owner:
            raise Forbidden(f"only {ground.primary_owner} may delete {ground.id}")
        if ground.is_locked():
            raise Locked(f"{ground.id} is locked")
        dependents = [
            child_id for child_id in sorted(ground.shadows_list | ground.vnode_list)
            if self.nodes[child_id].live()
            and not self.nodes[child_id].invalidated
            and self.nodes[child_id].usable_at(self.tick_now)
        ]
        if dependents:
            raise ActiveDependents(", ".join(dependents))
        resource, _ = self._ground_resource(ground)
        resource.deleted = True
        ground.provenance.append(ProvenanceEntry(
            "deleted", actor, actor, self.tick_now))
        return {"resource": resource.id}

    def _cmd_verify(self, node: str, actor: str,
                    issuer: Optional[str] = None) -> Dict[str, Any]:
        """Check a held credential descends from an issuer's primary artifact."""
        hops = self.resolve(node, actor)
        ground = hops[-1]
        chain: List[XNode] = [ground]
        current = ground
        descends = True
        while current.kind != "i":
            parent = self.nodes.get(current.pointer_to_original)
            if (parent is None or not parent.live() or parent.invalidated
                    or current.id not in parent.shadows_list):
                descends = False
                break
            chain.append(parent)
            current = parent
        verdict: Dict[str, Any] = {"descends": descends}
        if descends:
            root = chain[-1]
            rid, _ = root.pointer_to_resource
            resource = self.resources.get(rid)
            version_current = resource is not None and not resource.deleted
            if version_current:
                for link_node in chain:
                    if (link_node.kind == "s"
                            and link_node.resource_version is not None
                            and link_node.resource_version != resource.version):
                        version_current = False
            verdict["issuer"] = root.primary_owner
            verdict["version_current"] = version_current
            ok = version_current
            if issuer is not None:
                ok = ok and (root.primary_owner == issuer)
            verdict["verdict"] = ok
        else:
            verdict["issuer"] = None
            verdict["version_current"] = False
            verdict["verdict"] = False
        return verdict
