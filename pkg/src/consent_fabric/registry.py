"""Registry commands: agents, lockers, resources, rule libraries, the clock."""

from __future__ import annotations

import copy
from typing import Any, Dict, List, Optional

from .errors import (InvalidArgument, NotAuthorized, NotLockerOwner,
                     UnknownTemplate)
from .model import Agent, FieldMask, Locker, Resource, validate_content
from .policy import Template, compose_connection_type, parse_rule
from .xnode import new_inode


class RegistryOps:
    def _cmd_create_agent(self, name: str = "") -> Dict[str, Any]:
        agent = Agent(id=self._new_id("agent"), name=name)
        self.agents[agent.id] = agent
        return {"agent": agent.id}

    def _cmd_create_locker(self, owner: str) -> Dict[str, Any]:
        agent = self._agent(owner)
        locker = Locker(id=self._new_id("locker"), owner=owner)
        self.lockers[locker.id] = locker
        agent.lockers.add(locker.id)
        return {"locker": locker.id}

    def _cmd_create_resource(self, owner: str, locker: str,
                             content: Optional[Dict[str, Any]] = None,
                             purpose: str = "") -> Dict[str, Any]:
        self._require_agent(owner)
        home = self._locker(locker)
        if home.owner != owner:
            raise NotLockerOwner(f"{owner} does not own {locker}")
        content = copy.deepcopy(content) if content else {}
        validate_content(content)
        resource = Resource(id=self._new_id("resource"), content=content)
        self.resources[resource.id] = resource
        node = new_inode(self._new_id("node"), owner, locker, resource.id,
                         FieldMask.full(), purpose, self.tick_now)
        self.nodes[node.id] = node
        home.nodes.add(node.id)
        return {"resource": resource.id, "node": node.id}

    def _cmd_define_template(self, rules: List[str], description: str = "",
                             id: Optional[str] = None) -> Dict[str, Any]:
        tpl_id = id or self._new_id("template")
        if tpl_id in self.templates:
            raise InvalidArgument(f"template {tpl_id} is already published")
        parsed = tuple(parse_rule(r) for r in rules)
        self.templates[tpl_id] = Template(id=tpl_id, rules=parsed,
                                          description=description)
        return {"template": tpl_id}

    def _cmd_define_ctype(self, templates: Optional[List[str]] = None,
                          rules: Optional[List[str]] = None,
                          purpose: str = "",
                          id: Optional[str] = None) -> Dict[str, Any]:
        ct_id = id or self._new_id("ctype")
        if ct_id in self.ctypes:
            raise InvalidArgument(f"connection type {ct_id} already exists")
        refs = []
        for ref in templates or []:
            if ref not in self.templates:
                raise UnknownTemplate(ref)
            refs.append(self.templates[ref])
        extra = tuple(parse_rule(r) for r in (rules or []))
        self.ctypes[ct_id] = compose_connection_type(ct_id, refs, extra, purpose)
        return {"ctype": ct_id}

    def _cmd_tick(self, n: int = 1) -> Dict[str, Any]:
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise InvalidArgument("tick amount must be a positive integer")
        self.tick_now += n
        swept = self._expire_sweep()
        return {"tick": self.tick_now, "swept": swept}

    # --- read-only queries (not audited) ---------------------------------

    def browse(self, locker: str) -> List[Dict[str, Any]]:
        """Open endpoints visible on a locker."""
        home = self._locker(locker)
        return [ep.to_json(self._ctype(ep.ctype_id).to_json())
                for e in sorted(home.endpoints)
                if (ep := self.endpoints[e]).open]

    def inbox(self, agent: str) -> List[Dict[str, Any]]:
        self._require_agent(agent)
        return list(self.inboxes.get(agent, ()))

    def children_of(self, node: str, actor: str) -> List[str]:
        """Direct derived nodes; only the node's holder may enumerate."""
        target = self._live_node(node)
        if actor != target.current_owner:
            raise NotAuthorized(f"{actor} does not hold {node}")
        return sorted(target.shadows_list | target.vnode_list)

    def tunnel_tree(self, node: str, actor: str) -> Dict[str, Any]:
        """Full derived-node tree below a ground; holder-of-the-locker only."""
        target = self._live_node(node)
        home = self._locker(target.located_in)
        if home.owner != actor:
            raise NotAuthorized(f"{actor} does not serve {node}")

        def walk(nid: str) -> Dict[str, Any]:
            cur = self.nodes[nid]
            return {kid: walk(kid)
                    for kid in sorted(cur.shadows_list | cur.vnode_list)}

        return {node: walk(node)}
