"""Agents, lockers, resources and field masks.

A resource is a JSON-shaped tree with scalar leaves.  Field paths are
dot-separated segment strings ("grades.math"); a FieldMask selects subtrees
by path, with the distinguished empty path set meaning the whole resource.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Set, Tuple, Union

from .errors import InvalidArgument

Scalar = Union[str, int, float, bool, None]

_SEGMENT = re.compile(r"^[A-Za-z0-9_-]+$")


def split_path(path: str) -> Tuple[str, ...]:
    """Split and validate a dotted field path."""
    if not isinstance(path, str) or not path:
        raise InvalidArgument(f"invalid field path {path!r}")
    parts = tuple(path.split("."))
    for seg in parts:
        if not _SEGMENT.match(seg):
            raise InvalidArgument(f"invalid field path {path!r}")
    return parts


def validate_content(content: Any) -> None:
    """Reject anything that is not a tree of dicts with scalar leaves."""
    if isinstance(content, dict):
        for key, value in content.items():
            if not isinstance(key, str) or not _SEGMENT.match(key):
                raise InvalidArgument(f"invalid field name {key!r}")
            validate_content(value)
    elif not isinstance(content, (str, int, float, bool, type(None))):
        raise InvalidArgument(f"unsupported content value {content!r}")


def leaf_paths(content: Any, prefix: str = "") -> Iterator[str]:
    if isinstance(content, dict):
        for key in content:
            sub = f"{prefix}.{key}" if prefix else key
            yield from leaf_paths(content[key], sub)
    else:
        yield prefix


def get_path(content: Any, path: str) -> Any:
    node = content
    for seg in split_path(path):
        if not isinstance(node, dict) or seg not in node:
            raise InvalidArgument(f"no such field {path!r}")
        node = node[seg]
    return node


def set_path(content: Dict[str, Any], path: str, value: Scalar) -> None:
    parts = split_path(path)
    node = content
    for seg in parts[:-1]:
        nxt = node.get(seg)
        if not isinstance(nxt, dict):
            nxt = {}
            node[seg] = nxt
        node = nxt
    node[parts[-1]] = value


@dataclass(frozen=True)
class FieldMask:
    """Subtree selection over a resource.

    ``paths`` empty means the full resource.  ``nothing`` marks the mask that
    selects no field at all; it only arises from intersecting disjoint masks
    and cannot be expressed with a path set because the empty set already
    means "everything".
    """

    paths: FrozenSet[str] = frozenset()
    nothing: bool = False

    @classmethod
    def full(cls) -> "FieldMask":
        return cls()

    @classmethod
    def of(cls, paths) -> "FieldMask":
        selected = frozenset(paths)
        for p in selected:
            split_path(p)
        return cls(paths=selected)

    def is_full(self) -> bool:
        return not self.nothing and not self.paths

    def covers(self, leaf: str) -> bool:
        if self.nothing:
            return False
        if not self.paths:
            return True
        return any(leaf == p or leaf.startswith(p + ".") for p in self.paths)

    def intersect(self, other: "FieldMask") -> "FieldMask":
        if self.nothing or other.nothing:
            return FieldMask(nothing=True)
        if self.is_full():
            return other
        if other.is_full():
            return self
        kept: Set[str] = set()
        for p in self.paths:
            for q in other.paths:
                if q == p or q.startswith(p + "."):
                    kept.add(q)
                elif p.startswith(q + "."):
                    kept.add(p)
        if not kept:
            return FieldMask(nothing=True)
        return FieldMask(paths=frozenset(kept))

    def project(self, content: Any) -> Any:
        """Return the portion of ``content`` selected by this mask."""
        if self.nothing:
            return {}
        if self.is_full():
            return _copy_tree(content)
        return _project(content, self, "")

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"paths": sorted(self.paths)}
        if self.nothing:
            out["empty"] = True
        return out

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "FieldMask":
        return cls(paths=frozenset(data.get("paths", ())),
                   nothing=bool(data.get("empty", False)))


def _copy_tree(content: Any) -> Any:
    if isinstance(content, dict):
        return {k: _copy_tree(v) for k, v in content.items()}
    return content


def _project(content: Any, mask: FieldMask, prefix: str) -> Any:
    if not isinstance(content, dict):
        return content
    out: Dict[str, Any] = {}
    for key, value in content.items():
        sub = f"{prefix}.{key}" if prefix else key
        if mask.covers(sub):
            out[key] = _copy_tree(value)
        elif isinstance(value, dict):
            pruned = _project(value, mask, sub)
            if pruned:
                out[key] = pruned
    return out


@dataclass
class Agent:
    id: str
    name: str = ""
    lockers: Set[str] = field(default_factory=set)

    def to_json(self) -> Dict[str, Any]:
        return {"id": self.id, "name": self.name, "lockers": sorted(self.lockers)}


@dataclass
class Locker:
    """Access policy domain: the unit a single agent owns and exchanges from."""

    id: str
    owner: str
    nodes: Set[str] = field(default_factory=set)
    endpoints: Set[str] = field(default_factory=set)
    connections: Set[str] = field(default_factory=set)

    def to_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "owner": self.owner,
            "nodes": sorted(self.nodes),
            "endpoints": sorted(self.endpoints),
            "connections": sorted(self.connections),
        }


@dataclass
class Resource:
    id: str
    content: Dict[str, Any]
    version: int = 1
    deleted: bool = False

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "id": self.id,
            "content": _copy_tree(self.content),
            "version": self.version,
        }
        if self.deleted:
            out["deleted"] = True
        return out
