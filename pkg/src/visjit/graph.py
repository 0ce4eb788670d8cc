"""Max/MSP patch parsing and node-level graph diffing.

A patch is a JSON document whose top-level ``patcher`` object holds
``boxes`` (nodes) and ``lines`` (patch cords). Boxes may embed their own
``patcher`` (a subpatcher); those become nested :class:`VisualGraph` children.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

POSITION_KEY = "patching_rect"
_STRUCTURAL_KEYS = {"id", "maxclass", "patcher", POSITION_KEY}


class MalformedPatch(ValueError):
    """Content is not a structurally valid patch document."""


class DuplicateNodeId(MalformedPatch):
    """Two boxes at the same graph level share an id."""


@dataclass(frozen=True)
class VisualNode:
    id: str
    class_name: str
    attributes: Mapping[str, Any] = field(default_factory=dict)
    position: tuple[float, ...] | None = None
    children: VisualGraph | None = None


@dataclass(frozen=True)
class VisualEdge:
    source_id: str
    source_port: int
    dest_id: str
    dest_port: int


@dataclass(frozen=True)
class VisualGraph:
    nodes: tuple[VisualNode, ...] = ()
    edges: tuple[VisualEdge, ...] = ()

    def node_ids(self) -> set[str]:
        return {n.id for n in self.nodes}


@dataclass(frozen=True)
class GraphDiff:
    added: frozenset[str] = frozenset()
    modified: frozenset[str] = frozenset()
    deleted: frozenset[str] = frozenset()
    nodes_before: int = 0

    @property
    def changed(self) -> int:
        return len(self.added) + len(self.modified) + len(self.deleted)

    def to_dict(self) -> dict:
        return {
            "added": sorted(self.added),
            "modified": sorted(self.modified),
            "deleted": sorted(self.deleted),
            "nodes_before": self.nodes_before,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> GraphDiff:
        return cls(
            frozenset(d["added"]),
            frozenset(d["modified"]),
            frozenset(d["deleted"]),
            int(d["nodes_before"]),
        )


class FrozenMap(tuple):
    """Key-sorted ``(key, value)`` pairs standing in for a JSON object."""

    __slots__ = ()


def canonical(value: Any) -> Any:
    """Normalize a JSON value so serialization noise does not register as change.

    Integral floats collapse to ints, mappings become key-sorted
    :class:`FrozenMap` pairs and lists become tuples (order preserved).
    """
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, float):
        return int(value) if value.is_integer() else value
    if isinstance(value, int):
        return value
    if isinstance(value, Mapping):
        return FrozenMap((str(k), canonical(v)) for k, v in sorted(value.items()))
    if isinstance(value, (list, tuple)):
        return tuple(canonical(v) for v in value)
    raise MalformedPatch(f"unsupported value type {type(value).__name__}")


def _uncanonical(value: Any) -> Any:
    if isinstance(value, FrozenMap):
        return {k: _uncanonical(v) for k, v in value}
    if isinstance(value, tuple):
        return [_uncanonical(v) for v in value]
    return value


def _parse_patcher(obj: Any, where: str) -> VisualGraph:
    if not isinstance(obj, dict):
        raise MalformedPatch(f"{where}: patcher is not an object")
    boxes = obj.get("boxes", [])
    lines = obj.get("lines", [])
    if not isinstance(boxes, list) or not isinstance(lines, list):
        raise MalformedPatch(f"{where}: boxes/lines must be arrays")

    nodes: list[VisualNode] = []
    seen: set[str] = set()
    for entry in boxes:
        box = entry.get("box") if isinstance(entry, dict) else None
        if not isinstance(box, dict):
            raise MalformedPatch(f"{where}: box entry without 'box' object")
        node_id = box.get("id")
        if not isinstance(node_id, str) or not node_id:
            raise MalformedPatch(f"{where}: box without a non-empty string id")
        if node_id in seen:
            raise DuplicateNodeId(f"{where}: duplicate node id {node_id!r}")
        seen.add(node_id)

        position = box.get(POSITION_KEY)
        if position is not None:
            if not isinstance(position, list) or len(position) != 4 or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) for p in position
            ):
                raise MalformedPatch(f"{where}/{node_id}: {POSITION_KEY} must have 4 numbers")
            position = tuple(canonical(float(p)) for p in position)
        children = None
        if "patcher" in box:
            children = _parse_patcher(box["patcher"], f"{where}/{node_id}")
        attrs = {k: canonical(v) for k, v in sorted(box.items()) if k not in _STRUCTURAL_KEYS}
        nodes.append(
            VisualNode(
                id=node_id,
                class_name=str(box.get("maxclass", "")),
                attributes=attrs,
                position=position,
                children=children,
            )
        )

    edges: list[VisualEdge] = []
    for entry in lines:
        line = entry.get("patchline") if isinstance(entry, dict) else None
        if not isinstance(line, dict):
            raise MalformedPatch(f"{where}: line entry without 'patchline' object")
        try:
            (src, sport), (dst, dport) = line["source"][:2], line["destination"][:2]
            edge = VisualEdge(str(src), int(sport), str(dst), int(dport))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPatch(f"{where}: bad patchline {line!r}") from exc
        if edge.source_port < 0 or edge.dest_port < 0:
            raise MalformedPatch(f"{where}: negative port in {line!r}")
        if edge.source_id not in seen or edge.dest_id not in seen:
            raise MalformedPatch(f"{where}: patchline references unknown node")
        edges.append(edge)
    return VisualGraph(tuple(nodes), tuple(edges))


def parse_patch(content: bytes | str) -> VisualGraph:
    """Parse a ``.maxpat``/``.maxhelp`` document into a :class:`VisualGraph`."""
    try:
        text = content.decode("utf-8") if isinstance(content, bytes) else content
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPatch(f"not a JSON document: {exc}") from exc
    if not isinstance(doc, dict) or "patcher" not in doc:
        raise MalformedPatch("missing top-level 'patcher' object")
    return _parse_patcher(doc["patcher"], "")


def to_patch_dict(graph: VisualGraph) -> dict:
    """Inverse of :func:`parse_patch` up to canonicalization."""
    boxes = []
    for node in graph.nodes:
        box: dict[str, Any] = {"id": node.id, "maxclass": node.class_name}
        box.update({k: _uncanonical(v) for k, v in node.attributes.items()})
        if node.position is not None:
            box[POSITION_KEY] = list(node.position)
        if node.children is not None:
            box["patcher"] = to_patch_dict(node.children)["patcher"]
        boxes.append({"box": box})
    lines = [
        {"patchline": {"source": [e.source_id, e.source_port], "destination": [e.dest_id, e.dest_port]}}
        for e in graph.edges
    ]
    return {"patcher": {"boxes": boxes, "lines": lines}}


def dump_patch(graph: VisualGraph) -> bytes:
    return json.dumps(to_patch_dict(graph), sort_keys=True, indent=1).encode("utf-8")


def count_nodes(g: VisualGraph) -> int:
    """Total node count including every nested subpatcher level."""
    return sum(1 + (count_nodes(n.children) if n.children is not None else 0) for n in g.nodes)


def iter_flat(g: VisualGraph, prefix: str = "") -> Iterator[tuple[str, VisualNode]]:
    """Yield ``(path-qualified id, node)`` for every node, parents first."""
    for node in g.nodes:
        qid = f"{prefix}{node.id}"
        yield qid, node
        if node.children is not None:
            yield from iter_flat(node.children, qid + "/")


def _signature(node: VisualNode, with_position: bool) -> tuple:
    kids = None
    if node.children is not None:
        kids = _graph_signature(node.children, with_position)
    pos = node.position if with_position else None
    return (node.class_name, tuple(sorted(node.attributes.items())), pos, kids)


def _graph_signature(g: VisualGraph, with_position: bool) -> tuple:
    nodes = tuple(sorted((n.id, _signature(n, with_position)) for n in g.nodes))
    edges = tuple(sorted((e.source_id, e.source_port, e.dest_id, e.dest_port) for e in g.edges))
    return nodes, edges


def diff_graphs(old: VisualGraph, new: VisualGraph, count_position_changes: bool = False) -> GraphDiff:
    """Added/modified/deleted node ids between two versions, matched by id.

    Subpatcher contents are flattened into ``parent/child`` ids. A subpatcher
    box whose nested graph changed counts as modified itself as well.
    """
    before = dict(iter_flat(old))
    after = dict(iter_flat(new))
    modified = {
        qid
        for qid in before.keys() & after.keys()
        if _signature(before[qid], count_position_changes) != _signature(after[qid], count_position_changes)
    }
    return GraphDiff(
        added=frozenset(after.keys() - before.keys()),
        modified=frozenset(modified),
        deleted=frozenset(before.keys() - after.keys()),
        nodes_before=len(before),
    )
