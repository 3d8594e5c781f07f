"""Labeled property graphs of mail/DNS/routing infrastructure.

A graph is loaded from a single JSON document::

    {"nodes": {"gmail.com": "Provider", "64.233.167.26": "IP", ...},
     "edges": [{"src": "gmail.com", "label": "MX", "dst": "..."},
               {"src": "AS15169", "label": "RTE", "dst": "AS3320",
                "transit": "AS1299"}],
     "attrs": {"a.root-servers.net": {"rns": "true"}}}

Graphs are immutable after loading.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping


class NodeLabel(str, Enum):
    IP = "IP"
    Dom = "Dom"
    AS = "AS"
    Cntry = "Cntry"
    Provider = "Provider"


class EdgeKind(str, Enum):
    ORIG = "ORIG"
    LOC = "LOC"
    A = "A"
    MX = "MX"
    NS = "NS"
    DNS = "DNS"
    RES = "RES"
    RTE = "RTE"


# Provider nodes are domains with a designated role; they satisfy Dom endpoints.
DOMAIN_LABELS = frozenset({NodeLabel.Dom, NodeLabel.Provider})

_ENDPOINTS: dict[EdgeKind, tuple[frozenset, frozenset]] = {
    EdgeKind.A: (DOMAIN_LABELS, frozenset({NodeLabel.IP})),
    EdgeKind.MX: (DOMAIN_LABELS, DOMAIN_LABELS),
    EdgeKind.NS: (DOMAIN_LABELS, DOMAIN_LABELS),
    EdgeKind.DNS: (DOMAIN_LABELS, DOMAIN_LABELS),
    EdgeKind.ORIG: (frozenset({NodeLabel.IP}), frozenset({NodeLabel.AS})),
    EdgeKind.LOC: (DOMAIN_LABELS | {NodeLabel.IP, NodeLabel.AS}, frozenset({NodeLabel.Cntry})),
    EdgeKind.RES: (DOMAIN_LABELS, frozenset({NodeLabel.IP})),
    EdgeKind.RTE: (frozenset({NodeLabel.AS}), frozenset({NodeLabel.AS})),
}


class GraphSyntaxError(ValueError):
    """Malformed JSON or a document that does not follow the graph schema."""


class ValidationError(ValueError):
    """Well-formed document describing an inconsistent graph."""


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True)
class EdgeLabel:
    kind: EdgeKind
    transit: str | None = None

    def __str__(self) -> str:
        if self.kind is EdgeKind.RTE:
            return f"RTE({self.transit})"
        return self.kind.value


@dataclass(frozen=True)
class Edge:
    src: str
    label: EdgeLabel
    dst: str

    @property
    def kind(self) -> EdgeKind:
        return self.label.kind


@dataclass(frozen=True)
class PropertyGraph:
    nodes: Mapping[str, NodeLabel]
    edges: tuple[Edge, ...]
    # keys are (node name, attribute) or (edge index, attribute)
    attrs: Mapping[tuple[str | int, str], str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", MappingProxyType(dict(self.nodes)))
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))
        object.__setattr__(self, "edges", tuple(self.edges))
        _validate(self)
        out: dict[tuple[str, EdgeKind], list[Edge]] = {}
        inc: dict[tuple[str, EdgeKind], list[Edge]] = {}
        for e in self.edges:
            out.setdefault((e.src, e.kind), []).append(e)
            inc.setdefault((e.dst, e.kind), []).append(e)
        object.__setattr__(self, "_out", out)
        object.__setattr__(self, "_in", inc)

    # -- queries -----------------------------------------------------------

    def label(self, v: str) -> NodeLabel:
        try:
            return self.nodes[v]
        except KeyError:
            raise UnknownNode(v) from None

    def nodes_with(self, *labels: NodeLabel) -> list[str]:
        return sorted(v for v, lab in self.nodes.items() if lab in labels)

    @property
    def domains(self) -> list[str]:
        return self.nodes_with(NodeLabel.Dom, NodeLabel.Provider)

    @property
    def providers(self) -> list[str]:
        return self.nodes_with(NodeLabel.Provider)

    def is_domain(self, v: str) -> bool:
        return self.nodes.get(v) in DOMAIN_LABELS

    def attr(self, key: str | int, name: str, default: str | None = None) -> str | None:
        return self.attrs.get((key, name), default)

    def is_root_server(self, v: str) -> bool:
        return (self.attr(v, "rns") or "").lower() in ("1", "true", "yes")

    def edges_of(self, kind: EdgeKind) -> list[Edge]:
        return [e for e in self.edges if e.kind is kind]

    def succ(self, v: str, kind: EdgeKind) -> list[str]:
        return [e.dst for e in self._out.get((v, kind), ())]

    def pred(self, v: str, kind: EdgeKind) -> list[str]:
        return [e.src for e in self._in.get((v, kind), ())]

    def has_edge(self, src: str, kind: EdgeKind, dst: str) -> bool:
        return any(e.dst == dst for e in self._out.get((src, kind), ()))

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)


def neighbors(g: PropertyGraph, v: str, label: EdgeKind | str, direction: str = "out"):
    """Edges incident to ``v`` with the given label kind, in insertion order.

    Returns ``(other_endpoint, EdgeLabel)`` pairs.
    """
    g.label(v)
    kind = EdgeKind(label)
    if direction == "out":
        return [(e.dst, e.label) for e in g._out.get((v, kind), ())]
    if direction == "in":
        return [(e.src, e.label) for e in g._in.get((v, kind), ())]
    raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")


def _validate(g: PropertyGraph) -> None:
    for name, lab in g.nodes.items():
        if not name:
            raise ValidationError("empty node name")
        if not isinstance(lab, NodeLabel):
            raise ValidationError(f"node {name!r} has invalid label {lab!r}")
    seen: set[tuple[str, EdgeKind, str, str | None]] = set()
    for idx, e in enumerate(g.edges):
        for end in (e.src, e.dst):
            if end not in g.nodes:
                raise ValidationError(f"edge {idx} ({e.src} {e.label} {e.dst}): unknown node {end!r}")
        srcs, dsts = _ENDPOINTS[e.kind]
        if g.nodes[e.src] not in srcs or g.nodes[e.dst] not in dsts:
            raise ValidationError(
                f"edge {idx}: {e.kind.value} cannot connect {g.nodes[e.src].value} "
                f"{e.src!r} to {g.nodes[e.dst].value} {e.dst!r}"
            )
        if e.kind is EdgeKind.RTE:
            if e.label.transit is None:
                raise ValidationError(f"edge {idx}: RTE edge {e.src!r}->{e.dst!r} without transit")
            if g.nodes.get(e.label.transit) is not NodeLabel.AS:
                raise ValidationError(f"edge {idx}: transit {e.label.transit!r} is not an AS node")
        elif e.label.transit is not None:
            raise ValidationError(f"edge {idx}: transit only allowed on RTE edges")
        key = (e.src, e.kind, e.dst, e.label.transit)
        if key in seen:
            raise ValidationError(f"edge {idx}: duplicate edge {e.src!r} {e.label} {e.dst!r}")
        seen.add(key)


# -- serialization ----------------------------------------------------------

def graph_from_dict(doc) -> PropertyGraph:
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), dict) \
            or not isinstance(doc.get("edges"), list):
        raise GraphSyntaxError("graph document needs an object 'nodes' and a list 'edges'")
    nodes = {}
    for name, lab in doc["nodes"].items():
        try:
            nodes[name] = NodeLabel(lab)
        except ValueError:
            raise GraphSyntaxError(f"node {name!r}: unknown label {lab!r}") from None
    edges = []
    attrs: dict[tuple[str | int, str], str] = {}
    for idx, raw in enumerate(doc["edges"]):
        if not isinstance(raw, dict) or not {"src", "label", "dst"} <= raw.keys():
            raise GraphSyntaxError(f"edge {idx}: needs src, label and dst")
        try:
            kind = EdgeKind(raw["label"])
        except ValueError:
            raise GraphSyntaxError(f"edge {idx}: unknown label {raw['label']!r}") from None
        edges.append(Edge(str(raw["src"]), EdgeLabel(kind, raw.get("transit")), str(raw["dst"])))
        for k, v in (raw.get("attrs") or {}).items():
            attrs[(idx, k)] = str(v)
    node_attrs = doc.get("attrs") or {}
    if not isinstance(node_attrs, dict):
        raise GraphSyntaxError("'attrs' must be an object")
    for name, kv in node_attrs.items():
        if name not in nodes:
            raise ValidationError(f"attrs given for unknown node {name!r}")
        for k, v in kv.items():
            attrs[(name, k)] = str(v)
    return PropertyGraph(nodes, tuple(edges), attrs)


def load_graph(source) -> PropertyGraph:
    """Parse a graph from bytes, text or a binary/text stream."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise GraphSyntaxError(f"invalid JSON: {exc}") from None
    return graph_from_dict(doc)


def load_graph_file(path) -> PropertyGraph:
    with open(path, "rb") as fh:
        return load_graph(fh)


def graph_to_dict(g: PropertyGraph) -> dict:
    edges = []
    for idx, e in enumerate(g.edges):
        raw = {"src": e.src, "label": e.kind.value, "dst": e.dst}
        if e.label.transit is not None:
            raw["transit"] = e.label.transit
        ea = {k: v for (key, k), v in g.attrs.items() if key == idx and isinstance(key, int)}
        if ea:
            raw["attrs"] = dict(sorted(ea.items()))
        edges.append(raw)
    node_attrs: dict[str, dict[str, str]] = {}
    for (key, k), v in g.attrs.items():
        if isinstance(key, str):
            node_attrs.setdefault(key, {})[k] = v
    doc = {"nodes": {n: g.nodes[n].value for n in sorted(g.nodes)}, "edges": edges}
    if node_attrs:
        doc["attrs"] = {n: dict(sorted(kv.items())) for n, kv in sorted(node_attrs.items())}
    return doc


def serialize(g: PropertyGraph) -> str:
    return json.dumps(graph_to_dict(g), sort_keys=True, indent=2) + "\n"


def build_graph(nodes: Mapping[str, str], edges: Iterable[tuple], attrs=None) -> PropertyGraph:
    """Convenience constructor: ``edges`` are ``(src, label, dst[, transit])`` tuples."""
    doc = {"nodes": dict(nodes), "edges": []}
    for e in edges:
        raw = {"src": e[0], "label": e[1], "dst": e[2]}
        if len(e) > 3:
            raw["transit"] = e[3]
        doc["edges"].append(raw)
    if attrs:
        doc["attrs"] = attrs
    return graph_from_dict(doc)
