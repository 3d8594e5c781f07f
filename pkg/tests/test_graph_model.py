import io
import json

import pytest

from iasound import corpus_names, corpus_path, load_graph, load_graph_file
from iasound.graph_model import (
    EdgeKind, GraphSyntaxError, NodeLabel, UnknownNode, ValidationError, build_graph,
    graph_to_dict, neighbors, serialize,
)


def test_corpus_loads():
    assert {"fig2", "fig2_split", "fig2_resolver_route"} <= set(corpus_names())
    for name in corpus_names():
        g = load_graph_file(corpus_path(name))
        assert g.providers == ["gmail.com", "t-online.de"]


def test_queries(fig2):
    assert fig2.label("DE") is NodeLabel.Cntry
    assert fig2.succ("gmail.com", EdgeKind.MX) == ["gmail-smtp-in.l.google.com"]
    assert sorted(fig2.pred("DE", EdgeKind.LOC)) == ["194.25.134.8", "62.138.238.100"]
    assert fig2.is_root_server("a.root-servers.net")
    assert not fig2.is_root_server("gmail.com")
    assert fig2.attr("gmail.com", "reward.t-online.de") == "5"
    with pytest.raises(UnknownNode):
        fig2.label("nowhere")


def test_rte_transit(fig2):
    rte = [e for e in fig2.edges_of(EdgeKind.RTE) if e.src == "AS15169" and e.dst == "AS3320"]
    assert [e.label.transit for e in rte] == ["AS1299"]
    assert ("AS3320", rte[0].label) in neighbors(fig2, "AS15169", "RTE")


def test_round_trip(fig2):
    text = serialize(fig2)
    g2 = load_graph(text)
    assert graph_to_dict(g2) == graph_to_dict(fig2)
    assert serialize(g2) == text
    assert graph_to_dict(load_graph(io.BytesIO(text.encode()))) == graph_to_dict(fig2)


@pytest.mark.parametrize("edge", [
    ("x.com", "A", "x.org"),           # A must point at an IP
    ("1.1.1.1", "ORIG", "x.com"),      # ORIG goes IP -> AS
    ("AS1", "RTE", "AS2"),             # RTE needs a transit
    ("x.com", "MX", "ghost"),          # unknown endpoint
])
def test_invalid_edges(edge):
    nodes = {"x.com": "Dom", "x.org": "Dom", "1.1.1.1": "IP", "AS1": "AS", "AS2": "AS"}
    with pytest.raises(ValidationError):
        build_graph(nodes, [edge])


def test_transit_rules():
    nodes = {"AS1": "AS", "AS2": "AS", "AS3": "AS", "x.com": "Dom", "DE": "Cntry"}
    g = build_graph(nodes, [("AS1", "RTE", "AS2", "AS3"), ("AS1", "RTE", "AS2", "AS1")])
    assert len(g.edges_of(EdgeKind.RTE)) == 2  # parallel RTE with distinct transit is fine
    with pytest.raises(ValidationError):
        build_graph(nodes, [("AS1", "RTE", "AS2", "AS3"), ("AS1", "RTE", "AS2", "AS3")])
    with pytest.raises(ValidationError):
        build_graph(nodes, [("AS1", "RTE", "AS2", "DE")])
    with pytest.raises(ValidationError):
        build_graph(nodes, [("x.com", "LOC", "DE", "AS1")])


@pytest.mark.parametrize("text", [
    "not json",
    json.dumps([1, 2]),
    json.dumps({"nodes": {"a": "Planet"}, "edges": []}),
    json.dumps({"nodes": {"a": "Dom"}, "edges": [{"src": "a", "label": "XX", "dst": "a"}]}),
    json.dumps({"nodes": {"a": "Dom"}, "edges": [{"src": "a"}]}),
])
def test_syntax_errors(text):
    with pytest.raises(GraphSyntaxError):
        load_graph(text)


def test_empty_graph():
    g = load_graph('{"nodes": {}, "edges": []}')
    assert len(g) == 0 and g.providers == []
