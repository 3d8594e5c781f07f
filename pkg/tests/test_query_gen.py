from pathlib import Path

import pytest

from iasound.graph_model import build_graph
from iasound.planner import Action, CS1Violated, PlanningTask, ground, pred
from iasound.query_gen import (
    Atom, QuerySpec, QuerySyntaxError, diff_queries, emit_queries, parse_queries,
    partition_actions, render, schema_queries,
)
from iasound.soundness_conditions import SigmaCap, normalize_cs2

from conftest import DEFENDER

GOLDEN = Path(__file__).parent / "golden" / "reference_queries.pv"
S = SigmaCap.default()
CORR = ("correspondence",)


def reference():
    return parse_queries(GOLDEN.read_text())


def test_partition():
    t = PlanningTask.from_actions([
        Action("r1", frozenset(), frozenset({pred("C", "x")})),
        Action("r2", frozenset({pred("C", "y")}), frozenset({pred("C", "x")})),
        Action("r3", frozenset(), frozenset({pred("helper", "x")})),
    ])
    part = partition_actions(t, S)
    assert list(part) == [pred("C", "x")] and [a.id for a in part[pred("C", "x")]] == ["r1", "r2"]
    assert partition_actions(t, SigmaCap.of("unconf")) == {}
    multi = PlanningTask.from_actions(
        [Action("m", frozenset(), frozenset({pred("C", "x"), pred("C", "y")}))])
    with pytest.raises(CS1Violated):
        partition_actions(multi, S)


def test_unconf_class_lists_all_rules(fig2):
    part = partition_actions(ground(fig2, ["DE"], DEFENDER), S)
    schemas = {a.schema for c, acts in part.items() if c.symbol == "unconf" for a in acts}
    assert schemas == {"r_compromise", "r_fake-mx", "r_fake-ip", "r_intercept", "r_fake-mx-strict"}


def test_schema_level_matches_reference(fig2):
    text = emit_queries(partition_actions(ground(fig2, ["DE"], DEFENDER), S))
    ours = parse_queries(text)
    assert diff_queries(reference(), ours, kinds=CORR) == []
    assert diff_queries(reference(), ours, with_args=True, kinds=CORR) == []
    ref = {q.conclusion.event: q for q in reference()}
    assert len(ref["Unconf"].disjuncts) == 4 and len(ref["Received"].disjuncts) == 6


def test_legacy_rules_differ(fig2):
    text = emit_queries(partition_actions(ground(fig2, ["DE"], DEFENDER, legacy=True), S))
    diff = diff_queries(reference(), parse_queries(text), kinds=CORR)
    assert any("C_dom" in d for d in diff)
    assert any("Received" in d and "nDNSSEC" in d for d in diff)


def test_schema_level_graph_independent(fig2, fig2_route):
    a = emit_queries(partition_actions(ground(fig2, ["DE"], DEFENDER), S))
    b = emit_queries(partition_actions(ground(fig2_route, ["SE"]), S))
    assert a == b


def test_weak_secrecy_query(fig2):
    qs = schema_queries(partition_actions(ground(fig2, ["DE"], DEFENDER), S))
    ws = [q for q in qs if q.kind == "weak_secrecy"]
    assert len(ws) == 1 and render(ws[0]).endswith("event(Unconf(m,n)).")


def test_ground_level_round_trip(fig2):
    t = normalize_cs2(ground(fig2, ["DE"], DEFENDER))
    part = partition_actions(t, S)
    text = emit_queries(part, schema_level=False, graph=fig2)
    qs = parse_queries(text)
    corr = [q for q in qs if q.kind == "correspondence"]
    live = {c: acts for c, acts in part.items() if all(a.pre for a in acts)}
    assert len(corr) == len(live)
    for q in corr:
        assert q.disjuncts
    assert "(* C(DE): holds initially *)" in text
    assert text == emit_queries(part, schema_level=False, graph=fig2)


def test_empty():
    assert emit_queries({}) == "" and emit_queries({}, schema_level=False) == ""
    g = build_graph({"x.com": "Dom"}, [])
    assert emit_queries(partition_actions(ground(g), S)) == ""


def test_parser_errors():
    with pytest.raises(QuerySyntaxError):
        parse_queries("query event(A(x)) ==> .")
    with pytest.raises(QuerySyntaxError):
        parse_queries("query x:t; event(A(x)) ==> event(B(x))")
    with pytest.raises(QuerySyntaxError):
        parse_queries("query event(A(x)) $")


def test_spec_validation():
    with pytest.raises(ValueError):
        QuerySpec(Atom("A"), [], "correspondence")
    with pytest.raises(ValueError):
        QuerySpec(Atom("A"), [(Atom("B"),)], "weak_secrecy")


def test_differ_reports_changes():
    a = parse_queries("query event(A(x)) ==> (event(B(x)) && event(C(x))) || event(D(x)).")
    b = parse_queries("query event(A(y)) ==> event(D(y)) || (event(C(y)) && event(B(y))).")
    assert diff_queries(a, b) == []
    assert diff_queries(a, b, with_args=True)
    c = parse_queries("query event(A(x)) ==> event(B(x)) || event(D(x)).")
    assert any("disjunct only" in d for d in diff_queries(a, c))
    assert diff_queries(a, []) == ["correspondence A: 1 vs 0 queries"]
