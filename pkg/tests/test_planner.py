import random

import pytest

from iasound.planner import (
    SCHEMAS, UNREACHABLE, Action, CS1Violated, NonCountryAttacker, PlanningError, PlanningTask,
    UnknownAttackerNode, UnknownPredicate, apply_plan, dump_task, extract_plan, fixpoint_layers,
    ground, parse_predicate, planning_traces, pred, reachable_fixpoint, task_from_dict,
    task_to_dict, total_reward,
)

from conftest import DEFENDER
from oracles import bfs_fixpoint, random_task


def test_fixpoint_matches_bfs_oracle():
    rng = random.Random(7)
    for _ in range(200):
        t = random_task(rng)
        assert reachable_fixpoint(t) == bfs_fixpoint(t)


def test_extracted_plans_are_valid():
    rng = random.Random(11)
    for _ in range(100):
        t = random_task(rng)
        fix = reachable_fixpoint(t)
        for p in sorted(t.predicates):
            plan = extract_plan(t, p)
            if p in fix:
                assert p in apply_plan(t, plan)
            else:
                assert plan is UNREACHABLE and not plan


def test_layers_monotone():
    t = PlanningTask.from_actions([
        Action("a", frozenset(), frozenset({pred("x")})),
        Action("b", frozenset({pred("x")}), frozenset({pred("y")})),
        Action("c", frozenset({pred("y"), pred("x")}), frozenset({pred("z")})),
    ])
    assert fixpoint_layers(t) == {pred("x"): 1, pred("y"): 2, pred("z"): 3}
    assert extract_plan(t, pred("z")) == ["a", "b", "c"]


def test_apply_plan_rejects_inapplicable():
    t = PlanningTask.from_actions([Action("b", frozenset({pred("x")}), frozenset({pred("y")}))])
    with pytest.raises(PlanningError):
        apply_plan(t, ["b"])
    with pytest.raises(UnknownPredicate):
        extract_plan(t, pred("nope"))


def test_ground_schemas(fig2):
    t = ground(fig2, ["DE"], DEFENDER)
    assert {a.schema for a in t.actions} == set(SCHEMAS)
    assert pred("C", "DE") in t.initial
    legacy = ground(fig2, ["DE"], DEFENDER, legacy=True)
    assert "r_init-ip" not in {a.schema for a in legacy.actions}


def test_ground_deterministic(fig2):
    assert dump_task(ground(fig2, ["DE"], DEFENDER)) == dump_task(ground(fig2, ["DE"], DEFENDER))


def test_root_servers_never_corrupted(fig2):
    t = ground(fig2, ["US", "DE", "SE"])
    posts = {p for a in t.actions for p in a.post}
    assert pred("C", "a.root-servers.net") not in posts
    assert pred("C", "198.41.0.4") not in posts


def test_attacker_validation(fig2):
    with pytest.raises(UnknownAttackerNode):
        ground(fig2, ["XX"])
    with pytest.raises(NonCountryAttacker):
        ground(fig2, ["gmail.com"])


def test_ip_corruption_needs_new_rule(fig2):
    # a corrupted mail domain only yields its IP with r_init-ip
    fix = reachable_fixpoint(ground(fig2, ["DE"], DEFENDER))
    old = reachable_fixpoint(ground(fig2, ["DE"], DEFENDER, legacy=True))
    assert pred("unconf", "gmail.com", "t-online.de") in fix
    assert pred("unconf", "gmail.com", "t-online.de") in old


def test_reward(fig2):
    t = ground(fig2, ["DE"], DEFENDER)
    fix = reachable_fixpoint(t)
    unconf = {p for p in fix if p.symbol == "unconf" and p.args[0] != p.args[1]}
    assert unconf == {pred("unconf", "gmail.com", "t-online.de"),
                      pred("unconf", "t-online.de", "gmail.com")}
    assert total_reward(t, fix) == 8.0
    assert total_reward(ground(fig2), reachable_fixpoint(ground(fig2))) == 0


def test_intercept_through_transit(fig2):
    # the transit AS sits in SE; interception needs both TLS and DANE absent
    t = ground(fig2, ["SE"], DEFENDER + ("nVPN(AS15169,AS3320)",))
    plan = extract_plan(t, pred("unconf", "gmail.com", "t-online.de"))
    assert any(a.startswith("r_intercept") for a in plan)
    t2 = ground(fig2, ["SE"], ("nTLS_snd(gmail.com)", "nVPN(AS15169,AS3320)"))
    assert pred("unconf", "gmail.com", "t-online.de") not in reachable_fixpoint(t2)


def test_planning_traces():
    t = PlanningTask.from_actions([
        Action("a", frozenset(), frozenset({pred("x")})),
        Action("b", frozenset({pred("x")}), frozenset({pred("y")})),
    ])
    assert planning_traces(t, 0) == {()}
    tr = planning_traces(t, 2)
    assert (pred("x"), pred("y")) in tr and (pred("y"),) not in tr
    multi = PlanningTask.from_actions([Action("m", frozenset(), frozenset({pred("x"), pred("y")}))])
    with pytest.raises(CS1Violated):
        planning_traces(multi, 1)


def test_serialization_round_trip(fig2):
    t = ground(fig2, ["DE"], DEFENDER)
    assert task_to_dict(task_from_dict(task_to_dict(t))) == task_to_dict(t)


def test_parse_predicate():
    assert parse_predicate("nVPN(AS1, AS2)") == pred("nVPN", "AS1", "AS2")
    with pytest.raises(ValueError):
        parse_predicate("broken")
