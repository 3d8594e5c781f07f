import pytest

from iasound.picalc.terms import PublicName, fn
from iasound.planner import Action, PlanningTask, ground, pred
from iasound.soundness_conditions import (
    BOUNDED, FAIL, PASS, BoundTooSmall, SigmaCap, check_cc1, check_completeness, check_cs1,
    check_cs2, check_cs3, check_cs4, check_cs5, check_soundness, equiv, load_sigma,
    normalize_cs1, normalize_cs2, project,
)

from conftest import DEFENDER


def ev(sym, *args):
    return fn(sym, *(PublicName(a) for a in args))


S = SigmaCap.default()


def chain_task():
    # C(a) initially; C(a) -> C(b); C(b) -> unconf(p,q)
    return PlanningTask.from_actions([
        Action("r1", frozenset({pred("C", "a")}), frozenset({pred("C", "b")})),
        Action("r2", frozenset({pred("C", "b")}), frozenset({pred("unconf", "p", "q")})),
    ], initial={pred("C", "a")})


def test_sigma_membership():
    assert pred("C", "x") in S
    assert ev("C_ip", "1.2.3.4") in S
    assert ev("Received", "a", "b", "c") not in S  # plumbing
    only = SigmaCap.of("C(x)")
    assert pred("C", "x") in only and pred("C", "y") not in only
    assert pred("unconf", "a", "b") not in S.without("unconf")
    assert load_sigma('["C", "unconf"]').to_list() == ["C", "unconf"]
    with pytest.raises(ValueError):
        load_sigma('{"C": 1}')


def test_projection_and_equiv():
    tr = (ev("C_cntry", "DE"), ev("Register_MX", "x", "y"), ev("Unconf", "p", "q"))
    assert project(tr, S) == (pred("C", "DE"), pred("unconf", "p", "q"))
    assert equiv(tr, (ev("C_cntry", "DE"), ev("Unconf", "p", "q")), S)
    assert not equiv(tr, (ev("Unconf", "p", "q"),), S)


def test_static_conditions_fig2(fig2):
    t = normalize_cs2(ground(fig2, ["DE"], DEFENDER))
    assert check_cs1(t).verdict == PASS
    assert check_cs2(t, S).verdict == PASS
    assert check_cs4(t, S).verdict == PASS


def test_cs1_and_normalization():
    multi = PlanningTask.from_actions(
        [Action("m", frozenset(), frozenset({pred("C", "x"), pred("C", "y")}))])
    rep = check_cs1(multi)
    assert rep.verdict == FAIL and rep.witnesses == ["m"]
    assert check_cs1(normalize_cs1(multi)).ok


def test_cs2_needs_initial_actions():
    t = chain_task()
    assert check_cs2(t, S).verdict == FAIL
    assert check_cs2(normalize_cs2(t), S).ok


def test_cs4_flags_hidden_preconditions():
    t = PlanningTask.from_actions(
        [Action("r", frozenset({pred("helper", "x")}), frozenset({pred("C", "x")})),
         Action("h", frozenset(), frozenset({pred("helper", "x")}))])
    rep = check_cs4(t, S)
    assert rep.verdict == FAIL and rep.witnesses == [("r", "helper(x)")]


def test_cs3():
    assert check_cs3([()]).verdict == PASS
    assert check_cs3([(), ("a",), ("a", "b")]).verdict == BOUNDED
    rep = check_cs3([(), ("a", "b")])
    assert rep.verdict == FAIL and rep.witnesses[0] == (("a", "b"), ("a",))


def test_cs5():
    t = normalize_cs2(chain_task())
    good = [(), (ev("C_cntry", "a"),), (ev("C_cntry", "a"), ev("C_dom", "b"))]
    assert check_cs5(t, good, S).verdict == BOUNDED
    bad = [(ev("C_dom", "b"),)]
    rep = check_cs5(t, bad, S)
    assert rep.verdict == FAIL and rep.witnesses[0][1] == pred("C", "b")
    assert check_cs5(t, [()], S).verdict == PASS


def test_soundness_verdicts():
    t = chain_task()
    ok = [(ev("C_cntry", "a"), ev("Received", "x", "y", "z"), ev("C_dom", "b"),
           ev("Unconf", "p", "q"))]
    assert check_soundness(t, ok, S).kind == "sound"
    bad = [(ev("Unconf", "p", "q"),)]
    v = check_soundness(t, bad, S)
    assert v.kind == "unsound" and v.counterexample == bad[0]
    with pytest.raises(BoundTooSmall):
        check_soundness(t, ok, S, max_len=1)


def test_completeness():
    t = chain_task()
    full = [(ev("C_cntry", "a"), ev("C_dom", "b"), ev("Unconf", "p", "q"))]
    prefixes = {tr[:k] for tr in full for k in range(4)}
    assert check_completeness(t, prefixes, S, 3).kind == "complete"
    assert check_completeness(t, [()], S, 3).kind == "incomplete"


def test_cc1():
    t = normalize_cs2(chain_task())
    full = (ev("C_cntry", "a"), ev("C_dom", "b"), ev("Unconf", "p", "q"))
    traces = {full[:k] for k in range(4)}
    assert check_cc1(t, traces, S, {"depth": 3}).ok
    # the last event may fall outside the bound: only traces with room are checked
    assert check_cc1(t, traces - {full}, S, {"depth": 2}).ok
    rep = check_cc1(t, {(), (ev("C_cntry", "a"),)}, S, {"depth": 3})
    assert rep.verdict == FAIL
    assert rep.witnesses[0] == ((ev("C_cntry", "a"),), pred("C", "b"))


def test_report_serialization():
    rep = check_cs3([(), ("a", "b")], {"depth": 2})
    d = rep.to_dict()
    assert d["condition"] == "CS3" and d["bound"] == {"depth": 2}
    assert "CS3: fail" in rep.text()
