import pytest

from iasound.email_compiler import (
    EVENT_ALPHABET, FAMILY_NAMES, UnknownDomain, check_over_approximation, compile,
    derive_from_over_approximation, dnssec_mode, dump_process, over_approximation, template,
)
from iasound.graph_model import build_graph
from iasound.naming import PLUMBING_EVENTS
from iasound.picalc.process import NIL, Event, event_symbols, par_components, walk
from iasound.picalc.semantics import enumerate_traces
from iasound.picalc.terms import PublicName, fn

from conftest import DEFENDER


def traces(model, depth=6):
    return enumerate_traces(model.process, depth, 2, 3, hide=PLUMBING_EVENTS)


def symbols(trs):
    return {e.symbol for tr in trs for e in tr}


def test_fig2_families(fig2):
    m = compile(fig2, ["DE"], DEFENDER)
    counts = m.summary()["families"]
    assert counts["smtp_client"] == 1 and counts["country"] == 1
    assert counts["resolver"] == 2 and counts["root_nameserver"] == 2
    assert counts["route"] == 0  # no VPN gap configured
    s = m.sessions[0]
    assert (s.sender, s.receiver, s.ip, s.peer_ip) == \
        ("gmail.com", "t-online.de", "64.233.167.26", "194.25.134.8")


def test_events_in_alphabet(fig2):
    m = compile(fig2, ["DE", "SE"], DEFENDER + ("nVPN(AS15169,AS3320)", "nDNSSEC(t-online.de)"))
    assert event_symbols(m.process) <= set(EVENT_ALPHABET)
    assert event_symbols(over_approximation()) <= set(EVENT_ALPHABET)


def test_no_sessions_without_flags(fig2):
    m = compile(fig2, ["DE"])
    assert m.sessions == [] and m.family("smtp_client").instances == ()


def test_empty_graph():
    g = build_graph({}, [])
    assert compile(g).process == NIL
    assert dump_process(compile(g)) == "0"


def test_missing_mx_warns():
    g = build_graph({"p.com": "Provider", "q.com": "Provider"}, [])
    m = compile(g, (), ["nTLS_snd(p.com)", "nDANE_rcv(q.com)"])
    assert len(m.warnings) == 2 and "MissingRole" in m.warnings[0]


def test_dnssec_mode(fig2):
    m = compile(fig2, ["DE"], DEFENDER)
    off = dnssec_mode(m, "t-online.de", False)
    assert not off.signed("t-online.de") and m.signed("t-online.de")
    assert any(fam.instances for fam in [off.family("resolver")])
    assert len(off.family("root_nameserver").instances) == 1
    assert dnssec_mode(off, "t-online.de", True).defender == m.defender
    with pytest.raises(UnknownDomain):
        dnssec_mode(m, "nowhere.example", True)
    assert "nDNSSEC" in symbols(traces(off, 2))


def test_channel_secrecy_without_corruption(fig2):
    m = compile(fig2, [], DEFENDER)
    trs = traces(m)
    assert "Unconf" not in symbols(trs)
    assert symbols(trs) <= {"nTLS_snd", "nDANE_rcv"}


def test_corruption_reveals_keys(fig2):
    # C_ip of the receiving MX hands out ctrl for it, and the key leak follows
    m = compile(fig2, ["DE"], DEFENDER)
    trs = traces(m)
    ev = fn("C_ip", PublicName("194.25.134.8"))
    assert any(ev in tr for tr in trs)
    leak = m.family("keyleak")
    assert ("194.25.134.8", "64.233.167.26", "194.25.134.8") in \
        {tuple(x.name for x in inst) for inst in leak.instances}
    unconf = fn("Unconf", PublicName("gmail.com"), PublicName("t-online.de"))
    assert any(unconf in tr and tr.index(ev) < tr.index(unconf) for tr in trs if ev in tr)


def test_over_approximation_shape():
    comps = par_components(over_approximation())
    assert len(comps) == len(FAMILY_NAMES)
    assert all(type(c).__name__ == "Repl" for c in comps)
    assert [c.name for c in map(template, FAMILY_NAMES)] == list(FAMILY_NAMES)


def test_derivation(fig2):
    m = compile(fig2, ["DE"], DEFENDER)
    d = derive_from_over_approximation(m)
    assert d.ok and d.steps == m.instance_count() + sum(
        len(f.instances) * len(f.params) for f in m.families)


def test_over_approximation_small(fig2):
    m = compile(fig2, ["DE"], DEFENDER)
    v, d = check_over_approximation(m, depth=3)
    assert v.included and d.ok


def test_events_are_ground(fig2):
    m = compile(fig2, ["DE"], DEFENDER)
    for f in m.families:
        for q in walk(f.expand()):
            if isinstance(q, Event):
                assert q.fact.symbol in EVENT_ALPHABET


@pytest.mark.slow
def test_dnssec_blocks_forged_ns_answers(fig2):
    base = DEFENDER + ("nVPN(AS15169,AS3320)",)
    on = traces(compile(fig2, ["SE"], base))
    assert "C_routing" in symbols(on)
    assert not {"I_DNS", "I_DNS_from"} & symbols(on)
    off = traces(compile(fig2, ["SE"], base + ("nDNSSEC(t-online.de)",)))
    assert "I_DNS_from" in symbols(off)


def test_resolver_route_bypasses_dnssec(fig2_route):
    # the domain is signed, but the local hop to the recursive resolver is not protected
    from conftest import ROUTE_DEFENDER
    m = compile(fig2_route, ["SE"], ROUTE_DEFENDER)
    assert m.signed("t-online.de")
    trs = traces(m)
    assert "I_DNS_from" in symbols(trs)
