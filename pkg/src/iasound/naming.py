"""Versioned mapping between protocol event names and planning predicates.

The planning model and the protocol model use different surface names for
the same facts.  Corruption of any node maps to ``C``; the protocol model
distinguishes the node kind in the event name.
"""
from __future__ import annotations

from .graph_model import NodeLabel, PropertyGraph
from .picalc.terms import Constructor
from .planner import ARITY, Predicate

NAMING_VERSION = "1"

EVENT_TO_PREDICATE = {
    "C_ip": "C",
    "C_dom": "C",
    "C_as": "C",
    "C_cntry": "C",
    "C_routing": "I_R",
    "I_DNS": "I_DNS1",
    "I_DNS_from": "I_DNS2",
    "Unconf": "unconf",
    "nDNSSEC": "nDNSSEC",
    "nTLS_snd": "nTLS_snd",
    "nDANE_rcv": "nDANE_rcv",
    "nRFC7817": "nRFC7817",
    "nVPN": "nVPN",
}

# events that only relate protocol steps to each other; never in Σ∩
PLUMBING_EVENTS = {
    "Received": 3, "Register_MX": 2, "Register_A": 2, "A_record": 2, "isMailserver": 2,
    "queries_prov": 2, "Resolver": 2, "UsedDomServer": 2,
}

EVENT_ARITY = {
    **PLUMBING_EVENTS,
    "Unconf": 2, "C_ip": 1, "C_dom": 1, "C_as": 1, "C_cntry": 1, "C_routing": 2,
    "I_DNS": 1, "I_DNS_from": 2, "nDNSSEC": 1, "nTLS_snd": 1, "nDANE_rcv": 1,
    "nRFC7817": 1, "nVPN": 2,
}

_C_EVENT = {
    NodeLabel.IP: "C_ip", NodeLabel.Dom: "C_dom", NodeLabel.Provider: "C_dom",
    NodeLabel.AS: "C_as", NodeLabel.Cntry: "C_cntry",
}


def event_to_predicate(fact) -> Predicate | None:
    """Planning predicate named by a protocol event, or None for plumbing."""
    if isinstance(fact, Predicate):
        return fact
    sym = EVENT_TO_PREDICATE.get(fact.symbol)
    if sym is None:
        return None
    if len(fact.args) != ARITY[sym]:
        raise ValueError(f"event {fact} has the wrong arity for {sym}")
    return Predicate(sym, tuple(str(a) for a in fact.args))


def predicate_to_event(p: Predicate, g: PropertyGraph | None = None) -> str:
    """Event symbol for a predicate; ``C`` needs the graph to pick the node kind."""
    if p.symbol == "C":
        if g is None:
            return "C_ip"
        return _C_EVENT[g.label(p.args[0])]
    for ev, sym in EVENT_TO_PREDICATE.items():
        if sym == p.symbol and ev not in _C_EVENT.values():
            return ev
    raise KeyError(p.symbol)


def predicate_to_fact(p: Predicate, g: PropertyGraph | None = None) -> Constructor:
    from .picalc.terms import PublicName
    return Constructor(predicate_to_event(p, g), [PublicName(a) for a in p.args])


def table() -> dict:
    return {"version": NAMING_VERSION, "events": dict(sorted(EVENT_TO_PREDICATE.items())),
            "plumbing": sorted(PLUMBING_EVENTS)}
