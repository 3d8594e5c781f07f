"""Delete-relaxed STRIPS model of the infrastructure attacker.

The 14 rule schemas are grounded over a property graph.  Disjunctive
premises become one action per disjunct, so every action is a plain
``(pre, post)`` pair with a singleton postcondition.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .graph_model import EdgeKind, NodeLabel, PropertyGraph

ARITY = {
    "C": 1, "I_DNS1": 1, "nDNSSEC": 1, "nTLS_snd": 1, "nDANE_rcv": 1, "nRFC7817": 1,
    "I_R": 2, "I_DNS2": 2, "unconf": 2, "nVPN": 2,
}
DEFENDER_SYMBOLS = frozenset({"nDNSSEC", "nTLS_snd", "nDANE_rcv", "nRFC7817", "nVPN"})
CORRUPTION_SYMBOLS = frozenset({"C", "I_R", "I_DNS1", "I_DNS2", "unconf"})

SCHEMAS = (
    "r_init-loc", "r_init-as", "r_init-dom", "r_init-ip", "r_injection",
    "r_dns-ns", "r_dns-res", "r_dns-route-res", "r_dns-route-ns",
    "r_compromise", "r_fake-mx", "r_fake-ip", "r_intercept", "r_fake-mx-strict",
)


class Predicate(NamedTuple):
    symbol: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.symbol}({','.join(self.args)})"

    def __repr__(self) -> str:
        return str(self)


_PRED_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")


def pred(symbol: str, *args: str) -> Predicate:
    return Predicate(symbol, tuple(args))


def parse_predicate(text: str) -> Predicate:
    m = _PRED_RE.match(text)
    if not m:
        raise ValueError(f"not a predicate: {text!r}")
    args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2).strip() else ()
    return Predicate(m.group(1), args)


class PlanningError(Exception):
    pass


class UnknownAttackerNode(PlanningError):
    pass


class NonCountryAttacker(PlanningError):
    pass


class MalformedDefenderPredicate(PlanningError):
    pass


class UnknownPredicate(PlanningError):
    pass


class CS1Violated(PlanningError):
    """Raised by operations that require singleton postconditions."""


@dataclass(frozen=True)
class Action:
    id: str
    pre: frozenset
    post: frozenset
    reward: float = 0.0

    def __post_init__(self):
        if not self.post:
            raise ValueError(f"action {self.id} has an empty postcondition")
        if self.reward < 0:
            raise ValueError(f"action {self.id} has a negative reward")

    @property
    def schema(self) -> str:
        return self.id.split("(", 1)[0]

    @property
    def effect(self) -> Predicate:
        """The single postcondition; only valid for CS1-normalized actions."""
        if len(self.post) != 1:
            raise CS1Violated(self.id)
        return next(iter(self.post))


@dataclass(frozen=True)
class PlanningTask:
    predicates: frozenset
    initial: frozenset
    actions: tuple
    goals: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.initial <= self.predicates:
            raise ValueError("initial state is not a subset of the predicates")
        for a in self.actions:
            if not (a.pre | a.post) <= self.predicates:
                raise ValueError(f"action {a.id} mentions unknown predicates")

    @classmethod
    def from_actions(cls, actions: Iterable[Action], initial: Iterable = (), goals: Iterable = ()):
        actions = tuple(actions)
        initial = frozenset(initial)
        preds = set(initial)
        for a in actions:
            preds |= a.pre | a.post
        return cls(frozenset(preds), initial, actions, frozenset(goals))

    def action(self, action_id: str) -> Action:
        for a in self.actions:
            if a.id == action_id:
                return a
        raise KeyError(action_id)


Plan = list  # sequence of action ids


class Unreachable:
    """Sentinel returned by :func:`extract_plan` for unreachable goals."""

    def __repr__(self):
        return "Unreachable"

    def __bool__(self):
        return False


UNREACHABLE = Unreachable()


# -- grounding --------------------------------------------------------------

class _Grounder:
    def __init__(self, g: PropertyGraph, legacy: bool):
        self.g = g
        self.legacy = legacy
        self.actions: dict[str, Action] = {}

    def add(self, schema, args, pre, post, reward=0.0, disjunct=None):
        aid = f"{schema}({','.join(args)})"
        if disjunct is not None:
            aid += f"#{disjunct}"
        if post.symbol == "C" and self.g.is_root_server(post.args[0]):
            return
        self.actions[aid] = Action(aid, frozenset(pre), frozenset({post}), reward)

    def mx(self, v):
        return sorted(self.g.succ(v, EdgeKind.MX))

    def a(self, d):
        return sorted(self.g.succ(d, EdgeKind.A))

    def run(self):
        g, C = self.g, (lambda x: pred("C", x))
        # initially compromised nodes
        for e in g.edges_of(EdgeKind.LOC):
            self.add("r_init-loc", (e.src, e.dst), [C(e.dst)], C(e.src))
        for e in g.edges_of(EdgeKind.ORIG):
            self.add("r_init-as", (e.src, e.dst), [C(e.dst)], C(e.src))
        for e in g.edges_of(EdgeKind.A):
            self.add("r_init-dom", (e.src, e.dst), [C(e.dst)], C(e.src))
            if not self.legacy:
                self.add("r_init-ip", (e.dst, e.src), [C(e.src)], C(e.dst))
        # routing
        for e in g.edges_of(EdgeKind.RTE):
            a_, c_, b = e.src, e.dst, e.label.transit
            for i in sorted(g.pred(a_, EdgeKind.ORIG)):
                for j in sorted(g.pred(c_, EdgeKind.ORIG)):
                    self.add("r_injection", (i, j, a_, b, c_),
                             [C(b), pred("nVPN", a_, c_)], pred("I_R", i, j))
        domains = g.domains
        # name resolution
        for e in g.edges_of(EdgeKind.DNS):
            d, ns = e.src, e.dst
            if self.legacy:
                self.add("r_dns-ns", (d, ns), [C(ns)], pred("I_DNS1", d))
            else:
                for i in self.a(ns):
                    self.add("r_dns-ns", (d, ns, i), [C(i)], pred("I_DNS1", d))
        for r_edge in g.edges_of(EdgeKind.RES):
            d, r = r_edge.src, r_edge.dst
            for e in domains:
                self.add("r_dns-res", (d, e, r), [C(r)], pred("I_DNS2", d, e))
            for i in self.a(d):
                for e in domains:
                    pre = [pred("I_R", i, r)]
                    if self.legacy:
                        pre.append(pred("nDNSSEC", e))
                    self.add("r_dns-route-res", (d, e, i, r), pre, pred("I_DNS2", d, e))
            for dns in g.edges_of(EdgeKind.DNS):
                e, f = dns.src, dns.dst
                for i in self.a(f):
                    self.add("r_dns-route-ns", (d, e, f, r, i),
                             [pred("I_R", r, i), pred("nDNSSEC", e)], pred("I_DNS2", d, e))
        # confidentiality
        providers = g.providers
        for d in providers:
            for e in providers:
                reward = float(g.attr(d, f"reward.{e}") or 0)
                U = pred("unconf", d, e)
                tls = pred("nTLS_snd", d)
                for d1 in self.mx(d):
                    for e1 in self.mx(e):
                        for d2 in self.a(d1):
                            for e2 in self.a(e1):
                                args = (d, e, d1, e1, d2, e2)
                                if self.legacy:
                                    self.add("r_compromise", args, [C(e1)], U, reward, 1)
                                    self.add("r_compromise", args, [C(d1)], U, reward, 2)
                                else:
                                    self.add("r_compromise", args, [C(e2)], U, reward, 1)
                                    self.add("r_compromise", args, [C(d2)], U, reward, 2)
                                if d != e:
                                    self.add("r_intercept", args,
                                             [pred("I_R", d2, e2), tls, pred("nDANE_rcv", e)],
                                             U, reward)
                if d == e:
                    continue
                for d1 in self.mx(d):
                    self.add("r_fake-mx", (d, e, d1), [tls, pred("I_DNS1", e)], U, reward, 1)
                    self.add("r_fake-mx", (d, e, d1), [tls, pred("I_DNS2", d1, e)], U, reward, 2)
                    for e1 in self.mx(e):
                        self.add("r_fake-ip", (d, e, d1, e1),
                                 [pred("I_DNS1", e1), tls], U, reward, 1)
                        self.add("r_fake-ip", (d, e, d1, e1),
                                 [pred("I_DNS2", d1, e1), tls], U, reward, 2)
                    strict = pred("nRFC7817", d)
                    self.add("r_fake-mx-strict", (d, e, d1), [pred("I_DNS1", e), strict], U, reward, 1)
                    self.add("r_fake-mx-strict", (d, e, d1), [pred("I_DNS2", d1, e), strict], U, reward, 2)
        return [self.actions[k] for k in sorted(self.actions)]


def check_defender_config(g: PropertyGraph, defender_config: Iterable[Predicate]) -> frozenset:
    out = set()
    for p in defender_config:
        if isinstance(p, str):
            p = parse_predicate(p)
        if p.symbol not in DEFENDER_SYMBOLS:
            raise MalformedDefenderPredicate(f"{p} is not a defender predicate")
        if len(p.args) != ARITY[p.symbol]:
            raise MalformedDefenderPredicate(f"{p}: expected {ARITY[p.symbol]} argument(s)")
        for a in p.args:
            if a not in g.nodes:
                raise MalformedDefenderPredicate(f"{p}: unknown node {a!r}")
        out.add(p)
    return frozenset(out)


def ground(g: PropertyGraph, attacker: Iterable[str] = (), defender_config: Iterable = (),
           legacy: bool = False) -> PlanningTask:
    """Ground the attacker rules over ``g``.

    ``legacy`` selects the original rule set: no ``r_init-ip``, domain-level
    corruption in ``r_dns-ns``/``r_compromise`` and ``nDNSSEC`` retained in
    ``r_dns-route-res``.
    """
    attacker = sorted(attacker)
    for cn in attacker:
        if cn not in g.nodes:
            raise UnknownAttackerNode(cn)
        if g.nodes[cn] is not NodeLabel.Cntry:
            raise NonCountryAttacker(f"{cn} is a {g.nodes[cn].value} node")
    defender = check_defender_config(g, defender_config)
    actions = _Grounder(g, legacy).run()
    initial = {pred("C", cn) for cn in attacker} | defender
    return PlanningTask.from_actions(actions, initial)


# -- reachability -----------------------------------------------------------

def fixpoint_layers(t: PlanningTask) -> dict:
    """Map every reachable predicate to the first layer it appears in."""
    layer = {p: 0 for p in t.initial}
    missing = {a.id: len(a.pre - t.initial) for a in t.actions}
    watchers: dict[Predicate, list[Action]] = {}
    for a in t.actions:
        for p in a.pre:
            watchers.setdefault(p, []).append(a)
    frontier = [a for a in t.actions if missing[a.id] == 0]
    depth = 0
    while frontier:
        depth += 1
        new = []
        for a in sorted(frontier, key=lambda a: a.id):
            for p in sorted(a.post):
                if p not in layer:
                    layer[p] = depth
                    new.append(p)
        frontier = []
        for p in new:
            for a in watchers.get(p, ()):
                missing[a.id] -= 1
                if missing[a.id] == 0:
                    frontier.append(a)
    return layer


def reachable_fixpoint(t: PlanningTask) -> frozenset:
    return frozenset(fixpoint_layers(t))


def apply_plan(t: PlanningTask, plan: Iterable[str]) -> frozenset:
    """Replay ``plan`` from the initial state, checking applicability."""
    state = set(t.initial)
    by_id = {a.id: a for a in t.actions}
    for aid in plan:
        a = by_id[aid]
        if not a.pre <= state:
            raise PlanningError(f"{aid} not applicable: missing {sorted(a.pre - state)}")
        state |= a.post
    return frozenset(state)


def extract_plan(t: PlanningTask, goal: Predicate):
    if isinstance(goal, str):
        goal = parse_predicate(goal)
    if goal not in t.predicates:
        raise UnknownPredicate(str(goal))
    layer = fixpoint_layers(t)
    if goal not in layer:
        return UNREACHABLE
    achiever: dict[Predicate, Action] = {}
    for a in sorted(t.actions, key=lambda a: a.id):
        if not all(p in layer for p in a.pre):
            continue
        lvl = max((layer[p] for p in a.pre), default=0)
        for p in a.post:
            best = achiever.get(p)
            if best is None or lvl < max((layer[q] for q in best.pre), default=0):
                achiever[p] = a
    chosen: dict[str, Action] = {}

    def need(p):
        if p in t.initial:
            return
        a = achiever[p]
        if a.id in chosen:
            return
        for q in sorted(a.pre):
            need(q)
        chosen[a.id] = a

    need(goal)

    def level(a):
        return max((layer[q] for q in a.pre), default=0)

    plan = [a.id for a in sorted(chosen.values(), key=lambda a: (level(a), a.id))]
    apply_plan(t, plan)
    return plan


def _require_cs1(t: PlanningTask):
    bad = [a.id for a in t.actions if len(a.post) != 1]
    if bad:
        raise CS1Violated(f"non-singleton postconditions: {bad[:5]}")


def planning_traces(t: PlanningTask, max_len: int) -> set:
    """All post-sequences of plans with at most ``max_len`` steps."""
    _require_cs1(t)
    out = {()}
    cache: dict[frozenset, list[Predicate]] = {}

    def producible(state):
        if state not in cache:
            cache[state] = sorted({a.effect for a in t.actions if a.pre <= state})
        return cache[state]

    def walk(state, prefix):
        if len(prefix) == max_len:
            return
        for p in producible(state):
            seq = prefix + (p,)
            out.add(seq)
            walk(state | {p}, seq)

    walk(frozenset(t.initial), ())
    return out


def total_reward(t: PlanningTask, fixpoint) -> float:
    best: dict[Predicate, float] = {}
    for a in t.actions:
        for p in a.post:
            if p.symbol == "unconf" and p in fixpoint:
                best[p] = max(best.get(p, 0.0), a.reward)
    return sum(best.values())


def with_init_actions(t: PlanningTask) -> PlanningTask:
    """Move the initial state into actions ``(∅, {p})`` and drop dead actions.

    The result has an empty initial state, reaches the same fixpoint, and
    every predicate it mentions is some action's postcondition.
    """
    init = [Action(f"init({p})", frozenset(), frozenset({p})) for p in sorted(t.initial)]
    actions = list(init) + [a for a in t.actions]
    while True:
        produced = set()
        for a in actions:
            produced |= a.post
        kept = [a for a in actions if a.pre <= produced]
        if len(kept) == len(actions):
            break
        actions = kept
    return PlanningTask.from_actions(actions, (), t.goals)


# -- serialization ----------------------------------------------------------

def task_to_dict(t: PlanningTask) -> dict:
    return {
        "predicates": sorted(str(p) for p in t.predicates),
        "initial": sorted(str(p) for p in t.initial),
        "actions": [
            {"id": a.id, "pre": sorted(str(p) for p in a.pre),
             "post": sorted(str(p) for p in a.post), "reward": a.reward}
            for a in t.actions
        ],
        "goals": sorted(str(p) for p in t.goals),
    }


def task_from_dict(doc: dict) -> PlanningTask:
    P = parse_predicate
    actions = [Action(a["id"], frozenset(map(P, a["pre"])), frozenset(map(P, a["post"])),
                      float(a.get("reward", 0))) for a in doc["actions"]]
    return PlanningTask(frozenset(map(P, doc["predicates"])), frozenset(map(P, doc["initial"])),
                        tuple(actions), frozenset(map(P, doc.get("goals", []))))


def dump_task(t: PlanningTask) -> str:
    return json.dumps(task_to_dict(t), indent=2, sort_keys=True) + "\n"
