"""Soundness (CS1-CS5) and completeness (CC1) conditions, checked at bounded scale.

Planning traces and protocol traces are compared after projection onto the
shared alphabet Σ∩.  Protocol events are translated to planning predicates
through :mod:`iasound.naming` first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from .naming import event_to_predicate
from .planner import (
    ARITY, Action, CS1Violated, PlanningTask, Predicate, parse_predicate, with_init_actions,
)

PASS, FAIL, BOUNDED = "pass", "fail", "bounded-pass"


class BoundTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class SigmaCap:
    """Σ∩: predicate symbols, optionally restricted to particular argument tuples."""
    members: frozenset

    @classmethod
    def of(cls, *items) -> "SigmaCap":
        out = set()
        for it in items:
            if isinstance(it, Predicate):
                out.add((it.symbol, it.args))
            elif "(" in it:
                p = parse_predicate(it)
                out.add((p.symbol, p.args))
            else:
                out.add((it, None))
        return cls(frozenset(out))

    @classmethod
    def default(cls) -> "SigmaCap":
        return cls.of(*ARITY)

    def __contains__(self, p) -> bool:
        if not isinstance(p, Predicate):
            p = event_to_predicate(p)
            if p is None:
                return False
        return (p.symbol, None) in self.members or (p.symbol, p.args) in self.members

    def without(self, *symbols) -> "SigmaCap":
        return SigmaCap(frozenset(m for m in self.members if m[0] not in symbols))

    def to_list(self) -> list:
        return sorted(s if a is None else str(Predicate(s, a)) for s, a in self.members)


def load_sigma(text: str) -> SigmaCap:
    """Σ∩ from JSON: a list of symbols or ground predicates."""
    items = json.loads(text)
    if not isinstance(items, list):
        raise ValueError("Σ∩ file must hold a JSON list")
    return SigmaCap.of(*items)


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    witnesses: list = field(default_factory=list)
    bound: dict | None = None

    def __post_init__(self):
        if self.verdict == FAIL and not self.witnesses:
            raise ValueError("a failing report needs witnesses")

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, BOUNDED)

    def to_dict(self) -> dict:
        return {"condition": self.condition, "verdict": self.verdict,
                "witnesses": [_jsonable(w) for w in self.witnesses], "bound": self.bound}

    def text(self) -> str:
        line = f"{self.condition}: {self.verdict}"
        if self.witnesses:
            line += f" ({len(self.witnesses)} witness(es), first: {_jsonable(self.witnesses[0])})"
        return line


@dataclass
class SoundnessVerdict:
    kind: str  # sound | unsound | complete | incomplete
    bound: dict | None = None
    counterexample: tuple | None = None
    checked: int = 0

    def __post_init__(self):
        if self.kind in ("unsound", "incomplete") and self.counterexample is None:
            raise ValueError(f"{self.kind} verdict needs a counterexample")

    @property
    def ok(self) -> bool:
        return self.kind in ("sound", "complete")

    def to_dict(self) -> dict:
        ce = None if self.counterexample is None else [str(e) for e in self.counterexample]
        return {"kind": self.kind, "bound": self.bound, "counterexample": ce,
                "checked": self.checked}


def _jsonable(w):
    if isinstance(w, (list, tuple)):
        return [_jsonable(x) for x in w]
    if isinstance(w, dict):
        return {k: _jsonable(v) for k, v in w.items()}
    if isinstance(w, (str, int, float, bool)) or w is None:
        return w
    return str(w)


# -- projection -------------------------------------------------------------

def project(t: Iterable, s: SigmaCap) -> tuple:
    """``t|Σ∩`` with protocol events rendered as predicates."""
    out = []
    for e in t:
        p = event_to_predicate(e)
        if p is not None and p in s:
            out.append(p)
    return tuple(out)


def equiv(a: Iterable, b: Iterable, s: SigmaCap) -> bool:
    return project(a, s) == project(b, s)


# -- static conditions ------------------------------------------------------

def _require_cs1(t: PlanningTask):
    bad = [a.id for a in t.actions if len(a.post) != 1]
    if bad:
        raise CS1Violated(f"non-singleton postconditions in {bad[:3]}")


def check_cs1(t: PlanningTask) -> ConditionReport:
    bad = [a.id for a in t.actions if len(a.post) != 1]
    return ConditionReport("CS1", FAIL if bad else PASS, bad)


def normalize_cs1(t: PlanningTask) -> PlanningTask:
    """Split every action ``(pre, {c1..cn})`` into ``(pre, {ci})``."""
    actions = []
    for a in t.actions:
        if len(a.post) == 1:
            actions.append(a)
            continue
        for k, c in enumerate(sorted(a.post)):
            actions.append(Action(f"{a.id}/{k}", a.pre, frozenset({c}), a.reward))
    return PlanningTask(t.predicates, t.initial, tuple(actions), t.goals)


def normalize_cs2(t: PlanningTask) -> PlanningTask:
    """Initial predicates become actions ``(∅, {p})`` so they are reproducible."""
    return with_init_actions(t)


def check_cs2(t: PlanningTask, s: SigmaCap) -> ConditionReport:
    _require_cs1(t)
    produced = {a.effect for a in t.actions}
    missing = sorted(p for p in t.predicates if p in s and p not in produced)
    return ConditionReport("CS2", FAIL if missing else PASS, missing)


def check_cs4(t: PlanningTask, s: SigmaCap) -> ConditionReport:
    bad = []
    for a in t.actions:
        if any(c in s for c in a.post):
            bad.extend((a.id, str(p)) for p in sorted(a.pre) if p not in s)
    return ConditionReport("CS4", FAIL if bad else PASS, bad)


# -- dynamic conditions -----------------------------------------------------

def check_cs3(traces: Iterable[tuple], bound: dict | None = None) -> ConditionReport:
    traces = set(map(tuple, traces))
    bad = []
    for tr in sorted(traces, key=lambda x: (len(x), str(x))):
        for i in range(len(tr)):
            if tr[:i] not in traces:
                bad.append((tr, tr[:i]))
                break
    if bad:
        return ConditionReport("CS3", FAIL, bad, bound)
    return ConditionReport("CS3", PASS if traces <= {()} else BOUNDED, [], bound)


class _Achievers:
    """Index ``post -> [pre]`` for CS1-normalized tasks."""

    def __init__(self, t: PlanningTask):
        _require_cs1(t)
        self.by_post: dict[Predicate, list[frozenset]] = {}
        for a in t.actions:
            self.by_post.setdefault(a.effect, []).append(a.pre)

    def justified(self, c: Predicate, seen) -> bool:
        return any(pre <= seen for pre in self.by_post.get(c, ()))


def check_cs5(t: PlanningTask, traces: Iterable[tuple], s: SigmaCap,
              bound: dict | None = None) -> ConditionReport:
    """Every Σ∩ event is preceded by the preconditions of some producing action."""
    ach = _Achievers(t)
    bad = []
    any_event = False
    for tr in sorted(set(map(tuple, traces)), key=lambda x: (len(x), str(x))):
        seen: set = set()
        for e in tr:
            p = event_to_predicate(e)
            if p is None or p not in s:
                continue
            any_event = True
            if not ach.justified(p, seen):
                bad.append((tr, p))
                break
            seen.add(p)
    if bad:
        return ConditionReport("CS5", FAIL, bad, bound)
    return ConditionReport("CS5", BOUNDED if any_event else PASS, [], bound)


def check_cc1(t: PlanningTask, trace_oracle, s: SigmaCap, bound: dict | None = None,
              room: int = 1) -> ConditionReport:
    """Bounded CC1: enabled Σ∩ actions can be appended to enumerated traces.

    Only traces leaving ``room`` events of slack below the depth bound are
    checked, and only postconditions not already in the trace (plans are
    considered modulo repetition).
    """
    traces = set(map(tuple, trace_oracle() if callable(trace_oracle) else trace_oracle))
    depth = (bound or {}).get("depth", max((len(x) for x in traces), default=0))
    ach = _Achievers(t)
    ext: dict[tuple, set] = {}
    for tr in traces:
        for i in range(len(tr) + 1):
            nxt = next((p for p in map(event_to_predicate, tr[i:]) if p is not None and p in s), None)
            if nxt is not None:
                ext.setdefault(tr[:i], set()).add(nxt)
    bad = []
    for tr in sorted(traces, key=lambda x: (len(x), str(x))):
        if len(tr) > depth - room:
            continue
        seen = set(project(tr, s))
        for c, pres in sorted(ach.by_post.items()):
            if c not in s or c in seen:
                continue
            if any(pre <= seen for pre in pres) and c not in ext.get(tr, ()):
                bad.append((tr, c))
    if bad:
        return ConditionReport("CC1", FAIL, bad, bound)
    return ConditionReport("CC1", BOUNDED if traces - {()} else PASS, [], bound)


# -- symbolic soundness and completeness ------------------------------------

def _planning_match(ach: _Achievers, proj: tuple) -> bool:
    """Greedy layer-respecting match of a projected trace against the task."""
    seen: set = set()
    for p in proj:
        if not ach.justified(p, seen):
            return False
        seen.add(p)
    return True


def _planning_match_exhaustive(t: PlanningTask, proj: tuple) -> bool:
    """Search over concrete plans whose post-sequence is ``proj``."""
    state: frozenset = frozenset(t.initial)
    frontier = {state}
    for p in proj:
        nxt = set()
        for st in frontier:
            for a in t.actions:
                if a.effect == p and a.pre <= st:
                    nxt.add(st | {p})
        if not nxt:
            return False
        frontier = nxt
    return True


def check_soundness(t: PlanningTask, traces: Iterable[tuple], s: SigmaCap,
                    bound: dict | None = None, max_len: int | None = None) -> SoundnessVerdict:
    """Every protocol trace has an ≈-equivalent planning trace.

    ``t`` is expected with an empty initial state (see :func:`normalize_cs2`);
    otherwise it is normalized first.
    """
    if t.initial:
        t = normalize_cs2(t)
    ach = _Achievers(t)
    traces = sorted(set(map(tuple, traces)), key=lambda x: (len(x), str(x)))
    projs = {tr: project(tr, s) for tr in traces}
    longest = max((len(p) for p in projs.values()), default=0)
    if max_len is not None and max_len < longest:
        raise BoundTooSmall(f"planning bound {max_len} < longest projection {longest}")
    cache: dict[tuple, bool] = {}
    for tr in traces:
        proj = projs[tr]
        ok = cache.get(proj)
        if ok is None:
            ok = _planning_match(ach, proj) or _planning_match_exhaustive(t, proj)
            cache[proj] = ok
        if not ok:
            return SoundnessVerdict("unsound", bound, tr, len(cache))
    return SoundnessVerdict("sound", bound, None, len(cache))


def repetition_free_traces(t: PlanningTask, max_len: int, s: SigmaCap | None = None) -> set:
    """Planning traces without repeated predicates, projected onto ``s``."""
    _require_cs1(t)
    out = {()}
    cache: dict[frozenset, list] = {}

    def producible(state):
        if state not in cache:
            cache[state] = sorted({a.effect for a in t.actions if a.pre <= state} - state)
        return cache[state]

    def walk(state, prefix):
        if len(prefix) == max_len:
            return
        for p in producible(state):
            seq = prefix + (p,)
            out.add(seq)
            walk(state | {p}, seq)

    walk(frozenset(t.initial), ())
    if s is None:
        return out
    return {tuple(p for p in tr if p in s) for tr in out}


def check_completeness(t: PlanningTask, traces: Iterable[tuple], s: SigmaCap,
                       max_len: int, bound: dict | None = None) -> SoundnessVerdict:
    """Every repetition-free planning trace has an ≈-equivalent protocol trace."""
    if t.initial:
        t = normalize_cs2(t)
    protocol = {project(tr, s) for tr in traces}
    if max_len < 0:
        raise BoundTooSmall("negative planning bound")
    planning = repetition_free_traces(t, max_len, s)
    checked = 0
    for pt in sorted(planning, key=lambda x: (len(x), str(x))):
        checked += 1
        if pt not in protocol:
            return SoundnessVerdict("incomplete", bound, pt, checked)
    return SoundnessVerdict("complete", bound, None, checked)


def summarize(reports: Iterable[ConditionReport]) -> dict:
    return {r.condition: r.verdict for r in reports}
