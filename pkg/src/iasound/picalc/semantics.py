"""Labeled operational semantics and bounded trace enumeration.

``step`` applies one rule of the semantics.  ``enumerate_traces`` works on
normal forms instead: silent steps that commute with everything else (par,
null, repl unfolding, new, let/if, output on an adversary-known channel) are
applied eagerly, so only events, inputs and internal communications branch.

Adversary inputs are drawn from a bounded, pattern-directed candidate set:
terms the receiving continuation tests for (equality operands and
destructor patterns, filled recursively up to ``msg_depth``), frame terms
matching those patterns, declared extra names and one junk name standing
for every other term.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
import sys
from collections import Counter
from dataclasses import dataclass

from .deduce import Knowledge, evaluate
from .process import (
    Event, IfEq, In, LetDes, New, Nil, Out, Par, Process, Repl, free_names, rename, subst,
)
from .terms import (
    DEFAULT_THEORY, Constructor, FreeName, PublicName, Theory, Variable, match, substitute,
)

JUNK = PublicName("_adv")


class ModelError(ValueError):
    """Malformed process, e.g. an event with an unbound variable."""


@dataclass(frozen=True)
class Bounds:
    depth: int = 6
    repl: int = 2
    msg_depth: int = 3

    def __post_init__(self):
        if min(self.depth, self.repl, self.msg_depth) < 0:
            raise ValueError("bounds must be non-negative")

    def as_dict(self):
        return {"depth": self.depth, "repl": self.repl, "msg_depth": self.msg_depth}


@dataclass(frozen=True)
class Configuration:
    """``(E, P, δ)``."""
    names: frozenset = frozenset()
    procs: tuple = ()
    frame: tuple = ()

    @classmethod
    def initial(cls, p: Process) -> "Configuration":
        return cls(frozenset(), (p,), ())


class _Ctx:
    def __init__(self, theory: Theory, repl: int, msg_depth: int, extra_names=()):
        self.theory = theory
        self.repl = repl
        self.msg_depth = msg_depth
        self.extra = tuple(sorted(set(extra_names) - {JUNK}, key=str))
        self._know: dict[frozenset, Knowledge] = {}
        self._cands: dict = {}

    def knowledge(self, observed: frozenset) -> Knowledge:
        k = self._know.get(observed)
        if k is None:
            k = self._know[observed] = Knowledge(observed, self.theory)
        return k

    # -- input candidates ------------------------------------------------

    def candidates(self, p: In, know: Knowledge) -> list:
        key = (p, know.observed)
        hit = self._cands.get(key)
        if hit is not None:
            return hit
        pats = _shapes(p.var, p.body, self.theory, self.msg_depth)
        out = set(self.extra)
        out.add(JUNK)
        seen = set()
        for pat in pats:
            if pat.is_ground():
                out.add(pat)
            else:
                # observed terms are replayed whatever their size
                for u in know.sat:
                    if match(pat, u, {}) is not None:
                        seen.add(u)
        res = {t for t in out if t.depth() <= max(self.msg_depth, 1) and know.deduce(t)}
        res = sorted(res | seen, key=str)
        self._cands[key] = res
        return res


def _shapes(var: Variable, p: Process, theory: Theory, depth: int) -> set:
    """Term patterns the continuation ``p`` inspects ``var`` against.

    Pattern variables left open by a destructor are holes; they are filled
    with the shapes of the let-bound result where possible.
    """
    out: set = set()
    if depth <= 0:
        return out
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, IfEq):
            if q.left == var and q.right != var:
                out.add(q.right)
            elif q.right == var and q.left != var:
                out.add(q.left)
        elif isinstance(q, LetDes):
            d = theory.destructors.get(q.dest)
            for k, a in enumerate(q.args):
                if a != var or d is None:
                    continue
                for lhs, rhs in d.reductions:
                    b: dict | None = {}
                    for j, (pj, aj) in enumerate(zip(lhs, q.args)):
                        if j != k and aj.is_ground():
                            b = match(pj, aj, b)
                            if b is None:
                                break
                    if b is None:
                        continue
                    pat = substitute(lhs[k], b)
                    holes = sorted({v for v in pat.walk() if isinstance(v, Variable)}, key=str)
                    if not holes:
                        out.add(pat)
                        continue
                    fills = []
                    for h in holes:
                        opts = {h, JUNK}
                        if h == rhs:
                            opts |= _shapes(q.var, q.then, theory, depth - 1)
                        fills.append(sorted(opts, key=str))
                    for combo in itertools.product(*fills):
                        out.add(substitute(pat, dict(zip(holes, combo))))
            if q.var == var:
                stack.append(q.else_)
                continue
        elif isinstance(q, In) and q.var == var:
            continue
        stack.extend(q.children())
    # remaining variables act as wildcards when matched against the frame
    return out


@lru_cache(maxsize=1 << 16)
def _test_of(q: In):
    """The ground term ``M`` when ``q`` is ``in(c, x); if x = M then P`` (no else)."""
    b = q.body
    if isinstance(b, IfEq) and isinstance(b.else_, Nil):
        for a, o in ((b.left, b.right), (b.right, b.left)):
            if a == q.var and o.is_ground() and not any(
                    isinstance(s, Constructor) and s.symbol in DEFAULT_THEORY.destructors
                    for s in o.walk()):
                return o
    return None


def _eval_cond(q: Process, theory: Theory):
    """Resolve a ground if/let to its chosen branch."""
    if isinstance(q, IfEq):
        left, right = evaluate(q.left, theory), evaluate(q.right, theory)
        if left is not None and left == right:
            return q.then
        return q.else_
    args = []
    for a in q.args:
        v = evaluate(a, theory)
        if v is None:
            return q.else_
        args.append(v)
    d = theory.destructors.get(q.dest)
    if d is None:
        raise ModelError(f"unknown destructor {q.dest}")
    val = d.apply(tuple(args))
    if val is None:
        return q.else_
    return subst(q.then, {q.var: val})


# -- single steps -------------------------------------------------------------

def _fresh(base: FreeName, used) -> FreeName:
    k = 1
    while True:
        cand = FreeName(f"{base.name}~{k}")
        if cand not in used:
            return cand
        k += 1


def step(c: Configuration, theory: Theory = DEFAULT_THEORY, repl_budget: int = 2,
         msg_depth: int = 3, extra_names=()) -> list:
    """All single-rule successors ``(label, rule, configuration)``; label None is silent."""
    ctx = _Ctx(theory, repl_budget, msg_depth, extra_names)
    know = Knowledge(c.frame, theory, c.names)
    out = []
    seen = set()
    for i, q in enumerate(c.procs):
        if q in seen:
            continue
        seen.add(q)
        rest = c.procs[:i] + c.procs[i + 1:]

        def mk(*new, names=c.names, frame=c.frame):
            return Configuration(names, rest + tuple(new), frame)

        if isinstance(q, Nil):
            out.append((None, "null", mk()))
        elif isinstance(q, Par):
            out.append((None, "par", mk(q.left, q.right)))
        elif isinstance(q, Repl):
            b = repl_budget if q.budget is None else q.budget
            if b > 0:
                out.append((None, "repl", mk(q.body, Repl(q.body, b - 1))))
        elif isinstance(q, New):
            used = c.names | {n for p in c.procs for n in _names_in(p)}
            fresh = _fresh(q.name, used)
            out.append((None, "new", mk(rename(q.body, {q.name: fresh}), names=c.names | {fresh})))
        elif isinstance(q, Out):
            if know.deduce(q.chan):
                out.append((None, "out", mk(q.body, frame=c.frame + (q.msg,))))
            for j, r in enumerate(c.procs):
                if isinstance(r, In) and r.chan == q.chan and j != i:
                    others = tuple(p for k, p in enumerate(c.procs) if k not in (i, j))
                    out.append((None, "comm", Configuration(
                        c.names, others + (q.body, subst(r.body, {r.var: q.msg})), c.frame)))
        elif isinstance(q, In):
            if know.deduce(q.chan):
                for t in ctx.candidates(q, know):
                    out.append((None, "in", mk(subst(q.body, {q.var: t}))))
        elif isinstance(q, (IfEq, LetDes)):
            rule = "if" if isinstance(q, IfEq) else "let"
            out.append((None, rule, mk(_eval_cond(q, theory))))
        elif isinstance(q, Event):
            if not q.fact.is_ground():
                raise ModelError(f"event {q.fact} has unbound variables")
            out.append((q.fact, "event", mk(q.body)))
    return out


def _names_in(p: Process):
    return free_names(p)


# -- normal forms and enumeration -------------------------------------------

class _Engine:
    def __init__(self, theory: Theory, bounds: Bounds, extra_names=(), hide=()):
        self.theory = theory
        self.bounds = bounds
        self.hide = frozenset(hide)
        self.ctx = _Ctx(theory, bounds.repl, bounds.msg_depth, extra_names)
        self.memo: dict = {}
        self.succ_cache: dict = {}

    def normalize(self, procs, observed: frozenset, counter: int, rest: Counter | None = None):
        """Apply commuting silent steps until none is left.

        ``rest`` is a multiset already in normal form that ``procs`` joins.
        """
        work = list(procs)
        done = Counter() if rest is None else rest.copy()
        blocked: list[Process] = []
        parked: list[Process] = []  # waiting in rest; only a larger frame can wake them
        for q in [q for q in done if isinstance(q, Out)
                  or (isinstance(q, In) and _test_of(q) is not None)]:
            parked.extend([q] * done.pop(q))
        size0 = len(observed)
        observed = set(observed)
        while True:
            while work:
                q = work.pop()
                if isinstance(q, Nil):
                    continue
                if isinstance(q, Par):
                    work.append(q.left)
                    work.append(q.right)
                elif isinstance(q, Repl):
                    b = self.bounds.repl if q.budget is None else q.budget
                    work.extend([q.body] * b)
                elif isinstance(q, New):
                    counter += 1
                    fresh = FreeName(f"{q.name.name}~{counter}")
                    work.append(rename(q.body, {q.name: fresh}))
                elif isinstance(q, (IfEq, LetDes)):
                    work.append(_eval_cond(q, self.theory))
                elif isinstance(q, Event):
                    if not q.fact.is_ground():
                        raise ModelError(f"event {q.fact} has unbound variables")
                    if q.fact.symbol in self.hide:
                        work.append(q.body)  # unobserved events commute with everything
                    else:
                        done[q] += 1
                elif isinstance(q, Out) or (isinstance(q, In) and _test_of(q) is not None):
                    blocked.append(q)
                else:
                    done[q] += 1
            if parked and len(observed) > size0:
                blocked.extend(parked)
                parked = []
            know = self.ctx.knowledge(frozenset(observed))
            still = []
            for q in blocked:
                if not know.deduce(q.chan):
                    still.append(q)
                elif isinstance(q, Out):
                    observed.add(q.msg)
                    work.append(q.body)
                else:
                    # only one message ever passes the test and knowledge never
                    # shrinks, so taking the input now loses no behaviour
                    t = _test_of(q)
                    if know.deduce(t):
                        work.append(subst(q.body, {q.var: t}))
                    else:
                        still.append(q)
            blocked = still
            if not work:
                break
        for q in blocked + parked:
            done[q] += 1
        return done, frozenset(observed), counter

    def successors(self, key):
        """Labelled successors of a keyed normal form, cached."""
        hit = self.succ_cache.get(key)
        if hit is None:
            hit = self.succ_cache[key] = self._successors(self._unkey(key))
        return hit

    def _guard_passes(self, q: In, t) -> bool:
        """False when the input's first test on ``t`` leads straight to 0."""
        b = q.body
        if isinstance(b, IfEq) and isinstance(b.else_, Nil):
            left = substitute(b.left, {q.var: t})
            right = substitute(b.right, {q.var: t})
            if left.is_ground() and right.is_ground():
                lv, rv = evaluate(left, self.theory), evaluate(right, self.theory)
                return lv is not None and lv == rv
        elif isinstance(b, LetDes) and isinstance(b.else_, Nil):
            args = [substitute(a, {q.var: t}) for a in b.args]
            if all(a.is_ground() for a in args):
                vals = [evaluate(a, self.theory) for a in args]
                d = self.theory.destructors.get(b.dest)
                if d is not None and None not in vals:
                    return d.apply(tuple(vals)) is not None
                return d is None
        return True

    def _successors(self, state):
        procs, observed, counter = state
        know = self.ctx.knowledge(observed)
        base = Counter(procs)
        out = []
        for q in sorted(base, key=hash):
            rest = base.copy()
            rest[q] -= 1
            if not rest[q]:
                del rest[q]
            if isinstance(q, Event):
                nxt = self.normalize([q.body], observed, counter, rest)
                out.append((q.fact, self._key(nxt)))
            elif isinstance(q, In):
                if not know.deduce(q.chan):
                    continue
                rest_key = frozenset(rest.items())
                seen = set()
                for t in self.ctx.candidates(q, know):
                    if not self._guard_passes(q, t):
                        continue
                    nxt = self.normalize([subst(q.body, {q.var: t})],
                                         observed, counter, rest)
                    k = self._key(nxt)
                    if k[0] == rest_key and k[1] == observed:
                        continue  # input only discarded the receiver
                    if k not in seen:
                        seen.add(k)
                        out.append((None, k))
            elif isinstance(q, Out):
                for r in base:
                    if isinstance(r, In) and r.chan == q.chan:
                        rest2 = rest.copy()
                        rest2[r] -= 1
                        if not rest2[r]:
                            del rest2[r]
                        nxt = self.normalize([q.body, subst(r.body, {r.var: q.msg})],
                                             observed, counter, rest2)
                        out.append((None, self._key(nxt)))
        return out

    @staticmethod
    def _key(nf):
        procs, observed, counter = nf
        return (frozenset(procs.items()), observed, counter)

    def start(self, p: Process):
        return self._key(self.normalize([p], frozenset(), 0))

    def traces(self, state, k: int) -> frozenset:
        key = (state, k)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        acc = {()}
        self.memo[key] = frozenset(acc)  # guards against silent cycles
        if k > 0:
            for label, nxt in self.successors(state):
                if label is None:
                    acc |= self.traces(nxt, k)
                else:
                    acc.update((label,) + t for t in self.traces(nxt, k - 1))
        res = frozenset(acc)
        self.memo[key] = res
        return res

    @staticmethod
    def _unkey(state):
        items, observed, counter = state
        return (Counter(dict(items)), observed, counter)

    def accepts(self, state, trace: tuple, seen=None) -> bool:
        """Is ``trace`` (a sequence of events) executable from ``state``?"""
        if not trace:
            return True
        seen = set() if seen is None else seen
        if (state, len(trace)) in seen:
            return False
        seen.add((state, len(trace)))
        for label, nxt in self.successors(state):
            if label is None:
                if self.accepts(nxt, trace, seen):
                    return True
            elif label == trace[0] and self.accepts(nxt, trace[1:], seen):
                return True
        return False


def _with_recursion(fn):
    def wrapper(*a, **kw):
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, 20000))
        try:
            return fn(*a, **kw)
        finally:
            sys.setrecursionlimit(old)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_with_recursion
def enumerate_traces(p: Process, depth: int, repl_budget: int = 2, msg_depth: int = 3,
                     theory: Theory = DEFAULT_THEORY, extra_names=(), hide=()) -> set:
    """All event sequences of length ``≤ depth`` of executions of ``p``.

    Events whose symbol is in ``hide`` are executed silently: the result is
    the set of projections onto the remaining events, with ``depth`` counting
    visible events only.
    """
    bounds = Bounds(depth, repl_budget, msg_depth)
    eng = _Engine(theory, bounds, extra_names, hide)
    return set(eng.traces(eng.start(p), depth))


@_with_recursion
def accepts_trace(p: Process, trace, repl_budget: int = 2, msg_depth: int = 3,
                  theory: Theory = DEFAULT_THEORY, extra_names=(), hide=()) -> bool:
    """Replay: is ``trace`` one of the traces of ``p``?"""
    eng = _Engine(theory, Bounds(len(trace), repl_budget, msg_depth), extra_names, hide)
    return eng.accepts(eng.start(p), tuple(trace))


def trace_to_json(trace) -> list:
    return [str(e) for e in trace]
