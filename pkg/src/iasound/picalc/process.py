"""Process syntax: AST, substitution, printing and a small text parser.

Concrete syntax::

    P ::= 0 | P | P | !P | (P)
        | in(M, x); P | out(M, N); P | new n; P | event F(M, ...); P
        | if M = N then P [else P]
        | let x = g(M, ...) in P [else P]

A missing continuation means ``0``.  Identifiers bound by ``in``/``let``
are variables, those bound by ``new`` are private names, anything else is
a public name.
"""
from __future__ import annotations

import re
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterator

from .terms import (
    DEFAULT_THEORY, Constructor, FreeName, PublicName, Term, Theory, Variable,
    rename_names, substitute,
)


class Process:
    __slots__ = ()

    def children(self) -> tuple:
        return ()

    def __str__(self):
        return to_text(self)


def _cached_hash(cls):
    fields_ = [f for f in cls.__dataclass_fields__ if f != "_h"]

    def __hash__(self):
        h = self._h
        if h is None:
            h = hash((cls.__name__, *(getattr(self, f) for f in fields_)))
            object.__setattr__(self, "_h", h)
        return h

    cls.__hash__ = __hash__
    return cls


def _h():
    return field(default=None, init=False, repr=False, compare=False)


@_cached_hash
@dataclass(frozen=True, eq=True)
class Nil(Process):
    _h: int | None = _h()


@_cached_hash
@dataclass(frozen=True, eq=True)
class Par(Process):
    left: Process
    right: Process
    _h: int | None = _h()

    def children(self):
        return (self.left, self.right)


@_cached_hash
@dataclass(frozen=True, eq=True)
class Repl(Process):
    body: Process
    budget: int | None = None  # None: use the enumeration-wide budget
    _h: int | None = _h()

    def children(self):
        return (self.body,)


@_cached_hash
@dataclass(frozen=True, eq=True)
class In(Process):
    chan: Term
    var: Variable
    body: Process
    _h: int | None = _h()

    def children(self):
        return (self.body,)


@_cached_hash
@dataclass(frozen=True, eq=True)
class Out(Process):
    chan: Term
    msg: Term
    body: Process
    _h: int | None = _h()

    def children(self):
        return (self.body,)


@_cached_hash
@dataclass(frozen=True, eq=True)
class New(Process):
    name: FreeName
    body: Process
    _h: int | None = _h()

    def children(self):
        return (self.body,)


@_cached_hash
@dataclass(frozen=True, eq=True)
class IfEq(Process):
    left: Term
    right: Term
    then: Process
    else_: Process
    _h: int | None = _h()

    def children(self):
        return (self.then, self.else_)


@_cached_hash
@dataclass(frozen=True, eq=True)
class LetDes(Process):
    var: Variable
    dest: str
    args: tuple
    then: Process
    else_: Process
    _h: int | None = _h()

    def children(self):
        return (self.then, self.else_)


@_cached_hash
@dataclass(frozen=True, eq=True)
class Event(Process):
    fact: Constructor
    body: Process
    _h: int | None = _h()

    def children(self):
        return (self.body,)


NIL = Nil()


def par(*ps: Process) -> Process:
    ps = [p for p in ps if not isinstance(p, Nil)]
    if not ps:
        return NIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Par(p, out)
    return out


def par_components(p: Process) -> list:
    if isinstance(p, Par):
        return par_components(p.left) + par_components(p.right)
    if isinstance(p, Nil):
        return []
    return [p]


def walk(p: Process) -> Iterator[Process]:
    yield p
    for c in p.children():
        yield from walk(c)


def terms_of(p: Process) -> Iterator[Term]:
    """Top-level terms occurring directly in ``p`` (not in its children)."""
    if isinstance(p, In):
        yield p.chan
    elif isinstance(p, Out):
        yield p.chan
        yield p.msg
    elif isinstance(p, IfEq):
        yield p.left
        yield p.right
    elif isinstance(p, LetDes):
        yield from p.args
    elif isinstance(p, Event):
        yield p.fact


@lru_cache(maxsize=1 << 18)
def free_vars(p: Process) -> frozenset:
    if isinstance(p, In):
        return frozenset({v for v in p.chan.walk() if isinstance(v, Variable)}
                         | (free_vars(p.body) - {p.var}))
    if isinstance(p, LetDes):
        own = {v for a in p.args for v in a.walk() if isinstance(v, Variable)}
        return frozenset(own | (free_vars(p.then) - {p.var}) | free_vars(p.else_))
    own = {v for t in terms_of(p) for v in t.walk() if isinstance(v, Variable)}
    for c in p.children():
        own |= free_vars(c)
    return frozenset(own)


def free_names(p: Process) -> set:
    own = {n for t in terms_of(p) for n in t.walk() if isinstance(n, FreeName)}
    for c in p.children():
        own |= free_names(c)
    if isinstance(p, New):
        own.discard(p.name)
    return own


def public_names(p: Process) -> set:
    return {n for q in walk(p) for t in terms_of(q) for n in t.walk() if isinstance(n, PublicName)}


def event_symbols(p: Process) -> set:
    return {q.fact.symbol for q in walk(p) if isinstance(q, Event)}


def subst(p: Process, sigma: dict) -> Process:
    """Capture-free substitution of ground terms for variables."""
    if not sigma:
        return p
    return _subst(p, tuple(sorted(sigma.items(), key=lambda kv: kv[0].name)))


@lru_cache(maxsize=1 << 18)
def _subst(p: Process, items: tuple) -> Process:
    # continuations are often shared subtrees, so results are memoized
    sigma = dict(items)
    free = free_vars(p)
    if not any(v in free for v in sigma):
        return p
    s = lambda t: substitute(t, sigma)  # noqa: E731
    if isinstance(p, Nil):
        return p
    if isinstance(p, Par):
        return Par(subst(p.left, sigma), subst(p.right, sigma))
    if isinstance(p, Repl):
        return Repl(subst(p.body, sigma), p.budget)
    if isinstance(p, In):
        inner = {k: v for k, v in sigma.items() if k != p.var}
        return In(s(p.chan), p.var, subst(p.body, inner))
    if isinstance(p, Out):
        return Out(s(p.chan), s(p.msg), subst(p.body, sigma))
    if isinstance(p, New):
        return New(p.name, subst(p.body, sigma))
    if isinstance(p, IfEq):
        return IfEq(s(p.left), s(p.right), subst(p.then, sigma), subst(p.else_, sigma))
    if isinstance(p, LetDes):
        inner = {k: v for k, v in sigma.items() if k != p.var}
        return LetDes(p.var, p.dest, tuple(map(s, p.args)), subst(p.then, inner),
                      subst(p.else_, sigma))
    if isinstance(p, Event):
        return Event(s(p.fact), subst(p.body, sigma))
    raise TypeError(p)


def rename(p: Process, ren: dict) -> Process:
    """Rename free names throughout ``p``."""
    if not ren:
        return p
    r = lambda t: rename_names(t, ren)  # noqa: E731
    if isinstance(p, Nil):
        return p
    if isinstance(p, Par):
        return Par(rename(p.left, ren), rename(p.right, ren))
    if isinstance(p, Repl):
        return Repl(rename(p.body, ren), p.budget)
    if isinstance(p, In):
        return In(r(p.chan), p.var, rename(p.body, ren))
    if isinstance(p, Out):
        return Out(r(p.chan), r(p.msg), rename(p.body, ren))
    if isinstance(p, New):
        inner = {k: v for k, v in ren.items() if k != p.name}
        return New(p.name, rename(p.body, inner))
    if isinstance(p, IfEq):
        return IfEq(r(p.left), r(p.right), rename(p.then, ren), rename(p.else_, ren))
    if isinstance(p, LetDes):
        return LetDes(p.var, p.dest, tuple(map(r, p.args)), rename(p.then, ren),
                      rename(p.else_, ren))
    if isinstance(p, Event):
        return Event(r(p.fact), rename(p.body, ren))
    raise TypeError(p)


# -- alpha-equivalence ------------------------------------------------------

def alpha_canonical(p: Process) -> Process:
    """Rename bound variables and names by binding order."""
    counter = [0, 0]

    def fresh_var():
        counter[0] += 1
        return Variable(f"_v{counter[0]}")

    def fresh_name():
        counter[1] += 1
        return FreeName(f"_n{counter[1]}")

    def go(q, vs, ns):
        t = lambda m: rename_names(substitute(m, vs), ns)  # noqa: E731
        if isinstance(q, Nil):
            return q
        if isinstance(q, Par):
            return Par(go(q.left, vs, ns), go(q.right, vs, ns))
        if isinstance(q, Repl):
            return Repl(go(q.body, vs, ns), q.budget)
        if isinstance(q, In):
            v = fresh_var()
            return In(t(q.chan), v, go(q.body, {**vs, q.var: v}, ns))
        if isinstance(q, Out):
            return Out(t(q.chan), t(q.msg), go(q.body, vs, ns))
        if isinstance(q, New):
            n = fresh_name()
            return New(n, go(q.body, vs, {**ns, q.name: n}))
        if isinstance(q, IfEq):
            return IfEq(t(q.left), t(q.right), go(q.then, vs, ns), go(q.else_, vs, ns))
        if isinstance(q, LetDes):
            v = fresh_var()
            args = tuple(map(t, q.args))
            return LetDes(v, q.dest, args, go(q.then, {**vs, q.var: v}, ns), go(q.else_, vs, ns))
        if isinstance(q, Event):
            return Event(t(q.fact), go(q.body, vs, ns))
        raise TypeError(q)

    return go(p, {}, {})


def alpha_equal(p: Process, q: Process) -> bool:
    return alpha_canonical(p) == alpha_canonical(q)


# -- printing ---------------------------------------------------------------

def _term(t: Term) -> str:
    return str(t)


def _atom(p: Process) -> str:
    s = to_text(p)
    if isinstance(p, (Par, IfEq, LetDes)):
        return f"({s})"
    return s


def _cont(p: Process) -> str:
    return "" if isinstance(p, Nil) else "; " + _atom(p)


def to_text(p: Process) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Par):
        return " | ".join(_atom(c) if isinstance(c, (IfEq, LetDes)) else to_text(c)
                          for c in par_components(p)) or "0"
    if isinstance(p, Repl):
        body = p.body
        inner = to_text(body)
        if isinstance(body, (Par, IfEq, LetDes)):
            inner = f"({inner})"
        return ("!" if p.budget is None else f"!{{{p.budget}}}") + inner
    if isinstance(p, In):
        return f"in({_term(p.chan)}, {p.var.name}){_cont(p.body)}"
    if isinstance(p, Out):
        return f"out({_term(p.chan)}, {_term(p.msg)}){_cont(p.body)}"
    if isinstance(p, New):
        return f"new {p.name.name}{_cont(p.body)}"
    if isinstance(p, Event):
        return f"event {_term(p.fact)}{_cont(p.body)}"
    if isinstance(p, IfEq):
        s = f"if {_term(p.left)} = {_term(p.right)} then {_atom(p.then)}"
        if not isinstance(p.else_, Nil):
            s += f" else {_atom(p.else_)}"
        return s
    if isinstance(p, LetDes):
        args = ", ".join(map(_term, p.args))
        s = f"let {p.var.name} = {p.dest}({args}) in {_atom(p.then)}"
        if not isinstance(p.else_, Nil):
            s += f" else {_atom(p.else_)}"
        return s
    raise TypeError(p)


def pretty(p: Process, indent: int = 0) -> str:
    """Multi-line rendering: one parallel component per line."""
    pad = "  " * indent
    comps = par_components(p)
    if len(comps) <= 1:
        return pad + to_text(p)
    return (" |\n").join(pad + _atom(c) if isinstance(c, (IfEq, LetDes)) else pad + to_text(c)
                         for c in comps)


# -- parsing ----------------------------------------------------------------

class ProcessSyntaxError(ValueError):
    pass


_TOKEN = re.compile(r"\s*(?:(!\{\d+\})|([A-Za-z0-9_.'~\-]+)|(.))", re.S)
_KEYWORDS = {"in", "out", "new", "if", "then", "else", "let", "event"}


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        pos = m.end()
        tok = m.group(1) or m.group(2) or m.group(3)
        if tok and not tok.isspace():
            toks.append(tok)
    return toks


class _Parser:
    def __init__(self, text: str, theory: Theory, params):
        self.toks = _tokenize(text)
        self.i = 0
        self.theory = theory
        self.env0 = {n: "var" for n in params}

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ProcessSyntaxError("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, tok):
        got = self.next()
        if got != tok:
            raise ProcessSyntaxError(f"expected {tok!r}, got {got!r} at token {self.i}")

    def ident(self):
        tok = self.next()
        if not re.fullmatch(r"[A-Za-z0-9_.'~\-]+", tok) or tok in _KEYWORDS:
            raise ProcessSyntaxError(f"expected identifier, got {tok!r}")
        return tok

    def term(self, env) -> Term:
        name = self.ident()
        if self.peek() == "(":
            self.next()
            args = []
            if self.peek() != ")":
                args.append(self.term(env))
                while self.peek() == ",":
                    self.next()
                    args.append(self.term(env))
            self.expect(")")
            return Constructor(name, args)
        kind = env.get(name)
        if kind == "var":
            return Variable(name)
        if kind == "name":
            return FreeName(name)
        return PublicName(name)

    def process(self, env) -> Process:
        parts = [self.seq(env)]
        while self.peek() == "|":
            self.next()
            parts.append(self.seq(env))
        return par(*parts) if len(parts) > 1 else parts[0]

    def cont(self, env) -> Process:
        if self.peek() == ";":
            self.next()
            return self.seq(env)
        return NIL

    def seq(self, env) -> Process:
        tok = self.peek()
        if tok is None:
            raise ProcessSyntaxError("unexpected end of input")
        if tok == "0":
            self.next()
            return NIL
        if tok == "(":
            self.next()
            p = self.process(env)
            self.expect(")")
            return p
        if tok == "!" or tok.startswith("!{"):
            self.next()
            budget = int(tok[2:-1]) if tok.startswith("!{") else None
            return Repl(self.seq(env), budget)
        if tok == "in":
            self.next()
            self.expect("(")
            chan = self.term(env)
            self.expect(",")
            x = self.ident()
            self.expect(")")
            return In(chan, Variable(x), self.cont({**env, x: "var"}))
        if tok == "out":
            self.next()
            self.expect("(")
            chan = self.term(env)
            self.expect(",")
            msg = self.term(env)
            self.expect(")")
            return Out(chan, msg, self.cont(env))
        if tok == "new":
            self.next()
            n = self.ident()
            return New(FreeName(n), self.cont({**env, n: "name"}))
        if tok == "event":
            self.next()
            fact = self.term(env)
            if not isinstance(fact, Constructor):
                fact = Constructor(str(fact), [])
            return Event(fact, self.cont(env))
        if tok == "if":
            self.next()
            left = self.term(env)
            self.expect("=")
            right = self.term(env)
            self.expect("then")
            then = self.seq(env)
            else_ = NIL
            if self.peek() == "else":
                self.next()
                else_ = self.seq(env)
            return IfEq(left, right, then, else_)
        if tok == "let":
            self.next()
            x = self.ident()
            self.expect("=")
            app = self.term(env)
            if not isinstance(app, Constructor) or app.symbol not in self.theory.destructors:
                raise ProcessSyntaxError(f"let expects a destructor application, got {app}")
            self.expect("in")
            then = self.seq({**env, x: "var"})
            else_ = NIL
            if self.peek() == "else":
                self.next()
                else_ = self.seq(env)
            return LetDes(Variable(x), app.symbol, app.args, then, else_)
        raise ProcessSyntaxError(f"unexpected token {tok!r}")


def parse_process(text: str, theory: Theory = DEFAULT_THEORY, params=()) -> Process:
    """Parse the concrete syntax; ``params`` are identifiers treated as free variables."""
    ps = _Parser(text, theory, params)
    p = ps.process(dict(ps.env0))
    if ps.peek() is not None:
        raise ProcessSyntaxError(f"trailing input at {ps.peek()!r}")
    return p


def parse_term(text: str, variables=()) -> Term:
    ps = _Parser(text, DEFAULT_THEORY, variables)
    t = ps.term(dict(ps.env0))
    if ps.peek() is not None:
        raise ProcessSyntaxError(f"trailing input at {ps.peek()!r}")
    return t
