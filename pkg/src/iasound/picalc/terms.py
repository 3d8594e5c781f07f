"""Terms, constructor/destructor theories and rewriting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator


class Term:
    __slots__ = ("_hash",)

    def is_ground(self) -> bool:
        return not any(isinstance(t, Variable) for t in self.walk())

    def walk(self) -> Iterator["Term"]:
        yield self

    def depth(self) -> int:
        return 1

    def __lt__(self, other):
        return sort_key(self) < sort_key(other)


class _Atom(Term):
    __slots__ = ("name",)
    _tag = 0

    def __init__(self, name: str):
        self.name = name
        self._hash = hash((self._tag, name))

    def __eq__(self, other):
        return type(other) is type(self) and other.name == self.name

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"

    def __str__(self):
        return self.name


class Variable(_Atom):
    __slots__ = ()
    _tag = 1


class FreeName(_Atom):
    """A name bound by ``new``; secret unless it is output."""
    __slots__ = ()
    _tag = 2


class PublicName(_Atom):
    __slots__ = ()
    _tag = 3


class Constructor(Term):
    __slots__ = ("symbol", "args")

    def __init__(self, symbol: str, args: Iterable[Term] = ()):
        self.symbol = symbol
        self.args = tuple(args)
        self._hash = hash((4, symbol, self.args))

    def __eq__(self, other):
        return (type(other) is Constructor and other._hash == self._hash
                and other.symbol == self.symbol and other.args == self.args)

    def __hash__(self):
        return self._hash

    def walk(self):
        yield self
        for a in self.args:
            yield from a.walk()

    def depth(self):
        return 1 + max((a.depth() for a in self.args), default=0)

    def __repr__(self):
        return f"Constructor({self.symbol!r}, {list(self.args)!r})"

    def __str__(self):
        return f"{self.symbol}({', '.join(map(str, self.args))})"


def sort_key(t: Term):
    if isinstance(t, Constructor):
        return (4, t.symbol, tuple(sort_key(a) for a in t.args))
    return (t._tag, t.name, ())


def fn(symbol: str, *args: Term) -> Constructor:
    return Constructor(symbol, args)


def pub(name: str) -> PublicName:
    return PublicName(name)


def subterms(t: Term) -> set:
    return set(t.walk())


def substitute(t: Term, sigma: dict) -> Term:
    if isinstance(t, Variable):
        return sigma.get(t, t)
    if isinstance(t, Constructor):
        if not sigma:
            return t
        return Constructor(t.symbol, [substitute(a, sigma) for a in t.args])
    return t


def rename_names(t: Term, ren: dict) -> Term:
    """Rename free names (used for fresh-name generation)."""
    if isinstance(t, FreeName):
        return ren.get(t, t)
    if isinstance(t, Constructor):
        return Constructor(t.symbol, [rename_names(a, ren) for a in t.args])
    return t


def match(pattern: Term, t: Term, binding: dict) -> dict | None:
    """Syntactic matching of a ground term against a pattern; non-linear allowed."""
    if isinstance(pattern, Variable):
        bound = binding.get(pattern)
        if bound is None:
            out = dict(binding)
            out[pattern] = t
            return out
        return binding if bound == t else None
    if isinstance(pattern, Constructor):
        if not isinstance(t, Constructor) or t.symbol != pattern.symbol \
                or len(t.args) != len(pattern.args):
            return None
        for p, a in zip(pattern.args, t.args):
            binding = match(p, a, binding)
            if binding is None:
                return None
        return binding
    return binding if pattern == t else None


# -- theories ---------------------------------------------------------------

class TheoryError(ValueError):
    pass


class NonConvergentTheory(TheoryError):
    pass


class ArityError(TheoryError):
    pass


@dataclass(frozen=True)
class Destructor:
    symbol: str
    arity: int
    reductions: tuple  # ((pattern, ...), rhs)

    def __post_init__(self):
        for lhs, rhs in self.reductions:
            if len(lhs) != self.arity:
                raise ArityError(f"{self.symbol}: reduction with {len(lhs)} arguments")
            lv = {v for p in lhs for v in p.walk() if isinstance(v, Variable)}
            rv = {v for v in rhs.walk() if isinstance(v, Variable)}
            if not rv <= lv:
                raise TheoryError(f"{self.symbol}: rhs variables {rv - lv} not in lhs")
            for p in (*lhs, rhs):
                if any(isinstance(s, (FreeName, PublicName)) for s in p.walk()):
                    raise TheoryError(f"{self.symbol}: names are not allowed in reductions")

    def apply(self, args: tuple) -> Term | None:
        """First matching reduction in declaration order, or None."""
        for lhs, rhs in self.reductions:
            b: dict | None = {}
            for p, a in zip(lhs, args):
                b = match(p, a, b)
                if b is None:
                    break
            if b is not None:
                return substitute(rhs, b)
        return None


@dataclass(frozen=True)
class Theory:
    constructors: dict = field(default_factory=dict)  # symbol -> (arity, private)
    destructors: dict = field(default_factory=dict)   # symbol -> Destructor

    def is_private(self, symbol: str) -> bool:
        return self.constructors.get(symbol, (0, False))[1]

    def arity(self, symbol: str) -> int | None:
        if symbol in self.constructors:
            return self.constructors[symbol][0]
        if symbol in self.destructors:
            return self.destructors[symbol].arity
        return None

    def check_term(self, t: Term) -> None:
        for s in t.walk():
            if isinstance(s, Constructor):
                if s.symbol not in self.constructors:
                    raise TheoryError(f"unknown constructor {s.symbol}")
                if self.constructors[s.symbol][0] != len(s.args):
                    raise ArityError(f"{s.symbol} expects {self.constructors[s.symbol][0]} arguments")

    def check_convergent(self) -> None:
        """Every rhs must be a pattern variable or a subterm of some lhs pattern."""
        for d in self.destructors.values():
            for lhs, rhs in d.reductions:
                subs = set()
                for p in lhs:
                    subs |= subterms(p)
                if rhs not in subs:
                    raise NonConvergentTheory(f"{d.symbol}: {rhs} is not a subterm of its lhs")

    def extend(self, constructors=None, destructors=()) -> "Theory":
        cons = dict(self.constructors)
        cons.update(constructors or {})
        des = dict(self.destructors)
        for d in destructors:
            des[d.symbol] = d
        return Theory(cons, des)


def _v(*names):
    return [Variable(n) for n in names]


def _default_theory() -> Theory:
    x, y = _v("x", "y")
    C = Constructor
    constructors = {
        # public
        "senc": (2, False), "pair": (2, False), "req_packet": (2, False),
        "ans_packet": (2, False), "rec": (2, False), "sign": (2, False),
        "pk": (1, False), "ds": (2, False),
        # private
        "ctrl": (1, True), "key": (2, True), "zk": (1, True),
        "res": (1, True), "nsw": (1, True),
    }
    destructors = [
        Destructor("sdec", 2, (((C("senc", [x, y]), y), x),)),
        Destructor("fst", 1, (((C("pair", [x, y]),), x),)),
        Destructor("snd", 1, (((C("pair", [x, y]),), y),)),
        Destructor("get_req_packet", 2, (((x, C("req_packet", [x, y])), y),)),
        Destructor("get_ans_packet", 2, (((x, C("ans_packet", [x, y])), y),)),
        Destructor("getrec", 2, (((x, C("rec", [x, y])), y),)),
        Destructor("checksign", 2, (((C("sign", [x, y]), C("pk", [y])), x),)),
        Destructor("getmsg", 1, (((C("sign", [x, y]),), x),)),
        Destructor("getds", 2, (((x, C("ds", [x, y])), y),)),
        Destructor("unres", 1, (((C("res", [x]),), x),)),
        Destructor("unnsw", 1, (((C("nsw", [x]),), x),)),
        Destructor("equal", 2, (((x, x), x),)),
    ]
    th = Theory(constructors, {d.symbol: d for d in destructors})
    th.check_convergent()
    return th


DEFAULT_THEORY = _default_theory()
