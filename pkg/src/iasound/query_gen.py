"""Correspondence and weak-secrecy queries in ProVerif syntax.

Actions are partitioned by their single postcondition.  Each class becomes
``event(post) ==> disj_1 || ... || disj_k``.  Two granularities exist:

* schema level: universally quantified variables over the protocol events
  (graph independent; DNS integrity is stated once, on ``Received``);
* ground level: one query per ground class, preconditions translated to
  events through :mod:`naming`.

A small parser reads the emitted text back and :func:`diff_queries`
compares two query lists up to disjunct and conjunct order.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Union

from .soundness_conditions import SigmaCap
from .naming import predicate_to_event
from .planner import Action, CS1Violated, PlanningTask, Predicate


@dataclass(frozen=True)
class Atom:
    event: str
    args: tuple = ()

    def __str__(self):
        return f"event({self.event}({','.join(self.args)}))"

    def rename(self, sigma: dict) -> "Atom":
        return Atom(self.event, tuple(sigma.get(a, a) for a in self.args))


@dataclass(frozen=True)
class Disj:
    """A parenthesized disjunction nested inside a conjunction."""
    options: tuple  # of conjunctions (tuples of items)


Item = Union[Atom, Disj]


@dataclass
class QuerySpec:
    conclusion: Atom
    disjuncts: list = field(default_factory=list)  # list of tuple[Item, ...]
    kind: str = "correspondence"
    decls: tuple = ()  # ((var, type), ...)

    def __post_init__(self):
        if self.kind == "correspondence" and not self.disjuncts:
            raise ValueError("a correspondence query needs at least one disjunct")
        if self.kind == "weak_secrecy" and self.disjuncts:
            raise ValueError("a reachability query has no disjuncts")


class QuerySyntaxError(ValueError):
    pass


# -- partition --------------------------------------------------------------

def partition_actions(t: PlanningTask, s: SigmaCap) -> dict:
    """Postcondition -> actions producing it, restricted to Σ∩."""
    out: dict = {}
    for a in t.actions:
        if len(a.post) != 1:
            raise CS1Violated(a.id)
        c = a.effect
        if c in s:
            out.setdefault(c, []).append(a)
    return {c: sorted(out[c], key=lambda a: a.id) for c in sorted(out)}


# -- schema-level templates -------------------------------------------------

def _conj(*xs) -> tuple:
    return tuple(Atom(x[0], tuple(x[1:])) for x in xs)


_QP = ("queries_prov", "f", "x")
_RES = ("Resolver", "f", "g")
_USED = ("UsedDomServer", "g", "e")

# DNS integrity of the answer for provider x asked by client f, per rule
_DNS = {
    "r_dns-res": _conj(_QP, _RES, ("C_ip", "g")),
    "r_dns-ns": _conj(_QP, _RES, _USED, ("C_ip", "e")),
    "r_dns-route-res": _conj(_QP, _RES, ("C_routing", "f", "g")),
    "r_dns-route-ns": _conj(_QP, _RES, _USED, ("C_routing", "g", "e"), ("nDNSSEC", "x")),
}
_DNS_ORDER_RECEIVED = ("r_dns-res", "r_dns-route-res", "r_dns-route-ns", "r_dns-ns")
_DNS_ORDER_UNCONF = ("r_dns-res", "r_dns-ns", "r_dns-route-res", "r_dns-route-ns")
_DNS_SYMBOLS = ("I_DNS1", "I_DNS2")
_FAKE = ("r_fake-mx", "r_fake-ip", "r_fake-mx-strict")

UNCONF_DECLS = (("m", "provider"), ("n", "provider"), ("m'", "dom"), ("n'", "dom"),
                ("e", "ip"), ("d", "dom"), ("g", "ip"), ("r", "ip"), ("i", "ip"), ("j", "ip"))
RECEIVED_DECLS = (("x", "provider"), ("d", "dom"), ("m", "ip"), ("e", "ip"), ("f", "ip"),
                  ("g", "ip"))


def _id_args(a: Action) -> tuple:
    inner = a.id.split("(", 1)[1].rsplit(")", 1)[0]
    return tuple(inner.split(","))


def _legacy_compromise(acts) -> bool:
    """Old rule flavour: the mail domain, not its IP, must be corrupted."""
    for a in acts:
        if a.schema == "r_compromise":
            (c,) = a.pre
            return c.args[0] in _id_args(a)[2:4]
    return False


def _dns_with_dnssec(acts) -> bool:
    return any(a.schema == "r_dns-route-res" and any(p.symbol == "nDNSSEC" for p in a.pre)
               for a in acts)


def _dns_options(schemas, order, legacy_route_res, sigma=None) -> list:
    opts = []
    for s in order:
        if s not in schemas:
            continue
        conj = _DNS[s]
        if s == "r_dns-route-res" and legacy_route_res:
            conj = conj + (Atom("nDNSSEC", ("x",)),)
        if sigma:
            conj = tuple(a.rename(sigma) for a in conj)
        opts.append(conj)
    return opts


def schema_queries(partition: dict) -> list:
    """The schema-level queries for ``partition`` (see module docstring)."""
    unconf = [a for c, acts in partition.items() if c.symbol == "unconf" for a in acts]
    dns = [a for c, acts in partition.items() if c.symbol in _DNS_SYMBOLS for a in acts]
    if not unconf and not dns:
        return []
    dns_schemas = {a.schema for a in dns}
    legacy_rr = _dns_with_dnssec(dns)
    out = []
    if unconf:
        schemas = {a.schema for a in unconf}
        legacy = _legacy_compromise(unconf)
        sender = _conj(("isMailserver", "m'", "m"), ("A_record", "i", "m'"))
        disj = []
        if "r_compromise" in schemas:
            if legacy:
                disj.append(_conj(("isMailserver", "m'", "m"), ("C_dom", "m'")))
                disj.append(_conj(("isMailserver", "n'", "n"), ("C_dom", "n'")))
            else:
                disj.append(sender + _conj(("C_ip", "i")))
                disj.append(_conj(("isMailserver", "n'", "n"), ("A_record", "i", "n'"),
                                  ("C_ip", "i")))
        if schemas & set(_FAKE):
            nested = _dns_options(dns_schemas, _DNS_ORDER_UNCONF, legacy_rr, {"f": "i", "x": "n"})
            tail = (Disj(tuple(nested)),) if nested else ()
            disj.append(sender + _conj(("Received", "n", "d", "r")) + tail)
        if "r_intercept" in schemas:
            disj.append(sender + _conj(("queries_prov", "i", "n"), ("Received", "n", "d", "j"),
                                       ("C_routing", "i", "j")))
        out.append(QuerySpec(Atom("Unconf", ("m", "n")), disj, decls=UNCONF_DECLS))
    disj = [_conj(("Register_MX", "x", "d"), ("Register_A", "d", "m")),
            _conj(_QP, ("C_ip", "f"))]
    disj += _dns_options(dns_schemas, _DNS_ORDER_RECEIVED, legacy_rr)
    out.append(QuerySpec(Atom("Received", ("x", "d", "m")), disj, decls=RECEIVED_DECLS))
    if unconf:
        out.append(QuerySpec(Atom("Unconf", ("m", "n")), [], "weak_secrecy",
                             (("m", "provider"), ("n", "provider"))))
    return out


# -- ground level -----------------------------------------------------------

def _ident(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_]", "_", name)
    return s if re.match(r"[A-Za-z]", s) else "k_" + s


def _ground_atom(p: Predicate, g) -> Atom:
    return Atom(predicate_to_event(p, g), tuple(_ident(a) for a in p.args))


def ground_queries(partition: dict, g=None) -> list:
    """One query per class; classes with an unconditional producer are skipped."""
    out = []
    for c, acts in partition.items():
        if any(not a.pre for a in acts):
            continue
        disj = [tuple(_ground_atom(p, g) for p in sorted(a.pre)) for a in acts]
        out.append(QuerySpec(_ground_atom(c, g), disj))
        if c.symbol == "unconf":
            out.append(QuerySpec(_ground_atom(c, g), [], "weak_secrecy"))
    return out


# -- rendering --------------------------------------------------------------

def _render_conj(conj) -> str:
    parts = []
    for it in conj:
        if isinstance(it, Atom):
            parts.append(str(it))
        else:
            parts.append("(" + " || ".join(f"({_render_conj(c)})" for c in it.options) + ")")
    return " && ".join(parts)


def render(q: QuerySpec) -> str:
    head = "query "
    if q.decls:
        head += ", ".join(f"{v}:{t}" for v, t in q.decls) + ";\n"
    head += str(q.conclusion)
    if q.kind == "weak_secrecy":
        return head + "."
    body = "\n     || ".join(f"({_render_conj(c)})" for c in q.disjuncts)
    return f"{head}\n  ==> {body}."


def emit_queries(partition: dict, schema_level: bool = True, graph=None) -> str:
    """ProVerif query text; empty for an empty partition."""
    qs = schema_queries(partition) if schema_level else ground_queries(partition, graph)
    if not qs:
        return ""
    text = "\n\n".join(render(q) for q in qs) + "\n"
    if not schema_level:
        skipped = [c for c, acts in partition.items() if any(not a.pre for a in acts)]
        text = "".join(f"(* {c}: holds initially *)\n" for c in skipped) + text
        names = sorted({a for q in qs for a in q.conclusion.args} |
                       {x.args[k] for q in qs for c in q.disjuncts for x in c
                        for k in range(len(x.args))})
        text = "".join(f"free {n}: bitstring.\n" for n in names) + "\n" + text
    return text


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\(\*.*?\*\))|(==>|&&|\|\||[(),:;.])|([A-Za-z_][A-Za-z0-9_']*))",
                    re.S)


def _tokens(text: str) -> list:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip():
                raise QuerySyntaxError(f"unexpected input at offset {pos}: {text[pos:pos + 20]!r}")
            break
        pos = m.end()
        if m.group(1):
            continue
        out.append(m.group(2) or m.group(3))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokens(text)
        self.k = 0

    def peek(self, off=0):
        k = self.k + off
        return self.toks[k] if k < len(self.toks) else None

    def eat(self, want=None):
        tok = self.peek()
        if tok is None or (want is not None and tok != want):
            raise QuerySyntaxError(f"expected {want or 'a token'}, got {tok!r}")
        self.k += 1
        return tok

    def ident(self):
        tok = self.eat()
        if not re.match(r"[A-Za-z_]", tok):
            raise QuerySyntaxError(f"expected an identifier, got {tok!r}")
        return tok

    def file(self) -> list:
        out = []
        while self.peek() is not None:
            if self.peek() == "free":
                self.eat()
                self.ident()
                self.eat(":")
                self.ident()
                self.eat(".")
                continue
            out.append(self.query())
        return out

    def query(self) -> QuerySpec:
        self.eat("query")
        decls = []
        if self.peek() != "event":
            while True:
                v = self.ident()
                self.eat(":")
                decls.append((v, self.ident()))
                if self.peek() == ";":
                    self.eat()
                    break
                self.eat(",")
        concl = self.atom()
        if self.peek() == "==>":
            self.eat()
            disj = self.disj()
            self.eat(".")
            return QuerySpec(concl, disj, "correspondence", tuple(decls))
        self.eat(".")
        return QuerySpec(concl, [], "weak_secrecy", tuple(decls))

    def disj(self) -> list:
        out = [self.conj()]
        while self.peek() == "||":
            self.eat()
            out.append(self.conj())
        return out

    def conj(self) -> tuple:
        items = list(self.item())
        while self.peek() == "&&":
            self.eat()
            items.extend(self.item())
        return tuple(items)

    def item(self) -> tuple:
        if self.peek() == "event":
            return (self.atom(),)
        self.eat("(")
        d = self.disj()
        self.eat(")")
        # a parenthesized conjunction is flattened; a real disjunction nests
        return d[0] if len(d) == 1 else (Disj(tuple(d)),)

    def atom(self) -> Atom:
        self.eat("event")
        self.eat("(")
        name = self.ident()
        args = []
        self.eat("(")
        if self.peek() != ")":
            args.append(self.ident())
            while self.peek() == ",":
                self.eat()
                args.append(self.ident())
        self.eat(")")
        self.eat(")")
        return Atom(name, tuple(args))


def parse_queries(text: str) -> list:
    """Parse query declarations (and ``free`` lines) back into QuerySpecs."""
    return _Parser(text).file()


# -- structural comparison --------------------------------------------------

def _canon_item(it, with_args):
    if isinstance(it, Atom):
        return (0, it.event, it.args if with_args else len(it.args))
    return (1, tuple(sorted(_canon_conj(c, with_args) for c in it.options)))


def _canon_conj(conj, with_args):
    return tuple(sorted((_canon_item(it, with_args) for it in conj), key=repr))


def canonical(q: QuerySpec, with_args: bool = False):
    return (q.kind, q.conclusion.event,
            q.conclusion.args if with_args else len(q.conclusion.args),
            tuple(sorted((_canon_conj(c, with_args) for c in q.disjuncts), key=repr)))


def diff_queries(a: list, b: list, with_args: bool = False, kinds=None) -> list:
    """Differences between two query lists, ignoring the order of queries,
    disjuncts and conjuncts.  Variable names are compared only with
    ``with_args``; ``kinds`` restricts the comparison to those query kinds.
    An empty list means structurally equal."""
    if kinds is not None:
        a = [q for q in a if q.kind in kinds]
        b = [q for q in b if q.kind in kinds]
    out = []
    ka = Counter((q.kind, q.conclusion.event) for q in a)
    kb = Counter((q.kind, q.conclusion.event) for q in b)
    for key in sorted(ka | kb):
        if ka[key] != kb[key]:
            out.append(f"{key[0]} {key[1]}: {ka[key]} vs {kb[key]} queries")
    for key in sorted(set(ka) & set(kb)):
        qa = [q for q in a if (q.kind, q.conclusion.event) == key]
        qb = [q for q in b if (q.kind, q.conclusion.event) == key]
        for x, y in zip(qa, qb):
            if len(x.disjuncts) != len(y.disjuncts):
                out.append(f"{key[1]}: {len(x.disjuncts)} vs {len(y.disjuncts)} disjuncts")
                continue
            ca, cb = canonical(x, with_args), canonical(y, with_args)
            if ca[2] != cb[2]:
                out.append(f"{key[1]}: conclusion arguments differ")
            da = Counter(ca[3])
            db = Counter(cb[3])
            for d in sorted((da - db) + (db - da), key=repr):
                side = "left" if da[d] > db[d] else "right"
                out.append(f"{key[1]}: disjunct only on the {side}: {_show(d)}")
    return out


def _show(conj) -> str:
    parts = []
    for it in conj:
        if it[0] == 0:
            parts.append(it[1])
        else:
            parts.append("(" + " | ".join(_show(c) for c in it[1]) + ")")
    return " & ".join(parts)
