"""Compile a property graph into the applied-π model of the email infrastructure.

The model is a parallel composition of role families (SMTP client and
server, recursive resolver, authoritative and root name servers) plus
corruption families that hand the adversary a ``ctrl(x)`` token for every
entity it can claim.  All traffic runs over the public channel ``c``; a
link between two IPs is protected by ``req_packet``/``ans_packet`` under the
private ``key(i, j)``.

Message shapes:
  DNS query    req_packet(key(i, r), name)
  DNS answer   ans_packet(key(i, r), res(rec(name, value)))   resolver -> client
               ans_packet(key(r, f), nsw(rec(name, value)))   name server -> resolver
  DS record    ans_packet(key(r, root), ds(name, pk(zk(name))))
  mail         req_packet(key(i, j), m)                       m fresh per session
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .graph_model import EdgeKind, NodeLabel, PropertyGraph
from .picalc.process import NIL, Process, par, parse_process
from .naming import PLUMBING_EVENTS
from .planner import check_defender_config, parse_predicate, pred
from .process_transforms import ParallelFamily, generalize_family

log = logging.getLogger(__name__)

EVENT_ALPHABET = {
    "Unconf": 2, "Received": 3, "Register_MX": 2, "Register_A": 2, "A_record": 2,
    "isMailserver": 2, "queries_prov": 2, "Resolver": 2, "UsedDomServer": 2,
    "C_ip": 1, "C_routing": 2, "nDNSSEC": 1,
    # beyond the listing: corruption of other node kinds and defender flags
    "C_dom": 1, "C_as": 1, "C_cntry": 1, "I_DNS": 1, "I_DNS_from": 2,
    "nTLS_snd": 1, "nDANE_rcv": 1, "nVPN": 2,
}


class CompileError(ValueError):
    pass


class MissingRole(CompileError):
    pass


class UnknownDomain(CompileError, KeyError):
    pass


# -- role templates -----------------------------------------------------------

def _lookup(name, exp, var, x, k):
    """Read a resolver answer; an answer not vouched for by the resolver is checked here."""
    return (f"(let y_{x} = unres({x}) in (let {var} = getrec({name}, y_{x}) in {k}) "
            f"else (let {var} = getrec({name}, {x}) in "
            f"(if {var} = {exp} then {k} else (event I_DNS_from(d1, {name}); {k}))))")


_TAIL = ("event isMailserver(d1, v); event A_record(i, d1); event queries_prov(i, v2); "
         "event Resolver(i, r)")

_CONT2 = ("(if j = jg then (event nTLS_snd(v); event nDANE_rcv(v2); "
          f"out(c, req_packet(key(i, jg), m)); {_TAIL}; event Received(v2, e1g, j)) "
          f"else (event nTLS_snd(v); out(c, m); {_TAIL}))")

_CONT1 = ("(if e1 = e1g then (out(c, req_packet(key(i, r), e1g)); in(c, a2); "
          "let x2 = get_ans_packet(key(i, r), a2) in "
          + _lookup("e1g", "jg", "j", "x2", _CONT2) + ") "
          f"else (event nTLS_snd(v); out(c, m); {_TAIL}))")

CLIENT = (
    "!(new m; ((in(c, g); if g = m then event Unconf(v, v2)) "
    "| (in(c, t); if t = ctrl(i) then out(c, m)) "
    "| (out(c, req_packet(key(i, r), v2)); in(c, a1); "
    "let x1 = get_ans_packet(key(i, r), a1) in "
    + _lookup("v2", "e1g", "e1", "x1", _CONT1) + ")))"
)
CLIENT_PARAMS = ("v", "d1", "i", "r", "v2", "e1g", "jg")

SERVER = "!(in(c, a); let y = get_req_packet(key(i, j), a) in 0)"
SERVER_PARAMS = ("i", "j")

_REPLY = "out(c, ans_packet(key(i, r), res(rec(n, w)))); event UsedDomServer(r, f)"
_ACCEPT = (f"(let w = getrec(n, x) in (if w = vg then ({_REPLY}) "
           f"else (event I_DNS_from(d1, n); {_REPLY})))")
_VALIDATE = ("(out(c, req_packet(key(r, root), n)); in(c, a3); "
             "let z = get_ans_packet(key(r, root), a3) in let k = getds(n, z) in "
             f"let u = checksign(x, k) in let w = getrec(n, u) in ({_REPLY}))")
_UNAUTH = (f"(if dsec = nosec then {_ACCEPT} else "
           f"(if dval = noval then {_ACCEPT} else {_VALIDATE}))")
_ASK = ("(out(c, req_packet(key(r, f), n)); in(c, a2); "
        "let x = get_ans_packet(key(r, f), a2) in "
        "(let y = unnsw(x) in (let w = getrec(n, y) in "
        f"(if w = vg then ({_REPLY}) else (event I_DNS(n); {_REPLY}))) else {_UNAUTH}))")

RESOLVER = (
    "!(in(c, a1); let q = get_req_packet(key(i, r), a1) in "
    f"(if q = n then (if dsec = nosec then (event nDNSSEC(n); {_ASK}) else {_ASK})))"
)
RESOLVER_PARAMS = ("d1", "i", "r", "n", "f", "vg", "dsec", "dval", "root")

NAMESERVER = (
    "!((in(c, a); let q = get_req_packet(key(r, f), a) in (if q = n then "
    "(out(c, ans_packet(key(r, f), nsw(rec(n, vg)))); "
    "(if kind = mx then event Register_MX(n, vg) else event Register_A(n, vg))))) "
    "| (in(c, t); if t = ctrl(f) then (in(c, w); out(c, ans_packet(key(r, f), nsw(rec(n, w)))))))"
)
NAMESERVER_PARAMS = ("r", "n", "f", "vg", "kind")

ROOT_NAMESERVER = (
    "!(in(c, a); let q = get_req_packet(key(r, root), a) in "
    "(if q = n then out(c, ans_packet(key(r, root), ds(n, pk(zk(n)))))))"
)
ROOT_NAMESERVER_PARAMS = ("r", "root", "n")

# corruption: claiming x hands out ctrl(y) for everything y depends on
COUNTRY = "event C_cntry(cn); out(c, ctrl(cn))"
GUARD = "in(c, t); if t = ctrl(x) then (event {ev}(y); out(c, ctrl(y)))"
ROUTE = ("in(c, t); if t = ctrl(b) then (event nVPN(a, a2); event C_routing(i, j); "
         "out(c, key(i, j)))")
KEYLEAK = "in(c, t); if t = ctrl(x) then out(c, key(i, j))"

# (name, params, body) in the fixed order of the over-approximation
FAMILIES = (
    ("country", ("cn",), COUNTRY),
    ("guard_ip", ("x", "y"), GUARD.format(ev="C_ip")),
    ("guard_dom", ("x", "y"), GUARD.format(ev="C_dom")),
    ("guard_as", ("x", "y"), GUARD.format(ev="C_as")),
    ("route", ("b", "a", "a2", "i", "j"), ROUTE),
    ("keyleak", ("x", "i", "j"), KEYLEAK),
    ("smtp_client", CLIENT_PARAMS, CLIENT),
    ("smtp_server", SERVER_PARAMS, SERVER),
    ("resolver", RESOLVER_PARAMS, RESOLVER),
    ("nameserver", NAMESERVER_PARAMS, NAMESERVER),
    ("root_nameserver", ROOT_NAMESERVER_PARAMS, ROOT_NAMESERVER),
)
FAMILY_NAMES = tuple(f[0] for f in FAMILIES)

_TEMPLATES: dict = {}


def template(name: str) -> ParallelFamily:
    """The instance-free family ``name``."""
    fam = _TEMPLATES.get(name)
    if fam is None:
        spec = {f[0]: f for f in FAMILIES}.get(name)
        if spec is None:
            raise KeyError(name)
        _, params, body = spec
        fam = _TEMPLATES[name] = ParallelFamily(name, params, parse_process(body, params=params))
    return fam


@dataclass
class Session:
    sender: str
    mx: str
    ip: str
    resolver: str
    receiver: str
    peer_mx: str
    peer_ip: str

    def as_tuple(self):
        return (self.sender, self.mx, self.ip, self.resolver, self.receiver,
                self.peer_mx, self.peer_ip)


@dataclass
class CompiledModel:
    graph: PropertyGraph
    attacker: tuple
    defender: frozenset
    families: list
    sessions: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    nonvalidating: frozenset = frozenset()

    @property
    def process(self) -> Process:
        return par(*(f.expand() for f in self.families))

    def family(self, name: str) -> ParallelFamily:
        for f in self.families:
            if f.name == name:
                return f
        raise KeyError(name)

    def instance_count(self) -> int:
        return sum(len(f.instances) for f in self.families)

    def signed(self, domain: str) -> bool:
        return pred("nDNSSEC", domain) not in self.defender

    def summary(self) -> dict:
        return {"attacker": list(self.attacker),
                "defender": sorted(map(str, self.defender)),
                "families": {f.name: len(f.instances) for f in self.families},
                "sessions": [list(s.as_tuple()) for s in self.sessions],
                "warnings": list(self.warnings)}


def over_approximation() -> Process:
    """The graph-independent process: every family with adversary-chosen parameters."""
    return par(*(generalize_family(template(n)) for n in FAMILY_NAMES))


# -- compilation --------------------------------------------------------------

def _first(xs):
    xs = sorted(xs)
    return xs[0] if xs else None


def _as_of(g: PropertyGraph, ip: str):
    return _first(g.succ(ip, EdgeKind.ORIG))


def _routable(g: PropertyGraph, i: str, j: str) -> bool:
    a, b = _as_of(g, i), _as_of(g, j)
    if a is None or b is None or a == b:
        return True
    return any(e.dst == b for e in g.edges_of(EdgeKind.RTE) if e.src == a) or \
        any(e.dst == a for e in g.edges_of(EdgeKind.RTE) if e.src == b)


def _root_ip(g: PropertyGraph) -> str:
    for d in g.domains:
        if g.is_root_server(d):
            ip = _first(g.succ(d, EdgeKind.A))
            if ip is not None:
                return ip
    for v in g.nodes_with(NodeLabel.IP):
        if g.is_root_server(v):
            return v
    return "noroot"


def _mx_chain(g: PropertyGraph, v: str):
    for d in sorted(g.succ(v, EdgeKind.MX)):
        ip = _first(g.succ(d, EdgeKind.A))
        if ip is not None:
            return d, ip
    return None


def _sessions(g, defender, warnings):
    chains = {}
    for v in g.providers:
        ch = _mx_chain(g, v)
        if ch is None:
            warnings.append(f"MissingRole: provider {v} has no MX chain, skipped")
            log.warning("provider %s has no MX chain", v)
        else:
            chains[v] = ch
    out = []
    for v in sorted(chains):
        if pred("nTLS_snd", v) not in defender:
            continue
        for v2 in sorted(chains):
            if v2 == v or pred("nDANE_rcv", v2) not in defender:
                continue
            e1, j = chains[v2]
            for d1 in sorted(g.succ(v, EdgeKind.MX)):
                for i in sorted(g.succ(d1, EdgeKind.A)):
                    if not _routable(g, i, j):
                        continue
                    for r in sorted(g.succ(d1, EdgeKind.RES)):
                        out.append(Session(v, d1, i, r, v2, e1, j))
    return out


def _corruption(g: PropertyGraph, attacker):
    ip, dom, as_ = set(), set(), set()
    for e in g.edges_of(EdgeKind.LOC):
        kind = g.label(e.src)
        target = {NodeLabel.IP: ip, NodeLabel.AS: as_}.get(kind, dom)
        target.add((e.dst, e.src))
    for e in g.edges_of(EdgeKind.ORIG):
        ip.add((e.dst, e.src))
    for e in g.edges_of(EdgeKind.A):
        dom.add((e.dst, e.src))
        ip.add((e.src, e.dst))
    keep = lambda s: sorted(p for p in s if not g.is_root_server(p[1]))  # noqa: E731
    return [(c,) for c in attacker], keep(ip), keep(dom), keep(as_)


def compile(g: PropertyGraph, attacker=(), defender=(), nonvalidating=()) -> CompiledModel:
    """F(G): role and corruption families for graph ``g``.

    ``attacker`` lists the countries under adversary control, ``defender``
    the defender predicates in force and ``nonvalidating`` resolver IPs that
    skip DNSSEC validation.
    """
    defender = check_defender_config(
        g, [parse_predicate(p) if isinstance(p, str) else p for p in defender])
    attacker = tuple(sorted(attacker))
    warnings: list = []
    sessions = _sessions(g, defender, warnings)
    root = _root_ip(g)
    nonval = frozenset(nonvalidating)

    clients, servers, resolvers, nss, rnss = set(), set(), set(), set(), set()
    channels, leaks = set(), set()
    for s in sessions:
        clients.add(s.as_tuple())
        servers.add((s.ip, s.peer_ip))
        channels |= {(s.ip, s.resolver), (s.ip, s.peer_ip)}
        leaks |= {(s.peer_ip, s.ip, s.peer_ip), (s.resolver, s.ip, s.resolver)}
        for n, vg, kind in ((s.receiver, s.peer_mx, "mx"), (s.peer_mx, s.peer_ip, "a")):
            dsec = "sec" if pred("nDNSSEC", n) not in defender else "nosec"
            dval = "noval" if s.resolver in nonval else "val"
            for ns in sorted(g.succ(n, EdgeKind.DNS)):
                for f in sorted(g.succ(ns, EdgeKind.A)):
                    resolvers.add((s.mx, s.ip, s.resolver, n, f, vg, dsec, dval, root))
                    nss.add((s.resolver, n, f, vg, kind))
                    channels.add((s.resolver, f))
            if dsec == "sec":
                rnss.add((s.resolver, root, n))

    routes = set()
    for i, j in channels:
        a, a2 = _as_of(g, i), _as_of(g, j)
        if a is None or a2 is None or pred("nVPN", a, a2) not in defender:
            continue
        for e in g.edges_of(EdgeKind.RTE):
            if e.src == a and e.dst == a2:
                routes.add((e.label.transit, a, a2, i, j))

    country, ip, dom, as_ = _corruption(g, attacker)
    inst = {
        "country": country, "guard_ip": ip, "guard_dom": dom, "guard_as": as_,
        "route": routes, "keyleak": leaks, "smtp_client": clients, "smtp_server": servers,
        "resolver": resolvers, "nameserver": nss, "root_nameserver": rnss,
    }
    families = [template(n).with_instances(sorted(inst[n])) for n in FAMILY_NAMES]
    return CompiledModel(g, attacker, defender, families, sessions, warnings, nonval)


def dnssec_mode(model: CompiledModel, domain: str, enabled: bool) -> CompiledModel:
    """Recompile with DNSSEC switched on or off for ``domain``."""
    g = model.graph
    if domain not in g.nodes or not g.is_domain(domain):
        raise UnknownDomain(domain)
    flag = pred("nDNSSEC", domain)
    defender = set(model.defender)
    if enabled:
        defender.discard(flag)
    else:
        defender.add(flag)
    return compile(g, model.attacker, defender, model.nonvalidating)


def dump_process(model: CompiledModel) -> str:
    from .picalc.process import pretty
    return pretty(model.process) if model.instance_count() else pretty(NIL)


# -- over-approximation ---------------------------------------------------------

@dataclass
class DerivationResult:
    """Outcome of deriving F(G) from the over-approximation by silent steps."""
    ok: bool
    steps: int
    mismatch: str | None = None
    process: Process | None = None

    def to_dict(self):
        return {"ok": self.ok, "steps": self.steps, "mismatch": self.mismatch}


def derive_from_over_approximation(model: CompiledModel) -> DerivationResult:
    """Steer the over-approximation to ``F(G) | R`` using only repl and in steps.

    Each family's replication is unfolded once per instance and the copies
    read the instance parameters from the adversary; every step is taken via
    :func:`step`, so side conditions (deducibility of the inputs) are checked
    by the semantics itself.  Before any output the adversary knows only
    public names, which is why each copy can be steered in isolation.
    """
    from .picalc.process import In, Repl, alpha_equal, par_components, subst
    from .picalc.semantics import Configuration, step

    comps = par_components(over_approximation())
    steps = 0
    derived, per_family = [], []
    for fam, comp in zip(model.families, comps):
        n = len(fam.instances)
        assert isinstance(comp, Repl)
        cur = comp
        for inst in fam.instances:
            succ = [c for lab, rule, c in step(Configuration(procs=(cur,)), repl_budget=n)
                    if rule == "repl"]
            if not succ:
                return DerivationResult(False, steps, f"{fam.name}: cannot unfold")
            copy, cur = succ[0].procs
            steps += 1
            for v in inst:
                assert isinstance(copy, In)
                want = subst(copy.body, {copy.var: v})
                nxt = [c.procs[0] for lab, rule, c in
                       step(Configuration(procs=(copy,)), extra_names=(v,))
                       if rule == "in" and c.procs[0] == want]
                if not nxt:
                    return DerivationResult(False, steps, f"{fam.name}: cannot input {v}")
                copy = nxt[0]
                steps += 1
            derived.append(copy)
        expected = fam.expand()
        got = par(*derived[len(derived) - n:]) if n else NIL
        if not alpha_equal(got, expected):
            return DerivationResult(False, steps, f"{fam.name}: derived copies differ")
        per_family.append(got)
    return DerivationResult(True, steps, None, par(*per_family))


def check_over_approximation(model: CompiledModel, depth: int = 6, repl: int = 2,
                             msg_depth: int = 3, hide=PLUMBING_EVENTS):
    """Bounded over-approximation check ``traces(F(G)) ⊆ traces(P)``.

    Returns ``(InclusionVerdict, DerivationResult)``.  The right-hand side is
    the configuration reached from ``P`` by the derivation; dropping the
    residual replications only removes traces.
    """
    from .picalc.semantics import Bounds, enumerate_traces
    from .process_transforms import InclusionVerdict, check_inclusion

    der = derive_from_over_approximation(model)
    bounds = Bounds(depth, repl, msg_depth)
    if not der.ok:
        left = enumerate_traces(model.process, depth, repl, msg_depth, hide=hide)
        return InclusionVerdict(False, min(left, key=len), len(left), 0, bounds), der
    return check_inclusion(model.process, der.process, bounds, hide=hide), der
