"""Over-approximating process rewrites and a bounded trace-inclusion harness.

``generalize_family`` replaces a parallel family of instances by a replicated
input of its parameters.  ``push_input`` moves an input prefix to the front
of a process (or back inside it).  Both only ever add traces; the harness
re-checks that claim on concrete instances.
"""
from __future__ import annotations

from dataclasses import dataclass

from .picalc.process import (
    NIL, Event, IfEq, In, LetDes, New, Nil, Out, Par, Process, Repl, alpha_equal, free_vars,
    par, public_names, subst,
)
from .picalc.semantics import Bounds, enumerate_traces
from .picalc.terms import FreeName, PublicName, Variable

CHANNEL = PublicName("c")


class TransformError(ValueError):
    pass


class FreeVariableEscape(TransformError):
    pass


class MultipleBinders(TransformError):
    pass


class ScopeViolation(TransformError):
    pass


@dataclass(frozen=True)
class ParallelFamily:
    """``∥_{p ∈ instances} template{p/params}``."""
    name: str
    params: tuple
    template: Process
    instances: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(
            p if isinstance(p, Variable) else Variable(p) for p in self.params))
        object.__setattr__(self, "instances", tuple(tuple(
            x if isinstance(x, PublicName) else PublicName(x) for x in inst)
            for inst in self.instances))
        escaped = free_vars(self.template) - set(self.params)
        if escaped:
            raise FreeVariableEscape(
                f"{self.name}: template mentions {sorted(v.name for v in escaped)}")
        for inst in self.instances:
            if len(inst) != len(self.params):
                raise TransformError(f"{self.name}: instance {inst} has the wrong arity")

    def instance(self, values) -> Process:
        return subst(self.template, dict(zip(self.params, values)))

    def expand(self) -> Process:
        return par(*(self.instance(v) for v in self.instances))

    def with_instances(self, instances) -> "ParallelFamily":
        return ParallelFamily(self.name, self.params, self.template, tuple(instances))


def generalize_family(f: ParallelFamily, chan=CHANNEL) -> Process:
    """``!in(c, v1). ... in(c, vk). template``; independent of the instances."""
    body = f.template
    for v in reversed(f.params):
        body = In(chan, v, body)
    return Repl(body)


# -- input relocation -------------------------------------------------------

def _binders(p: Process, var: Variable) -> list:
    found = []

    def go(q, path):
        if isinstance(q, In) and q.var == var:
            found.append(path)
        for k, c in enumerate(q.children()):
            go(c, path + (k,))
    go(p, ())
    return found


def _at(p: Process, path):
    for k in path:
        p = p.children()[k]
    return p


def _replace(p: Process, path, new: Process) -> Process:
    if not path:
        return new
    k, rest = path[0], path[1:]
    kids = list(p.children())
    kids[k] = _replace(kids[k], rest, new)
    if isinstance(p, Par):
        return Par(*kids)
    if isinstance(p, Repl):
        return Repl(kids[0], p.budget)
    if isinstance(p, In):
        return In(p.chan, p.var, kids[0])
    if isinstance(p, Out):
        return Out(p.chan, p.msg, kids[0])
    if isinstance(p, New):
        return New(p.name, kids[0])
    if isinstance(p, Event):
        return Event(p.fact, kids[0])
    if isinstance(p, IfEq):
        return IfEq(p.left, p.right, kids[0], kids[1])
    if isinstance(p, LetDes):
        return LetDes(p.var, p.dest, p.args, kids[0], kids[1])
    raise TypeError(p)


def _bound_on_path(p: Process, path) -> tuple[set, set]:
    """Variables and names bound by binders strictly above ``path``."""
    vs, ns = set(), set()
    q = p
    for k in path:
        if isinstance(q, In):
            vs.add(q.var)
        elif isinstance(q, LetDes) and k == 0:
            vs.add(q.var)
        elif isinstance(q, New):
            ns.add(q.name)
        q = q.children()[k]
    return vs, ns


def _check_channel(chan, vs, ns, where):
    cv = {v for v in chan.walk() if isinstance(v, Variable)}
    cn = {n for n in chan.walk() if isinstance(n, FreeName)}
    if cv & vs or cn & ns:
        raise ScopeViolation(f"channel {chan} is bound {where}")


def push_input(q: Process, var, target=None) -> Process:
    """Relocate the unique input binding ``var``.

    With ``target=None`` the input is hoisted to the front, giving
    ``in(M, var).Q'`` whose traces are included in those of ``q``.  Otherwise
    ``q`` must start with that input and ``target`` is a child path inside its
    continuation where the input is pushed to.
    """
    var = var if isinstance(var, Variable) else Variable(var)
    paths = _binders(q, var)
    if not paths:
        return q
    if len(paths) > 1:
        raise MultipleBinders(f"{len(paths)} inputs bind {var.name}")
    path = paths[0]
    node = _at(q, path)
    if target is None:
        if not path:
            return q
        vs, ns = _bound_on_path(q, path)
        _check_channel(node.chan, vs, ns, "between the input and the front")
        if var in free_vars(_replace(q, path, NIL)):
            raise ScopeViolation(f"hoisting {var.name} would capture a free occurrence")
        return In(node.chan, var, _replace(q, path, node.body))
    if path:
        raise ScopeViolation("pushing inward needs the input at the front")
    target = tuple(target)
    body = node.body
    try:
        spot = _at(body, target)
    except IndexError:
        raise ScopeViolation(f"no position {target} in the continuation") from None
    vs, ns = _bound_on_path(body, target)
    _check_channel(node.chan, vs, ns, "at the target position")
    outside = _replace(body, target, NIL)
    if var in free_vars(outside):
        raise ScopeViolation(f"{var.name} is used outside the target position")
    if var in vs:
        raise ScopeViolation(f"{var.name} would be captured")
    return _replace(body, target, In(node.chan, var, spot))


# -- inclusion harness ------------------------------------------------------

@dataclass
class InclusionVerdict:
    included: bool
    counterexample: tuple | None = None
    left: int = 0
    right: int = 0
    bounds: Bounds | None = None

    def __bool__(self):
        return self.included

    def to_dict(self):
        return {"included": self.included,
                "counterexample": None if self.counterexample is None
                else [str(e) for e in self.counterexample],
                "left_traces": self.left, "right_traces": self.right,
                "bounds": None if self.bounds is None else self.bounds.as_dict()}


def check_inclusion(p: Process, q: Process, bounds: Bounds = Bounds(4, 2, 2),
                    extra_names=None, right_repl: int | None = None,
                    hide=()) -> InclusionVerdict:
    """Bounded check that ``traces(p) ⊆ traces(q)``.

    The adversary of ``q`` may additionally send any public name of ``p``.
    ``right_repl`` overrides the replication budget on the right-hand side;
    events in ``hide`` are projected away on both sides.
    """
    names = set(public_names(p)) | set(extra_names or ())
    left = enumerate_traces(p, bounds.depth, bounds.repl, bounds.msg_depth, hide=hide)
    if p == q or alpha_equal(p, q):
        return InclusionVerdict(True, None, len(left), len(left), bounds)
    right = enumerate_traces(q, bounds.depth, bounds.repl if right_repl is None else right_repl,
                             bounds.msg_depth, extra_names=names, hide=hide)
    for tr in sorted(left, key=lambda t: (len(t), str(t))):
        if tr not in right:
            return InclusionVerdict(False, tr, len(left), len(right), bounds)
    return InclusionVerdict(True, None, len(left), len(right), bounds)


def is_nil(p: Process) -> bool:
    return isinstance(p, Nil)
