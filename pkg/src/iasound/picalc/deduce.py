"""Dolev-Yao deduction for subterm-convergent theories.

The frame is first closed under destructor applications whose principal
argument is a frame term (analysis); a target is then decided by recursive
synthesis over public constructors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .terms import (
    DEFAULT_THEORY, Constructor, FreeName, PublicName, Term, Theory, Variable,
    match, substitute,
)


@dataclass(frozen=True)
class Frame:
    """``νE.δ``: secret names ``E`` and the ordered outputs ``δ``."""
    names: frozenset = frozenset()
    outputs: tuple = ()

    def extend(self, t: Term) -> "Frame":
        return Frame(self.names, self.outputs + (t,))

    def handles(self) -> dict:
        return {f"x{i + 1}": t for i, t in enumerate(self.outputs)}


class Knowledge:
    """Saturated adversary knowledge for a fixed set of observed terms.

    ``secret`` lists the names the adversary cannot guess; ``None`` means
    every :class:`FreeName` is secret.
    """

    def __init__(self, observed: Iterable[Term], theory: Theory = DEFAULT_THEORY,
                 secret: frozenset | None = None):
        self.observed = frozenset(observed)
        self.theory = theory
        self.secret = secret
        self._synth: dict[Term, bool] = {}
        self.sat = self._saturate()

    def _name_known(self, n: Term) -> bool:
        if isinstance(n, PublicName):
            return True
        if isinstance(n, FreeName):
            return self.secret is not None and n not in self.secret
        return False

    def _saturate(self) -> frozenset:
        sat = set(self.observed)
        rules = []
        for d in self.theory.destructors.values():
            for lhs, rhs in d.reductions:
                for k, p in enumerate(lhs):
                    if isinstance(p, Constructor):
                        rules.append((lhs, rhs, k))
        changed = True
        while changed:
            changed = False
            self._synth = {}
            for u in sorted(sat, key=str):
                for lhs, rhs, k in rules:
                    b = match(lhs[k], u, {})
                    if b is None:
                        continue
                    for b2 in self._complete(lhs, k, b, sat):
                        val = substitute(rhs, b2)
                        if val not in sat:
                            sat.add(val)
                            changed = True
        self._synth = {}
        return frozenset(sat)

    def _complete(self, lhs, k, b, sat):
        """Bindings under which every other lhs argument is deducible."""
        partial = [b]
        for j, p in enumerate(lhs):
            if j == k:
                continue
            nxt = []
            for bb in partial:
                inst = substitute(p, bb)
                if inst.is_ground():
                    if self._synth_in(inst, sat):
                        nxt.append(bb)
                else:
                    # unbound pattern variables: draw candidates from the frame
                    for u in sat:
                        b3 = match(p, u, bb)
                        if b3 is not None:
                            nxt.append(b3)
            partial = nxt
        return partial

    def _synth_in(self, t: Term, sat) -> bool:
        if t in sat:
            return True
        if isinstance(t, Variable):
            return False
        if isinstance(t, Constructor):
            if t.symbol not in self.theory.constructors or self.theory.is_private(t.symbol):
                return False
            return all(self._synth_in(a, sat) for a in t.args)
        return self._name_known(t)

    def deduce(self, t: Term) -> bool:
        hit = self._synth.get(t)
        if hit is None:
            if isinstance(t, Constructor) and t.symbol in self.theory.destructors:
                val = evaluate(t, self.theory)
                hit = val is not None and self.deduce(val)
            elif isinstance(t, Constructor) and any(
                    s.symbol in self.theory.destructors for s in t.walk()
                    if isinstance(s, Constructor)):
                val = evaluate(t, self.theory)
                hit = val is not None and self.deduce(val)
            else:
                hit = self._synth_in(t, self.sat)
            self._synth[t] = hit
        return hit

    __contains__ = deduce


def evaluate(t: Term, theory: Theory = DEFAULT_THEORY) -> Term | None:
    """Normalize destructor applications innermost-first; None on failure."""
    if not isinstance(t, Constructor):
        return t
    args = []
    for a in t.args:
        v = evaluate(a, theory)
        if v is None:
            return None
        args.append(v)
    d = theory.destructors.get(t.symbol)
    if d is None:
        return Constructor(t.symbol, args)
    return d.apply(tuple(args))


def deduce(frame: Frame, t: Term, theory: Theory = DEFAULT_THEORY) -> bool:
    """``νE.δ ⊢ t``."""
    theory.check_convergent()
    return Knowledge(frame.outputs, theory, frozenset(frame.names)).deduce(t)
