"""scikit-learn style wrapper around grounding and delete-relaxed planning."""
from __future__ import annotations

from sklearn.base import BaseEstimator

from .graph_model import PropertyGraph
from .planner import (
    UNREACHABLE, Predicate, extract_plan, ground, parse_predicate, reachable_fixpoint, total_reward,
)


class AttackerPlanner(BaseEstimator):
    """Fit on a property graph; predict a plan (list of action ids) per goal.

    Unreachable goals predict ``None``.
    """

    def __init__(self, attacker=(), defender=(), legacy_rules: bool = False):
        self.attacker = attacker
        self.defender = defender
        self.legacy_rules = legacy_rules

    def fit(self, X: PropertyGraph, y=None):
        self.task_ = ground(X, self.attacker, self.defender, legacy=self.legacy_rules)
        self.fixpoint_ = reachable_fixpoint(self.task_)
        self.reward_ = total_reward(self.task_, self.fixpoint_)
        return self

    def _check(self):
        if not hasattr(self, "task_"):
            raise RuntimeError("AttackerPlanner is not fitted")

    def predict(self, goals) -> list:
        self._check()
        out = []
        for gl in goals:
            p = gl if isinstance(gl, Predicate) else parse_predicate(gl)
            plan = extract_plan(self.task_, p)
            out.append(None if plan is UNREACHABLE else list(plan))
        return out

    def score(self, goals, y=None) -> float:
        """Fraction of ``goals`` the attacker can reach."""
        self._check()
        goals = [g if isinstance(g, Predicate) else parse_predicate(g) for g in goals]
        return sum(g in self.fixpoint_ for g in goals) / len(goals) if goals else 0.0
