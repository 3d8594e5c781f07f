"""Infrastructure-attacker planning models checked against a bounded applied-pi protocol model."""
from importlib import resources

from .graph_model import PropertyGraph, load_graph, load_graph_file
from .planner import Action, PlanningTask, Predicate, ground, reachable_fixpoint

__version__ = "0.1.0"


def corpus_path(name: str) -> str:
    """Path of a bundled corpus graph, e.g. ``corpus_path("fig2")``."""
    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files(__package__) / "corpus" / name)


def corpus_names() -> list[str]:
    root = resources.files(__package__) / "corpus"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


__all__ = [
    "Action", "PlanningTask", "Predicate", "PropertyGraph", "corpus_names", "corpus_path",
    "ground", "load_graph", "load_graph_file", "reachable_fixpoint",
]
