"""Command line entry point: ``iasound <subcommand>``.

A run manifest is a JSON object::

    {"graph": "fig2", "attacker": ["DE"], "defender": ["nTLS_snd(gmail.com)"],
     "sigma": null, "bounds": {"depth": 6, "repl": 2, "msg_depth": 3},
     "rules": "corrected", "nonvalidating": [], "goals": [], "out": "report"}

``graph`` is a bundled corpus name or a path.  Command line flags override
manifest fields.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import corpus_names, corpus_path
from .graph_model import graph_to_dict, load_graph_file
from .naming import PLUMBING_EVENTS

log = logging.getLogger("iasound")

RULE_SETS = ("corrected", "legacy")
DEFAULTS = {"graph": None, "attacker": [], "defender": [], "sigma": None,
            "bounds": {"depth": 6, "repl": 2, "msg_depth": 3}, "rules": "corrected",
            "nonvalidating": [], "goals": [], "out": "report"}


class ManifestError(ValueError):
    pass


def load_manifest(path=None, **overrides) -> dict:
    """Manifest fields with defaults filled in; non-None overrides win."""
    m = json.loads(json.dumps(DEFAULTS))
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ManifestError("manifest must be a JSON object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ManifestError(f"unknown manifest fields: {sorted(unknown)}")
        b = doc.pop("bounds", None) or {}
        m.update(doc)
        m["bounds"].update(b)
    for k, v in overrides.items():
        if v is None or v == ():
            continue
        if k in ("depth", "repl", "msg_depth"):
            m["bounds"][k] = v
        else:
            m[k] = list(v) if isinstance(v, tuple) else v
    if m["graph"] is None:
        raise ManifestError("no graph given")
    if m["rules"] not in RULE_SETS:
        raise ManifestError(f"rules must be one of {RULE_SETS}")
    if any(not isinstance(x, int) or x < 0 for x in m["bounds"].values()):
        raise ManifestError("bounds must be non-negative integers")
    if m["bounds"]["repl"] < 1 or m["bounds"]["msg_depth"] < 1:
        raise ManifestError("replication and message depth must be positive")
    return m


def graph_path(ref: str) -> str:
    if os.path.exists(ref):
        return ref
    if ref.removesuffix(".json") in corpus_names():
        return corpus_path(ref)
    raise ManifestError(f"no such graph file or corpus entry: {ref}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(path, text: str):
    if path in (None, "-"):
        click.echo(text, nl=False)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# -- pipeline stages ----------------------------------------------------------

class Pipeline:
    """Lazily computed stages for one manifest."""

    def __init__(self, manifest: dict):
        self.m = manifest
        self._cache: dict = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def legacy(self) -> bool:
        return self.m["rules"] == "legacy"

    @property
    def graph(self):
        return self._get("graph", lambda: load_graph_file(graph_path(self.m["graph"])))

    @property
    def task(self):
        from .planner import ground
        return self._get("task", lambda: ground(self.graph, self.m["attacker"],
                                                self.m["defender"], legacy=self.legacy))

    @property
    def normalized(self):
        from .soundness_conditions import normalize_cs1, normalize_cs2
        return self._get("norm", lambda: normalize_cs2(normalize_cs1(self.task)))

    @property
    def sigma(self):
        from .soundness_conditions import SigmaCap
        s = self.m["sigma"]
        return self._get("sigma", lambda: SigmaCap.default() if s is None else SigmaCap.of(*s))

    @property
    def model(self):
        from .email_compiler import compile
        return self._get("model", lambda: compile(self.graph, self.m["attacker"],
                                                  self.m["defender"], self.m["nonvalidating"]))

    @property
    def bound(self) -> dict:
        return dict(self.m["bounds"], hidden=sorted(PLUMBING_EVENTS))

    @property
    def traces(self):
        from .picalc.semantics import enumerate_traces
        b = self.m["bounds"]

        def run():
            if b["depth"] == 0:
                log.warning("depth 0: every bounded check passes vacuously")
            return enumerate_traces(self.model.process, b["depth"], b["repl"], b["msg_depth"],
                                    hide=PLUMBING_EVENTS)
        return self._get("traces", run)

    def static_reports(self):
        from .soundness_conditions import check_cs1, check_cs2, check_cs4
        return [check_cs1(self.normalized), check_cs2(self.normalized, self.sigma),
                check_cs4(self.normalized, self.sigma)]

    def dynamic_reports(self):
        from .soundness_conditions import check_cs3, check_cs5
        return [check_cs3(self.traces, self.bound),
                check_cs5(self.normalized, self.traces, self.sigma, self.bound)]

    def soundness(self):
        from .soundness_conditions import check_soundness
        return check_soundness(self.normalized, self.traces, self.sigma, self.bound)

    def witness(self, kind: str, trace, predicate=None) -> dict:
        return {"kind": kind, "trace": [str(e) for e in trace],
                "predicate": None if predicate is None else str(predicate),
                "graph": self.m["graph"], "attacker": list(self.m["attacker"]),
                "defender": list(self.m["defender"]), "rules": self.m["rules"],
                "nonvalidating": list(self.m["nonvalidating"]), "sigma": self.m["sigma"],
                "bounds": dict(self.m["bounds"]), "hidden": sorted(PLUMBING_EVENTS)}


def replay_witness(doc: dict) -> dict:
    """Re-run a witness: the trace must be a model trace and still violate."""
    from .picalc.process import parse_term
    from .picalc.semantics import accepts_trace
    from .soundness_conditions import check_cs5, check_soundness

    m = load_manifest(None, **{k: doc[k] for k in
                               ("graph", "attacker", "defender", "rules", "nonvalidating")},
                      sigma=doc.get("sigma"))
    m["bounds"].update(doc["bounds"])
    p = Pipeline(m)
    trace = tuple(parse_term(e) for e in doc["trace"])
    b = m["bounds"]
    accepted = accepts_trace(p.model.process, trace, b["repl"], b["msg_depth"],
                             hide=set(doc.get("hidden", PLUMBING_EVENTS)))
    if doc["kind"] == "cs5":
        violated = not check_cs5(p.normalized, [trace], p.sigma).ok
    else:
        violated = not check_soundness(p.normalized, [trace], p.sigma).ok
    return {"accepted": accepted, "violated": violated, "reproduced": accepted and violated}


# -- commands -----------------------------------------------------------------

def _common(f):
    opts = [
        click.option("--manifest", "manifest", type=click.Path(exists=True, dir_okay=False)),
        click.option("--graph", "graph"),
        click.option("--attacker", "attacker", multiple=True, help="Attacker country (repeat)."),
        click.option("--defender", "defender", multiple=True,
                     help="Defender predicate such as nTLS_snd(gmail.com) (repeat)."),
        click.option("--legacy-rules", "legacy", is_flag=True, default=None,
                     help="Use the original rule set."),
        click.option("--sigma", "sigma", type=click.Path(exists=True, dir_okay=False),
                     help="JSON list restricting Σ∩."),
        click.option("--depth", type=int),
        click.option("--repl", type=int),
        click.option("--msg-depth", "msg_depth", type=int),
        click.option("--nonvalidating", multiple=True, help="Resolver IP skipping DNSSEC checks."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _pipeline(manifest=None, graph=None, attacker=(), defender=(), legacy=None, sigma=None,
              depth=None, repl=None, msg_depth=None, nonvalidating=(), **_) -> Pipeline:
    sig = None
    if sigma is not None:
        sig = json.loads(Path(sigma).read_text(encoding="utf-8"))
    m = load_manifest(manifest, graph=graph, attacker=attacker, defender=defender,
                      rules="legacy" if legacy else None, sigma=sig, depth=depth,
                      repl=repl, msg_depth=msg_depth, nonvalidating=nonvalidating)
    return Pipeline(m)


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def cli(verbose):
    """Attacker-planning models checked against a bounded protocol model."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("graph")
def load(graph):
    """Validate a graph and print it in canonical form."""
    g = load_graph_file(graph_path(graph))
    click.echo(_dump(graph_to_dict(g)), nl=False)


@cli.command("ground")
@_common
@click.option("-o", "--output", default="-")
def ground_cmd(output, **kw):
    """Ground the attacker rules into a planning task."""
    from .planner import task_to_dict
    _write(output, _dump(task_to_dict(_pipeline(**kw).task)))


@cli.command()
@_common
def fixpoint(**kw):
    """Predicates reachable by the attacker."""
    from .planner import reachable_fixpoint
    click.echo(_dump(sorted(map(str, reachable_fixpoint(_pipeline(**kw).task)))), nl=False)


@cli.command()
@_common
@click.argument("goals", nargs=-1, required=True)
def plan(goals, **kw):
    """A relaxed plan for each goal predicate (null if unreachable)."""
    from .planner import UNREACHABLE, extract_plan
    t = _pipeline(**kw).task
    out = {}
    for gl in goals:
        pl = extract_plan(t, gl)
        out[gl] = None if pl is UNREACHABLE else pl
    click.echo(_dump(out), nl=False)


@cli.command()
@_common
def reward(**kw):
    """Delete-relaxed upper bound on the attacker's reward."""
    from .planner import reachable_fixpoint, total_reward
    t = _pipeline(**kw).task
    click.echo(total_reward(t, reachable_fixpoint(t)))


@cli.command()
@_common
@click.option("--dynamic", is_flag=True, help="Also enumerate traces for CS3 and CS5.")
def check(dynamic, **kw):
    """Soundness conditions; exit 1 if any fails."""
    p = _pipeline(**kw)
    reps = p.static_reports() + (p.dynamic_reports() if dynamic else [])
    for r in reps:
        click.echo(r.text())
    sys.exit(0 if all(r.ok for r in reps) else 1)


@cli.command("compile")
@_common
@click.option("-o", "--output", default="-")
def compile_cmd(output, **kw):
    """Compile the graph into the protocol model and print the process."""
    from .email_compiler import dump_process
    p = _pipeline(**kw)
    for w in p.model.warnings:
        log.warning(w)
    _write(output, dump_process(p.model) + "\n")


@cli.command()
@_common
@click.option("-o", "--output", default="-")
def traces(output, **kw):
    """Enumerate bounded traces (plumbing events hidden) as JSON."""
    p = _pipeline(**kw)
    rows = sorted(([str(e) for e in tr] for tr in p.traces), key=lambda r: (len(r), r))
    _write(output, _dump({"bounds": p.bound, "traces": rows}))


@cli.command()
@_common
@click.option("--witness-dir", type=click.Path(file_okay=False), default=None)
def soundness(witness_dir, **kw):
    """CS5 and symbolic soundness; exit 1 with witness files on failure."""
    p = _pipeline(**kw)
    ok, docs = _soundness_stage(p)
    for name, doc in docs.items():
        if name.startswith("witness"):
            if witness_dir:
                _write(Path(witness_dir) / f"{name[8:]}.json", _dump(doc))
        else:
            click.echo(f"{name}: {doc.get('verdict') or doc.get('kind')}")
    sys.exit(0 if ok else 1)


def _soundness_stage(p: Pipeline):
    cs3, cs5 = p.dynamic_reports()
    v = p.soundness()
    docs = {"CS3": cs3.to_dict(), "CS5": cs5.to_dict(), "soundness": v.to_dict()}
    if not cs5.ok:
        tr, c = cs5.witnesses[0]
        docs["witness_cs5"] = p.witness("cs5", tr, c)
    if not v.ok:
        docs["witness_unsound"] = p.witness("unsound", v.counterexample)
    return cs3.ok and cs5.ok and v.ok, docs


@cli.command()
@click.argument("witness", type=click.Path(exists=True, dir_okay=False))
def replay(witness):
    """Replay a witness file; exit 0 iff the violation reproduces."""
    res = replay_witness(json.loads(Path(witness).read_text(encoding="utf-8")))
    click.echo(_dump(res), nl=False)
    sys.exit(0 if res["reproduced"] else 1)


@cli.command("emit-queries")
@_common
@click.option("--level", type=click.Choice(["schema", "ground"]), default="schema")
@click.option("-o", "--output", default="-")
def emit_queries_cmd(level, output, **kw):
    """Correspondence and weak-secrecy queries in ProVerif syntax."""
    from .query_gen import emit_queries, partition_actions
    p = _pipeline(**kw)
    part = partition_actions(normalize_or_task(p, level), p.sigma)
    _write(output, emit_queries(part, level == "schema", p.graph))


def normalize_or_task(p: Pipeline, level: str):
    # schema level reflects every grounded rule, ground level only live ones
    from .soundness_conditions import normalize_cs1
    return normalize_cs1(p.task) if level == "schema" else p.normalized


@cli.command()
@_common
@click.option("-o", "--output", default="-")
def transform(output, **kw):
    """Check traces(F(G)) ⊆ traces(P) for the over-approximation P."""
    from .email_compiler import check_over_approximation
    p = _pipeline(**kw)
    b = p.m["bounds"]
    v, der = check_over_approximation(p.model, b["depth"], b["repl"], b["msg_depth"])
    _write(output, _dump({"inclusion": v.to_dict(), "derivation": der.to_dict()}))
    sys.exit(0 if v.included else 1)


def run_pipeline(manifest: dict, out_dir=None) -> tuple[bool, dict]:
    """Full pipeline; writes the report bundle and returns (ok, files)."""
    from .planner import UNREACHABLE, extract_plan, reachable_fixpoint, total_reward
    from .query_gen import emit_queries, partition_actions

    p = Pipeline(manifest)
    out = Path(out_dir or manifest["out"])
    files: dict[str, str] = {}
    static = p.static_reports()
    files["conditions.json"] = _dump([r.to_dict() for r in static])
    ok_dyn, docs = _soundness_stage(p)
    files["dynamic.json"] = _dump({k: docs[k] for k in ("CS3", "CS5")})
    files["soundness.json"] = _dump(docs["soundness"])
    for name in ("witness_cs5", "witness_unsound"):
        if name in docs:
            files[f"witnesses/{name[8:]}.json"] = _dump(docs[name])
    fix = reachable_fixpoint(p.task)
    plans = {}
    for gl in manifest["goals"] or sorted(str(c) for c in fix if c.symbol == "unconf"):
        pl = extract_plan(p.task, gl)
        plans[gl] = None if pl is UNREACHABLE else pl
    files["plans.json"] = _dump(plans)
    part = partition_actions(normalize_or_task(p, "schema"), p.sigma)
    files["queries.pv"] = emit_queries(part, True)
    ok = all(r.ok for r in static) and ok_dyn
    summary = {"manifest": manifest, "ok": ok, "model": p.model.summary(),
               "traces": len(p.traces), "reward": total_reward(p.task, fix),
               "verdicts": {**{r.condition: r.verdict for r in static},
                            "CS3": docs["CS3"]["verdict"], "CS5": docs["CS5"]["verdict"],
                            "soundness": docs["soundness"]["kind"]}}
    if manifest["bounds"]["depth"] == 0:
        summary["warnings"] = ["depth 0: bounded checks are vacuous"]
    files["summary.json"] = _dump(summary)
    for name, text in sorted(files.items()):
        _write(out / name, text)
    return ok, files


@cli.command()
@_common
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
def run(out_dir, **kw):
    """Run the whole pipeline and write a report bundle; exit 0 iff all checks pass."""
    p = _pipeline(**kw)
    ok, files = run_pipeline(p.m, out_dir)
    click.echo(json.loads(files["summary.json"])["verdicts"])
    sys.exit(0 if ok else 1)


def _attribute(e: Exception) -> str:
    mod = type(e).__module__.rsplit(".", 1)[-1]
    return f"error [{mod}] {type(e).__name__}: {e}"


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except SystemExit:
        raise
    except Exception as e:  # module errors are reported, not dumped
        click.echo(_attribute(e), err=True)
        sys.exit(2)
