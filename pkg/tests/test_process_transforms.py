import random

import pytest

from iasound.picalc.process import In, Repl, alpha_equal, parse_process, to_text
from iasound.picalc.semantics import Bounds
from iasound.picalc.terms import PublicName, Variable
from iasound.process_transforms import (
    FreeVariableEscape, MultipleBinders, ParallelFamily, ScopeViolation, TransformError,
    check_inclusion, generalize_family, is_nil, push_input,
)

from test_picalc import random_process, wrap

B4 = Bounds(4, 2, 2)


def family(body, params, instances, name="f"):
    return ParallelFamily(name, params, parse_process(body, params=params), instances)


def test_family_basics():
    f = family("event F(v)", ("v",), [("a",), ("b",)])
    assert f.params == (Variable("v"),) and f.instances == ((PublicName("a"),), (PublicName("b"),))
    assert alpha_equal(f.expand(), parse_process("event F(a) | event F(b)"))
    g = generalize_family(f)
    assert isinstance(g, Repl) and isinstance(g.body, In)
    assert generalize_family(f.with_instances([])) == g
    assert is_nil(f.with_instances([]).expand())


def test_family_errors():
    with pytest.raises(FreeVariableEscape):
        ParallelFamily("f", ("v",), parse_process("event F(v, w)", params=("v", "w")))
    with pytest.raises(TransformError):
        family("event F(v)", ("v",), [("a", "b")])


def test_generalization_example():
    f = family("event F(v)", ("v",), [("a",), ("b",)])
    assert check_inclusion(f.expand(), generalize_family(f), B4, right_repl=2)
    noparam = family("event G(a)", (), [(), ()])
    assert check_inclusion(noparam.expand(), generalize_family(noparam), B4)


def test_inclusion_counterexample():
    v = check_inclusion(parse_process("event A(a)"), parse_process("event B(a)"), B4)
    assert not v and [str(e) for e in v.counterexample] == ["A(a)"]
    p = parse_process("in(c, x); event A(x)")
    assert check_inclusion(p, p, B4).included
    assert v.to_dict()["bounds"] == B4.as_dict()


def test_hoist_example():
    q = parse_process("out(c, a) | (in(c, x); event F(x))")
    h = push_input(q, "x")
    assert alpha_equal(h, parse_process("in(c, x); (out(c, a) | event F(x))"))
    assert check_inclusion(h, q, B4)
    # reading before the key is out loses the guarded event: inclusion is strict
    q2 = parse_process("new k; (out(c, k) | (in(c, x); if x = k then event F(a)))")
    h2 = push_input(q2, "x")
    assert check_inclusion(h2, q2, B4)
    assert not check_inclusion(q2, h2, B4)


def test_push_inward_round_trip():
    q = parse_process("event A(a); in(c, x); event B(x)")
    h = push_input(q, "x")
    assert to_text(h) == "in(c, x); event A(a); event B(x)"
    back = push_input(h, "x", target=(0,))
    assert alpha_equal(back, q)
    assert check_inclusion(q, back, B4) and check_inclusion(h, q, B4)


def test_relocation_errors():
    assert push_input(parse_process("event A(a)"), "x") == parse_process("event A(a)")
    with pytest.raises(MultipleBinders):
        push_input(parse_process("(in(c, x); event A(x)) | (in(c, x); event B(x))"), "x")
    with pytest.raises(ScopeViolation):
        push_input(parse_process("new d; in(d, x); event A(x)"), "x")
    with pytest.raises(ScopeViolation):
        push_input(parse_process("in(c, x); event A(x); event B(x)"), "x", target=(0,))
    with pytest.raises(ScopeViolation):
        push_input(parse_process("event A(a); in(c, x); event B(x)"), "x", target=(0,))


# -- randomized validation ----------------------------------------------------

def random_family(rng):
    k = rng.randint(0, 2)
    params = tuple(f"v{i}" for i in range(k))
    body = random_process(rng, rng.randint(1, 4), scope=params)
    n = rng.randint(0, 2)
    inst = [tuple(rng.choice("ab") for _ in params) for _ in range(n)]
    return ParallelFamily("r", params, parse_process("new k0; " + wrap(body), params=params), inst)


def random_relocation(rng):
    body = random_process(rng, rng.randint(1, 3), scope=("z",))
    site = f"in(c, z); {wrap(body)}"
    for _ in range(rng.randint(0, 2)):
        r = rng.random()
        if r < 0.4:
            site = f"event E{rng.randint(1, 3)}({rng.choice('ab')}); ({site})"
        elif r < 0.6:
            site = f"out(c, {rng.choice('ab')}); ({site})"
        elif r < 0.8:
            site = f"if {rng.choice('ab')} = {rng.choice('ab')} then ({site})"
        else:
            site = f"({site}) | {wrap(random_process(rng, 2))}"
    return parse_process("new k0; " + wrap(site))


def inclusion_cases(seed=13, n=60):
    rng = random.Random(seed)
    fams = [random_family(rng) for _ in range(n)]
    rels = [random_relocation(rng) for _ in range(n)]
    return fams, rels


def test_generalization_inclusion_random():
    fams, _ = inclusion_cases()
    for f in fams:
        v = check_inclusion(f.expand(), generalize_family(f), B4,
                            right_repl=max(2, len(f.instances)))
        assert v, (to_text(f.template), f.instances, v.counterexample)


def test_hoisting_inclusion_random():
    _, rels = inclusion_cases()
    for q in rels:
        h = push_input(q, "z")
        assert isinstance(h, In)
        v = check_inclusion(h, q, B4)
        assert v, (to_text(q), v.counterexample)
