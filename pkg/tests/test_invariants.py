from fractions import Fraction

import pytest

from buchi_rank import corpus
from buchi_rank.automata import from_ltl_text
from buchi_rank.invariants import (
    INF, check_inductive, cosynthesize_invariants, interval_boxes, interval_invariants, load_invariants, refine,
)
from buchi_rank.ir import TRUE, Atom, ConfigError, evaluate
from buchi_rank.ltl import LNot, parse_ltl
from buchi_rank.oracle import OracleInapplicable, build_graph
from buchi_rank.parser import parse_ts
from buchi_rank.pipeline import RunConfig, automaton_for, run, with_intervals
from buchi_rank.poly import Polynomial
from buchi_rank.product import build_product

from conftest import needs_z3


def test_annotations_default_to_true(figure1):
    inv = load_invariants({"l2": "x0 >= 0"}, figure1)
    assert inv["l_init"] == TRUE and inv["l2"] != TRUE
    with pytest.raises(ConfigError):
        load_invariants({"nowhere": "x0 >= 0"}, figure1)


def test_annotations_lift_to_every_automaton_state(figure2):
    assert figure2.ts.invariant("l1.q0") == figure2.ts.invariant("l1.q1") != TRUE


def test_figure1_annotation_is_not_inductive(figure1):
    rep = check_inductive(figure1, figure1.invariants, samples=500)
    assert not rep.ok
    kind, s1, s2 = rep.violations[0]
    assert kind == "consecution" and s1.loc == "l3" and s2.vals[0] < 0


def test_counter_invariant_candidates():
    ts = parse_ts("pre: x == 0\nwhile true do x = x + 1 done")
    assert ts.locations == ["l_init", "l1", "l2", "l_t"]
    good = load_invariants({"l1": "x >= 0", "l2": "x >= 0"}, ts)
    bad = load_invariants({"l1": "x >= 1", "l2": "x >= 1"}, ts)
    assert check_inductive(ts, good, samples=300).ok
    assert not check_inductive(ts, bad, samples=300).ok


def test_cosynthesis_shapes(figure2):
    it, cs, extra = cosynthesize_invariants(figure2, 1)
    assert set(extra) == set(figure2.locations)
    origins = {e.origin for e in cs.entailments}
    assert "invariant initiation" in origins
    assert len(it.all_unknowns()) == 2 * len(figure2.locations)
    with pytest.raises(ConfigError):
        cosynthesize_invariants(figure2, 0)


@needs_z3
def test_cosynthesis_decides_what_plain_templates_cannot():
    base = corpus.load("countdown")
    ra = next(t for t in corpus.load_spec_templates() if t.name == "RA")
    text, ts = ra.bind(base)
    common = dict(mode="verify", degree_max=1, sos=("diagonal",), timeout=20)
    plain = run(RunConfig(**common), ts, text)
    cos = run(RunConfig(invariant_degree=1, **common), ts, text)
    assert plain.verdict == "Unknown"
    assert cos.verdict == "Proved" and cos.invariants


def test_refine_examples():
    x = Polynomial.var(1, 0)
    top = ((-INF, INF),)
    assert refine(top, [Atom(x - 3)]) == ((3, INF),)
    assert refine(top, [Atom(-x * x + 4)]) == ((-2, 2),)
    assert refine(top, [Atom(x, True)]) == ((1, INF),)
    assert refine(top, [Atom(x, True)], integer=False) == ((0, INF),)
    assert refine(((0, 1),), [Atom(-x - 1)]) is None


def test_countdown_boxes():
    b = interval_boxes(corpus.load("countdown"))
    assert b["l2"] == ((1, INF),) and b["l_t"] == ((0, 0),)


def test_unreachable_location_is_false():
    ts = parse_ts("pre: x >= 0\nif x < 0 then l5: x = 1 fi")
    inv = interval_invariants(ts)
    assert not evaluate(inv["l5"], (Fraction(0),))


@pytest.mark.parametrize("name", sorted(corpus.program_paths()))
def test_interval_invariants_contain_every_reachable_state(name):
    base = corpus.load(name)
    for t in corpus.load_spec_templates():
        text, ts = t.bind(base)
        phi = parse_ltl(text, ts.variables)
        ps = build_product(ts, automaton_for(LNot(phi), ts))
        try:
            g = build_graph(ps, *corpus.DEFAULT_BOUNDS)
        except OracleInapplicable:
            continue
        strong = with_intervals(ps)
        for s in g.nodes:
            assert evaluate(strong.ts.invariant(s.loc), s.vals), (t.name, s)


def _counter_product():
    ts = parse_ts("pre: x == 0\nwhile true do x = x + 1 done")
    return build_product(ts, from_ltl_text("true", ts.variables, ts.locations))


@pytest.mark.parametrize("coeffs", [(0, 1), (0, 0)])
def test_counter_invariant_satisfies_cosynthesis_entailments(coeffs):
    # i(x) = x everywhere, and the degenerate i = 0
    ps = _counter_product()
    it, cs, _ = cosynthesize_invariants(ps, 1)
    model = {n: Fraction(c) for loc in it.names for ns in it.names[loc] for n, c in zip(ns, coeffs)}
    for e in cs.entailments:
        for v in range(-10, 11):
            assert e.holds_at((Fraction(v, 3),), model), e.origin


def test_counter_invariant_rejects_a_non_inductive_candidate():
    ps = _counter_product()
    it, cs, _ = cosynthesize_invariants(ps, 1)
    model = {n: Fraction(c) for loc in it.names for ns in it.names[loc] for n, c in zip(ns, (-1, 1))}
    assert not all(e.holds_at((Fraction(0),), model) for e in cs.entailments)
