import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from buchi_rank import corpus
from buchi_rank.ir import (
    Atom, Lit, Not, Or, State, TRUE, TransitionSystem, Transition, conj, dnf, evaluate,
    identity_update, is_tautology, nnf,
)
from buchi_rank.parser import ParseError, parse_pred, parse_program, parse_ts, pretty, program_to_ts
from buchi_rank.poly import Polynomial


def test_figure1_flattening(figure1):
    ts = figure1
    assert ts.locations == ["l_init", "l1", "l2", "l3", "l_t"]
    x = Polynomial.var(1, 0)
    ups = {(t.src, t.dst): t.update[0] for t in ts.transitions}
    assert ups[("l2", "l1")] == x * x + 1
    assert ups[("l3", "l1")] == x * x - 1
    exit_ = [t for t in ts.transitions if t.src == "l1" and t.dst == "l_t"]
    assert len(exit_) == 1
    assert evaluate(exit_[0].guard, [Fraction(-1)]) and not evaluate(exit_[0].guard, [Fraction(0)])


def test_skip_loop_is_a_single_self_loop():
    ts = parse_ts("while true do skip done")
    loops = [t for t in ts.transitions if t.src == "l1"]
    assert len(loops) == 1
    assert loops[0].dst == "l1" and loops[0].guard == TRUE


@pytest.mark.parametrize("name", sorted(corpus.program_paths(include_golden=True)))
def test_corpus_round_trips_through_pretty_printer(name):
    with open(corpus.program_paths(include_golden=True)[name]) as fh:
        src = fh.read()
    prog = parse_program(src)
    again = parse_program(pretty(prog))
    assert program_to_ts(prog) == program_to_ts(again)


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as exc:
        parse_ts("while x >= 0 do\n  x = x $ 1\ndone")
    assert "2" in str(exc.value)
    with pytest.raises(ParseError):
        parse_ts("x = *")


def test_variables_in_declaration_order():
    ts = parse_ts("pre: y >= 0\nwhile x >= 1 do x = x - y done")
    assert ts.variables == ["y", "x"]


def test_completion_is_idempotent_and_preserves_edges(figure1):
    again = figure1.complete_totality()
    assert again.transitions == figure1.transitions


def test_total_system_unchanged():
    x = Polynomial.var(1, 0)
    ts = TransitionSystem(["x"], ["a", "l_t"], "a", TRUE,
                          [Transition("a", "a", TRUE, (x + 1,)), Transition("l_t", "l_t", TRUE, (x,))], "l_t")
    assert ts.complete_totality().transitions == ts.transitions


def _grid(ts, lo=-8, hi=7):
    from itertools import product
    for loc in ts.locations:
        for vals in product(range(lo, hi + 1), repeat=ts.nvars):
            yield State(loc, tuple(Fraction(v) for v in vals))


def test_completed_corpus_has_no_dead_states():
    for name in corpus.program_paths(include_golden=True):
        ts = corpus.load(name)
        for s in _grid(ts, -4, 4):
            assert ts.successors(s), (name, s)


def test_successors_match_direct_guard_evaluation():
    rng = random.Random(1)
    for name in corpus.program_paths(include_golden=True):
        ts = corpus.load(name)
        for _ in range(10000 // 24):
            loc = rng.choice(ts.locations)
            vals = tuple(Fraction(rng.randint(-40, 40), rng.randint(1, 4)) for _ in ts.variables)
            got = ts.successors(State(loc, vals))
            want = []
            for t in ts.transitions:
                if t.src == loc and all(any(all(a.holds(vals) for a in c) for c in dnf(t.guard)) for _ in [0]):
                    want.append((t, State(t.dst, tuple(u.evaluate(vals) for u in t.update))))
            assert got == want


def test_terminal_state_steps_to_itself(figure1):
    s = State("l_t", (Fraction(3),))
    assert [s2 for _, s2 in figure1.successors(s)] == [s]


def test_eval_predicate_examples():
    names = ["x0"]
    assert evaluate(parse_pred("x0 >= 0", names), [Fraction(0)])
    assert evaluate(parse_pred("x0^2 - 1 >= 0 && !(x0 >= 0)", names), [Fraction(-2)])
    assert not evaluate(parse_pred("0 <= x && x <= 64", ["x"]), [Fraction(65)])


atoms = st.builds(lambda a, b, s: Atom(Polynomial(2, {(1, 0): a, (0, 1): b, (0, 0): 1}), s),
                  st.integers(-3, 3), st.integers(-3, 3), st.booleans())
preds = st.recursive(atoms.map(Lit),
                     lambda kids: st.one_of(st.lists(kids, min_size=1, max_size=3).map(lambda a: conj(*a)),
                                            st.lists(kids, min_size=1, max_size=3).map(lambda a: Or(tuple(a))),
                                            kids.map(Not)),
                     max_leaves=6)


@given(preds, st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=20, max_size=20))
@settings(max_examples=80, deadline=None)
def test_nnf_and_dnf_preserve_truth(p, vals):
    for v in vals:
        v = tuple(map(Fraction, v))
        truth = evaluate(p, v)
        assert evaluate(nnf(p), v) == truth
        assert any(all(a.holds(v) for a in c) for c in dnf(p)) == truth


def test_tautology_check():
    p = parse_pred("x >= 0 || x < 0", ["x"])
    assert is_tautology(p)
    assert not is_tautology(parse_pred("x >= 0", ["x"]))


def test_identity_update():
    assert identity_update(2)[1] == Polynomial.var(2, 1)
