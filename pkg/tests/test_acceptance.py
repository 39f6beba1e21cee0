"""Acceptance criteria C1-C8, one ACCEPTANCE line each (see conftest)."""
import os
import random
import time
from dataclasses import replace
from fractions import Fraction
from itertools import product as iproduct
from math import lcm

import pytest

from buchi_rank import corpus
from buchi_rank.automata import alphabet, ltl_to_nbw
from buchi_rank.cli import run_corpus
from buchi_rank.ir import Atom, State
from buchi_rank.ltl import (
    AtLoc, LAnd, LAP, LF, LFalse, LG, LNot, LOr, LR, LTrue, LU, LX, Prop, depth, eval_trace, parse_ltl,
    to_nnf,
)
from buchi_rank.oracle import OracleInapplicable, build_ebrf_dist, build_graph, build_ubrf_d, decide_eb, decide_ub
from buchi_rank.pipeline import RunConfig, automaton_for, run
from buchi_rank.poly import Polynomial
from buchi_rank.positivstellensatz import QpSystem, SosConfig, encode, putinar_encode
from buchi_rank.product import build_product
from buchi_rank.solver import solve_qp
from buchi_rank.symbolic import QExpr, SymPoly
from buchi_rank.witness import (
    ConcreteWitness, build_templates, check_witness, coeff_name, gen_ebrf_constraints,
    init_valuation_constraint, pin_constraints,
)
from conftest import needs_z3, record

README = os.path.join(os.path.dirname(__file__), os.pardir, "README.md")


# ---------------------------------------------------------------------------
# C1: golden entailments and equalities at (l2, q0)

def _c(loc, j):
    return QExpr.var(coeff_name("c", loc, (j,)))


def _lam(i, j):
    return QExpr.var(f"lam[e][{i}][{j}]")


def _sym(*coeffs):
    return SymPoly(1, {(k,): c for k, c in enumerate(coeffs) if not c.is_zero()})


GOLDEN_SOLUTION = {
    "l_init.q0": (3, 1, 0), "l1.q0": (2, 1, 0), "l2.q0": (1, 1, 0),
    "l1.q1": (0, 0, 0), "l3.q0": (-1, 0, 0), "l_t.q0": (-1, 0, 0),
}


@needs_z3
def test_c1_golden_constraints(figure2):
    t0 = time.monotonic()
    ps = figure2
    tp = build_templates(ps, 2)
    cs = gen_ebrf_constraints(ps, tp)
    at_l2 = [e for e in cs.entailments if e.origin == "ebrf l2.q0"]
    a, b = "l2.q0", "l1.q1"
    x = _sym(QExpr.const(0), QExpr.const(1))
    f2 = _sym(_c(a, 0), _c(a, 1), _c(a, 2))
    succ = _sym(_c(b, 0) + _c(b, 1) + _c(b, 2), QExpr(), _c(b, 1) + 2 * _c(b, 2), QExpr(), _c(b, 2))
    ok = len(at_l2) == 2
    ok &= all([x_.poly for x_ in e.lhs] == [x, f2] for e in at_l2)
    ok &= at_l2[0].rhs.poly == succ                                   # (i)
    ok &= at_l2[1].rhs.poly == f2 - succ - 1                          # (ii)

    qp = QpSystem()
    eqs = putinar_encode(at_l2[0], qp, "e", SosConfig("diagonal", 1))
    want = [                                                          # 1, x, x^2, x^3, x^4
        _lam(0, 0) + _lam(2, 0) * _c(a, 0) - (_c(b, 0) + _c(b, 1) + _c(b, 2)),
        _lam(1, 0) + _lam(2, 0) * _c(a, 1),
        _lam(0, 1) + _lam(2, 0) * _c(a, 2) + _lam(2, 1) * _c(a, 0) - (_c(b, 1) + 2 * _c(b, 2)),
        _lam(1, 1) + _lam(2, 1) * _c(a, 1),
        _lam(2, 1) * _c(a, 2) - _c(b, 2),
    ]
    ok &= eqs == want

    # the full system plus the reference solution must be satisfiable
    ic = init_valuation_constraint(ps, tp)
    cs.ground += ic.ground + pin_constraints(tp)
    cs.extra_vars += ic.extra_vars
    full = encode(cs, SosConfig("diagonal", 1))
    for loc, coeffs in GOLDEN_SOLUTION.items():
        for j, v in enumerate(coeffs):
            name = coeff_name("c", loc, (j,))
            if name in full.sorts:
                full.eq(QExpr.var(name) - v)
    for v in ic.notes["init_vars"]:
        full.eq(QExpr.var(v))
    res, model = solve_qp(full, timeout=60)
    ok &= res.status == "sat" and model is not None and full.holds(model)
    secs = time.monotonic() - t0
    ok &= secs < 10
    record("C1", ok, f"2 entailments, 5 equalities verbatim, reference solution {res.status}, {secs:.2f}s")
    assert ok


# ---------------------------------------------------------------------------
# C2: the reference EBRF on the product, and a perturbation of it

def _figure2_witness(otherwise, l1_const=Fraction(2)):
    x, one = Polynomial.var(1, 0), Polynomial.const(1, 1)
    fs = {"l_init.q0": x + 3, "l1.q0": x + l1_const, "l2.q0": x + 1, "l1.q1": one * 0,
          "l3.q0": one * otherwise, "l_t.q0": one * otherwise}
    return ConcreteWitness("EBRF", 1, ["x0"], fs, (Fraction(0),))


def test_c2_reference_witness(figure2):
    t0 = time.monotonic()
    dom = [State(l, (Fraction(v),)) for l in figure2.locations for v in range(0, 21)]
    good = check_witness(figure2, _figure2_witness(-1), dom)
    bad = check_witness(figure2, _figure2_witness(-1, Fraction(3, 2)), dom)
    # read literally ("0 otherwise") the l3 value cannot decrease to a
    # non-negative successor; the checker must reject that variant
    literal = check_witness(figure2, _figure2_witness(0), dom)
    secs = time.monotonic() - t0
    ok = good.ok and not bad.ok and bad.state.loc == "l1.q0" and not literal.ok \
        and literal.state.loc == "l3.q0" and secs < 1
    record("C2", ok, f"witness ok={good.ok}, perturbed ok={bad.ok} at {bad.state}, "
                     f"0-at-l3 variant rejected at {literal.state}, {secs:.3f}s")
    assert ok


# ---------------------------------------------------------------------------
# C3: end to end on the same instance

@needs_z3
def test_c3_end_to_end(figure1):
    t0 = time.monotonic()
    rep = run(RunConfig(mode="exists", degree_max=2, timeout=60), figure1, "G F at(l2)")
    secs = time.monotonic() - t0
    ps = build_product(figure1, automaton_for(LG(LF(LAP(AtLoc("l2")))), figure1))
    ok = rep.verdict == "Proved" and rep.check.ok and rep.witness.degree <= 2 and secs < 60
    ok &= check_witness(ps, rep.witness, box=(0, 20)).ok
    record("C3", ok, f"{rep.verdict} at degree {rep.witness and rep.witness.degree}, {secs:.2f}s")
    assert ok


# ---------------------------------------------------------------------------
# C4 / C7: corpus against the oracle, and the sat models against the entailments

def _corpus_config(bounds):
    return RunConfig(mode="verify", degree_max=2, sos=("diagonal",), timeout=2.0,
                     oracle_bounds=bounds, intervals=True)


@pytest.fixture(scope="module")
def corpus_run():
    t0 = time.monotonic()
    rows = run_corpus(_corpus_config, out=print)
    return rows, time.monotonic() - t0


@needs_z3
def test_c4_oracle_consistency(corpus_run):
    rows, secs = corpus_run
    programs = {r["program"] for r in rows}
    shapes = {r["spec"] for r in rows}
    bad = [r for r in rows if r["agrees"] is False]
    decided = [r for r in rows if r["verdict"] != "Unknown"]
    unchecked = [r for r in decided if not r["oracle_applicable"]]
    ok = len(programs) >= 20 and len(shapes) == 4 and not bad and not unchecked and secs < 600
    counts = {v: sum(r["verdict"] == v for r in rows) for v in ("Proved", "Refuted", "Unknown")}
    record("C4", ok, f"{len(programs)} programs x {len(shapes)} shapes, {len(bad)} contradictions, "
                     f"{counts}, {secs:.0f}s")
    assert ok


def _int_poly(p: Polynomial):
    """Integer coefficients with the same sign pattern, plus the total degree."""
    den = lcm(*(c.denominator for c in p.terms.values())) if p.terms else 1
    return [(m, int(c * den)) for m, c in p.items()], p.degree()


def _sign_ok(ip, nums, q, strict=False):
    """Sign test for ``p(nums / q) >= 0`` via the homogenisation ``q^D p(nums / q)``."""
    terms, deg = ip
    total = 0
    for m, c in terms:
        t = c * q ** (deg - sum(m))
        for a, e in zip(nums, m):
            if e:
                t *= a ** e
        total += t
    return total > 0 if strict else total >= 0


def _points(rng, n, k):
    for _ in range(k):
        q = rng.choice((1, 1, 2, 3, 7, 1000))
        yield [rng.randint(-20 * q, 20 * q) for _ in range(n)], q


@needs_z3
def test_c7_encoder_soundness(corpus_run):
    rows, _ = corpus_run
    rng = random.Random(7)
    instances = violations = checks = 0
    for r in rows:
        for attempt, cs, model in r["report"].evidence:
            instances += 1
            ents = []
            for e in cs.entailments:
                lhs = [_int_poly(a.poly.instantiate(model)) for a in e.lhs]
                ents.append((lhs, _int_poly(e.rhs.poly.instantiate(model))))
            n = cs.entailments[0].rhs.poly.nvars if cs.entailments else 0
            for nums, q in _points(rng, n, 10 ** 4):
                for lhs, rhs in ents:
                    if all(_sign_ok(a, nums, q) for a in lhs):
                        checks += 1
                        if not _sign_ok(rhs, nums, q):
                            violations += 1
    ok = instances > 0 and violations == 0
    record("C7", ok, f"{instances} sat models, 10^4 points each, {checks} premise-satisfying checks, "
                     f"{violations} violations")
    assert ok


# ---------------------------------------------------------------------------
# C5: tabular witnesses from the oracle constructions

def test_c5_completeness_constructions():
    t0 = time.monotonic()
    eb = ub = failures = 0
    for name in corpus.program_paths():
        base = corpus.load(name)
        for t in corpus.load_spec_templates():
            text, ts = t.bind(base)
            phi = parse_ltl(text, ts.variables)
            for f in (phi, LNot(phi)):
                aut = automaton_for(f, ts)
                ps = build_product(ts, aut)
                try:
                    g = build_graph(ps, *corpus.DEFAULT_BOUNDS)
                except OracleInapplicable:
                    continue
                if decide_eb(g):
                    eb += 1
                    if not check_witness(ps, build_ebrf_dist(g)).ok:
                        failures += 1
                if aut.is_deterministic() and decide_ub(g):
                    ub += 1
                    if not check_witness(ps, build_ubrf_d(g)).ok:
                        failures += 1
    secs = time.monotonic() - t0
    ok = eb > 0 and ub > 0 and failures == 0 and secs < 120
    record("C5", ok, f"{eb} EB and {ub} UB oracle-positive products, {failures} failing witnesses, {secs:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# C6: translation against the trace semantics on every short lasso

X0 = Polynomial.var(1, 0)
C6_APS = [AtLoc("a"), AtLoc("b"), Prop(Atom(X0))]


def _random_formula(rng, d):
    if d == 0 or rng.random() < 0.25:
        return rng.choice([LAP(ap) for ap in C6_APS] + [LTrue(), LFalse()])
    op = rng.choice("!XFG&|UR")
    if op in "!XFG":
        return {"!": LNot, "X": LX, "F": LF, "G": LG}[op](_random_formula(rng, d - 1))
    l, r = _random_formula(rng, d - 1), _random_formula(rng, d - 1)
    return {"&": LAnd, "|": LOr, "U": LU, "R": LR}[op](l, r)


def _closure(f):
    out = []

    def go(g):
        for k in ("arg", "left", "right"):
            if hasattr(g, k):
                go(getattr(g, k))
        if g not in out:
            out.append(g)
    go(f)
    return out


def _step(sub, letter, nxt, cur):
    """Truth of each subformula at a position, given the letter and the next position."""
    for g in sub:
        if isinstance(g, LTrue):
            v = True
        elif isinstance(g, LFalse):
            v = False
        elif isinstance(g, LAP):
            v = letter.holds(g.ap)
        elif isinstance(g, LNot):
            v = not cur[g.arg]
        elif isinstance(g, LAnd):
            v = cur[g.left] and cur[g.right]
        elif isinstance(g, LOr):
            v = cur[g.left] or cur[g.right]
        elif isinstance(g, LX):
            v = nxt[g.arg]
        elif isinstance(g, LF):
            v = cur[g.arg] or nxt[g]
        elif isinstance(g, LG):
            v = cur[g.arg] and nxt[g]
        elif isinstance(g, LU):
            v = cur[g.right] or (cur[g.left] and nxt[g])
        else:
            v = cur[g.right] and (cur[g.left] or nxt[g])
        cur[g] = v
    return cur


def _pre(aut, states, letter):
    return frozenset(q for q in aut.states if aut.succ(q, letter) & states)


def test_c6_translation_equivalence():
    t0 = time.monotonic()
    rng = random.Random(2024)
    letters = alphabet(C6_APS)
    cycles = [list(c) for k in range(1, 6) for c in iproduct(letters, repeat=k)]
    formulas, lassos, bad = [], 0, 0
    while len(formulas) < 50:
        f = to_nnf(_random_formula(rng, 4))
        if depth(f) <= 4 and f not in formulas:
            formulas.append(f)
    for f in formulas:
        aut = ltl_to_nbw(f, C6_APS)
        sub = _closure(f)
        for cycle in cycles:
            # exact truth vector and accepting start states at the loop point
            truth = {g: eval_trace(g, [], cycle) for g in sub}
            acc = frozenset(q for q in aut.states if replace(aut, init=q).accepts_lasso([], cycle))
            frontier = {(tuple(truth[g] for g in sub), acc)}
            for k in range(6):
                for vec, states in frontier:
                    lassos += 1
                    if vec[-1] != (aut.init in states):
                        bad += 1
                if k == 5:
                    break
                nxt_frontier = set()
                for vec, states in frontier:
                    nxt = dict(zip(sub, vec))
                    for a in letters:
                        cur = _step(sub, a, nxt, {})
                        nxt_frontier.add((tuple(cur[g] for g in sub), _pre(aut, states, a)))
                frontier = nxt_frontier
    # spot-check the backward evaluation against the evaluator on explicit stems
    for f in formulas[:10]:
        for _ in range(50):
            stem = [rng.choice(letters) for _ in range(rng.randint(0, 5))]
            cycle = rng.choice(cycles)
            assert ltl_to_nbw(f, C6_APS).accepts_lasso(stem, cycle) == eval_trace(f, stem, cycle)
    secs = time.monotonic() - t0
    ok = bad == 0 and secs < 300
    record("C6", ok, f"50 formulas x all lassos (stem <= 5, cycle <= 5, {len(letters)} letters): "
                     f"{lassos} distinct (truth, run) classes, {bad} discrepancies, {secs:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# C8

def test_c8_scale_statement():
    with open(README) as fh:
        text = fh.read()
    ok = "not reproducible" in text.lower()
    record("C8", ok, "large-benchmark counts and cross-tool timings are not reproduced; "
                     "C4-C7 stand in for them (README)")
    assert ok
