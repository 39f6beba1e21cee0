from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from buchi_rank.ir import TRUE
from buchi_rank.poly import Polynomial
from buchi_rank.positivstellensatz import EncodingDegreeError, QpSystem, SosConfig, encode, putinar_encode
from buchi_rank.symbolic import DegreeError, QExpr, SymAtom, SymPoly, symbolic_multiply
from buchi_rank.witness import ConstraintSet, Entailment

X = Polynomial.var(1, 0)


def _atom(p):
    return SymAtom(SymPoly.from_poly(p))


def test_trivial_premise_gives_plain_sos():
    qp = QpSystem()
    eqs = putinar_encode(Entailment((), _atom(X * X + 1)), qp, "e", SosConfig("diagonal", 1))
    # lam0 = 1 and lam1 = 1
    assert len(eqs) == 2
    assert qp.holds({"lam[e][0][0]": 1, "lam[e][0][1]": 1})
    assert not qp.holds({"lam[e][0][0]": 1, "lam[e][0][1]": 0})


def test_true_entailment_of_zero():
    qp = QpSystem()
    eqs = putinar_encode(Entailment((), _atom(Polynomial.const(1, 0))), qp, "e", SosConfig("diagonal", 0))
    assert eqs == [QExpr.var("lam[e][0][0]")]
    assert qp.holds({})


def test_symbolic_product_term_count():
    a = SymPoly.template(1, [(0,), (1,)], ["a0", "a1"])
    b = SymPoly.template(1, [(0,), (1,), (2,)], ["b0", "b1", "b2"])
    prod = symbolic_multiply(a, b)
    assert sum(len(prod.coeff(m).terms) for m in prod.monomials()) == 6
    assert prod.coeff_degree() == 2


def test_degree_three_unknown_products_rejected():
    a = SymPoly.template(1, [(0,)], ["a"])
    with pytest.raises(DegreeError):
        symbolic_multiply(symbolic_multiply(a, a), a)


def test_multiplier_degree_too_small():
    with pytest.raises(EncodingDegreeError):
        putinar_encode(Entailment((), _atom(X ** 4)), QpSystem(), "e", SosConfig("diagonal", 1))


@pytest.mark.parametrize("mode", ["diagonal", "squares"])
def test_encoded_systems_are_at_most_quadratic(figure2, mode):
    from buchi_rank.witness import build_templates, gen_ebrf_constraints
    cs = gen_ebrf_constraints(figure2, build_templates(figure2, 2))
    qp = encode(cs, SosConfig(mode, 1))
    assert qp.max_degree() <= 2


def test_squares_mode_ties_auxiliaries():
    # the premise carries unknowns, so its multiplier gets tied auxiliaries
    prem = SymAtom(SymPoly.template(1, [(0,), (1,)], ["c0", "c1"]))
    cs = ConstraintSet(entailments=[Entailment((prem,), _atom(X))])
    qp = encode(cs, SosConfig("squares", 0, squares=1))
    assert "sos[e0][1]s[0]" in qp.sorts and "sos[e0][0]s[0]" not in qp.sorts
    # c = x with sigma_0 = 0 and sigma_1 = 1 * 1
    model = {"c0": 0, "c1": 1, "sos[e0][0]h[0][0]": 0, "sos[e0][1]h[0][0]": 1, "sos[e0][1]s[0]": 1}
    assert qp.holds(model)
    model["sos[e0][1]s[0]"] = 2
    assert not qp.holds(model)


coeff = st.integers(-3, 3)


@given(st.tuples(coeff, coeff, coeff), st.tuples(coeff, coeff))
@settings(max_examples=100, deadline=None)
def test_diagonal_certificate_implies_entailment(c, g):
    """Any model of the encoding is a certificate: the conclusion holds where premises do."""
    from itertools import product as iproduct
    rhs = c[0] + c[1] * X + c[2] * X * X
    prem = g[0] + g[1] * X
    qp = QpSystem()
    putinar_encode(Entailment((_atom(prem),), _atom(rhs)), qp, "e", SosConfig("diagonal", 1))
    vals = [Fraction(k, 2) for k in range(0, 5)]
    for lam in iproduct(vals, repeat=len(qp.sorts)):
        model = dict(zip(sorted(qp.sorts), lam))
        if qp.holds(model):
            for v in range(-6, 7):
                if prem.evaluate([v]) >= 0:
                    assert rhs.evaluate([v]) >= 0
            break


def test_ground_constraints_pass_through():
    cs = ConstraintSet(ground=[TRUE])
    assert encode(cs).constraints == [TRUE]
