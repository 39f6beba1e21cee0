from fractions import Fraction
from math import comb

from hypothesis import given, settings, strategies as st

from buchi_rank.poly import Polynomial, grlex_key, monomials_upto

NV = 2
coef = st.fractions(min_value=-5, max_value=5, max_denominator=4)
mono = st.tuples(st.integers(0, 2), st.integers(0, 2))
polys = st.dictionaries(mono, coef, max_size=5).map(lambda t: Polynomial(NV, t))
points = st.tuples(coef, coef)


@given(polys, polys, polys)
@settings(max_examples=60, deadline=None)
def test_distributive_and_canonical(p, q, r):
    assert (p + q) * r == p * r + q * r
    assert p + q == q + p
    assert (p - p).is_zero()


@given(polys, polys, points)
@settings(max_examples=60, deadline=None)
def test_evaluation_is_a_ring_homomorphism(p, q, e):
    assert (p * q).evaluate(e) == p.evaluate(e) * q.evaluate(e)
    assert (p + q).evaluate(e) == p.evaluate(e) + q.evaluate(e)


@given(polys)
def test_no_zero_coefficients_stored(p):
    assert all(c != 0 for c in p.terms.values())


def test_basis_size_is_binomial():
    for n in range(1, 5):
        for d in range(0, 5):
            assert len(monomials_upto(n, d)) == comb(n + d, d)


def test_grlex_order_is_fixed():
    basis = monomials_upto(2, 2)
    assert basis == sorted(basis, key=grlex_key)
    assert basis[0] == (0, 0)
    assert basis[1:3] == [(1, 0), (0, 1)]


def test_compose_matches_substitution():
    x = Polynomial.var(1, 0)
    f = x * x + 3
    g = f.compose([x * x + 1])
    for v in range(-3, 4):
        assert g.evaluate([v]) == (v * v + 1) ** 2 + 3


def test_primitive_scaling():
    p = Polynomial(1, {(1,): Fraction(2, 3), (0,): Fraction(-4, 3)})
    k, q = p.primitive()
    assert k == Fraction(2, 3)
    assert q == Polynomial(1, {(1,): 1, (0,): -2})
