import math

import pytest
from hypothesis import given, strategies as st

from chancesos import BasisIndexer, Polynomial, basis_size, monomial_basis


def test_monomial_basis_univariate():
    assert monomial_basis(1, 2) == [(0,), (1,), (2,)]


@pytest.mark.parametrize("nvars,d,count", [(2, 3, 10), (3, 4, 35), (1, 0, 1), (4, 2, 15)])
def test_monomial_basis_sizes(nvars, d, count):
    basis = monomial_basis(nvars, d)
    assert len(basis) == count == basis_size(nvars, d)
    assert len(set(basis)) == count


def test_monomial_basis_graded_lex_order():
    basis = monomial_basis(2, 2)
    assert basis == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    degrees = [sum(m) for m in basis]
    assert degrees == sorted(degrees)


def test_basis_indexer_roundtrip():
    idx = BasisIndexer(3, 5)
    for i in range(idx.size):
        assert idx.index(idx.unindex(i)) == i
    assert idx.size == math.comb(3 + 5, 3)


def test_indexer_rejects_out_of_basis():
    idx = BasisIndexer(2, 2)
    with pytest.raises(KeyError):
        idx.index((3, 0))


def test_mul_expand():
    x = Polynomial.variable(1, 0)
    one = Polynomial.constant(1, 1.0)
    p = (one - x * x) * (one + x)
    assert p.terms == {(0,): 1.0, (1,): 1.0, (2,): -1.0, (3,): -1.0}


def test_mul_by_zero_annihilates():
    p = Polynomial(2, {(1, 0): 2.0, (0, 2): -1.0})
    assert (p * Polynomial.zero(2)).is_zero()


def test_binomial_square():
    x1, x2 = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    s = x1 + x2
    assert (s * s).terms == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}


def test_diff_basic():
    x = Polynomial.variable(1, 0)
    assert (x * x * x).diff(0).terms == {(2,): 3.0}
    assert Polynomial(2, {(2, 0): 1.0}).diff(1).is_zero()
    # boundary-multiplier base case: d/dx (1 - x^2) = -2x
    h = Polynomial.constant(1, 1.0) - x * x
    assert h.diff(0).terms == {(1,): -2.0}


def test_diff_out_of_range():
    with pytest.raises(ValueError):
        Polynomial.variable(2, 0).diff(2)


def test_eval_examples():
    one_minus_x2 = Polynomial(1, {(0,): 1.0, (2,): -1.0})
    assert one_minus_x2((1.0,)) == 0.0
    ellipse = Polynomial(2, {(0, 0): 1.0, (2, 0): -1 / 0.81, (0, 2): -1 / 1.44})
    assert ellipse((0.0, 0.0)) == pytest.approx(1.0)
    sq = Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0})
    assert sq((3.0, 4.0)) == pytest.approx(25.0)


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        Polynomial.variable(2, 0)((1.0,))


def test_mul_dimension_mismatch():
    with pytest.raises(ValueError):
        Polynomial.variable(2, 0) * Polynomial.variable(1, 0)


def test_zero_canonical():
    x = Polynomial.variable(1, 0)
    assert (x - x).terms == {}
    assert (x - x) == Polynomial.zero(1)
    assert (x - x).degree() == 0


def test_substitute_affine_inverse_pair():
    p = Polynomial(2, {(2, 1): 1.5, (0, 3): -2.0, (1, 0): 0.25})
    shifted = p.substitute_affine((0.3, -0.7), (0.5, 2.0))
    back = shifted.substitute_affine((-0.6, 0.35), (2.0, 0.5))
    for a, c in p.terms.items():
        assert back.coefficient(a) == pytest.approx(c, rel=1e-12)
    for a in back.terms:
        assert p.coefficient(a) == pytest.approx(back.coefficient(a), rel=1e-12, abs=1e-12)


def test_extend_reorders_variables():
    p = Polynomial(2, {(1, 2): 3.0})
    q = p.extend(3, (2, 0))
    assert q.terms == {(2, 0, 1): 3.0}


# property-based checks ------------------------------------------------------

coef = st.floats(min_value=-4, max_value=4, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, nvars=2, max_deg=3, max_terms=5):
    n = draw(st.integers(1, max_terms))
    terms = {}
    for _ in range(n):
        a = tuple(draw(st.integers(0, max_deg)) for _ in range(nvars))
        terms[a] = draw(coef)
    return Polynomial(nvars, terms)


@given(polys(), polys(), polys())
def test_distributive_law(p, q, r):
    lhs = (p + q) * r
    rhs = p * r + q * r
    diff = lhs - rhs
    assert all(abs(c) <= 1e-9 * max(1.0, _max_coef(lhs), _max_coef(rhs))
               for c in diff.terms.values())


@given(polys(), polys(),
       st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_eval_is_ring_homomorphism(p, q, point):
    prod = p * q
    direct = prod(point)
    split = p(point) * q(point)
    assert direct == pytest.approx(split, rel=1e-12, abs=1e-9)


@given(polys(), polys())
def test_degree_of_product(p, q):
    if p.is_zero() or q.is_zero():
        return
    lead_p = {a for a in p.terms if sum(a) == p.degree()}
    lead_q = {a for a in q.terms if sum(a) == q.degree()}
    prod = p * q
    # leading coefficient can cancel only by exact float cancellation
    lead_coef = sum(p.terms[a] * q.terms[b] for a in lead_p for b in lead_q
                    for _ in [0] if tuple(x + y for x, y in zip(a, b)))
    if any(abs(sum(p.terms[a] * q.terms[b]
                   for a in lead_p for b in lead_q
                   if tuple(x + y for x, y in zip(a, b)) == m)) > 1e-12
           for m in {tuple(x + y for x, y in zip(a, b)) for a in lead_p for b in lead_q}):
        assert prod.degree() == p.degree() + q.degree()


@given(polys(), polys(), st.integers(0, 1))
def test_product_rule_exact(p, q, var):
    lhs = (p * q).diff(var)
    rhs = p.diff(var) * q + p * q.diff(var)
    diff = lhs - rhs
    assert all(abs(c) <= 1e-9 * max(1.0, _max_coef(lhs) + _max_coef(rhs))
               for c in diff.terms.values())


def _max_coef(p):
    return max((abs(c) for c in p.terms.values()), default=0.0)


def test_immutability():
    p = Polynomial.variable(1, 0)
    with pytest.raises(AttributeError):
        p.nvars = 3
