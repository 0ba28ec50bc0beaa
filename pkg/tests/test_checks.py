from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.bivariate import BiSeries, bi_mul, bi_substitute_xq
from qlab.checks import CHECKS, andrews_polynomials, crank, crank_counts, partitions, q_binomial, zagier_sides
from qlab.harness import registry, verify
from qlab.series import QSeries, mul

x, q = sympy.symbols("x q")


def bi_from_sympy(expr, x_order, order):
    """Coefficients of ``expr`` as a power series in ``x`` then ``q``."""
    ser = sympy.series(expr, x, 0, x_order).removeO()
    coeffs = []
    for j in range(x_order):
        cj = sympy.series(sympy.cancel(ser.coeff(x, j)), q, 0, order).removeO()
        poly = sympy.Poly(cj, q)
        coeffs.append(QSeries([int(poly.coeff_monomial(q**k)) for k in range(order)], trunc=order))
    return BiSeries(coeffs, x_order, order)


def poch(a, n):
    out = sympy.Integer(1)
    for j in range(n):
        out *= 1 - a * q**j
    return out


# ----------------------------------------------------------------------
# registered checks


CHECK_IDS = sorted(i for i, e in registry().entries.items() if e.check is not None)


def test_every_check_is_registered():
    used = {registry().get(i).check for i in CHECK_IDS}
    assert used == set(CHECKS)


@pytest.mark.parametrize("ident", CHECK_IDS)
def test_checks_hold(ident):
    r = verify(ident, 60)
    assert r.ok, (r.status, r.message)


# ----------------------------------------------------------------------
# two-variable series


def test_bi_basics():
    one = BiSeries.constant(1, 4, 10)
    a = BiSeries([QSeries([1, 2]), QSeries([0, 0, 3])], 4, 10)
    assert bi_mul(one, a) == a
    xq = bi_substitute_xq(BiSeries.x_power(1, 4, 10), 1)
    assert xq == BiSeries.x_power(1, 4, 10, QSeries.from_terms({1: 1}))
    with pytest.raises(ValueError):
        bi_substitute_xq(a, 0)
    with pytest.raises(ValueError):
        bi_mul(a, BiSeries.constant(1, 5, 10))


small = st.lists(st.lists(st.integers(-3, 3), max_size=6), min_size=1, max_size=4)


def make(rows):
    return BiSeries([QSeries(r) for r in rows], 4, 6)


@settings(max_examples=60)
@given(small, small, st.integers(1, 3))
def test_bi_mul_specializes(a, b, e):
    a, b = make(a), make(b)
    assert bi_mul(a, b) == bi_mul(b, a)
    lhs = bi_mul(a, b).specialize(1, e)
    rhs = mul(a.specialize(1, e), b.specialize(1, e))
    assert lhs == rhs


@settings(max_examples=40)
@given(small)
def test_bi_invert(a):
    a = make(a)
    if a.coeffs[0].is_zero or a.coeffs[0].valuation != 0:
        return
    assert bi_mul(a, a.invert()) == BiSeries.constant(1, 4, 6)


def test_andrews_polynomials_against_sympy():
    x_order, order = 6, 12
    expr = sum(x ** (2 * n) * q ** (n * n) / poch(x * q, n) ** 2 for n in range(3)) / (1 - x)
    assert andrews_polynomials(x_order, order) == bi_from_sympy(expr, x_order, order)


def test_zagier_lhs_against_sympy():
    x_order, order = 5, 10
    expr = sum(poch(x, n + 1) * x**n for n in range(x_order))
    lhs, _ = zagier_sides(x_order, order)
    assert lhs == bi_from_sympy(expr, x_order, order)


def test_q_binomial_against_sympy():
    for a in range(6):
        for b in range(a + 1):
            expr = sympy.cancel(poch(q, a) / (poch(q, b) * poch(q, a - b)))
            poly = sympy.Poly(expr, q)
            want = [int(poly.coeff_monomial(q**k)) for k in range(20)]
            assert [q_binomial(a, b, 20)[k] for k in range(20)] == want


# ----------------------------------------------------------------------
# crank by enumeration


def test_partitions_count():
    assert [sum(1 for _ in partitions(n)) for n in range(10)] == [1, 1, 2, 3, 5, 7, 11, 15, 22, 30]


def test_crank_examples():
    assert crank((4,)) == 4
    assert crank((2, 1, 1)) == -2
    assert crank((3, 1)) == 0
    assert crank_counts(1) == {-1: 1, 0: -1, 1: 1}
    counts = crank_counts(4)
    assert counts == {4: 1, 0: 1, 2: 1, -2: 1, -4: 1}
    assert Fraction(sum(counts.values())) == 5
