import re

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab import qterm
from qlab.catalog import CATALOG_TERMS, RENORM_TERMS
from qlab.errors import SemanticsError, TermSyntaxError
from qlab.series import QSeries, invert, pochhammer_infinite

Q = sympy.Symbol("q")
ALL_TERMS = sorted(set(CATALOG_TERMS.values()) | set(RENORM_TERMS.values()))


def _poch(a, b, length):
    return sympy.Mul(*[1 - a * b**j for j in range(int(length))])


def sympy_term(text, n, q=Q):
    """Evaluate a summand string at integer ``n`` with sympy, independently of the parser."""
    s = re.sub(r"poch\(([^;]+);([^)]+)\)_\(([^)]+)\)", r"P(\1,\2,\3)", text)
    s = re.sub(r"poch\(([^;]+);([^)]+)\)_(\w+)", r"P(\1,\2,\3)", s)
    s = re.sub(r"(\d)([nq(])", r"\1*\2", s).replace("^", "**")
    return eval(s, {"P": _poch, "n": sympy.Integer(n), "q": q})


def sympy_coeffs(expr, order):
    """Laurent coefficients of ``expr`` in ``q`` below ``q^order``."""
    expr = sympy.cancel(sympy.together(expr))
    low = -60
    ser = sympy.series(expr * Q ** (-low), Q, 0, order - low).removeO()
    poly = sympy.Poly(sympy.expand(ser), Q)
    out = {}
    for (k,), c in poly.terms():
        e = k + low
        if e < order and c != 0:
            out[e] = sympy.Rational(c)
    return out


def as_dict(s):
    return {int(e): c for e, c in s.items()}


# ----------------------------------------------------------------------
# parsing and rendering


def test_parse_examples():
    d = qterm.parse("q^((n^2+n)/2) / poch(-q;q)_n")
    assert d.exp_poly == (1, 1, 0, 2)
    assert d.sign_mode == "plus"
    f = qterm.parse("q^(n^2) / poch(-q;q)_n^2")
    assert f.factors[0].power == -2 and f.factors[0].coef == -1


@pytest.mark.parametrize("text", ALL_TERMS)
def test_render_round_trip(text):
    d = qterm.parse(text)
    assert qterm.parse(qterm.render(d)) == d


@pytest.mark.parametrize(
    "text",
    ["q^(n^2 / poch(", "poch(q;q)_", "q^n /", "(-1)^n * * q", "poch(q q)_n", "q^n)"],
)
def test_syntax_errors_carry_offset(text):
    with pytest.raises(TermSyntaxError) as info:
        qterm.parse(text)
    assert info.value.offset is not None


def test_semantic_errors():
    with pytest.raises(SemanticsError):
        qterm.parse("q^n / (1 - q^(n-2))").validate()


# ----------------------------------------------------------------------
# expansion


def test_expand_f_term():
    s = qterm.expand(qterm.parse(CATALOG_TERMS["f"]), 2, 8)
    want = sympy_coeffs(Q**4 / ((1 + Q) ** 2 * (1 + Q**2) ** 2), 8)
    assert as_dict(s) == want
    assert [s[k] for k in (4, 5, 6)] == [1, -2, 1]


def test_expand_sigma_term():
    s = qterm.expand(qterm.parse(CATALOG_TERMS["sigma"]), 1, 10)
    assert s.coefficients(10) == [0, 1, -1, 1, -1, 1, -1, 1, -1, 1]


def test_expand_constant_at_zero():
    s = qterm.expand(qterm.parse("3 * poch(q;q)_n / poch(-q^2;q^2)_n"), 0, 10)
    assert s == QSeries.constant(3, 10)


@pytest.mark.parametrize("text", ALL_TERMS)
def test_expand_matches_sympy(text):
    for n in range(4):
        got = qterm.expand(qterm.parse(text), n, 12)
        assert as_dict(got) == sympy_coeffs(sympy_term(text, n), 12), (text, n)


# ----------------------------------------------------------------------
# q -> 1/q


def test_q_inverse_examples():
    f = qterm.q_inverse(qterm.parse(CATALOG_TERMS["f"]))
    assert f == qterm.parse("q^n / poch(-q;q)_n^2")
    s = qterm.q_inverse(qterm.parse(CATALOG_TERMS["sigma"]))
    assert s == qterm.parse("1 / poch(-q;q)_n")
    f1 = qterm.q_inverse(qterm.parse(CATALOG_TERMS["F1"]))
    assert f1 == qterm.parse("1 / poch(q;q)_n")


@pytest.mark.parametrize("text", ALL_TERMS)
def test_q_inverse_is_an_involution(text):
    d = qterm.parse(text)
    twice = qterm.q_inverse(qterm.q_inverse(d))
    assert twice == d
    for n in range(11):
        assert qterm.expand(twice, n, 60) == qterm.expand(d, n, 60)


@pytest.mark.parametrize("text", ALL_TERMS)
def test_q_inverse_against_substitution(text):
    inv = qterm.q_inverse(qterm.parse(text))
    for n in range(4):
        want = sympy_coeffs(sympy_term(text, n, 1 / Q), 10)
        assert as_dict(qterm.expand(inv, n, 10)) == want, (text, n)


@settings(max_examples=40)
@given(
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=-2, max_value=2),
    st.sampled_from(["q;q", "-q;q", "q;q^2", "-q^2;q^2", "q^2;q^2"]),
    st.integers(min_value=-2, max_value=2).filter(bool),
    st.booleans(),
)
def test_q_inverse_random_terms(a, b, base, power, alt):
    op = "*" if power > 0 else "/"
    text = f"{'(-1)^n * ' if alt else ''}q^({a}*n^2 + {b}*n) {op} poch({base})_n^{abs(power)}"
    d = qterm.parse(text)
    assert qterm.q_inverse(qterm.q_inverse(d)) == d
    inv = qterm.q_inverse(d)
    for n in range(3):
        want = sympy_coeffs(sympy_term(text, n, 1 / Q), 8)
        assert as_dict(qterm.expand(inv, n, 8)) == want


# ----------------------------------------------------------------------
# limits


def test_limit_examples():
    f = qterm.q_inverse(qterm.parse(CATALOG_TERMS["f"]))
    assert qterm.limit_at_infinity(f, 30) == QSeries.zero(30)
    s = qterm.q_inverse(qterm.parse(CATALOG_TERMS["sigma"]))
    assert qterm.limit_at_infinity(s, 30) == invert(pochhammer_infinite(-1, 1, 1, 30))
    m1 = qterm.q_inverse(qterm.parse(RENORM_TERMS["M1"]))
    want = pochhammer_infinite(1, 1, 1, 30) * invert(pochhammer_infinite(-1, 1, 1, 30))
    assert qterm.limit_at_infinity(m1, 30) == want


def test_no_limit():
    k = qterm.q_inverse(qterm.parse(RENORM_TERMS["kontsevich"]))
    assert qterm.limit_at_infinity(k, 10) is qterm.NO_LIMIT
    assert qterm.limit_at_infinity(qterm.parse("q^(-n)"), 10) is qterm.NO_LIMIT
    assert not qterm.NO_LIMIT


def test_limit_of_growing_valuation_is_zero():
    assert qterm.limit_at_infinity(qterm.parse("(-1)^n * q^n"), 10) == QSeries.zero(10)
