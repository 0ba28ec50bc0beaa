import pytest

from qlab import qterm
from qlab.catalog import RENORM_TERMS
from qlab.errors import NoLimitError, UnknownFamily, UnregisteredDecomposition
from qlab.expr import evaluate
from qlab.renorm import (
    chapman_lhs,
    chapman_rhs,
    decompositions,
    renormalize,
    sot_families,
    tail_sum,
    verify_sot_family,
)
from qlab.series import QSeries, first_mismatch, monomial


def prefix(s, n):
    return [s[k] for k in range(n)]


def naive_tail(text, order, terms):
    """``sum_{n<terms} (H_n(1/q) - H_terms(1/q))`` from the q-inverted summand, term by term."""
    inv = qterm.q_inverse(qterm.parse(text))
    last = qterm.expand(inv, terms, order)
    total = QSeries.zero(order)
    for n in range(terms):
        total = total + qterm.expand(inv, n, order) - last
    return total


# ----------------------------------------------------------------------
# tails


def test_f_tail_printed_coefficients():
    t = tail_sum(RENORM_TERMS["f"], 30)
    assert prefix(t, 8) == [1, 1, -1, 2, -4, 5, -6, 7]
    assert t[29] == 392


def test_f_tail_by_direct_summation():
    assert first_mismatch(tail_sum(RENORM_TERMS["f"], 40), naive_tail(RENORM_TERMS["f"], 40, 60)) is None


def test_L6_tail_is_q_times_printed_series():
    printed = [0, 2, 5, 2, 2, -5, -1, -6, -2, 7, -4, 7]
    t = tail_sum(RENORM_TERMS["L6"], 13)
    # L6_n(1/q) = -q (q)_n^2 / (q;q^2)_(n+1)
    assert prefix(t, 13) == [0] + [-c for c in printed]
    direct = evaluate("tails(n=0: poch(q;q)_n^2/poch(q;q^2)_(n+1))", 12)
    assert prefix(direct, 12) == printed


def test_P1_tail_vanishes():
    assert tail_sum(RENORM_TERMS["P1"], 200) == QSeries.zero(200)


def test_sigma_tail_matches_direct_summation():
    order = 60
    assert first_mismatch(tail_sum(RENORM_TERMS["sigma"], order), naive_tail(RENORM_TERMS["sigma"], order, 80)) is None


def test_tail_without_limit():
    with pytest.raises(NoLimitError):
        tail_sum(RENORM_TERMS["kontsevich"], 20)


# ----------------------------------------------------------------------
# shadow and ghost


def test_renormalize_f():
    r = renormalize("f", 200)
    assert r.residual_zero
    assert (r.shadow[0], r.shadow[1], r.shadow[2]) == (2, -2, 2)


def test_renormalize_M1_sign():
    printed = renormalize("M1", 300)
    assert printed.first_mismatch == 1
    fixed = renormalize("M1", 300, alternate="negated")
    assert fixed.residual_zero
    shadow = QSeries.from_terms({n * n: -4 * (-1) ** n * n for n in range(1, 18)}, 300)
    assert fixed.shadow == shadow


def test_renormalize_M2_ghost_constant():
    assert not renormalize("M2", 200).residual_zero
    assert renormalize("M2", 200, alternate="ghost-constant").residual_zero


def test_renormalize_P2_has_only_a_ghost():
    r = renormalize("P2", 200)
    assert r.residual_zero
    assert r.shadow == QSeries.zero(200)
    assert not r.ghost.is_zero


def test_renormalize_json():
    r = renormalize("P1", 20)
    d = r.to_dict()
    assert d["residual_zero"] is True and d["first_mismatch"] is None
    assert '"id": "P1"' in r.to_json()


def test_unregistered_decomposition():
    with pytest.raises(UnregisteredDecomposition):
        renormalize("W", 20)
    with pytest.raises(UnregisteredDecomposition):
        renormalize("M1", 20, alternate="nope")


@pytest.mark.parametrize("name", sorted(decompositions()))
def test_every_decomposition_builds(name):
    r = renormalize(name, 60)
    assert r.residual.order == 60


# ----------------------------------------------------------------------
# Chapman's lemma


def test_chapman_single_term():
    fam = lambda n: monomial(1, 1) if n == 1 else 0  # noqa: E731
    assert chapman_rhs(fam, 10) == QSeries.from_terms({1: 1}, 10)
    assert chapman_lhs(fam, 10) == QSeries.from_terms({1: 1}, 10)


def test_chapman_both_sides_agree():
    fam = lambda n: -monomial(1, n)  # noqa: E731
    assert first_mismatch(chapman_lhs(fam, 150), chapman_rhs(fam, 150)) is None


def test_chapman_divisor_remark():
    order = 150
    lhs = evaluate("sum(n=1: n*q^n*poch(q^(n+1);q)_inf)", order)
    assert first_mismatch(lhs, evaluate("sum(n=1: q^n/(1-q^n))", order)) is None


def test_chapman_sigma_family():
    order = 150
    rhs = chapman_rhs("-q^n/(1+q^n)", order)
    assert first_mismatch(rhs, -tail_sum(RENORM_TERMS["sigma"], order)) is None
    direct = evaluate("sum(n=1: n*q^n/poch(-q;q)_n)", order)
    assert first_mismatch(direct, tail_sum(RENORM_TERMS["sigma"], order)) is None


# ----------------------------------------------------------------------
# sums-of-tails families


@pytest.mark.parametrize("family", sorted(sot_families()))
def test_sot_families_match(family):
    report = verify_sot_family(family, 200)
    assert report["status"] == "match", report


def test_sot_family_trivial_order():
    assert verify_sot_family("af2-F2", 0)["status"] == "match"
    with pytest.raises(UnknownFamily):
        verify_sot_family("nope", 10)


def test_ajo2_ghost_value():
    order = 200
    ghost = evaluate("-2*poch(-q;q)_inf/poch(q;q)_inf*sum(n=1: q^n/(1-q^(2*n)))", order)
    assert first_mismatch(tail_sum(RENORM_TERMS["F2"], order), ghost) is None
