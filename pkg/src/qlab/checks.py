"""Named checks for registry entries that are not a pair of q-series.

Each check takes the registry entry and the requested order and returns a
:class:`CheckResult`; ``where`` is ``None`` on success and otherwise locates
the first failure (an exponent, a denominator, or an index, as documented per
check).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from qlab.bivariate import BiSeries
from qlab.catalog import crank_table, kronecker
from qlab.series import QSeries

__all__ = ["CheckResult", "CHECKS", "partitions", "crank", "crank_counts"]


@dataclass
class CheckResult:
    where: object
    lhs_hash: str
    rhs_hash: str
    message: str
    cases: int


def _hash(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def _result(rows, lhs_key, rhs_key, where_key, label):
    bad = [r for r in rows if not r["match"]]
    where = min((r[where_key] for r in bad), default=None)
    msg = f"{label}: {len(rows) - len(bad)}/{len(rows)} agree"
    if bad:
        msg += f"; first failure at {where_key}={where}"
    return CheckResult(
        where,
        _hash([r.get(lhs_key) for r in rows]),
        _hash([r.get(rhs_key) for r in rows]),
        msg,
        len(rows),
    )


# ----------------------------------------------------------------------
# roots of unity


def _cohen(entry, order):
    from qlab.cyclotomic import cohen_check

    rows = []
    for b in range(1, (entry.bound or 24) + 1):
        for r in cohen_check(b)["rows"]:
            rows.append(dict(r, b=b))
    return _result(rows, "sigma_inv", "neg_sigma_star", "b", "sigma(1/q) = -sigma*(q)")


def _finiteness(entry, order):
    from qlab.cyclotomic import finiteness_table

    rows = [dict(r, match=r["finite"] == r["expected"]) for r in finiteness_table(entry.bound or 20)]
    return _result(rows, "finite", "expected", "b", "M1/M2 finiteness parity")


def _phi_periodicity(entry, order):
    from qlab.cyclotomic import phi_periodicity_check

    rows = phi_periodicity_check(entry.bound or 10)
    return _result(rows, "a", "b", "b", "phi(x+1) = zeta_24 phi(x)")


def _galois(entry, order):
    from qlab.cyclotomic import TERMINATING, galois_check

    rows = [r for name in TERMINATING for r in galois_check(name, entry.bound or 12)]
    return _result(rows, "k", "match", "b", "Galois equivariance")


def _embedding(entry, order):
    from qlab.cyclotomic import TERMINATING, CycNum, eval_terminating, eval_terminating_complex

    rows = []
    for b in range(1, (entry.bound or 20) + 1):
        for a in range(b):
            if gcd(a, b) != 1:
                continue
            for name in TERMINATING:
                exact = eval_terminating(name, a, b)
                approx = eval_terminating_complex(name, a, b)
                if isinstance(exact, CycNum):
                    z = exact.to_complex()
                    ok = approx is not None and abs(z - approx) <= 1e-10
                    rows.append({"b": b, "exact": repr(z), "float": repr(approx), "match": ok})
                else:
                    rows.append({"b": b, "exact": None, "float": approx, "match": approx is None})
    return _result(rows, "exact", "float", "b", "exact vs float at roots of unity")


# ----------------------------------------------------------------------
# numeric


RADIAL_LEVELS = range(4, 10)
RADIAL_TOL = 1e-2


def _strange_radial(entry, order):
    from qlab.cyclotomic import zagier_phi
    from qlab.numeric import radial_probe

    target = complex(zagier_phi(0, 1).to_complex())
    radii = [1 - 2.0**-k for k in RADIAL_LEVELS]
    vals = [-0.5 * v.value for v in radial_probe("eta_tilde", 0, 1, radii)]
    gaps = [abs(v - target) for v in vals]
    ok = gaps[-1] <= RADIAL_TOL and all(x >= y for x, y in zip(gaps, gaps[1:]))
    rows = [{"k": k, "value": repr(v), "target": repr(target), "match": ok} for k, v in zip(RADIAL_LEVELS, vals)]
    res = _result(rows, "value", "target", "k", "-eta~/2 toward q = 1 against phi(0)")
    res.where = None if ok else 0
    res.message += f"; last gap {gaps[-1]:.3g}"
    return res


# ----------------------------------------------------------------------
# two-variable identities


def _inv_xq_poch(x_order, order, n=None, c=1):
    """``1/(c x q; q)_n`` (``n=None`` for the infinite product) as a BiSeries."""
    out = BiSeries.constant(1, x_order, order)
    top = int(order) if n is None else min(n, int(order))
    for j in range(1, top + 1):
        out = out.div_x_binomial(c, 1, j)
    return out


def _bi_compare(lhs, rhs, label):
    fm = lhs.first_mismatch(rhs)
    where = None if fm is None else fm[1]
    msg = label if fm is None else f"{label}: first mismatch at x^{fm[0]} q^{fm[1]}"
    return CheckResult(where, lhs.digest(), rhs.digest(), msg, 1)


def sf1_sides(x_order, order):
    """Both sides of the two-variable tails identity for ``1/(xq)_n``."""
    full = _inv_xq_poch(x_order, order)
    lhs = BiSeries.constant(0, x_order, order)
    for n in range(x_order):
        lhs = lhs + (_inv_xq_poch(x_order, order, n) - full).shift_x(n)
    total = BiSeries.constant(0, x_order, order)
    n = 0
    while 2 * n < x_order and n * n < order:
        inv = _inv_xq_poch(x_order, order, n)
        total = total + (inv * inv).shift_x(2 * n) * QSeries.from_terms({n * n: 1})
        n += 1
    rhs = (total - full).div_x_binomial(1, 1, 0)
    return lhs, rhs


def _sf1(entry, order):
    lhs, rhs = sf1_sides(entry.x_order or 20, entry.q_order or 60)
    return _bi_compare(lhs, rhs, "two-variable tails of 1/(xq)_n")


def andrews_polynomials(x_order, order):
    """``sum_n x^(2n) q^(n^2) / (xq)_n^2 / (1 - x)``, the coefficients being ``P_N(q)``."""
    total = BiSeries.constant(0, x_order, order)
    n = 0
    while 2 * n < x_order and n * n < order:
        inv = _inv_xq_poch(x_order, order, n)
        total = total + (inv * inv).shift_x(2 * n) * QSeries.from_terms({n * n: 1})
        n += 1
    return total.div_x_binomial(1, 1, 0)


def q_binomial(a, b, order):
    if b < 0 or b > a:
        return QSeries.zero(order)
    num = QSeries.one(order)
    for j in range(b):
        num = num.mul_binomial(1, a - j)
        num = num.div_binomial(1, j + 1, order)
    return num.truncate(order)


def _sf1_polynomials(entry, order):
    x_order, q_order = entry.x_order or 12, entry.q_order or 40
    got = andrews_polynomials(x_order, q_order)
    want = [QSeries.one(q_order)]
    for N in range(1, x_order):
        acc = QSeries.zero(q_order)
        for j in range(N):
            acc = acc + q_binomial(N - 1, j, q_order).shift(j)
        want.append(acc.truncate(q_order))
    return _bi_compare(got, BiSeries(want, x_order, q_order), "P_N(q) as sums of q-binomials")


def zagier_sides(x_order, order):
    """``sum_n (x)_(n+1) x^n`` and its theta form ``sum chi_12(n) x^((n-1)/2) q^((n^2-1)/24)``."""
    lhs = BiSeries.constant(0, x_order, order)
    prod = BiSeries.constant(1, x_order, order)
    for n in range(x_order):
        # prod = (x; q)_(n+1)
        prod = prod - prod.shift_x(1) * QSeries.from_terms({n: 1})
        lhs = lhs + prod.shift_x(n)
    coeffs = [QSeries.zero(order) for _ in range(x_order)]
    n = 1
    while (n - 1) // 2 < x_order:
        chi = kronecker(12, n)
        if chi:
            coeffs[(n - 1) // 2] = coeffs[(n - 1) // 2] + QSeries.from_terms({Fraction(n * n - 1, 24): chi}, order)
        n += 2
    return lhs, BiSeries(coeffs, x_order, order)


def _zagier_auxiliary(entry, order):
    x_order, q_order = entry.x_order or 20, entry.q_order or 60
    lhs, rhs = zagier_sides(x_order, q_order)
    res = _bi_compare(lhs, rhs, "auxiliary two-variable identity")
    # the recurrence S(x) = 1 - q x^2 - q^2 x^3 S(qx)
    rec = (1 - BiSeries.x_power(2, x_order, q_order, QSeries.from_terms({1: 1}))
           - (lhs.substitute_xq(1) * QSeries.from_terms({2: 1})).shift_x(3))
    fm = lhs.first_mismatch(rec)
    if fm is not None:
        res.where = fm[1] if res.where is None else min(res.where, fm[1])
        res.message += f"; recurrence fails at x^{fm[0]} q^{fm[1]}"
    return res


# ----------------------------------------------------------------------
# crank by enumeration


def partitions(n, largest=None):
    """All partitions of ``n`` as non-increasing tuples."""
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in partitions(n - k, k):
            yield (k,) + rest


def crank(parts):
    """Largest part if there are no ones, else (#parts exceeding #ones) - #ones."""
    ones = parts.count(1)
    if ones == 0:
        return parts[0] if parts else 0
    return sum(1 for p in parts if p > ones) - ones


def crank_counts(n):
    """``M(m, n)`` by enumeration, with the generating-function values at ``n = 1``."""
    if n == 1:
        return {-1: 1, 0: -1, 1: 1}
    counts = {}
    for lam in partitions(n):
        c = crank(lam)
        counts[c] = counts.get(c, 0) + 1
    return counts


def _crank_partitions(entry, order):
    bound = entry.bound or 30
    table = crank_table(bound)
    rows = []
    for n in range(bound + 1):
        enum = crank_counts(n)
        p_n = sum(1 for _ in partitions(n))
        row = table.row(n)
        rows.append({
            "n": n,
            "table": sorted(row.items()),
            "enumerated": sorted(enum.items()),
            "match": row == enum and sum(row.values()) == p_n,
        })
    return _result(rows, "table", "enumerated", "n", "crank counts and sum_m M(m,n) = p(n)")


CHECKS = {
    "cohen": _cohen,
    "finiteness": _finiteness,
    "phi-periodicity": _phi_periodicity,
    "galois": _galois,
    "embedding": _embedding,
    "strange-radial": _strange_radial,
    "sf1": _sf1,
    "sf1-polynomials": _sf1_polynomials,
    "zagier-auxiliary": _zagier_auxiliary,
    "crank-partitions": _crank_partitions,
}
