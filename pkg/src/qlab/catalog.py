"""Named series builders and the generic engines they share."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from math import ceil, isqrt, lcm

from qlab import qterm
from qlab.errors import (
    NonConvergent,
    NonSummable,
    NotUnary,
    UnknownSeries,
    ZeroDenominator,
)
from qlab.series import QSeries, div, invert, pochhammer_infinite

__all__ = [
    "Monomial",
    "fine_F",
    "sum_terms",
    "ThetaDescriptor",
    "theta_build",
    "half_derivative",
    "lambert_sum",
    "bilateral_lambert",
    "hecke_double",
    "eta_quotient",
    "CrankTable",
    "crank_table",
    "positive_crank_series",
    "crank_moment",
    "kronecker",
    "least_part_odd",
    "catalog_build",
    "catalog_ids",
    "CATALOG_TERMS",
]


# ----------------------------------------------------------------------
# monomial parameters


@dataclass(frozen=True)
class Monomial:
    """``coef * q^exp``."""

    coef: Fraction
    exp: Fraction = Fraction(0)

    @classmethod
    def of(cls, value):
        if isinstance(value, Monomial):
            return value
        if isinstance(value, QSeries):
            if value.is_zero:
                return cls(Fraction(0))
            if len(value.num) != 1 or not value.is_exact:
                raise ValueError("parameter must be an exact monomial c*q^e")
            return cls(Fraction(value.num[0], value.den), Fraction(value.start, value.grain))
        if isinstance(value, tuple):
            return cls(Fraction(value[0]), Fraction(value[1]))
        return cls(Fraction(value))

    @property
    def valuation(self):
        return self.exp

    def series(self):
        return QSeries.from_terms({self.exp: self.coef})

    def times_q(self, k=1):
        return Monomial(self.coef, self.exp + k)


def _binomial_factor(acc, coef, exp, power, prec):
    """Fold ``(1 - coef q^exp)^power`` into ``acc`` with working precision ``prec``."""
    if coef == 0:
        return acc
    if exp == 0:
        c = 1 - coef
        if c == 0:
            if power > 0:
                return acc.scale(0)
            raise ZeroDenominator("factor 1 - q^0 in a denominator")
        return acc.scale(c ** power)
    if power > 0:
        return acc.mul_binomial(coef, exp)
    return acc.div_binomial(coef, exp, prec)


# ----------------------------------------------------------------------
# Fine's basic hypergeometric function


def _fine_direct(a, b, t, order, base):
    """``sum (a q^base; q^base)_n / (b q^base; q^base)_n t^n`` for ``val(t) > 0``."""
    grain = lcm(
        Fraction(order).denominator,
        a.exp.denominator,
        b.exp.denominator,
        t.exp.denominator,
        Fraction(base).denominator,
    )
    # the only negative exponents come from factors (1 - b q^(base j)) with
    # base*j < -val(b); they lower the valuation by a bounded amount
    slack = Fraction(0)
    j = 1
    while b.coef and b.exp + base * j < 0:
        slack += -(b.exp + base * j)
        j += 1
    work = Fraction(order) + slack
    term = QSeries.one(work, grain)
    total = term
    tq = t.series()
    n = 0
    settle = 0
    j = 1
    while a.exp + base * j <= 0 or b.exp + base * j <= 0:
        j += 1
    settle = j
    while True:
        n += 1
        term = term * tq
        term = _binomial_factor(term, a.coef, a.exp + base * n, 1, work)
        term = _binomial_factor(term, b.coef, b.exp + base * n, -1, work)
        total = total + term
        if term.is_zero and (term.order is None or term.order >= work) and n >= settle:
            break
        v = term.valuation if not term.is_zero else term.order
        if n >= settle and v is not None and v >= work:
            break
        if n > 4 * work + 64:
            raise NonConvergent("Fine series did not converge")
    return total.truncate(order)


def fine_F(a, b, t, order, base=1):
    """Fine's ``F(a, b; t)`` (in ``q^base``) truncated at ``q^order``.

    When ``t`` does not have positive valuation the recurrence
    ``F(t) = (1-b)/(1-t) + (b - a t q)/(1-t) F(tq)`` is applied until it does.
    """
    a, b, t = Monomial.of(a), Monomial.of(b), Monomial.of(t)
    order = Fraction(order)
    base = Fraction(base)
    steps = 0
    while t.exp + steps * base <= 0:
        steps += 1
        if steps > order + 2:
            raise NonConvergent("valuation of t does not increase fast enough")
    if t.coef == 0:
        return QSeries.one(order)
    slack = Fraction(0)
    for j in range(steps):
        slack += max(Fraction(0), -(t.exp + j * base))
    work = order + slack + 1
    value = _fine_direct(a, b, Monomial(t.coef, t.exp + steps * base), work, base)
    one = QSeries.one()
    for j in range(steps - 1, -1, -1):
        tj = Monomial(t.coef, t.exp + j * base)
        if tj.exp == 0 and tj.coef == 1:
            raise ZeroDenominator("t = 1 is a pole of Fine's function")
        num = (one - b.series()) + (b.series() - (a.series() * tj.series()).shift(base)) * value
        value = div(num, one - tj.series(), work)
    return value.truncate(order)


# ----------------------------------------------------------------------
# direct summation of DSL terms


def _summation_bound(d, order):
    """Index ``N`` with ``val(H_n) >= order`` for every ``n >= N``."""
    poly, n0 = qterm._valuation_shape(d)
    if not (poly.degree >= 1 and poly[-1] > 0):
        raise NonSummable(f"term valuation does not grow: {qterm.render(d)}")
    start = n0
    if poly.degree >= 2:
        # beyond the last critical point the polynomial is increasing
        deriv = qterm.Poly([k * poly[k] for k in range(1, len(poly))])
        while deriv(start) <= 0:
            start += 1
    n = start
    while poly(n) < order:
        n += 1
        if n > 4 * order + 64 + start:
            raise NonSummable("valuation bound not reached")
    return n


def sum_terms(d, order, start=0):
    """``sum_{n >= start} H_n`` for a summable descriptor, exact to ``q^order``."""
    if isinstance(d, str):
        d = qterm.parse(d)
    if start:
        d = d.shift(start)
    order = Fraction(order)
    bound = _summation_bound(d, order)
    vals = [qterm.valuation_at(d, n) for n in range(bound)]
    live = [v for v in vals if v is not None]
    if not live:
        return QSeries.zero(order)
    floor_shift = min(live)
    walker = qterm.TermWalker(d, order, 0, floor_shift=floor_shift)
    total = QSeries.zero(order, walker.grain)
    last = max((n for n, v in enumerate(vals) if v is not None and v < order), default=-1)
    for n in range(last + 1):
        if vals[n] is not None and vals[n] < order:
            total = total + walker.value()
        if n < last:
            walker.advance()
    return total.truncate(order)


# ----------------------------------------------------------------------
# theta functions


@dataclass(frozen=True)
class ThetaDescriptor:
    """``scale * sum c(n) [n] q^((a n^2 + b n + g)/D)`` over a range of ``n``.

    ``kind`` is ``full`` (all integers), ``partial`` (``n >= start``) or
    ``unary`` (``n >= 1`` with a Kronecker character).  ``character`` is
    ``None``, ``("kron", d)``, ``("period", (c_0, ..., c_{m-1}))`` or
    ``("alt",)``.
    """

    kind: str
    exp_quad: tuple
    character: tuple | None = None
    weight_factor: str = "none"
    scale: Fraction = Fraction(1)
    start: int = 0

    def coefficient(self, n):
        ch = self.character
        if ch is None:
            c = 1
        elif ch[0] == "kron":
            c = kronecker(ch[1], n)
        elif ch[0] == "period":
            c = ch[1][n % len(ch[1])]
        elif ch[0] == "alt":
            c = -1 if n % 2 else 1
        else:
            raise ValueError(f"unknown character {ch!r}")
        if self.weight_factor == "n":
            c *= n
        return c

    def exponent(self, n):
        a, b, g, d = self.exp_quad
        return Fraction(a * n * n + b * n + g, d)


def theta_build(t, order):
    order = Fraction(order)
    a, b, g, d = t.exp_quad
    if a <= 0:
        raise ValueError("theta exponent must have a positive quadratic coefficient")
    terms = {}
    # a n^2 + b n + g < order*d  =>  |n| bounded
    radius = isqrt(int(abs(order * d) + abs(b) * abs(b) + abs(g)) + 1) + abs(b) + 2
    if t.kind == "full":
        rng = range(-radius, radius + 1)
    elif t.kind == "unary":
        rng = range(max(1, t.start), radius + 1)
    else:
        rng = range(t.start, radius + 1)
    for n in rng:
        e = t.exponent(n)
        if e >= order:
            continue
        c = t.coefficient(n)
        if c:
            terms[e] = terms.get(e, 0) + Fraction(c) * t.scale
    grain = lcm(d, order.denominator)
    return QSeries.from_terms(terms, order=order, grain=grain).reduce_grain()


def half_derivative(t):
    """Multiply the ``n``-th coefficient of a unary theta by ``n``."""
    if t.weight_factor != "none":
        raise NotUnary("half-derivative already applied")
    a, b, g, d = t.exp_quad
    if b or g:
        raise NotUnary("exponent must be a pure square a*n^2/D")
    if t.kind == "full":
        # fold n and -n together; needs an even character
        for n in range(1, 25):
            if t.coefficient(n) != t.coefficient(-n):
                raise NotUnary("character is not even, cannot fold")
        t = replace(t, kind="unary", scale=2 * t.scale, start=1)
    elif t.kind != "unary":
        raise NotUnary("half-derivative needs a unary theta")
    return replace(t, weight_factor="n")


# ----------------------------------------------------------------------
# Lambert series and relatives


def lambert_sum(c, a, b, denom_sign, order):
    """``sum_{n>=1} c(n) q^(a n) / (1 + denom_sign q^(b n))``.

    ``c`` is a period vector indexed by ``n mod len(c)``, or a callable.
    """
    order = Fraction(order)
    coef = c if callable(c) else (lambda n: c[n % len(c)])
    terms = {}
    n = 1
    while a * n < order:
        cn = coef(n)
        if cn:
            e = a * n
            k = 0
            while e < order:
                terms[e] = terms.get(e, 0) + cn * (-denom_sign) ** k
                e += b * n
                k += 1
        n += 1
    return QSeries.from_terms(terms, order=order, grain=order.denominator)


def bilateral_lambert(order):
    """``sum_{n in Z} n (-1)^n q^(n(n-1)/2) / (1 + q^(n-1))``."""
    order = Fraction(order)
    terms = {0: Fraction(-1, 2)}  # n = 1
    n = 2
    while Fraction(n * (n - 1), 2) < order:
        e0 = Fraction(n * (n - 1), 2)
        k = 0
        while e0 + k * (n - 1) < order:
            e = e0 + k * (n - 1)
            terms[e] = terms.get(e, 0) + n * (-1) ** ((n + k) % 2)
            k += 1
        n += 1
    n = -1
    while Fraction((n - 1) * (n - 2), 2) < order:
        # 1/(1+q^(n-1)) = q^(1-n) / (1 + q^(1-n))
        e0 = Fraction((n - 1) * (n - 2), 2)
        step = 1 - n
        k = 0
        while e0 + k * step < order:
            e = e0 + k * step
            terms[e] = terms.get(e, 0) + n * (-1) ** ((n + k) % 2)
            k += 1
        n -= 1
    return QSeries.from_terms(terms, order=order, grain=order.denominator)


def hecke_double(kind, param, order):
    """Hecke-type double sums; ``param`` is the monomial ``a`` where relevant."""
    order = Fraction(order)
    terms = {}

    def add(e, c):
        if e < order:
            terms[e] = terms.get(e, 0) + c

    if kind == "ramanujan-false-rhs":
        a = Monomial.of(param)
        if a.exp < 0:
            raise ValueError("parameter must have nonnegative valuation")
        out = QSeries.zero(order)
        n = 0
        aser = a.series()
        while True:
            e = Fraction(n * (3 * n + 1), 2) + 3 * n * a.exp
            if e >= order:
                break
            mono = QSeries.from_terms({e: a.coef ** (3 * n)})
            corr = (QSeries.one() - (aser * aser).shift(2 * n + 1))
            out = out + mono * corr
            n += 1
        return out.truncate(order)
    if kind in ("psi-hecke", "a-of-q-hecke"):
        alt = kind == "psi-hecke"
        n = 0
        while Fraction(3 * n * n + n, 2) < order:
            s = (-1) ** n if alt else 1
            for j in range(n + 1):
                e = 2 * n * n + n - Fraction(j * (j + 1), 2)
                add(e, s)
                add(e + 6 * n + 6, -s)
            n += 1
        return QSeries.from_terms(terms, order=order, grain=order.denominator)
    if kind == "L6-hecke":
        n = 0
        while Fraction(n * n + 3 * n, 2) < order:
            for r in range(0, n + 1):
                add(n * n + 2 * n - Fraction(r * (r + 1), 2), (-1) ** (n + r) * (2 * r + 1))
            n += 1
        return QSeries.from_terms(terms, order=order, grain=order.denominator)
    raise UnknownSeries(kind)


def eta_quotient(spec, order):
    """``prod eta(m z)^p`` for ``(m, p)`` in ``spec`` (with its ``q^(sum m p / 24)``)."""
    order = Fraction(order)
    lead = sum(Fraction(m * p, 24) for m, p in spec)
    work = order - lead
    acc = QSeries.from_terms({lead: 1})
    for m, p in spec:
        if p == 0:
            continue
        prod = pochhammer_infinite(1, m, m, max(work, Fraction(1)))
        if p > 0:
            for _ in range(p):
                acc = acc * prod
        else:
            inv = invert(prod)
            for _ in range(-p):
                acc = acc * inv
    return acc.truncate(order).reduce_grain()


# ----------------------------------------------------------------------
# crank


class CrankTable:
    """Values ``M(m, n)`` for ``0 <= n <= n_max``."""

    def __init__(self, n_max, rows):
        self.n_max = n_max
        self._rows = rows

    def __call__(self, m, n):
        return self._rows[n].get(m, 0)

    M = __call__

    def row(self, n):
        return dict(self._rows[n])

    def as_array(self):
        """Rows ``n``, columns ``m = -n_max .. n_max``."""
        width = range(-self.n_max, self.n_max + 1)
        return [[self._rows[n].get(m, 0) for m in width] for n in range(self.n_max + 1)]


def crank_table(n_max):
    """Expand ``(q)_inf / ((zq)_inf (q/z)_inf)`` as Laurent polynomials in ``z``."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    size = n_max + 1
    rows = [dict() for _ in range(size)]
    eu = pochhammer_infinite(1, 1, 1, size)
    for n in range(size):
        c = eu[n]
        if c:
            rows[n][0] = int(c)
    for j in range(1, size):
        for zpow in (1, -1):
            # divide by (1 - z^zpow q^j): S_new[n] = S[n] + z^zpow S_new[n-j]
            for n in range(j, size):
                prev = rows[n - j]
                cur = rows[n]
                for m, c in prev.items():
                    cur[m + zpow] = cur.get(m + zpow, 0) + c
    clean = [{m: c for m, c in r.items() if c} for r in rows]
    return CrankTable(n_max, clean)


def positive_crank_series(order, include_zero=False):
    """``sum_n sum_{m>0} M(m,n) q^n``; with ``include_zero`` the sum runs over ``m >= 0``."""
    n_max = ceil(Fraction(order)) - 1
    table = crank_table(max(n_max, 0))
    lo = 0 if include_zero else 1
    coeffs = [sum(c for m, c in table.row(n).items() if m >= lo) for n in range(n_max + 1)]
    return QSeries(coeffs, trunc=ceil(Fraction(order)))


def crank_moment(order):
    """First odd moment ``sum_n sum_{m>=0} m M(m,n) q^n``."""
    n_max = ceil(Fraction(order)) - 1
    table = crank_table(max(n_max, 0))
    coeffs = [sum(m * c for m, c in table.row(n).items() if m > 0) for n in range(n_max + 1)]
    return QSeries(coeffs, trunc=ceil(Fraction(order)))


# ----------------------------------------------------------------------
# Kronecker symbol


def _jacobi(a, n):
    # n odd positive
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def kronecker(d, n):
    """Kronecker symbol ``(d / n)``."""
    if n == 0:
        return 1 if d in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if d < 0:
            result = -result
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if d % 2 == 0:
            return 0
        if v % 2 and d % 8 in (3, 5):
            result = -result
    if n == 1:
        return result
    return result * _jacobi(d, n)


# ----------------------------------------------------------------------
# named series

# summands for every series built by direct summation; shifts are folded in
CATALOG_TERMS = {
    "sigma": "q^((n^2+n)/2) / poch(-q;q)_n",
    "sigma_star": "-2 * (-1)^n * q^((n+1)^2) / poch(q;q^2)_(n+1)",
    "f": "q^(n^2) / poch(-q;q)_n^2",
    "fbar_tail": "2 * q^((n+1)*(n+2)/2) / poch(-q;q)_(n+1) / (1 + q^(n+1))",
    "No011": "(-1)^n * q^((n+1)^2) / poch(q;q^2)_(n+1) / (1 - q^(2n+1))",
    "M2": "q^(n+1) * poch(q^2;q^2)_n / poch(q;q^2)_(n+1)",
    "P1": "q^n / poch(q;q)_n",
    "P2": "q^(n^2) / poch(q;q)_n^2",
    "F1": "(-1)^n * q^((n^2+n)/2) / poch(q;q)_n",
    "F3": "q^n * poch(q;q^2)_n / poch(q^2;q^2)_n",
    "F4": "(-1)^n * q^(2n+1) * poch(-q;q)_n / poch(q;q)_n / (1 - q^(2n+1))",
    "psi": "q^(n^2) / poch(q;q^2)_n",
    "andrews_a": "q^(n^2) * poch(-q;q)_n^2 / poch(q;q)_(2n)",
    "andrews_b": "q^(n^2) * poch(-q^2;q^2)_n / poch(q;q)_(2n)",
    "andrews_c": "q^((n+1)^2) * poch(-q^2;q^2)_n / poch(q;q)_(2n+1)",
    "andrews_d": "q^(n^2) * poch(-q^2;q^2)_n / poch(q;q)_(2n+1)",
    "cr": "q^(n^2+n) / poch(q;q)_n^2",
    "L6": "(-1)^n * q^n * poch(q;q)_n^2 / poch(q;q^2)_(n+1)",
    "W": "(-1)^n * q^n * poch(q;q^2)_n / poch(-q^2;q^2)_n",
    "G1_tail": "q^(n+1) * poch(-q;q)_n / poch(q^2;q^2)_(n+1)",
    "h": "q^(n+1) * poch(q;q)_(2n+1) / poch(-q;q)_(2n+2)",
    "kontsevich": "poch(q;q)_n",
}

# the hypergeometric summands whose q -> 1/q tails are renormalized
RENORM_TERMS = {
    "f": CATALOG_TERMS["f"],
    "sigma": CATALOG_TERMS["sigma"],
    "sigma_star": "-(-1)^n * q^((n+1)^2) / poch(q;q^2)_(n+1)",
    "M1": "(-1)^n * poch(q;q)_n / poch(-q;q)_n",
    "M2": CATALOG_TERMS["M2"],
    "P1": CATALOG_TERMS["P1"],
    "P2": CATALOG_TERMS["P2"],
    "F1": CATALOG_TERMS["F1"],
    "F2": "(-1)^n * poch(-q;q)_n / poch(q;q)_n",
    "F3": CATALOG_TERMS["F3"],
    "F4": CATALOG_TERMS["F4"],
    "W": CATALOG_TERMS["W"],
    "L6": CATALOG_TERMS["L6"],
    "cr": CATALOG_TERMS["cr"],
    "psi": CATALOG_TERMS["psi"],
    "andrews_a": CATALOG_TERMS["andrews_a"],
    "andrews_b": CATALOG_TERMS["andrews_b"],
    "andrews_c": CATALOG_TERMS["andrews_c"],
    "andrews_d": CATALOG_TERMS["andrews_d"],
    "kontsevich": CATALOG_TERMS["kontsevich"],
}


def _direct(name):
    return lambda order: sum_terms(CATALOG_TERMS[name], order)


def _eta(order):
    t = ThetaDescriptor("unary", (1, 0, 0, 24), ("kron", 12))
    return theta_build(t, order)


def _eta_tilde(order):
    t = half_derivative(ThetaDescriptor("unary", (1, 0, 0, 24), ("kron", 12)))
    return theta_build(t, order)


def _kontsevich_tails(order):
    """``sum_n ((q)_n - (q)_inf)``."""
    from qlab.expr import evaluate

    return evaluate("tails(n=0: poch(q;q)_n)", order)


def least_part_odd(order):
    """Partitions whose least part is odd: ``sum_{k odd} q^k / (q^k; q)_inf``."""
    order = Fraction(order)
    total = QSeries.zero(order)
    tail = invert(pochhammer_infinite(1, 1, 1, order))
    # tail holds 1/(q^k; q)_inf, peeled one factor at a time
    for k in range(1, int(order) + 1):
        if k % 2:
            total = total + tail.shift(k)
        tail = tail.mul_binomial(1, k)
    return total.truncate(order)


_BUILDERS = {
    "fbar": lambda order: 1 + sum_terms(CATALOG_TERMS["fbar_tail"], order),
    "M1": lambda order: fine_F(1, -1, -1, order),
    "F2": lambda order: fine_F(-1, 1, -1, order),
    "G1": lambda order: Fraction(1, 2) + sum_terms(CATALOG_TERMS["G1_tail"], order),
    "C1": crank_moment,
    "eta": _eta,
    "eta_tilde": _eta_tilde,
    "kontsevich_tails": _kontsevich_tails,
    "positive_crank": positive_crank_series,
    "nonnegative_crank": lambda order: positive_crank_series(order, include_zero=True),
    "partitions": lambda order: invert(pochhammer_infinite(1, 1, 1, order)),
    "euler": lambda order: pochhammer_infinite(1, 1, 1, order),
    "least_part_odd": least_part_odd,
}
for _name in (
    "sigma", "sigma_star", "f", "No011", "M2", "P1", "P2", "F1", "F3", "F4",
    "psi", "andrews_a", "andrews_b", "andrews_c", "andrews_d", "cr", "L6", "W", "h",
):
    _BUILDERS[_name] = _direct(_name)


def catalog_ids():
    return sorted(_BUILDERS)


@lru_cache(maxsize=256)
def _build_cached(name, order):
    return _BUILDERS[name](order)


def catalog_build(name, order):
    """Build the named series to ``q^order``."""
    if name not in _BUILDERS:
        raise UnknownSeries(name)
    return _build_cached(name, Fraction(order))
