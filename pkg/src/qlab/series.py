"""Exact truncated Laurent series in fractional powers of q.

A :class:`QSeries` stores the coefficients of ``q^(k/grain)`` for
``k = start, start+1, ...`` as integer numerators over one common positive
denominator.  ``trunc`` is the index below which the series is known
exactly; ``None`` marks an exact (finite) Laurent polynomial.

Truncation is tracked pessimistically: no operation ever produces a
coefficient at or beyond the truncation it can justify.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from math import ceil, gcd, lcm
from numbers import Rational

from qlab.errors import DivergentProduct, ZeroDenominator, ZeroSeries

__all__ = [
    "QSeries",
    "add",
    "mul",
    "invert",
    "div",
    "dilate",
    "monomial",
    "pochhammer_finite",
    "pochhammer_infinite",
    "first_mismatch",
]

# below this length plain schoolbook convolution beats packing into big ints
_KRONECKER_MIN = 48
_SPARSE_MAX = 12


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    raise TypeError(f"expected a rational number, got {type(x).__name__}")


def _min_trunc(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _pack(a, h):
    fmt = f"0{h}x"
    zero = "0" * h
    pos = "".join(format(x, fmt) if x > 0 else zero for x in reversed(a))
    neg = "".join(format(-x, fmt) if x < 0 else zero for x in reversed(a))
    return int(pos, 16) - int(neg, 16)


def _conv_kronecker(a, b, n):
    ma = max(map(abs, a))
    mb = max(map(abs, b))
    if not ma or not mb:
        return [0] * n
    bound = ma * mb * min(len(a), len(b))
    h = (bound.bit_length() + 5) // 4
    prod = _pack(a, h) * _pack(b, h)
    width = 4 * h * n
    offset = int(("8" + "0" * (h - 1)) * n, 16)
    s = format((prod + offset) & ((1 << width) - 1), "x").zfill(h * n)
    half = 1 << (4 * h - 1)
    top = len(s)
    return [int(s[top - (k + 1) * h: top - k * h], 16) - half for k in range(n)]


def _conv(a, b, n=None):
    """First ``n`` coefficients of the product of integer sequences ``a``, ``b``."""
    if not a or not b:
        return []
    full = len(a) + len(b) - 1
    n = full if n is None else min(n, full)
    if n <= 0:
        return []
    a = a[:n]
    b = b[:n]
    nza = [(i, x) for i, x in enumerate(a) if x]
    nzb = [(i, x) for i, x in enumerate(b) if x]
    if len(nzb) < len(nza):
        a, b, nza, nzb = b, a, nzb, nza
    if len(nza) <= _SPARSE_MAX or min(len(a), len(b)) < _KRONECKER_MIN:
        res = [0] * n
        for i, x in nza:
            seg = b[: n - i]
            if x == 1:
                res[i: i + len(seg)] = [r + y for r, y in zip(res[i: i + len(seg)], seg)]
            elif x == -1:
                res[i: i + len(seg)] = [r - y for r, y in zip(res[i: i + len(seg)], seg)]
            else:
                res[i: i + len(seg)] = [r + x * y for r, y in zip(res[i: i + len(seg)], seg)]
        return res
    return _conv_kronecker(a, b, n)


def _inverse_unit_int(u, n):
    """Power-series inverse of ``u`` (``u[0] == ±1``) to ``n`` terms, by Newton."""
    u0 = u[0]
    inv = [u0]
    m = 1
    while m < n:
        m2 = min(2 * m, n)
        err = _conv(u[:m2], inv, m2)
        err += [0] * (m2 - len(err))
        err[0] -= 1
        corr = _conv(inv, err, m2)
        corr += [0] * (m2 - len(corr))
        inv = inv + [0] * (m2 - len(inv))
        inv = [x - y for x, y in zip(inv, corr)]
        m = m2
    return inv


def _inverse_unit(u, n):
    """Return (numerators, denominator) of 1/u to n terms for integer ``u``."""
    u0 = u[0]
    if u0 in (1, -1):
        return _inverse_unit_int(u, n), 1
    # c_k = u0^(k+1) * b_k stays integral
    w = [0] * n
    p = 1
    for i in range(1, min(n, len(u))):
        w[i] = u[i] * p
        p *= u0
    c = [1] + [0] * (n - 1)
    for k in range(1, n):
        c[k] = -sum(w[i] * c[k - i] for i in range(1, min(k, len(u) - 1) + 1))
    den = u0 ** n
    nums = [c[k] * u0 ** (n - 1 - k) for k in range(n)]
    if den < 0:
        den = -den
        nums = [-x for x in nums]
    return nums, den


class QSeries:
    """Truncated Laurent series in ``q^(1/grain)`` with rational coefficients.

    Values are immutable; every operation returns a new series.  ``==``
    compares two series up to their common truncation, which is the notion
    of equality identity checks need.
    """

    __slots__ = ("grain", "start", "num", "den", "trunc")

    def __init__(self, coeffs=(), start=0, trunc=None, grain=1):
        fr = [_frac(c) for c in coeffs]
        den = lcm(*(c.denominator for c in fr)) if fr else 1
        num = [c.numerator * (den // c.denominator) for c in fr]
        if grain < 1:
            raise ValueError("grain must be a positive integer")
        self._set(int(grain), int(start), num, den, trunc)

    @classmethod
    def _new(cls, grain, start, num, den, trunc):
        obj = cls.__new__(cls)
        obj._set(grain, start, num, den, trunc)
        return obj

    def _set(self, grain, start, num, den, trunc):
        if trunc is not None:
            keep = trunc - start
            if keep <= 0:
                num = ()
            elif len(num) > keep:
                num = num[:keep]
        lo, hi = 0, len(num)
        while lo < hi and num[lo] == 0:
            lo += 1
        while hi > lo and num[hi - 1] == 0:
            hi -= 1
        if lo == hi:
            num, start, den = (), 0, 1
        else:
            num = num[lo:hi]
            start += lo
            if den < 0:
                den = -den
                num = [-x for x in num]
            g = gcd(den, *num)
            if g != 1:
                num = [x // g for x in num]
                den //= g
            num = tuple(num)
        self.grain = grain
        self.start = start
        self.num = num
        self.den = den
        self.trunc = trunc

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def zero(cls, order=None, grain=1):
        trunc = None if order is None else ceil(Fraction(order) * grain)
        return cls._new(grain, 0, (), 1, trunc)

    @classmethod
    def one(cls, order=None, grain=1):
        return cls.constant(1, order, grain)

    @classmethod
    def constant(cls, c, order=None, grain=1):
        c = _frac(c)
        trunc = None if order is None else ceil(Fraction(order) * grain)
        return cls._new(grain, 0, [c.numerator], c.denominator, trunc)

    @classmethod
    def from_terms(cls, terms, order=None, grain=None):
        """Build from a mapping ``{exponent: coefficient}``."""
        terms = {Fraction(e): _frac(c) for e, c in dict(terms).items() if c}
        if grain is None:
            grain = lcm(1, *(e.denominator for e in terms))
            if order is not None:
                grain = lcm(grain, Fraction(order).denominator)
        trunc = None if order is None else ceil(Fraction(order) * grain)
        if not terms:
            return cls._new(grain, 0, (), 1, trunc)
        idx = {}
        for e, c in terms.items():
            k = e * grain
            if k.denominator != 1:
                raise ValueError(f"exponent {e} not representable at grain {grain}")
            idx[int(k)] = c
        lo, hi = min(idx), max(idx)
        den = lcm(*(c.denominator for c in idx.values()))
        num = [0] * (hi - lo + 1)
        for k, c in idx.items():
            num[k - lo] = c.numerator * (den // c.denominator)
        return cls._new(grain, lo, num, den, trunc)

    # ------------------------------------------------------------------
    # inspection

    @property
    def is_exact(self):
        return self.trunc is None

    @property
    def is_zero(self):
        return not self.num

    @property
    def valuation(self):
        """Exponent of the lowest nonzero term (``None`` for zero)."""
        return Fraction(self.start, self.grain) if self.num else None

    @property
    def order(self):
        """Exponent at which the series is truncated (``None`` if exact)."""
        return None if self.trunc is None else Fraction(self.trunc, self.grain)

    def _val_idx(self):
        if self.num:
            return self.start
        return self.trunc

    def __getitem__(self, exp):
        k = Fraction(exp) * self.grain
        if self.trunc is not None and k >= self.trunc:
            raise IndexError(f"coefficient of q^{exp} lies beyond the truncation q^{self.order}")
        if k.denominator != 1:
            return Fraction(0)
        i = int(k) - self.start
        if 0 <= i < len(self.num):
            return Fraction(self.num[i], self.den)
        return Fraction(0)

    def coefficients(self, upto=None):
        """Coefficients of ``q^0 .. q^(upto-1)`` (integer exponents only)."""
        if upto is None:
            if self.trunc is None:
                raise ValueError("exact series: give an explicit bound")
            upto = int(self.order) if self.order == int(self.order) else ceil(self.order)
        return [self[e] for e in range(upto)]

    def items(self):
        """Yield ``(exponent, coefficient)`` for every nonzero term."""
        for i, x in enumerate(self.num):
            if x:
                yield Fraction(self.start + i, self.grain), Fraction(x, self.den)

    def __len__(self):
        return len(self.num)

    def __repr__(self):
        order = "exact" if self.trunc is None else f"O(q^{self.order})"
        return f"QSeries({self.format(8)}; {order})"

    def format(self, max_terms=None):
        parts = []
        for count, (e, c) in enumerate(self.items()):
            if max_terms is not None and count >= max_terms:
                parts.append("...")
                break
            if e == 0:
                mono = ""
            elif e == 1:
                mono = "q"
            else:
                mono = f"q^{e}" if e.denominator == 1 and e > 0 else f"q^({e})"
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        if not parts:
            return "0"
        return " + ".join(parts).replace("+ -", "- ")

    __str__ = format

    # ------------------------------------------------------------------
    # grain handling

    def rebase(self, grain):
        """Same series re-expressed at a grain that is a multiple of ours."""
        if grain == self.grain:
            return self
        m, r = divmod(grain, self.grain)
        if r:
            raise ValueError(f"grain {grain} is not a multiple of {self.grain}")
        num = [0] * (len(self.num) * m - (m - 1)) if self.num else []
        num[::m] = self.num
        trunc = None if self.trunc is None else self.trunc * m
        return QSeries._new(grain, self.start * m, num, self.den, trunc)

    def reduce_grain(self):
        """Smallest grain that still represents every exponent."""
        g = gcd(self.grain, self.trunc or 0, self.start if self.num else 0)
        if g > 1 and self.num:
            for i, x in enumerate(self.num):
                if x:
                    g = gcd(g, self.start + i)
                    if g == 1:
                        break
        if g <= 1:
            return self
        num = self.num[::g]
        trunc = None if self.trunc is None else self.trunc // g
        return QSeries._new(self.grain // g, self.start // g, num, self.den, trunc)

    # ------------------------------------------------------------------
    # arithmetic

    @staticmethod
    def _coerce(x, grain=1):
        if isinstance(x, QSeries):
            return x
        return QSeries.constant(x, None, grain)

    def _aligned(self, other):
        other = QSeries._coerce(other)
        if other.grain == self.grain:
            return self, other
        g = lcm(self.grain, other.grain)
        return self.rebase(g), other.rebase(g)

    def __add__(self, other):
        if not isinstance(other, (QSeries, int, Fraction, Rational)):
            return NotImplemented
        a, b = self._aligned(other)
        trunc = _min_trunc(a.trunc, b.trunc)
        if not a.num or not b.num:
            src = b if not a.num else a
            return QSeries._new(a.grain, src.start, src.num, src.den, trunc)
        start = min(a.start, b.start)
        end = max(a.start + len(a.num), b.start + len(b.num))
        if trunc is not None:
            end = min(end, trunc)
        if end <= start:
            return QSeries._new(a.grain, 0, (), 1, trunc)
        den = lcm(a.den, b.den)
        res = [0] * (end - start)
        for s in (a, b):
            f = den // s.den
            off = s.start - start
            seg = s.num[: max(0, end - s.start)]
            if not seg:
                continue
            if f == 1:
                res[off: off + len(seg)] = [r + x for r, x in zip(res[off: off + len(seg)], seg)]
            else:
                res[off: off + len(seg)] = [r + f * x for r, x in zip(res[off: off + len(seg)], seg)]
        return QSeries._new(a.grain, start, res, den, trunc)

    __radd__ = __add__

    def __neg__(self):
        return QSeries._new(self.grain, self.start, [-x for x in self.num], self.den, self.trunc)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, QSeries):
            return self + (-other)
        if isinstance(other, (int, Fraction, Rational)):
            return self + (-_frac(other))
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = _frac(c)
        if c == 0:
            trunc = self.trunc
            return QSeries._new(self.grain, 0, (), 1, None if trunc is None else trunc)
        return QSeries._new(self.grain, self.start, [x * c.numerator for x in self.num],
                            self.den * c.denominator, self.trunc)

    def __mul__(self, other):
        if isinstance(other, QSeries):
            return mul(self, other)
        if isinstance(other, (int, Fraction, Rational)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, QSeries):
            return div(self, other)
        if isinstance(other, (int, Fraction, Rational)):
            other = _frac(other)
            if other == 0:
                raise ZeroSeries("division by zero scalar")
            return self.scale(1 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        return div(QSeries._coerce(other, self.grain), self)

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return invert(self) ** (-k)
        result = QSeries.one(grain=self.grain)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def shift(self, exp):
        """Multiply by ``q^exp``."""
        exp = Fraction(exp)
        s = self
        if (exp * s.grain).denominator != 1:
            s = s.rebase(lcm(s.grain, exp.denominator))
        k = int(exp * s.grain)
        trunc = None if s.trunc is None else s.trunc + k
        return QSeries._new(s.grain, s.start + k, s.num, s.den, trunc)

    def truncate(self, order):
        """Forget everything at and beyond ``q^order``."""
        order = Fraction(order)
        s = self
        if (order * s.grain).denominator != 1:
            s = s.rebase(lcm(s.grain, order.denominator))
        t = int(order * s.grain)
        return QSeries._new(s.grain, s.start, s.num, s.den, _min_trunc(s.trunc, t))

    def mul_binomial(self, c, exp):
        """Multiply by ``1 - c*q^exp``."""
        if exp == 0:
            return self.scale(1 - _frac(c))
        return self * QSeries.from_terms({0: 1, Fraction(exp): -_frac(c)})

    def div_binomial(self, c, exp, order=None):
        """Divide by ``1 - c*q^exp``; exact inputs need ``order`` when ``exp != 0``."""
        c = _frac(c)
        exp = Fraction(exp)
        if c == 0:
            return self
        if exp == 0:
            if c == 1:
                raise ZeroDenominator("division by 1 - q^0")
            return self.scale(1 / (1 - c))
        if exp < 0:
            # 1/(1 - c q^-f) = -(1/c) q^f / (1 - q^f / c)
            return self.shift(-exp).scale(-1 / c).div_binomial(1 / c, -exp, order)
        s = self
        if (exp * s.grain).denominator != 1:
            s = s.rebase(lcm(s.grain, exp.denominator))
        e = int(exp * s.grain)
        trunc = s.trunc
        if order is not None:
            trunc = _min_trunc(trunc, ceil(Fraction(order) * s.grain))
        if trunc is None:
            raise ValueError("dividing an exact series by a binomial needs an order")
        if not s.num:
            return QSeries._new(s.grain, 0, (), 1, trunc)
        n = trunc - s.start
        if n <= 0:
            return QSeries._new(s.grain, 0, (), 1, trunc)
        if c.denominator != 1:
            return div(s, QSeries.from_terms({0: 1, exp: -c}), Fraction(trunc, s.grain))
        ci = c.numerator
        b = list(s.num[:n]) + [0] * max(0, n - len(s.num))
        if ci == 1:
            for k in range(e, n):
                b[k] += b[k - e]
        elif ci == -1:
            for k in range(e, n):
                b[k] -= b[k - e]
        else:
            for k in range(e, n):
                b[k] += ci * b[k - e]
        return QSeries._new(s.grain, s.start, b, s.den, trunc)

    # ------------------------------------------------------------------
    # comparison / export

    def __eq__(self, other):
        if not isinstance(other, (QSeries, int, Fraction, Rational)):
            return NotImplemented
        return first_mismatch(self, other) is None

    __hash__ = None

    def canonical(self):
        """Serialization used for content digests (grain-independent)."""
        s = self.reduce_grain()
        nums = ",".join(map(str, s.num))
        return f"g={s.grain};s={s.start};d={s.den};t={s.trunc};n={nums}"

    @classmethod
    def from_canonical(cls, text):
        """Inverse of :meth:`canonical`."""
        fields = dict(part.split("=", 1) for part in text.split(";"))
        try:
            trunc = None if fields["t"] == "None" else int(fields["t"])
            num = [int(x) for x in fields["n"].split(",")] if fields["n"] else []
            return cls._new(int(fields["g"]), int(fields["s"]), num, int(fields["d"]), trunc)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"malformed canonical series: {exc}") from None

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def csv_rows(self):
        s = self.reduce_grain()
        for i, x in enumerate(s.num):
            if x:
                k = s.start + i
                e = Fraction(k, s.grain)
                c = Fraction(x, s.den)
                yield (k, e.numerator, e.denominator, c.numerator, c.denominator)

    def to_csv(self):
        lines = ["k,exp_num,exp_den,coeff_num,coeff_den"]
        lines.extend(",".join(map(str, row)) for row in self.csv_rows())
        return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# module-level operations


def add(a, b):
    return QSeries._coerce(a) + b


def mul(a, b):
    a = QSeries._coerce(a)
    b = QSeries._coerce(b)
    if a.grain != b.grain:
        a, b = a._aligned(b)
    va, vb = a._val_idx(), b._val_idx()
    if (not a.num and a.trunc is None) or (not b.num and b.trunc is None):
        return QSeries._new(a.grain, 0, (), 1, None)
    t1 = None if a.trunc is None else a.trunc + vb
    t2 = None if b.trunc is None else b.trunc + va
    trunc = _min_trunc(t1, t2)
    if not a.num or not b.num:
        return QSeries._new(a.grain, 0, (), 1, trunc)
    start = a.start + b.start
    n = None if trunc is None else trunc - start
    if n is not None and n <= 0:
        return QSeries._new(a.grain, 0, (), 1, trunc)
    num = _conv(list(a.num), list(b.num), n)
    return QSeries._new(a.grain, start, num, a.den * b.den, trunc)


def _invert_idx(a, trunc_res):
    """Inverse of ``a`` known below index ``trunc_res`` (at a's grain)."""
    v = a.start
    n = trunc_res + v
    if n <= 0:
        return QSeries._new(a.grain, 0, (), 1, trunc_res)
    u = list(a.num[:n])
    inv, den = _inverse_unit(u, n)
    return QSeries._new(a.grain, -v, [x * a.den for x in inv], den, trunc_res)


def invert(a, order=None):
    """Multiplicative inverse; exact non-monomial inputs need ``order``."""
    a = QSeries._coerce(a)
    if not a.num:
        raise ZeroSeries("cannot invert the zero series")
    if a.trunc is None and len(a.num) == 1:
        c = Fraction(a.den, a.num[0])
        return QSeries._new(a.grain, -a.start, [c.numerator], c.denominator, None)
    if a.trunc is None:
        if order is None:
            raise ValueError("inverting an exact polynomial needs an order")
        t = ceil(Fraction(order) * a.grain)
    else:
        t = a.trunc - 2 * a.start
        if order is not None:
            t = min(t, ceil(Fraction(order) * a.grain))
    return _invert_idx(a, t)


def div(a, b, order=None):
    """``a / b`` as ``a * invert(b)`` with the inverse taken to just enough precision."""
    a = QSeries._coerce(a)
    b = QSeries._coerce(b)
    if not b.num:
        raise ZeroSeries("division by the zero series")
    if b.trunc is None and len(b.num) == 1:
        res = mul(a, invert(b))
        return res if order is None else res.truncate(order)
    a, b = a._aligned(b)
    g = a.grain
    cap = None if order is None else ceil(Fraction(order) * g)
    if a.trunc is None:
        if cap is None:
            if b.trunc is None:
                raise ValueError("exact / exact division needs an order")
            # the inverse of b is known to relative precision b.trunc - b.start
            if not a.num:
                return QSeries._new(g, 0, (), 1, None)
            cap = a._val_idx() + b.trunc - 2 * b.start
        t_res = cap
    else:
        t_res = a.trunc - b.start
        if cap is not None:
            t_res = min(t_res, cap)
    if a.trunc is None and not a.num:
        return QSeries._new(g, 0, (), 1, None)
    va = a._val_idx()
    t_inv = t_res - va
    if b.trunc is not None:
        t_inv = min(t_inv, b.trunc - 2 * b.start)
    res = mul(a, _invert_idx(b, t_inv))
    return res if cap is None else QSeries._new(g, res.start, res.num, res.den, _min_trunc(res.trunc, cap))


def dilate(a, r):
    """Substitute ``q -> q^r`` for a positive rational ``r``."""
    r = Fraction(r)
    if r <= 0:
        raise ValueError("dilation factor must be positive")
    a = QSeries._coerce(a)
    p, s = r.numerator, r.denominator
    grain = a.grain * s
    if a.num:
        num = [0] * ((len(a.num) - 1) * p + 1)
        num[::p] = a.num
    else:
        num = []
    trunc = None if a.trunc is None else a.trunc * p
    return QSeries._new(grain, a.start * p, num, a.den, trunc).reduce_grain()


def monomial(coef, exp, order=None):
    exp = Fraction(exp)
    grain = exp.denominator
    if order is not None:
        grain = lcm(grain, Fraction(order).denominator)
    return QSeries.from_terms({exp: coef}, order=order, grain=grain)


def first_mismatch(a, b):
    """Smallest exponent where ``a`` and ``b`` differ below their common truncation."""
    a = QSeries._coerce(a)
    a, b = a._aligned(b)
    d = a - b
    if d.num:
        return Fraction(d.start, d.grain)
    return None


def _grain_of(*vals):
    return lcm(1, *(Fraction(v).denominator for v in vals))


def pochhammer_finite(coef, base_exp, step, n):
    """``prod_{j<n} (1 - coef q^(base_exp + j*step))`` as an exact polynomial."""
    coef = _frac(coef)
    base_exp, step = Fraction(base_exp), Fraction(step)
    if n < 0:
        raise ValueError("length must be nonnegative")
    grain = _grain_of(base_exp, step)
    result = QSeries.one(grain=grain)
    if coef == 0:
        return result
    for j in range(n):
        e = base_exp + j * step
        if e == 0 and coef == 1:
            return QSeries.zero(grain=grain)
        result = result.mul_binomial(coef, e)
    return result


def pochhammer_infinite(coef, base_exp, step, order):
    """``prod_{j>=0} (1 - coef q^(base_exp + j*step))`` truncated at ``q^order``."""
    coef = _frac(coef)
    base_exp, step, order = Fraction(base_exp), Fraction(step), Fraction(order)
    if step <= 0:
        raise DivergentProduct("step must be positive for an infinite product")
    grain = _grain_of(base_exp, step, order)
    if coef == 0:
        return QSeries.one(order, grain)
    head = QSeries.one(grain=grain)
    j = 0
    v_neg = Fraction(0)
    while base_exp + j * step <= 0:
        e = base_exp + j * step
        if e == 0 and coef == 1:
            return QSeries.zero(order, grain)
        head = head.mul_binomial(coef, e)
        if e < 0:
            v_neg += e
        j += 1
    need = order - v_neg
    tail = QSeries.one(need, grain)
    while base_exp + j * step < need:
        tail = tail.mul_binomial(coef, base_exp + j * step)
        j += 1
    return (head * tail).truncate(order)
