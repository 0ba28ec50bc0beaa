"""A small language for q-hypergeometric summands ``H_n(q)``.

Grammar (whitespace is ignored)::

    term    := ["-"] factor { ("*" | "/") factor }
    factor  := atom [ "^" power ]
    atom    := INT | "q" | "poch(" base ";" step ")_" length | "(" inner ")"
    inner   := monomial                    -- e.g. (-1), (-q), (2*q^3)
             | "1" ("+"|"-") q-monomial   -- a linear factor (1 +- q^(un+v))
    power   := INT | "n" | "(" poly ")"    -- "(poly)" only on a bare q
    base    := ["-"] [rational ["*"]] ["q" ["^" exponent]]
    step    := "q" ["^" exponent]
    length  := INT | "n" | "inf" | "(" poly ")"
    poly    := polynomial in n with rational coefficients

Geometric factors such as ``(-q)^n`` are folded into the sign pattern and
the exponent polynomial, so every descriptor has a single canonical form
and ``parse(render(d)) == d``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import ceil, floor, lcm

from qlab.errors import (
    OutOfFragment,
    SemanticsError,
    TermSyntaxError,
    ZeroDenominator,
)
from qlab.series import QSeries, div, pochhammer_finite, pochhammer_infinite

__all__ = [
    "Poly",
    "PochFactor",
    "LinFactor",
    "TermDescriptor",
    "NoLimit",
    "NO_LIMIT",
    "parse",
    "render",
    "expand",
    "q_inverse",
    "limit_at_infinity",
    "TermWalker",
]


# ----------------------------------------------------------------------
# polynomials in n


class Poly(tuple):
    """Polynomial in ``n`` with Fraction coefficients, lowest degree first."""

    def __new__(cls, coeffs=()):
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        return super().__new__(cls, cs)

    @classmethod
    def const(cls, c):
        return cls([c])

    @classmethod
    def n(cls):
        return cls([0, 1])

    @property
    def degree(self):
        return len(self) - 1

    def coeff(self, k):
        return self[k] if k < len(self) else Fraction(0)

    def __call__(self, n):
        acc = Fraction(0)
        for c in reversed(self):
            acc = acc * n + c
        return acc

    def __add__(self, other):
        other = _as_poly(other)
        m = max(len(self), len(other))
        return Poly(self.coeff(k) + other.coeff(k) for k in range(m))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-c for c in self)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        if not self or not other:
            return Poly()
        out = [Fraction(0)] * (len(self) + len(other) - 1)
        for i, a in enumerate(self):
            for j, b in enumerate(other):
                out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Poly([1])
        for _ in range(k):
            out = out * self
        return out

    def scale(self, c):
        return Poly(c * x for x in self)

    def substitute_shift(self, k):
        """``p(n + k)``."""
        out = Poly()
        shifted = Poly([k, 1])
        for c in reversed(self):
            out = out * shifted + Poly([c])
        return out

    def render(self):
        if not self:
            return "0"
        parts = []
        for k in range(len(self) - 1, -1, -1):
            c = self[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("n" if k == 1 else f"n^{k}")
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(parts)

    def __repr__(self):
        return f"Poly({self.render()})"


def _as_poly(x):
    return x if isinstance(x, Poly) else Poly([x])


# ----------------------------------------------------------------------
# descriptor types


@dataclass(frozen=True, order=True)
class PochFactor:
    """``(coef*q^base_exp; q^step)_L`` with ``L = u*n + v`` (``u is None``: infinite)."""

    coef: Fraction
    base_exp: Fraction
    step: Fraction
    u: int | None
    v: int
    power: int = 1  # positive: numerator, negative: denominator

    @property
    def position(self):
        return "numerator" if self.power > 0 else "denominator"

    @property
    def length(self):
        return None if self.u is None else (self.u, self.v)

    def key(self):
        return (self.coef, self.base_exp, self.step, self.u if self.u is not None else -1, self.v)

    def length_at(self, n):
        return None if self.u is None else self.u * n + self.v


@dataclass(frozen=True, order=True)
class LinFactor:
    """``(1 + sign*q^(u*n + v))`` raised to ``power`` (negative: denominator)."""

    u: Fraction
    v: Fraction
    sign: int
    power: int = 1

    @property
    def position(self):
        return "numerator" if self.power > 0 else "denominator"

    @property
    def exp(self):
        return (self.u, self.v)

    def key(self):
        return (self.u, self.v, self.sign)


@dataclass(frozen=True)
class TermDescriptor:
    """Symbolic ``const * (-1)^(n*alt) * q^(exponent(n)) * prod(factors)``."""

    sign_mode: str = "plus"
    const: Fraction = Fraction(1)
    exponent: Poly = field(default_factory=Poly)
    factors: tuple = ()
    linear_factors: tuple = ()

    @property
    def exp_poly(self):
        """``(A, B, C, D)`` with exponent ``(A n^2 + B n + C) / D``."""
        if self.exponent.degree > 2:
            raise ValueError("exponent is not quadratic")
        d = lcm(1, *(c.denominator for c in self.exponent))
        a, b, c = (int(self.exponent.coeff(k) * d) for k in (2, 1, 0))
        return (a, b, c, d)

    @property
    def summable(self):
        """True when the term valuation grows without bound."""
        try:
            poly, _ = _valuation_shape(self)
        except OutOfFragment:
            return False
        return bool(poly.degree >= 1 and poly[-1] > 0)

    def shift(self, k):
        """Descriptor of ``H_(n+k)`` as a function of ``n``."""
        const = self.const
        if self.sign_mode == "alternating" and k % 2:
            const = -const
        factors = tuple(
            replace(f, v=f.v + f.u * k) if f.u is not None else f for f in self.factors
        )
        lins = tuple(replace(f, v=f.v + f.u * k) for f in self.linear_factors)
        return _canonical(self.sign_mode, const, self.exponent.substitute_shift(k), factors, lins)

    def scale(self, c):
        return replace(self, const=self.const * Fraction(c))

    def times(self, other):
        """Product of two descriptors."""
        alt = (self.sign_mode == "alternating") != (other.sign_mode == "alternating")
        return _canonical(
            "alternating" if alt else "plus",
            self.const * other.const,
            self.exponent + other.exponent,
            self.factors + other.factors,
            self.linear_factors + other.linear_factors,
        )

    def reciprocal(self):
        if self.const == 0:
            raise ZeroDenominator("reciprocal of a zero term")
        return _canonical(
            self.sign_mode,
            1 / self.const,
            -self.exponent,
            tuple(replace(f, power=-f.power) for f in self.factors),
            tuple(replace(f, power=-f.power) for f in self.linear_factors),
        )

    def validate(self):
        for f in self.factors:
            if f.u is None:
                if f.step <= 0:
                    raise SemanticsError("infinite Pochhammer needs a positive step")
                continue
            if f.u < 0 or f.v < 0:
                raise SemanticsError(f"Pochhammer length {f.u}*n + {f.v} is negative for some n >= 0")
        for f in self.linear_factors:
            if f.power < 0 and f.sign == -1:
                if f.u == 0 and f.v == 0:
                    raise SemanticsError("denominator factor 1 - q^0 vanishes")
                if f.u != 0:
                    root = -f.v / f.u
                    if root >= 0 and root.denominator == 1:
                        raise SemanticsError(f"denominator factor vanishes at n = {root}")
        return self

    def __str__(self):
        return render(self)


class NoLimit:
    """Marker value: the term has no q-adic limit as n grows."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NoLimit"

    def __bool__(self):
        return False


NO_LIMIT = NoLimit()


def _canonical(sign_mode, const, exponent, factors, lins):
    const = Fraction(const)
    merged = {}
    for f in factors:
        if f.coef == 0:
            continue
        merged[f.key()] = merged.get(f.key(), 0) + f.power
    pf = []
    for key, pw in merged.items():
        if pw:
            coef, base, step, u, v = key
            if u == 0 and v == 0:
                continue
            pf.append(PochFactor(coef, base, step, None if u == -1 else u, v, pw))
    lmerged = {}
    for f in lins:
        if f.u == 0 and f.v == 0:
            scalar = 1 + f.sign
            if scalar == 0:
                if f.power < 0:
                    raise SemanticsError("denominator factor 1 - q^0 vanishes")
                const = Fraction(0)
            else:
                const *= Fraction(scalar) ** f.power
            continue
        lmerged[f.key()] = lmerged.get(f.key(), 0) + f.power
    lf = [LinFactor(u, v, s, pw) for (u, v, s), pw in lmerged.items() if pw]
    return TermDescriptor(
        sign_mode=sign_mode,
        const=const,
        exponent=_as_poly(exponent),
        factors=tuple(sorted(pf)),
        linear_factors=tuple(sorted(lf)),
    )


# ----------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+)|(poch|inf|q|n)|(.))")


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind, self.text, self.pos = kind, text, pos


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            break
        if m.group(1):
            toks.append(_Tok("int", m.group(1), m.start(1)))
        elif m.group(2):
            toks.append(_Tok("name", m.group(2), m.start(2)))
        elif m.group(3):
            if m.group(3).isalpha():
                raise TermSyntaxError(f"unknown symbol {m.group(3)!r}", m.start(3), text)
            toks.append(_Tok("sym", m.group(3), m.start(3)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.encode()) if text.isascii() else len(text)))
    return toks


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        offset = len(self.text[: tok.pos].encode())
        return TermSyntaxError(msg, offset, self.text)

    def accept(self, text):
        if self.tok.text == text and self.tok.kind != "end":
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    # polynomials in n
    def poly(self):
        p = self.poly_term()
        while self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            rhs = self.poly_term()
            p = p + rhs if op == "+" else p - rhs
        return p

    def poly_term(self):
        p = self.poly_unary()
        while self.tok.text in ("*", "/"):
            op = self.tok
            self.i += 1
            rhs = self.poly_unary()
            if op.text == "*":
                p = p * rhs
            else:
                if rhs.degree > 0 or not rhs:
                    raise self.error("can only divide a polynomial by a nonzero constant", op)
                p = p.scale(1 / rhs[0])
        return p

    def poly_unary(self):
        if self.accept("-"):
            return -self.poly_unary()
        if self.accept("+"):
            return self.poly_unary()
        base = self.poly_primary()
        if self.accept("^"):
            if self.tok.kind != "int":
                raise self.error("expected an integer power")
            k = int(self.tok.text)
            self.i += 1
            base = base ** k
        elif self.tok.kind == "name" and self.tok.text == "n":
            # implicit product such as 2n
            self.i += 1
            base = base * Poly.n()
        return base

    def poly_primary(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Poly.const(int(t.text))
        if t.kind == "name" and t.text == "n":
            self.i += 1
            return Poly.n()
        if self.accept("("):
            p = self.poly()
            self.expect(")")
            return p
        raise self.error(f"unexpected {t.text or 'end of input'!r} in polynomial")

    def rational(self):
        neg = self.accept("-")
        if self.tok.kind != "int":
            raise self.error("expected a number")
        val = Fraction(int(self.tok.text))
        self.i += 1
        if self.tok.text == "/" and self.peek().kind == "int":
            self.i += 1
            val /= int(self.tok.text)
            self.i += 1
        return -val if neg else val

    def q_exponent(self):
        """Exponent after ``q``: returns a Poly (defaults to 1)."""
        if not self.accept("^"):
            return Poly.const(1)
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Poly.const(int(t.text))
        if t.kind == "name" and t.text == "n":
            self.i += 1
            return Poly.n()
        if self.accept("("):
            p = self.poly()
            self.expect(")")
            return p
        if self.tok.text == "-" and self.peek().kind == "int":
            self.i += 1
            k = int(self.tok.text)
            self.i += 1
            return Poly.const(-k)
        raise self.error("expected an exponent")

    def monomial(self):
        """``[-] [rational [*]] [q[^e]]`` -> (coef, exponent Poly)."""
        start = self.tok
        neg = self.accept("-")
        coef = Fraction(1)
        have = False
        if self.tok.kind == "int":
            coef = self.rational()
            have = True
            self.accept("*")
        exp = Poly()
        if self.tok.kind == "name" and self.tok.text == "q":
            self.i += 1
            exp = self.q_exponent()
            have = True
        if not have:
            raise self.error("expected a monomial", start)
        return (-coef if neg else coef), exp

    # term grammar
    def term(self):
        acc = _Acc()
        if self.accept("-"):
            acc.const = -acc.const
        self.factor(acc, 1)
        while self.tok.text in ("*", "/"):
            pw = 1 if self.tok.text == "*" else -1
            self.i += 1
            self.factor(acc, pw)
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return acc.build()

    def factor(self, acc, sign):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            val = Fraction(int(t.text))
            k = self.int_power()
            acc.const *= val ** (sign * k)
            return
        if t.kind == "name" and t.text == "q":
            self.i += 1
            exp = self.q_exponent()
            if self.accept("^"):
                k = self.small_int()
                exp = exp.scale(k)
            acc.exponent = acc.exponent + exp.scale(sign)
            return
        if t.kind == "name" and t.text == "poch":
            self.i += 1
            f = self.poch()
            k = self.int_power()
            acc.factors.append(replace(f, power=sign * k))
            return
        if self.accept("("):
            save = self.i
            mono = self.monomial()
            if self.tok.text in ("+", "-") and mono == (1, Poly()):
                op = self.tok.text
                self.i += 1
                c, e = self.monomial()
                if c not in (1, -1) or not e:
                    raise self.error("linear factor must be 1 +- q^(un+v)", self.toks[save])
                if e.degree > 1:
                    raise SemanticsError("linear factor exponent must be linear in n")
                s = c if op == "+" else -c
                self.expect(")")
                k = self.int_power()
                acc.lins.append(LinFactor(e.coeff(1), e.coeff(0), int(s), sign * k))
                return
            self.expect(")")
            coef, exp = mono
            if self.accept("^"):
                if self.tok.kind == "name" and self.tok.text == "n":
                    self.i += 1
                    if coef not in (1, -1):
                        raise OutOfFragment("geometric factor needs coefficient +-1")
                    if coef == -1:
                        acc.alt = not acc.alt
                    acc.exponent = acc.exponent + (exp * Poly.n()).scale(sign)
                    return
                k = self.small_int()
            else:
                k = 1
            if coef == 0 and sign < 0:
                raise ZeroDenominator("division by zero")
            acc.const *= coef ** (sign * k)
            acc.exponent = acc.exponent + exp.scale(sign * k)
            return
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def small_int(self):
        if self.tok.kind != "int":
            raise self.error("expected an integer power")
        k = int(self.tok.text)
        self.i += 1
        return k

    def int_power(self):
        if self.accept("^"):
            return self.small_int()
        return 1

    def poch(self):
        self.expect("(")
        if self.tok.kind == "int" and self.tok.text == "0" and self.peek().text == ";":
            self.i += 1
            coef, exp = Fraction(0), Poly()
        else:
            coef, exp = self.monomial()
        if exp.degree > 0:
            raise SemanticsError("Pochhammer base must not depend on n")
        self.expect(";")
        step_tok = self.tok
        if not (self.tok.kind == "name" and self.tok.text == "q"):
            raise self.error("step must be a power of q")
        self.i += 1
        step = self.q_exponent()
        if step.degree > 0 or step.coeff(0) <= 0:
            raise self.error("step must be a positive constant power of q", step_tok)
        self.expect(")")
        self.expect("_")
        t = self.tok
        if t.kind == "int":
            self.i += 1
            u, v = 0, int(t.text)
        elif t.kind == "name" and t.text == "inf":
            self.i += 1
            u, v = None, 0
        elif t.kind == "name" and t.text == "n":
            self.i += 1
            u, v = 1, 0
        elif self.accept("("):
            p = self.poly()
            self.expect(")")
            if p.degree > 1 or any(c.denominator != 1 for c in p):
                raise SemanticsError("Pochhammer length must be u*n + v with integers u, v")
            u, v = int(p.coeff(1)), int(p.coeff(0))
        else:
            raise self.error("expected a Pochhammer length")
        return PochFactor(Fraction(coef), exp.coeff(0), step.coeff(0), u, v, 1)


class _Acc:
    def __init__(self):
        self.alt = False
        self.const = Fraction(1)
        self.exponent = Poly()
        self.factors = []
        self.lins = []

    def build(self):
        return _canonical(
            "alternating" if self.alt else "plus",
            self.const,
            self.exponent,
            tuple(self.factors),
            tuple(self.lins),
        )


def parse(text):
    """Parse term text into a canonical :class:`TermDescriptor`."""
    return _Parser(text).term().validate()


# ----------------------------------------------------------------------
# rendering


def _render_frac(c):
    return str(c) if c.denominator == 1 and c >= 0 else f"({c})"


def _render_qpow(e):
    e = Fraction(e)
    if e == 1:
        return "q"
    if e.denominator == 1 and e > 0:
        return f"q^{e}"
    return f"q^({e})"


def _render_base(coef, exp):
    if coef == 0:
        return "0"
    sign = "-" if coef < 0 else ""
    mag = abs(coef)
    if exp == 0:
        return f"{sign}{mag}"
    mono = _render_qpow(exp)
    return f"{sign}{mono}" if mag == 1 else f"{sign}{mag}*{mono}"


def _render_len(f):
    if f.u is None:
        return "inf"
    if f.u == 0:
        return str(f.v)
    if f.u == 1 and f.v == 0:
        return "n"
    return f"({Poly([f.v, f.u]).render()})"


def render(d):
    """Canonical text for a descriptor."""
    num, den = [], []
    if d.const != 1:
        num.append(_render_frac(d.const))
    if d.sign_mode == "alternating":
        num.append("(-1)^n")
    if d.exponent:
        num.append(f"q^({d.exponent.render()})")
    for f in d.factors:
        text = f"poch({_render_base(f.coef, f.base_exp)};{_render_qpow(f.step)})_{_render_len(f)}"
        k = abs(f.power)
        if k != 1:
            text += f"^{k}"
        (num if f.power > 0 else den).append(text)
    for f in d.linear_factors:
        op = "+" if f.sign > 0 else "-"
        text = f"(1 {op} q^({Poly([f.v, f.u]).render()}))"
        k = abs(f.power)
        if k != 1:
            text += f"^{k}"
        (num if f.power > 0 else den).append(text)
    if not num:
        num.append("1")
    out = " * ".join(num)
    if den:
        out += " / " + " / ".join(den)
    return out


# ----------------------------------------------------------------------
# q -> 1/q


def q_inverse(d):
    """Descriptor of ``H_n(1/q)`` re-expressed as a term in ``q``.

    Uses ``(c q^e; q^-s)_L = (-c)^L q^(-eL - sL(L-1)/2) (c q^e; q^s)_L``
    for ``c = +-1`` and ``1 + s q^-w = s q^-w (1 + s q^w)``.
    """
    alt = d.sign_mode == "alternating"
    const = d.const
    exponent = -d.exponent
    factors = []
    for f in d.factors:
        if f.u is None:
            raise OutOfFragment("cannot invert q inside an infinite product")
        if f.coef not in (1, -1):
            raise OutOfFragment(f"Pochhammer coefficient {f.coef} is not +-1")
        length = Poly([f.v, f.u])
        neg_c = -f.coef
        # (-c)^L = (-c)^v * ((-c)^u)^n
        const *= neg_c ** (f.v * f.power)
        if neg_c == -1 and (f.u * f.power) % 2:
            alt = not alt
        corr = -(length.scale(f.base_exp)) - (length * (length - 1)).scale(f.step / 2)
        exponent = exponent + corr.scale(f.power)
        factors.append(PochFactor(1 / f.coef, f.base_exp, f.step, f.u, f.v, f.power))
    lins = []
    for f in d.linear_factors:
        const *= Fraction(f.sign) ** f.power
        exponent = exponent - Poly([f.v, f.u]).scale(f.power)
        lins.append(f)
    return _canonical("alternating" if alt else "plus", const, exponent, tuple(factors), tuple(lins))


# ----------------------------------------------------------------------
# valuation analysis


def _poch_valuation(f, n):
    L = f.length_at(n)
    total = Fraction(0)
    j = 0
    while j < L:
        e = f.base_exp + j * f.step
        if e >= 0:
            break
        total += e
        j += 1
    return total


def _poch_neg_count(f):
    """Number of factors with nonpositive exponent."""
    if f.base_exp > 0:
        return 0
    return floor(-f.base_exp / f.step) + 1


def _valuation_shape(d):
    """Return ``(P, n0)``: the valuation equals ``P(n)`` for every ``n >= n0``."""
    poly = d.exponent
    n0 = 0
    for f in d.factors:
        if f.u is None:
            continue
        cnt = _poch_neg_count(f)
        if f.u == 0:
            poly = poly + _poch_valuation(f, 0) * f.power
            continue
        need = max(0, ceil(Fraction(cnt - f.v, f.u)))
        n0 = max(n0, need)
        full = sum(
            (f.base_exp + j * f.step for j in range(cnt) if f.base_exp + j * f.step < 0),
            Fraction(0),
        )
        poly = poly + full * f.power
    for f in d.linear_factors:
        if f.u == 0:
            poly = poly + min(Fraction(0), f.v) * f.power
        elif f.u < 0:
            n0 = max(n0, max(0, ceil(-f.v / f.u)))
            poly = poly + Poly([f.v, f.u]).scale(f.power)
        else:
            n0 = max(n0, max(0, ceil(-f.v / f.u)))
    return Poly(poly), n0


def valuation_at(d, n):
    """Exact valuation of ``H_n`` (``None`` when the term vanishes)."""
    if d.const == 0:
        return None
    val = d.exponent(n)
    for f in d.factors:
        if f.u is None:
            continue
        L = f.length_at(n)
        for j in range(L):
            e = f.base_exp + j * f.step
            if e == 0 and f.coef == 1:
                if f.power > 0:
                    return None
                raise ZeroDenominator("denominator Pochhammer vanishes")
            if e >= 0:
                break
        val += _poch_valuation(f, n) * f.power
    for f in d.linear_factors:
        w = f.u * n + f.v
        if w == 0 and f.sign == -1:
            if f.power > 0:
                return None
            raise ZeroDenominator(f"denominator 1 - q^0 at n = {n}")
        val += min(Fraction(0), w) * f.power
    return val


# ----------------------------------------------------------------------
# expansion


def _grain_for(d, order):
    vals = [Fraction(order)] + list(d.exponent)
    for f in d.factors:
        vals += [f.base_exp, f.step]
    for f in d.linear_factors:
        vals += [f.u, f.v]
    return lcm(1, *(Fraction(v).denominator for v in vals))


class TermWalker:
    """Walks ``H_0, H_1, ...`` updating each term from the previous one.

    Each term is kept as ``scalar * q^shift * unit`` where ``unit`` is a
    power series with constant term 1, so its precision requirement is
    known exactly from the valuation.
    """

    def __init__(self, d, order, n=0, floor_shift=None):
        self.d = d
        self.order = Fraction(order)
        self.grain = _grain_for(d, order)
        self.floor_shift = floor_shift
        self._reset(n)

    def _binomials(self, n):
        """Yield ``(coef, exp, power)`` for every finite factor at ``n``."""
        for f in self.d.factors:
            if f.u is None:
                continue
            for j in range(f.length_at(n)):
                yield f.coef, f.base_exp + j * f.step, f.power
        for f in self.d.linear_factors:
            yield Fraction(-f.sign), f.u * n + f.v, f.power

    def _apply(self, coef, exp, power, unit, prec):
        """Fold ``(1 - coef q^exp)^power`` into the running state."""
        if coef == 0:
            return unit
        k = abs(power)
        if exp == 0:
            c = 1 - coef
            if c == 0:
                self.zeros += power
                return unit
            self.scalar *= c ** power
            return unit
        if exp < 0:
            # 1 - c q^e = -c q^e (1 - q^-e / c)
            self.scalar *= (-coef) ** power
            self.shift += exp * power
            coef, exp = 1 / coef, -exp
        for _ in range(k):
            if power > 0:
                unit = unit.mul_binomial(coef, exp).truncate(prec)
            else:
                unit = unit.div_binomial(coef, exp, prec)
        return unit

    def _reset(self, n):
        self.n = n
        self.scalar = Fraction(self.d.const)
        if self.d.sign_mode == "alternating" and n % 2:
            self.scalar = -self.scalar
        self.shift = self.d.exponent(n)
        self.zeros = 0
        items = list(self._binomials(n))
        # the unit's precision depends on the final shift, which needs all factors
        shift = self.shift
        for coef, exp, power in items:
            if coef != 0 and exp < 0:
                shift += exp * power
        unit = QSeries.one(grain=self.grain)
        prec = self._unit_prec(shift)
        unit = unit.truncate(prec)
        for coef, exp, power in items:
            unit = self._apply(coef, exp, power, unit, prec)
        self.unit = unit

    def _unit_prec(self, shift):
        if self.floor_shift is not None:
            shift = min(shift, self.floor_shift)
        return max(self.order - shift, Fraction(0))

    @property
    def valuation(self):
        if self.zeros > 0 or self.scalar == 0:
            return None
        return self.shift

    def value(self):
        """Current term truncated at the walker's order."""
        if self.zeros < 0:
            raise ZeroDenominator(f"denominator vanishes at n = {self.n}")
        if self.zeros > 0 or self.scalar == 0:
            return QSeries.zero(self.order, self.grain)
        return (self.unit.scale(self.scalar).shift(self.shift)).truncate(self.order)

    def advance(self):
        """Move from ``H_n`` to ``H_(n+1)``."""
        d, n = self.d, self.n
        changes = []
        for f in d.factors:
            if f.u is None or f.u == 0:
                continue
            L0, L1 = f.length_at(n), f.length_at(n + 1)
            for j in range(L0, L1):
                changes.append((f.coef, f.base_exp + j * f.step, f.power))
        for f in d.linear_factors:
            if f.u == 0:
                continue
            changes.append((Fraction(-f.sign), f.u * n + f.v, -f.power))
            changes.append((Fraction(-f.sign), f.u * (n + 1) + f.v, f.power))
        new_shift = self.shift + d.exponent(n + 1) - d.exponent(n)
        for coef, exp, power in changes:
            if coef != 0 and exp < 0:
                new_shift += exp * power
        if d.sign_mode == "alternating":
            self.scalar = -self.scalar
        self.shift += d.exponent(n + 1) - d.exponent(n)
        prec = self._unit_prec(new_shift)
        unit = self.unit.truncate(prec) if self.unit.order is None or self.unit.order > prec else self.unit
        # apply divisions before multiplications so zero factors cancel cleanly
        for coef, exp, power in sorted(changes, key=lambda c: c[2]):
            unit = self._apply(coef, exp, power, unit, prec)
        self.unit = unit
        self.n = n + 1
        return self


def expand(d, n, order):
    """Exact value of ``H_n`` truncated at ``q^order``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return TermWalker(d, order, n).value()


def limit_at_infinity(d, order):
    """q-adic limit of ``H_n`` as ``n`` grows, or ``NO_LIMIT``."""
    if d.const == 0:
        return QSeries.zero(order)
    poly, _ = _valuation_shape(d)
    if poly.degree >= 1:
        return QSeries.zero(order) if poly[-1] > 0 else NO_LIMIT
    # bounded valuation: every n-dependence must be a growing Pochhammer
    # length or a linear factor whose exponent grows
    if d.sign_mode == "alternating":
        return NO_LIMIT
    if d.exponent.degree >= 1:
        # exponent growth cancelled by negative linear factors
        for f in d.linear_factors:
            if f.u < 0:
                return NO_LIMIT
        return NO_LIMIT
    if any(f.u < 0 for f in d.linear_factors):
        return NO_LIMIT
    order = Fraction(order)
    e0 = d.exponent(0)
    slack = max(Fraction(0), -e0)
    for f in d.factors:
        neg = -sum((min(Fraction(0), f.base_exp + j * f.step) for j in range(_poch_neg_count(f))), Fraction(0))
        slack += neg * abs(f.power)
    for f in d.linear_factors:
        if f.u == 0:
            slack += max(Fraction(0), -f.v) * abs(f.power)
    work = order + slack
    acc = QSeries.from_terms({e0: d.const})
    for f in d.factors:
        if f.u is None or f.u > 0:
            p = pochhammer_infinite(f.coef, f.base_exp, f.step, work)
        else:
            p = pochhammer_finite(f.coef, f.base_exp, f.step, f.v)
        acc = _fold(acc, p, f.power, work)
    for f in d.linear_factors:
        if f.u == 0:
            lin = QSeries.constant(1 + f.sign) if f.v == 0 else QSeries.from_terms({0: 1, f.v: f.sign})
            acc = _fold(acc, lin, f.power, work)
    return acc.truncate(order)


def _fold(acc, factor, power, work):
    for _ in range(abs(power)):
        acc = acc * factor if power > 0 else div(acc, factor, work)
    return acc
