"""Truncated polynomials in an auxiliary variable ``x`` over :class:`QSeries`.

A :class:`BiSeries` keeps the coefficients of ``x^0 .. x^(M-1)``; every
coefficient shares one grain and one q-truncation, so two values are
comparable coefficient by coefficient.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from math import lcm

from qlab.errors import ZeroSeries
from qlab.series import QSeries, first_mismatch

__all__ = ["BiSeries", "bi_mul", "bi_substitute_xq"]


class BiSeries:
    __slots__ = ("coeffs", "x_order", "order", "grain")

    def __init__(self, coeffs, x_order, order, grain=None):
        order = Fraction(order)
        coeffs = [QSeries._coerce(c) for c in coeffs][:x_order]
        grain = lcm(grain or 1, order.denominator, *(c.grain for c in coeffs))
        self.grain = grain
        self.order = order
        self.x_order = x_order
        zero = QSeries.zero(order, grain)
        fixed = []
        for c in coeffs:
            c = c.truncate(order)
            c = c.rebase(grain)
            if c.order is None or c.order < order:
                raise ValueError("coefficient is known to lower precision than the declared order")
            fixed.append(c)
        fixed += [zero] * (x_order - len(fixed))
        self.coeffs = tuple(fixed)

    @classmethod
    def constant(cls, value, x_order, order):
        return cls([value], x_order, order)

    @classmethod
    def x_power(cls, k, x_order, order, coef=1):
        """``coef * x^k`` where ``coef`` may be a scalar or a QSeries."""
        coeffs = [0] * min(k, x_order)
        if k < x_order:
            coeffs.append(coef)
        return cls(coeffs, x_order, order)

    def _like(self, coeffs):
        return BiSeries(coeffs, self.x_order, self.order, self.grain)

    def _check(self, other):
        if not isinstance(other, BiSeries):
            raise TypeError("expected a BiSeries")
        if other.x_order != self.x_order or other.order != self.order:
            raise ValueError("BiSeries operands must share x- and q-truncations")

    def __getitem__(self, j):
        return self.coeffs[j]

    def __add__(self, other):
        if not isinstance(other, BiSeries):
            return self + BiSeries.constant(other, self.x_order, self.order)
        self._check(other)
        return self._like([a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return self._like([-a for a in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, BiSeries):
            return bi_mul(self, other)
        return self._like([a * other for a in self.coeffs])

    __rmul__ = __mul__

    def shift_x(self, k):
        """Multiply by ``x^k`` (``k >= 0``)."""
        return self._like([QSeries.zero(self.order, self.grain)] * k + list(self.coeffs))

    def substitute_xq(self, m):
        return bi_substitute_xq(self, m)

    def div_x_binomial(self, c, k, e):
        """Divide by ``1 - c x^k q^e`` for ``k >= 1``."""
        if k < 1:
            raise ValueError("x-degree of the binomial must be positive")
        step = QSeries.from_terms({Fraction(e): c})
        out = []
        for j, a in enumerate(self.coeffs):
            if j >= k:
                a = a + (step * out[j - k]).truncate(self.order)
            out.append(a)
        return self._like(out)

    def invert(self):
        a0 = self.coeffs[0]
        if a0.is_zero:
            raise ZeroSeries("constant term in x is zero")
        inv0 = 1 / a0
        out = [inv0.truncate(self.order)]
        for j in range(1, self.x_order):
            acc = QSeries.zero(self.order, self.grain)
            for i in range(1, j + 1):
                if not self.coeffs[i].is_zero:
                    acc = acc + self.coeffs[i] * out[j - i]
            out.append((-(acc * inv0)).truncate(self.order))
        return self._like(out)

    def __truediv__(self, other):
        if isinstance(other, BiSeries):
            return self * other.invert()
        return self._like([a / other for a in self.coeffs])

    def specialize(self, coef, exp):
        """Substitute ``x = coef * q^exp`` (``exp > 0``) into a QSeries.

        Terms beyond the x-truncation would contribute from
        ``q^(x_order*exp + lowest valuation)`` on, so the result is cut there.
        """
        exp = Fraction(exp)
        if exp <= 0:
            raise ValueError("specialization exponent must be positive")
        vals = [c.valuation for c in self.coeffs if not c.is_zero]
        floor_val = min(vals + [Fraction(0)])
        total = QSeries.zero(self.order)
        for j, c in enumerate(self.coeffs):
            if not c.is_zero:
                total = total + c.shift(j * exp) * Fraction(coef) ** j
        return total.truncate(min(self.order, self.x_order * exp + floor_val))

    def first_mismatch(self, other):
        """``(j, exponent)`` of the first differing coefficient, or ``None``."""
        self._check(other)
        for j, (a, b) in enumerate(zip(self.coeffs, other.coeffs)):
            e = first_mismatch(a, b)
            if e is not None:
                return j, e
        return None

    def __eq__(self, other):
        if not isinstance(other, BiSeries):
            return NotImplemented
        return self.first_mismatch(other) is None

    __hash__ = None

    def digest(self):
        h = hashlib.sha256()
        for c in self.coeffs:
            h.update(c.canonical().encode())
            h.update(b"|")
        return h.hexdigest()

    def __repr__(self):
        parts = [f"({c.format(4)})*x^{j}" for j, c in enumerate(self.coeffs) if not c.is_zero]
        return f"BiSeries({' + '.join(parts) or '0'}; O(x^{self.x_order}), O(q^{self.order}))"


def bi_mul(a, b):
    a._check(b)
    m = a.x_order
    out = []
    for j in range(m):
        acc = QSeries.zero(a.order, a.grain)
        for i in range(j + 1):
            if not a.coeffs[i].is_zero and not b.coeffs[j - i].is_zero:
                acc = acc + a.coeffs[i] * b.coeffs[j - i]
        out.append(acc.truncate(a.order))
    return a._like(out)


def bi_substitute_xq(a, m):
    """Replace ``x`` by ``x q^m``: the ``x^j`` coefficient gains ``q^(j*m)``."""
    m = Fraction(m)
    if m <= 0:
        raise ValueError("substitution exponent must be positive")
    return a._like([c.shift(j * m).truncate(a.order) for j, c in enumerate(a.coeffs)])

