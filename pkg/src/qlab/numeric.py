"""Floating-point evaluation inside the unit disk and probes toward the circle."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import mpmath

from qlab.errors import OutOfDisk
from qlab.series import QSeries

__all__ = [
    "ComplexVal",
    "eval_complex",
    "radial_probe",
    "radial_order",
    "cocycle_samples",
    "cocycle_probe",
]


@dataclass(frozen=True)
class ComplexVal:
    """A complex number with an absolute error bound (``inf`` when unknown)."""

    re: object
    im: object
    err: float = math.inf

    def __post_init__(self):
        if not self.err >= 0:
            raise ValueError("error bound must be nonnegative")

    @classmethod
    def of(cls, z, err=math.inf):
        return cls(z.real, z.imag, err)

    @property
    def value(self):
        if isinstance(self.re, float) and isinstance(self.im, float):
            return complex(self.re, self.im)
        return mpmath.mpc(self.re, self.im)

    def __abs__(self):
        return abs(self.value)

    def to_dict(self):
        return {"re": float(self.re), "im": float(self.im), "err": self.err}


def _as_complex(q, prec):
    if isinstance(q, ComplexVal):
        q = q.value
    if prec is None:
        return complex(q)
    return mpmath.mpc(q)


def eval_complex(s: QSeries, q, prec=None, growth=None):
    """Sum the truncated series ``s`` at ``q``.

    ``prec`` is a binary precision for mpmath; ``None`` means binary64.
    ``growth`` bounds ``|coefficient|`` beyond the truncation; when given the
    result carries the tail bound ``growth * |q|^order / (1 - |q|^(1/grain))``.
    """
    with mpmath.workprec(prec or 53):
        z = _as_complex(q, prec)
        r = abs(z)
        if r >= 1:
            raise OutOfDisk(f"|q| = {float(r)} is not inside the unit disk")
        g = s.grain
        if g == 1:
            base = z
        elif prec is None:
            base = cmath.exp(cmath.log(z) / g) if z != 0 else 0j
        else:
            base = mpmath.exp(mpmath.log(z) / g) if z != 0 else mpmath.mpc(0)
        # Horner over the dense window of exponents
        acc = 0
        for c in reversed(s.num):
            acc = acc * base + c
        if s.num:
            if s.start >= 0:
                acc = acc * base**s.start
            elif z == 0:
                raise OutOfDisk("negative exponents at q = 0")
            else:
                acc = acc / base ** (-s.start)
        acc = acc / s.den
        if s.trunc is None:
            err = 0.0
        elif growth is None:
            err = math.inf
        else:
            rf = float(r)
            tail = rf ** (s.trunc / g) / (1 - rf ** (1 / g))
            err = float(growth) * tail
        if prec is None:
            return ComplexVal(float(complex(acc).real), float(complex(acc).imag), err)
        return ComplexVal(mpmath.re(acc), mpmath.im(acc), err)


def radial_order(rho, digits=17):
    """Truncation order making ``rho^order`` negligible at ``digits`` digits."""
    return max(8, math.ceil(digits * math.log(10) / -math.log(rho)) + 8)


def radial_probe(name, a, b, radii, prec=None, order=None):
    """Evaluate the series ``name`` at ``q = rho e^(2 pi i a/b)`` for each ``rho``.

    ``name`` is any builder expression (a catalog id or a term).
    """
    from qlab.harness import build

    radii = list(radii)
    if any(not 0 < r < 1 for r in radii):
        raise OutOfDisk("radii must lie in (0, 1)")
    if any(x >= y for x, y in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    if not radii:
        return []
    top = order or radial_order(radii[-1])
    s = build(name, top)
    out = []
    with mpmath.workprec(prec or 53):
        for r in radii:
            if prec is None:
                q = r * cmath.exp(2j * math.pi * a / b)
            else:
                q = mpmath.mpf(r) * mpmath.expjpi(mpmath.mpf(2 * a) / b)
            out.append(eval_complex(s.truncate(order or radial_order(r)), q, prec))
    return out


# ----------------------------------------------------------------------
# the cocycle of the Kontsevich function


def cocycle_samples(bound):
    """Reduced fractions ``a/b`` in ``(0, 1]`` with ``b <= bound``, ascending."""
    xs = {Fraction(a, b) for b in range(1, bound + 1) for a in range(1, b + 1) if gcd(a, b) == 1}
    return sorted(xs)


def _phi_complex(x, prec):
    from qlab.cyclotomic import zagier_phi

    return zagier_phi(x.numerator, x.denominator).to_complex(prec)


def cocycle_probe(bound, prec=None):
    """``h(x) = phi(x) + (i x)^(-3/2) phi(-1/x)`` on all sample points.

    ``phi`` is computed exactly in a cyclotomic field and then embedded.
    The power uses the principal logarithm.
    """
    if bound < 2:
        raise ValueError("denominator bound must be at least 2")
    bits = prec or 53
    samples = []
    values = []
    with mpmath.workprec(bits):
        for x in cocycle_samples(bound):
            ix = mpmath.mpc(0, mpmath.mpf(x.numerator) / x.denominator)
            w = mpmath.exp(mpmath.mpf(-3) / 2 * mpmath.log(ix))
            h = mpmath.mpc(_phi_complex(x, prec)) + w * mpmath.mpc(_phi_complex(-1 / x, prec))
            values.append(h)
            samples.append({"x": f"{x.numerator}/{x.denominator}", "h_re": float(h.real), "h_im": float(h.imag)})
        second = [abs(values[i + 1] - 2 * values[i] + values[i - 1]) for i in range(1, len(values) - 1)]
    return {
        "samples": samples,
        "max_second_diff": float(max(second)) if second else 0.0,
        "max_abs_h": float(max(abs(v) for v in values)),
        "branch": "principal",
        "precision_bits": bits,
    }
