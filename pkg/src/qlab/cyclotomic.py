"""Exact arithmetic in cyclotomic fields and terminating sums at roots of unity."""

from __future__ import annotations

import cmath
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from qlab.errors import ZeroInverse

__all__ = [
    "cyclotomic_poly",
    "totient",
    "CycNum",
    "Pole",
    "NonTerminating",
    "Finite",
    "TERMINATING",
    "eval_terminating",
    "eval_terminating_complex",
    "cohen_check",
    "finiteness_scan",
    "finiteness_rule",
    "finiteness_table",
    "zagier_phi",
    "phi_periodicity_check",
    "galois_check",
]


def totient(n):
    return sum(1 for k in range(1, n + 1) if gcd(k, n) == 1)


# ----------------------------------------------------------------------
# integer polynomials, lowest degree first


def _trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _divmod_monic(p, m):
    """Quotient and remainder of ``p`` by the monic polynomial ``m``."""
    p = list(p)
    dm = len(m) - 1
    if len(p) <= dm:
        return [], _trim(p)
    quot = [0] * (len(p) - dm)
    for i in range(len(p) - 1, dm - 1, -1):
        c = p[i]
        if c:
            quot[i - dm] = c
            for j in range(dm + 1):
                p[i - dm + j] -= c * m[j]
    return quot, _trim(p[:dm])


_PHI = {}
_PHI_LOCK = threading.RLock()


def cyclotomic_poly(n):
    """Coefficients of the ``n``-th cyclotomic polynomial, constant term first."""
    hit = _PHI.get(n)
    if hit is not None:
        return hit
    with _PHI_LOCK:
        if n not in _PHI:
            p = [-1] + [0] * (n - 1) + [1]
            for d in range(1, n):
                if n % d == 0:
                    p, rem = _divmod_monic(p, cyclotomic_poly(d))
                    assert not rem
            _PHI[n] = tuple(p)
    return _PHI[n]


def _reduce(p, b):
    return _divmod_monic(p, cyclotomic_poly(b))[1]


# ----------------------------------------------------------------------
# field elements


class CycNum:
    """An element of Q(zeta_b) stored as a polynomial in zeta_b of degree < phi(b)."""

    __slots__ = ("b", "coeffs")

    def __init__(self, b, coeffs=()):
        if b < 1:
            raise ValueError("conductor must be positive")
        self.b = int(b)
        red = _reduce([Fraction(c) for c in coeffs], self.b)
        self.coeffs = tuple(red) + (Fraction(0),) * (self.degree - len(red))

    @property
    def degree(self):
        return len(cyclotomic_poly(self.b)) - 1

    @classmethod
    def from_int(cls, c, b=1):
        return cls(b, [c])

    @classmethod
    def zeta(cls, b, k=1):
        """``zeta_b^k`` for any integer ``k``."""
        k %= b
        return cls(b, [0] * k + [1])

    @property
    def is_zero(self):
        return not any(self.coeffs)

    def _lift_pair(self, other):
        if not isinstance(other, CycNum):
            other = CycNum(self.b, [Fraction(other)])
        if other.b == self.b:
            return self, other
        m = self.b * other.b // gcd(self.b, other.b)
        return self.lift(m), other.lift(m)

    def lift(self, m):
        """Embed into Q(zeta_m); requires ``b | m``."""
        if m % self.b:
            raise ValueError(f"Q(zeta_{self.b}) does not embed in Q(zeta_{m})")
        step = m // self.b
        p = [Fraction(0)] * (step * max(len(self.coeffs) - 1, 0) + 1)
        for i, c in enumerate(self.coeffs):
            p[i * step] = c
        return CycNum(m, p)

    def __add__(self, other):
        x, y = self._lift_pair(other)
        return CycNum(x.b, [u + v for u, v in zip(x.coeffs, y.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return CycNum(self.b, [-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        x, y = self._lift_pair(other)
        prod = [Fraction(0)] * max(len(x.coeffs) + len(y.coeffs) - 1, 1)
        for i, u in enumerate(x.coeffs):
            if u:
                for j, v in enumerate(y.coeffs):
                    if v:
                        prod[i + j] += u * v
        return CycNum(x.b, prod)

    __rmul__ = __mul__

    def inv(self):
        if self.is_zero:
            raise ZeroInverse(f"zero has no inverse in Q(zeta_{self.b})")
        # extended Euclid in Q[x]: s*self + t*Phi_b = 1
        r0 = [Fraction(c) for c in cyclotomic_poly(self.b)]
        r1 = _trim(self.coeffs)
        s0, s1 = [], [Fraction(1)]
        while len(r1) > 1:
            q, r = _divmod_field(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, _poly_sub(s0, _poly_mul(q, s1))
        c = r1[0]
        return CycNum(self.b, [x / c for x in s1])

    def __truediv__(self, other):
        x, y = self._lift_pair(other)
        return x * y.inv()

    def __rtruediv__(self, other):
        return CycNum(self.b, [Fraction(other)]) * self.inv()

    def __pow__(self, k):
        if k < 0:
            return self.inv() ** (-k)
        out, base = CycNum(self.b, [1]), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def times_zeta(self, k):
        """``self * zeta_b^k`` by shifting coefficients."""
        k %= self.b
        return CycNum(self.b, [Fraction(0)] * k + list(self.coeffs))

    def galois(self, k):
        """The automorphism ``zeta_b -> zeta_b^k``."""
        if gcd(k, self.b) != 1:
            raise ValueError(f"{k} is not a unit mod {self.b}")
        k %= self.b
        p = [Fraction(0)] * (k * max(len(self.coeffs) - 1, 0) + 1)
        for i, c in enumerate(self.coeffs):
            p[i * k] += c
        return CycNum(self.b, p)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycNum(self.b, [other])
        if not isinstance(other, CycNum):
            return NotImplemented
        x, y = self._lift_pair(other)
        return x.coeffs == y.coeffs

    def __hash__(self):
        return hash((self.b, self.coeffs))

    def rational(self):
        """The value as a Fraction when it is rational, else ``None``."""
        if all(c == 0 for c in self.coeffs[1:]):
            return self.coeffs[0]
        return None

    def to_complex(self, prec=None):
        if prec is None:
            w = cmath.exp(2j * cmath.pi / self.b)
            return sum((complex(c) * w**i for i, c in enumerate(self.coeffs) if c), 0j)
        import mpmath

        with mpmath.workprec(prec):
            w = mpmath.expjpi(mpmath.mpf(2) / self.b)
            return mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * w**i for i, c in enumerate(self.coeffs) if c)

    def to_dict(self):
        return {"b": self.b, "coeffs": [str(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["b"], [Fraction(c) for c in d["coeffs"]])

    def __repr__(self):
        terms = [f"{c}*z^{i}" if i else str(c) for i, c in enumerate(self.coeffs) if c]
        return f"CycNum({self.b}: {' + '.join(terms) or '0'})"


def _poly_mul(p, q):
    if not p or not q:
        return []
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, u in enumerate(p):
        for j, v in enumerate(q):
            out[i + j] += u * v
    return out


def _poly_sub(p, q):
    n = max(len(p), len(q))
    p = list(p) + [Fraction(0)] * (n - len(p))
    q = list(q) + [Fraction(0)] * (n - len(q))
    return _trim([u - v for u, v in zip(p, q)])


def _divmod_field(p, m):
    p = list(p)
    dm = len(m) - 1
    lead = m[-1]
    quot = [Fraction(0)] * max(len(p) - dm, 1)
    for i in range(len(p) - 1, dm - 1, -1):
        c = p[i] / lead
        if c:
            quot[i - dm] = c
            for j in range(dm + 1):
                p[i - dm + j] -= c * m[j]
    return _trim(quot), _trim(p[:dm])


# ----------------------------------------------------------------------
# terminating sums


@dataclass(frozen=True)
class Pole:
    n: int
    a: int
    b: int

    def to_dict(self):
        return {"verdict": "pole", "n": self.n, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class NonTerminating:
    a: int
    b: int
    bound: int

    def to_dict(self):
        return {"verdict": "nonterminating", "a": self.a, "b": self.b, "bound": self.bound}


@dataclass(frozen=True)
class Finite:
    value: CycNum

    def to_dict(self):
        return {"verdict": "finite", "value": self.value.to_dict()}


@dataclass(frozen=True)
class _Form:
    """``const + scale * sum_n sign(n) q^e(n) prod_{m<=n} num(m) / den(m)``.

    ``num(m)`` and ``den(m)`` list the factors ``(c, k)``, meaning ``1 - c q^k``,
    that step ``m`` adds to the running products, so a vanishing numerator
    factor kills every later term.
    """

    const: int
    scale: int
    sign: object
    exp: object
    num: object
    den: object


def _none(n):
    return ()


TERMINATING = {
    "sigma": _Form(
        1, 1, lambda n: (-1) ** n, lambda n: n + 1,
        lambda n: ((1, n),) if n else (), _none,
    ),
    "sigma_star": _Form(
        0, -2, lambda n: 1, lambda n: n + 1,
        lambda n: ((1, 2 * n),) if n else (), _none,
    ),
    "kontsevich": _Form(
        0, 1, lambda n: 1, lambda n: 0,
        lambda n: ((1, n),) if n else (), _none,
    ),
    "M1": _Form(
        0, 1, lambda n: (-1) ** n, lambda n: 0,
        lambda n: ((1, n),) if n else (), lambda n: ((-1, n),) if n else (),
    ),
    "M2": _Form(
        0, 1, lambda n: 1, lambda n: n + 1,
        lambda n: ((1, 2 * n),) if n else (), lambda n: ((1, 2 * n + 1),),
    ),
}


def _vanishes(c, k, a, b):
    """Whether ``1 - c zeta_b^(a k)`` is zero."""
    r = (a * k) % b
    return (c == 1 and r == 0) or (c == -1 and 2 * r == b)


def scan_bound(b):
    return 2 * b + 4


def _scan(form, a, b, one, power):
    """Shared driver: returns ``("finite", value)``, ``("pole", n)`` or ``("open", None)``."""
    total = one * 0
    ratio = one
    for n in range(scan_bound(b) + 1):
        num, den = form.num(n), form.den(n)
        if any(_vanishes(c, k, a, b) for c, k in num):
            return "finite", total * form.scale + form.const
        if any(_vanishes(c, k, a, b) for c, k in den):
            return "pole", n
        for c, k in num:
            ratio = ratio * (one - power(a * k) * c)
        for c, k in den:
            ratio = ratio / (one - power(a * k) * c)
        total = total + ratio * power(a * form.exp(n)) * form.sign(n)
    return "open", None


def eval_terminating(name, a, b):
    """Evaluate the terminating form of ``name`` at ``q = zeta_b^a``.

    Returns a :class:`CycNum`, a :class:`Pole`, or :class:`NonTerminating`.
    """
    if name not in TERMINATING:
        from qlab.errors import UnknownSeries

        raise UnknownSeries(name)
    if b < 1 or gcd(a, b) != 1:
        raise ValueError(f"need gcd(a, b) = 1, got a={a}, b={b}")
    kind, val = _scan(TERMINATING[name], a, b, CycNum(b, [1]), lambda k: CycNum.zeta(b, k))
    if kind == "finite":
        return val
    if kind == "pole":
        return Pole(val, a, b)
    return NonTerminating(a, b, scan_bound(b))


def eval_terminating_complex(name, a, b):
    """Float evaluation of the same terminating sum; ``None`` at a pole."""
    w = cmath.exp(2j * cmath.pi / b)
    kind, val = _scan(TERMINATING[name], a, b, 1 + 0j, lambda k: w ** (k % b))
    return val if kind == "finite" else None


def _units(b):
    return [a for a in range(b) if gcd(a, b) == 1] if b > 1 else [0]


def cohen_check(b):
    """``sigma(1/zeta) = -sigma*(zeta)`` for every primitive ``b``-th root ``zeta``."""
    rows = []
    for a in _units(b):
        lhs = eval_terminating("sigma", a, b).galois(-1 % b if b > 1 else 1)
        rhs = -eval_terminating("sigma_star", a, b)
        rows.append({"a": a, "b": b, "match": lhs == rhs, "sigma_inv": lhs.to_dict(), "neg_sigma_star": rhs.to_dict()})
    return {"b": b, "all_match": all(r["match"] for r in rows), "rows": rows}


def finiteness_rule(name, b):
    """Parity rule: M1 is finite at odd denominators, M2 at even ones."""
    if name == "M1":
        return b % 2 == 1
    if name == "M2":
        return b % 2 == 0
    raise ValueError(name)


def finiteness_scan(name, a, b):
    if name not in ("M1", "M2"):
        raise ValueError(f"finiteness is defined for M1 and M2, not {name!r}")
    out = eval_terminating(name, a, b)
    if isinstance(out, CycNum):
        return Finite(out)
    return out


def finiteness_table(bound):
    rows = []
    for b in range(1, bound + 1):
        for a in _units(b):
            for name in ("M1", "M2"):
                verdict = finiteness_scan(name, a, b)
                finite = isinstance(verdict, Finite)
                rows.append({
                    "id": name, "a": a, "b": b, "finite": finite,
                    "expected": finiteness_rule(name, b),
                })
    return rows


def zagier_phi(a, b, prefactor="eta"):
    """``phi(a/b) = w * F(e^(2 pi i a/b))`` for Kontsevich's ``F``.

    ``prefactor="eta"`` takes ``w = e^(pi i a/(12 b))``, the normalization under
    which ``phi(x + 1) = e^(pi i/12) phi(x)``; ``prefactor="unit"`` takes
    ``w = e^(2 pi i a/b)``.  The value lives in Q(zeta_24b) or Q(zeta_b).
    """
    if b < 1 or gcd(a, b) != 1:
        raise ValueError(f"need gcd(a, b) = 1, got a={a}, b={b}")
    F = eval_terminating("kontsevich", a % b, b)
    if prefactor == "unit":
        return F.times_zeta(a)
    if prefactor == "eta":
        return F.lift(24 * b).times_zeta(a)
    raise ValueError(f"unknown prefactor {prefactor!r}")


def phi_periodicity_check(bound):
    """``phi(x + 1) = zeta_24 phi(x)`` for every ``x = a/b`` with ``b <= bound``."""
    rows = []
    for b in range(1, bound + 1):
        for a in _units(b):
            lhs = zagier_phi(a + b, b)
            rhs = zagier_phi(a, b) * CycNum.zeta(24, 1)
            rows.append({"a": a, "b": b, "match": lhs == rhs})
    return rows


def galois_check(name, bound):
    """``eval(name, a k, b) = galois_k(eval(name, a, b))`` for all units ``k``."""
    rows = []
    for b in range(2, bound + 1):
        base = eval_terminating(name, 1, b)
        for k in _units(b):
            got = eval_terminating(name, k, b)
            if isinstance(base, CycNum):
                ok = isinstance(got, CycNum) and got == base.galois(k)
            else:
                ok = type(got) is type(base)
            rows.append({"id": name, "b": b, "k": k, "match": ok})
    return rows
