"""Builder expressions: a small language for both sides of an identity.

Syntax in brief::

    2*q^(n^2) / poch(q;q^2)_(n+1)        terms, rational powers of q
    poch(-q; q)_inf, hpoch(a, b; q)_n    Pochhammer symbols
    sum(n=0..N: ...)  sum(n=1: ...)      finite and infinite sums
    sum(n=-inf..inf: ...)                bilateral sums
    tails(n=0: H)                        sum of H_n - lim H_n
    altsum(n=0: X)                       Abel-regularized sum of (-1)^n X_n
    chapman(j: a_j)                      sum n a_n prod_{j<n} (1 + a_j)
    fine(a, b, t), fine(a, b, t, base)   Fine's F(a, b; t)
    sigma, M1, ...                       catalog series by name

Everything is evaluated to a working order with honest truncation; when a
result comes back short the whole expression is re-evaluated with more room.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from math import ceil

from qlab import catalog
from qlab.errors import (
    NoLimitError,
    NonConvergent,
    NonStabilizing,
    TermSyntaxError,
    UnknownSeries,
    ZeroDenominator,
)
from qlab.series import QSeries, div, invert, pochhammer_infinite

__all__ = ["parse_expr", "evaluate", "Evaluator", "free_names"]

WINDOW = 8

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<str>\"[^\"]*\"|'[^']*')"
    r"|(?P<op>\.\.|[-+*/^(),;:=_]))"
)


def _tokenize(text):
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise TermSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


_SUM_FORMS = {"sum", "tails", "altsum", "chapman", "prod"}


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg):
        raise TermSyntaxError(msg, self.tok[2], self.text)

    def accept(self, value):
        if self.tok[0] in ("op", "name") and self.tok[1] == value:
            self.i += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            self.error(f"expected {value!r}")

    def parse(self):
        node = self.expr()
        if self.tok[0] != "end":
            self.error("trailing input")
        return node

    def expr(self):
        node = self.term()
        while True:
            if self.accept("+"):
                node = ("add", node, self.term())
            elif self.accept("-"):
                node = ("sub", node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            if self.accept("*"):
                node = ("mul", node, self.unary())
            elif self.accept("/"):
                node = ("div", node, self.unary())
            else:
                return node

    def unary(self):
        if self.accept("-"):
            return ("neg", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        node = self.primary()
        while self.accept("^"):
            if self.accept("-"):
                node = ("pow", node, ("neg", self.primary()))
            else:
                node = ("pow", node, self.primary())
        return node

    def length(self):
        kind, value, _ = self.tok
        if kind == "num":
            self.i += 1
            return ("num", Fraction(int(value)))
        if kind == "name":
            self.i += 1
            return ("var", value)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected a length")

    def primary(self):
        kind, value, _ = self.tok
        if kind == "num":
            self.i += 1
            return ("num", Fraction(int(value)))
        if kind == "str":
            self.i += 1
            return ("str", value[1:-1])
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if kind != "name":
            self.error("expected an expression")
        self.i += 1
        if value in ("poch", "hpoch") and self.accept("("):
            args = [self.expr()]
            if value == "hpoch":
                self.expect(",")
                args.append(self.expr())
            self.expect(";")
            step = self.expr()
            self.expect(")")
            self.expect("_")
            ln = self.length()
            if value == "poch":
                return ("poch", args[0], step, ln)
            return ("hpoch", args[0], args[1], step, ln)
        if value in _SUM_FORMS and self.tok[1] == "(":
            self.expect("(")
            var = self.tok[1]
            if self.tok[0] != "name":
                self.error("expected an index variable")
            self.i += 1
            lo = hi = None
            if self.accept("="):
                lo = self.expr()
                if self.accept(".."):
                    hi = self.expr()
            self.expect(":")
            body = self.expr()
            self.expect(")")
            return ("sum", value, var, lo, hi, body)
        if self.accept("("):
            args = []
            if not self.accept(")"):
                args.append(self.expr())
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
            return ("call", value, tuple(args))
        if value == "q":
            return ("q",)
        return ("var", value)


@lru_cache(maxsize=1024)
def parse_expr(text):
    return _Parser(text).parse()


def free_names(node):
    """Names a node depends on, minus variables bound inside it."""
    kind = node[0]
    if kind == "var":
        return frozenset([node[1]])
    if kind in ("num", "q", "str"):
        return frozenset()
    if kind == "sum":
        _, _, var, lo, hi, body = node
        inner = free_names(body) - {var}
        for part in (lo, hi):
            if part is not None:
                inner |= free_names(part)
        return inner
    if kind == "call":
        out = frozenset()
        for a in node[2]:
            out |= free_names(a)
        return out
    out = frozenset()
    for child in node[1:]:
        if isinstance(child, tuple):
            out |= free_names(child)
    return out


# ----------------------------------------------------------------------
# evaluation

_INF = object()


def _monomial(x):
    """``(coef, exp)`` if ``x`` is an exact monomial (or scalar), else ``None``."""
    if isinstance(x, Fraction):
        return x, Fraction(0)
    if x.is_exact and len(x.num) == 1:
        return Fraction(x.num[0], x.den), Fraction(x.start, x.grain)
    if x.is_exact and not x.num:
        return Fraction(0), Fraction(0)
    return None


class Evaluator:
    """Evaluates parsed expressions at a fixed working order."""

    def __init__(self, order, params=None):
        self.order = Fraction(order)
        self.params = dict(params or {})
        self._param_values = {}
        self._cache = {}
        self._free = {}

    # -- helpers -------------------------------------------------------

    def free(self, node):
        key = id(node)
        if key not in self._free:
            self._free[key] = (free_names(node), node)
        return self._free[key][0]

    def _key(self, node, env, drop=()):
        names = self.free(node)
        return (id(node),) + tuple(sorted((k, env[k]) for k in names if k in env and k not in drop))

    def _base_key(self, node, env):
        """Cache key of a Pochhammer symbol that ignores its length."""
        return (id(node),) + self._key(node[1], env)[1:] + self._key(node[2], env)[1:]

    def trim(self, x):
        if isinstance(x, Fraction):
            return x
        if x.is_exact:
            if not x.num or Fraction(x.start + len(x.num) - 1, x.grain) < self.order:
                return x
        return x.truncate(self.order)

    def effval(self, x):
        """Valuation, or the truncation point for a zero known to finite precision."""
        if isinstance(x, Fraction):
            return None if x == 0 else Fraction(0)
        if x.num:
            return x.valuation
        return x.order

    def negligible(self, x):
        v = self.effval(x)
        return v is None or v >= self.order

    @staticmethod
    def as_int(x, what="value"):
        if isinstance(x, QSeries):
            m = _monomial(x)
            if m is None or m[1] != 0:
                raise TypeError(f"{what} must be a scalar")
            x = m[0]
        if x.denominator != 1:
            raise TypeError(f"{what} must be an integer, got {x}")
        return int(x)

    # -- dispatch ------------------------------------------------------

    def eval(self, node, env):
        return getattr(self, "_e_" + node[0])(node, env)

    def _e_num(self, node, env):
        return node[1]

    def _e_str(self, node, env):
        return node[1]

    def _e_q(self, node, env):
        return QSeries.from_terms({1: 1})

    def _e_var(self, node, env):
        name = node[1]
        if name in env:
            return env[name]
        if name in self.params:
            if name not in self._param_values:
                spec = self.params[name]
                if isinstance(spec, str):
                    value = self.eval(parse_expr(spec), {})
                elif isinstance(spec, QSeries):
                    value = spec
                else:
                    value = Fraction(spec)
                self._param_values[name] = value
            return self._param_values[name]
        if name == "inf":
            return _INF
        key = ("catalog", name)
        if key not in self._cache:
            try:
                self._cache[key] = catalog.catalog_build(name, self.order)
            except UnknownSeries:
                raise UnknownSeries(f"unknown name {name!r}") from None
        return self._cache[key]

    def _e_neg(self, node, env):
        return -self.eval(node[1], env)

    def _e_add(self, node, env):
        return self.trim(self.eval(node[1], env) + self.eval(node[2], env))

    def _e_sub(self, node, env):
        return self.trim(self.eval(node[1], env) - self.eval(node[2], env))

    def _e_mul(self, node, env):
        a = self.eval(node[1], env)
        if isinstance(a, Fraction) and a == 0:
            return a
        b = self.eval(node[2], env)
        if isinstance(a, Fraction) and isinstance(b, QSeries):
            return self.trim(b.scale(a))
        return self.trim(a * b)

    def _e_div(self, node, env):
        num = self.eval(node[1], env)
        den_node = node[2]
        if den_node[0] == "poch" or (
            den_node[0] == "pow" and den_node[1][0] == "poch" and den_node[2][0] == "num"
        ):
            inv = self._poch_inverse(den_node, env)
            if isinstance(num, Fraction):
                return self.trim(inv.scale(num))
            return self.trim(num * inv)
        den = self.eval(den_node, env)
        return self.divide(num, den)

    def divide(self, num, den):
        if isinstance(den, Fraction):
            if den == 0:
                raise ZeroDenominator("division by zero")
            return num / den if isinstance(num, Fraction) else num.scale(1 / den)
        if den.is_exact and len(den.num) == 1:
            return self.trim(QSeries._coerce(num) * invert(den))
        if not den.num:
            raise ZeroDenominator("division by a series known to be zero")
        if den.is_exact and len(den.num) == 2:
            # binomial fast path
            items = list(den.items())
            (e0, c0), (e1, c1) = items
            base = QSeries._coerce(num).shift(-e0).scale(1 / c0)
            return self.trim(base.div_binomial(-c1 / c0, e1 - e0, self.order - e0).truncate(self.order))
        return self.trim(div(QSeries._coerce(num), den, self.order))

    def _e_pow(self, node, env):
        base_node, exp_node = node[1], node[2]
        e = self.eval(exp_node, env)
        if isinstance(e, QSeries):
            e = Fraction(self.as_int(e, "exponent"))
        if base_node[0] == "q":
            return QSeries.from_terms({e: 1})
        if base_node[0] == "poch" and e.denominator == 1 and e > 0:
            p = self.eval(base_node, env)
            return self.trim(self._power(p, int(e)))
        b = self.eval(base_node, env)
        if e.denominator != 1:
            raise TypeError("only q may be raised to a fractional power")
        k = int(e)
        if isinstance(b, Fraction):
            if b == 0 and k < 0:
                raise ZeroDenominator("zero to a negative power")
            return b ** k
        m = _monomial(b)
        if m is not None and m[0] != 0:
            return QSeries.from_terms({m[1] * k: m[0] ** k})
        if k < 0:
            b = self.divide(Fraction(1), b)
            k = -k
        return self.trim(self._power(b, k))

    def _power(self, b, k):
        out = QSeries.one()
        for _ in range(k):
            out = self.trim(out * b)
        return out

    # -- calls ---------------------------------------------------------

    def _e_call(self, node, env):
        name, args = node[1], node[2]
        handler = getattr(self, "_call_" + name, None)
        if handler is None:
            raise UnknownSeries(f"unknown function {name!r}")
        return handler(args, env)

    def _call_fine(self, args, env):
        vals = [self.eval(a, env) for a in args]
        base = 1 if len(vals) < 4 else vals[3]
        key = ("fine", tuple(str(v) for v in vals))
        if key not in self._cache:
            a, b, t = (catalog.Monomial.of(v) for v in vals[:3])
            self._cache[key] = catalog.fine_F(a, b, t, self.order, base)
        return self._cache[key]

    def _call_kron(self, args, env):
        d, n = (self.as_int(self.eval(a, env)) for a in args)
        return Fraction(catalog.kronecker(d, n))

    def _call_dilate(self, args, env):
        from qlab.series import dilate

        x = self.eval(args[0], env)
        r = self.eval(args[1], env)
        if isinstance(x, Fraction):
            return x
        return dilate(x, r)

    def _call_series(self, args, env):
        return self._e_var(("var", self.eval(args[0], env)), {})

    def _named(self, args, env):
        a = args[0]
        return a[1] if a[0] in ("var", "str") else self.eval(a, env)

    def _call_shadow(self, args, env):
        from qlab import renorm

        return renorm.shadow_series(self._named(args, env), self.order)

    def _call_ghost(self, args, env):
        from qlab import renorm

        return renorm.ghost_series(self._named(args, env), self.order)

    def _call_renorm_tail(self, args, env):
        from qlab import renorm

        return renorm.tail_series(self._named(args, env), self.order)

    def _call_hecke(self, args, env):
        kind = self._named(args, env)
        param = self.eval(args[1], env) if len(args) > 1 else None
        return catalog.hecke_double(kind, param, self.order)

    def _call_bilateral_lambert(self, args, env):
        return catalog.bilateral_lambert(self.order)

    def _call_crank_positive(self, args, env):
        return catalog.positive_crank_series(self.order)

    def _call_etaq(self, args, env):
        vals = [self.as_int(self.eval(a, env)) for a in args]
        return catalog.eta_quotient(list(zip(vals[::2], vals[1::2])), self.order)

    def _call_lambert(self, args, env):
        vec = self._named(args, env)
        if isinstance(vec, str):
            vec = [int(x) for x in vec.split(",")]
        a, b, s = (self.as_int(self.eval(x, env)) for x in args[1:4])
        return catalog.lambert_sum(vec, a, b, s, self.order)

    # -- Pochhammer symbols ---------------------------------------------

    def _poch_parts(self, node, env):
        _, base_node, step_node, len_node = node
        base = self.eval(base_node, env)
        step = self.eval(step_node, env)
        ms = _monomial(step)
        if ms is None or ms[0] != 1 or ms[1] <= 0:
            raise TypeError("Pochhammer step must be q^s with s > 0")
        ln = self.eval(len_node, env)
        if ln is not _INF:
            ln = self.as_int(ln, "length")
            if ln < 0:
                raise ValueError("negative Pochhammer length")
        return base, ms[1], ln

    def _e_poch(self, node, env):
        base, s, ln = self._poch_parts(node, env)
        mb = _monomial(base)
        key = ("poch",) + self._base_key(node, env)
        if ln is _INF:
            if key not in self._cache:
                if mb is None:
                    raise TypeError("infinite Pochhammer needs a monomial base")
                self._cache[key] = pochhammer_infinite(mb[0], mb[1], s, self.order)
            return self._cache[key]
        store = self._cache.setdefault(key, {0: QSeries.one()})
        start = max(k for k in store if k <= ln)
        acc = store[start]
        for j in range(start, ln):
            if mb is not None:
                if mb[0] == 0:
                    factor = None
                elif mb[1] + j * s == 0:
                    factor = 1 - mb[0]
                else:
                    factor = QSeries.from_terms({0: 1, mb[1] + j * s: -mb[0]})
            else:
                factor = 1 - self.trim(base * QSeries.from_terms({j * s: 1}))
            if factor is not None:
                acc = self.trim(acc * factor) if isinstance(factor, QSeries) else acc.scale(factor)
            store[j + 1] = acc
        return acc

    def _poch_inverse(self, node, env):
        power = 1
        if node[0] == "pow":
            power = self.as_int(node[2][1], "power")
            node = node[1]
        base, s, ln = self._poch_parts(node, env)
        mb = _monomial(base)
        key = ("ipoch",) + self._base_key(node, env)
        if ln is _INF:
            if key not in self._cache:
                self._cache[key] = self.divide(Fraction(1), self._e_poch(node, env))
            inv = self._cache[key]
        else:
            store = self._cache.setdefault(key, {0: QSeries.one()})
            start = max(k for k in store if k <= ln)
            acc = store[start]
            for j in range(start, ln):
                if mb is not None:
                    if mb[0] != 0:
                        acc = self._div_binomial(acc, mb[0], mb[1] + j * s)
                else:
                    factor = 1 - self.trim(base * QSeries.from_terms({j * s: 1}))
                    acc = self.divide(acc, factor)
                store[j + 1] = acc
            inv = store[ln]
        return self._power(inv, power) if power != 1 else inv

    def _div_binomial(self, acc, c, e):
        if e == 0:
            if c == 1:
                raise ZeroDenominator("Pochhammer factor 1 - q^0 in a denominator")
            return acc.scale(1 / (1 - c))
        if e < 0:
            # 1/(1 - c q^e) = -(1/c) q^-e / (1 - q^-e / c)
            return self._div_binomial(acc.shift(-e).scale(-1 / c), 1 / c, -e)
        if acc.is_exact and acc.num and Fraction(acc.start, acc.grain) >= self.order:
            return acc.truncate(self.order)
        return acc.div_binomial(c, e, self.order)

    def _e_hpoch(self, node, env):
        _, a_node, b_node, step_node, len_node = node
        a = self.eval(a_node, env)
        b = self.eval(b_node, env)
        ms = _monomial(self.eval(step_node, env))
        if ms is None or ms[0] != 1 or ms[1] <= 0:
            raise TypeError("Pochhammer step must be q^s with s > 0")
        ln = self.as_int(self.eval(len_node, env), "length")
        acc = QSeries.one()
        for j in range(ln):
            acc = self.trim(acc * self.trim(a - b * QSeries.from_terms({j * ms[1]: 1})))
        return acc

    # -- sums ----------------------------------------------------------

    def _cap(self):
        return int(4 * ceil(self.order) + 64)

    def _e_sum(self, node, env):
        _, kind, var, lo_node, hi_node, body = node
        if kind == "chapman":
            return self._chapman(var, body, env)
        if lo_node == ("neg", ("var", "inf")):
            return self._bilateral(var, body, env)
        lo = None if lo_node is None else self.eval(lo_node, env)
        lo = self.as_int(lo, "lower limit")
        if kind == "tails":
            return self._tails(var, lo, body, env)
        if kind == "altsum":
            return self._altsum(var, lo, body, env)
        if hi_node is None:
            if kind == "prod":
                raise ValueError("infinite products must be written with poch")
            return self._infinite(var, lo, body, env)
        hi = self.eval(hi_node, env)
        if hi is _INF:
            return self._infinite(var, lo, body, env)
        hi = self.as_int(hi, "upper limit")
        return self._finite(node, kind, var, lo, hi, body, env)

    def _finite(self, node, kind, var, lo, hi, body, env):
        key = ("fsum", id(node)) + self._key(body, env, drop=(var,))[1:] + self._key(node[3], env)[1:]
        unit = Fraction(1) if kind == "prod" else Fraction(0)
        store = self._cache.setdefault(key, {lo - 1: unit})
        if hi < lo:
            return unit
        start = max(k for k in store if k <= hi)
        acc = store[start]
        inner = dict(env)
        for n in range(start + 1, hi + 1):
            inner[var] = Fraction(n)
            v = self.eval(body, inner)
            acc = self.trim(acc * v) if kind == "prod" else self.trim(acc + v)
            store[n] = acc
        return acc

    def _infinite(self, var, lo, body, env):
        total = Fraction(0)
        inner = dict(env)
        run = 0
        n = lo
        while run < WINDOW:
            if n - lo > self._cap():
                raise NonStabilizing(f"sum over {var} did not settle below n = {n}")
            inner[var] = Fraction(n)
            v = self.eval(body, inner)
            total = self.trim(total + v)
            run = run + 1 if self.negligible(v) else 0
            n += 1
        return total

    def _bilateral(self, var, body, env):
        total = Fraction(0)
        inner = dict(env)
        run_pos = run_neg = 0
        k = 0
        while run_pos < WINDOW or run_neg < WINDOW:
            if k > self._cap():
                raise NonStabilizing(f"bilateral sum over {var} did not settle")
            for n, side in ((k, "pos"), (-k - 1, "neg")):
                inner[var] = Fraction(n)
                v = self.eval(body, inner)
                total = self.trim(total + v)
                small = self.negligible(v)
                if side == "pos":
                    run_pos = run_pos + 1 if small else 0
                else:
                    run_neg = run_neg + 1 if small else 0
            k += 1
        return total

    def _limit(self, var, lo, body, env):
        inner = dict(env)
        n = max(lo, int(ceil(self.order)) + 8)
        cap = self._cap() + lo
        while True:
            inner[var] = Fraction(n)
            a = self.eval(body, inner)
            inner[var] = Fraction(n + WINDOW)
            b = self.eval(body, inner)
            if self.negligible(self.trim(a - b)):
                return a
            n = 2 * n + WINDOW
            if n > cap:
                raise NoLimitError(f"terms in {var} have no q-adic limit")

    def _tails(self, var, lo, body, env):
        limit = self._limit(var, lo, body, env)
        total = Fraction(0)
        inner = dict(env)
        run = 0
        n = lo
        while run < WINDOW:
            if n - lo > self._cap():
                raise NonStabilizing("tail differences did not settle")
            inner[var] = Fraction(n)
            d = self.trim(self.eval(body, inner) - limit)
            total = self.trim(total + d)
            run = run + 1 if self.negligible(d) else 0
            n += 1
        return total

    def _altsum(self, var, lo, body, env):
        """``sum (-1)^n X_n`` once ``X_n`` has settled, counting the settled tail as half."""
        inner = dict(env)
        values = []
        run = 0
        n = lo
        while run < WINDOW:
            if n - lo > self._cap():
                raise NonConvergent("alternating sum terms do not settle")
            inner[var] = Fraction(n)
            values.append(self.eval(body, inner))
            if len(values) > 1 and self.negligible(self.trim(values[-1] - values[-2])):
                run += 1
            else:
                run = 0
            n += 1
        m = len(values) - 1 - WINDOW
        total = Fraction(0)
        for i, v in enumerate(values[:m]):
            total = self.trim(total + (v if (lo + i) % 2 == 0 else -v))
        half = Fraction((-1) ** ((lo + m) % 2), 2)
        tail = values[m] * half if isinstance(values[m], Fraction) else values[m].scale(half)
        return self.trim(total + tail)

    def _chapman(self, var, body, env):
        from qlab.renorm import chapman_rhs

        inner = dict(env)

        def family(n):
            inner[var] = Fraction(n)
            return QSeries._coerce(self.eval(body, inner))

        return chapman_rhs(family, self.order)


def evaluate(text, order, params=None, max_attempts=6):
    """Evaluate ``text`` to ``q^order`` exactly, widening precision as needed."""
    node = parse_expr(text) if isinstance(text, str) else text
    order = Fraction(order)
    extra = Fraction(0)
    for _ in range(max_attempts):
        ev = Evaluator(order + extra, params)
        value = ev.eval(node, {})
        if isinstance(value, Fraction):
            return QSeries.constant(value, order)
        if value is _INF or isinstance(value, str):
            raise TypeError("expression does not evaluate to a series")
        if value.order is None or value.order >= order:
            return value.truncate(order)
        extra += (order - value.order) + 4
    raise NonConvergent(f"could not reach precision q^{order} (got q^{value.order})")
