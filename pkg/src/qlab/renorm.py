"""Renormalization: sums of tails of q-inverted summands and their splitting
into a registered shadow and ghost."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from qlab import qterm
from qlab.catalog import RENORM_TERMS
from qlab.errors import (
    NoLimitError,
    NonStabilizing,
    NonVanishing,
    UnknownFamily,
    UnknownSeries,
    UnregisteredDecomposition,
)
from qlab.series import QSeries, first_mismatch

__all__ = [
    "WINDOW",
    "tail_sum",
    "RenormResult",
    "renormalize",
    "chapman_rhs",
    "chapman_lhs",
    "verify_sot_family",
    "sot_families",
    "decompositions",
    "tail_series",
    "shadow_series",
    "ghost_series",
]

WINDOW = 8


def _cap(order):
    return int(4 * Fraction(order) + 64)


def _negligible(x, order):
    if x.num:
        return x.valuation >= order
    return x.order is None or x.order >= order


def tail_sum(d, order):
    """``sum_n (H_n(1/q) - H_inf(1/q))`` for the summand ``d`` of ``H``."""
    if isinstance(d, str):
        d = qterm.parse(d)
    order = Fraction(order)
    inv = qterm.q_inverse(d)
    poly, n0 = qterm._valuation_shape(inv)
    probe = [qterm.valuation_at(inv, n) for n in range(n0 + 2)]
    floor = min([Fraction(0)] + [v for v in probe if v is not None])
    if poly.degree == 0:
        floor = min(floor, poly(0))
    work = order - min(floor, Fraction(0))
    limit = qterm.limit_at_infinity(inv, work)
    if limit is qterm.NO_LIMIT:
        raise NoLimitError(f"q-inverted terms have no limit: {qterm.render(inv)}")
    limit = limit.truncate(order)
    walker = qterm.TermWalker(inv, order, 0, floor_shift=floor)
    total = QSeries.zero(order, walker.grain)
    run = 0
    n = 0
    while True:
        diff = walker.value() - limit
        total = total + diff
        run = run + 1 if _negligible(diff, order) else 0
        if run >= WINDOW:
            return total.truncate(order)
        n += 1
        if n > _cap(order):
            raise NonStabilizing(f"tail differences still nonzero at n = {n}")
        walker.advance()


# ----------------------------------------------------------------------
# registered decompositions


@lru_cache(maxsize=1)
def _registry_data():
    from qlab.harness import load_registry_data

    return load_registry_data()


def decompositions():
    return dict(_registry_data().get("decompositions", {}))


def sot_families():
    return dict(_registry_data().get("sot_families", {}))


def _decomposition(name, alternate=None):
    table = decompositions()
    if name not in table:
        raise UnregisteredDecomposition(name)
    entry = table[name]
    if alternate:
        alts = entry.get("alternates", {})
        if alternate not in alts:
            raise UnregisteredDecomposition(f"{name} has no alternate {alternate!r}")
        entry = alts[alternate]
    return entry


def tail_series(name, order):
    if name not in RENORM_TERMS:
        raise UnknownSeries(name)
    return _tail_cached(name, Fraction(order))


@lru_cache(maxsize=128)
def _tail_cached(name, order):
    return tail_sum(RENORM_TERMS[name], order)


def shadow_series(name, order, alternate=None):
    from qlab.expr import evaluate

    return evaluate(_decomposition(name, alternate)["shadow"], order)


def ghost_series(name, order, alternate=None):
    from qlab.expr import evaluate

    return evaluate(_decomposition(name, alternate)["ghost"], order)


def _rows(s):
    return [[str(e), str(c)] for e, c in s.items()]


@dataclass
class RenormResult:
    id: str
    order: Fraction
    tail: QSeries
    shadow: QSeries
    ghost: QSeries
    residual: QSeries

    @property
    def residual_zero(self):
        return self.first_mismatch is None

    @property
    def first_mismatch(self):
        return first_mismatch(self.residual, QSeries.zero(self.order))

    def to_dict(self):
        fm = self.first_mismatch
        return {
            "id": self.id,
            "order": str(self.order),
            "tail": _rows(self.tail),
            "shadow": _rows(self.shadow),
            "ghost": _rows(self.ghost),
            "residual_zero": fm is None,
            "first_mismatch": None if fm is None else str(fm),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def renormalize(name, order, alternate=None):
    """Tail, shadow and ghost of a registered series, with the residual."""
    order = Fraction(order)
    _decomposition(name, alternate)
    tail = tail_series(name, order)
    shadow = shadow_series(name, order, alternate)
    ghost = ghost_series(name, order, alternate)
    residual = (tail - shadow - ghost).truncate(order)
    return RenormResult(name, order, tail, shadow, ghost, residual)


# ----------------------------------------------------------------------
# Chapman's lemma


def _family(d, order):
    if callable(d):
        return lambda n: QSeries._coerce(d(n)).truncate(order)
    if isinstance(d, str):
        d = qterm.parse(d)
    return lambda n: qterm.expand(d, n, order)


def chapman_rhs(d, order):
    """``sum_{n>=1} n a_n prod_{j<n} (1 + a_j)``; ``d`` gives ``a_n`` for ``n >= 1``."""
    order = Fraction(order)
    a = _family(d, order)
    prod = QSeries.one(order)
    total = QSeries.zero(order)
    run = 0
    n = 1
    while run < WINDOW:
        if n > _cap(order):
            raise NonVanishing("a_n does not tend to zero q-adically")
        an = a(n)
        total = total + (an * prod).scale(n)
        prod = (prod * (1 + an)).truncate(order)
        run = run + 1 if _negligible(an, order) else 0
        n += 1
    return total.truncate(order)


def chapman_lhs(d, order):
    """``sum_{N>=0} (prod_{j>=1} (1+a_j) - prod_{j<=N} (1+a_j))``."""
    order = Fraction(order)
    a = _family(d, order)
    partial = [QSeries.one(order)]
    run = 0
    n = 1
    while run < WINDOW:
        if n > _cap(order):
            raise NonVanishing("a_n does not tend to zero q-adically")
        an = a(n)
        partial.append((partial[-1] * (1 + an)).truncate(order))
        run = run + 1 if _negligible(an, order) else 0
        n += 1
    full = partial[-1]
    total = QSeries.zero(order)
    for p in partial:
        total = total + (full - p)
    return total.truncate(order)


# ----------------------------------------------------------------------
# sums-of-tails families


def verify_sot_family(family, order):
    """Expand both sides of a registered sums-of-tails specialization."""
    from qlab.expr import evaluate

    fams = sot_families()
    if family not in fams:
        raise UnknownFamily(family)
    order = Fraction(order)
    entry = fams[family]
    if order <= 0:
        return {"family": family, "order": str(order), "status": "match", "first_mismatch": None}
    lhs = evaluate(entry["lhs"], order)
    rhs = evaluate(entry["rhs"], order)
    fm = first_mismatch(lhs, rhs)
    return {
        "family": family,
        "order": str(order),
        "status": "match" if fm is None else "mismatch",
        "first_mismatch": None if fm is None else str(fm),
    }
