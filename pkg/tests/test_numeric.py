import math
from fractions import Fraction

import mpmath
import pytest

from qlab.catalog import catalog_build
from qlab.cyclotomic import zagier_phi
from qlab.errors import OutOfDisk
from qlab.numeric import (
    ComplexVal,
    cocycle_probe,
    cocycle_samples,
    eval_complex,
    radial_order,
    radial_probe,
)
from qlab.series import QSeries


def test_geometric_series_with_error_bound():
    s = QSeries([1] * 60, trunc=60)
    v = eval_complex(s, 0.5, growth=1)
    assert abs(v.value - 2.0) <= v.err + 1e-15
    assert 0 < v.err < 1e-15


def test_unknown_tail_has_infinite_error():
    assert eval_complex(QSeries([1, 1], trunc=2), 0.5).err == math.inf
    assert eval_complex(QSeries([1, 1]), 0.5).err == 0


def test_eta_against_product():
    q = math.exp(-2 * math.pi)
    got = eval_complex(catalog_build("eta", 40), q)
    mpmath.mp.prec = 80
    want = mpmath.mpf(q) ** (mpmath.mpf(1) / 24) * mpmath.qp(q)
    assert abs(got.value - complex(want)) < 1e-12


def test_high_precision_evaluation():
    q = mpmath.mpf(1) / 3
    got = eval_complex(catalog_build("partitions", 200), q, prec=200)
    with mpmath.workprec(200):
        want = 1 / mpmath.qp(q)
        assert abs(got.value - want) < mpmath.mpf(10) ** -50


def test_zero_series_and_disk():
    assert eval_complex(QSeries.zero(10), 0.3).value == 0
    with pytest.raises(OutOfDisk):
        eval_complex(QSeries([1]), 1.0)
    with pytest.raises(OutOfDisk):
        eval_complex(QSeries([1]), 2j)


def test_complexval_validation():
    with pytest.raises(ValueError):
        ComplexVal(0.0, 0.0, -1.0)
    assert abs(ComplexVal.of(3 + 4j, 0.0)) == 5.0


def test_radial_probe_edges():
    assert radial_probe("eta", 0, 1, []) == []
    with pytest.raises(OutOfDisk):
        radial_probe("eta", 0, 1, [0.5, 1.0])
    with pytest.raises(ValueError):
        radial_probe("eta", 0, 1, [0.6, 0.5])


def test_radial_probe_at_a_root():
    # 1/(q;q)_inf at q = i/2
    vals = radial_probe("partitions", 1, 4, [0.5])
    want = 1 / mpmath.qp(0.5j)
    assert abs(vals[0].value - complex(want)) < 1e-12


def test_eta_tilde_toward_one():
    target = zagier_phi(0, 1).to_complex()
    radii = [1 - 2.0**-k for k in range(4, 10)]
    gaps = [abs(-0.5 * v.value - target) for v in radial_probe("eta_tilde", 0, 1, radii)]
    assert gaps[-1] <= 1e-2
    assert all(x >= y for x, y in zip(gaps, gaps[1:]))


def test_radial_order_grows():
    assert radial_order(0.5) < radial_order(0.9) < radial_order(0.99)


def test_d_reciprocal_probe_vanishes():
    # the printed claim: the series d(1/q) is identically zero, so every probe is 0
    vals = radial_probe("renorm_tail(andrews_d)", 0, 1, [0.2, 0.5])
    assert all(abs(v.value) < 1e-12 for v in vals)


# ----------------------------------------------------------------------
# cocycle


def test_cocycle_samples():
    assert cocycle_samples(2) == [Fraction(1, 2), Fraction(1)]
    xs = cocycle_samples(6)
    assert xs == sorted(xs) and len(xs) == len(set(xs))
    assert all(0 < x <= 1 and x.denominator <= 6 for x in xs)


def test_cocycle_probe_report():
    report = cocycle_probe(6)
    assert report["branch"] == "principal"
    assert len(report["samples"]) == len(cocycle_samples(6))
    assert report["max_abs_h"] < 10
    with pytest.raises(ValueError):
        cocycle_probe(1)


def test_cocycle_value_at_one():
    # h(1) = phi(1) + i^(-3/2) phi(-1)
    report = cocycle_probe(2)
    h1 = complex(report["samples"][-1]["h_re"], report["samples"][-1]["h_im"])
    w = complex(mpmath.exp(-1.5 * mpmath.log(1j)))
    want = zagier_phi(1, 1).to_complex() + w * zagier_phi(-1, 1).to_complex()
    assert abs(h1 - want) < 1e-12


def test_cocycle_statistic_stable():
    stats = [cocycle_probe(b)["max_second_diff"] for b in (8, 16)]
    assert stats[1] <= stats[0]


def test_d_reciprocal_probe_matches_closed_form():
    # d_n(1/q) = -q^(2n+1) (-q^2;q^2)_n / (q;q)_(2n+1), summed independently with mpmath
    for rho in (0.2, 0.5):
        (v,) = radial_probe("renorm_tail(andrews_d)", 0, 1, [rho])
        want = -mpmath.nsum(
            lambda n: rho ** (2 * n + 1) * mpmath.qp(-(rho**2), rho**2, n) / mpmath.qp(rho, rho, 2 * n + 1),
            [0, mpmath.inf],
        )
        assert abs(v.value - complex(want)) < 1e-12
