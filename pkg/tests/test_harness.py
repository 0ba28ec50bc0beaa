import csv
import io
from fractions import Fraction

import pytest
import yaml

from qlab.errors import UnknownIdentity, UnknownSeries
from qlab.harness import (
    Identity,
    SeriesCache,
    build,
    export_table,
    load_registry_data,
    parse_id,
    registry,
    verify,
    verify_all,
)
from qlab.series import QSeries

TAGS = {"sec1", "sec2", "sec3", "ajo", "sec4", "sec5", "sec6", "sec7", "roots", "numeric", "corrected",
        "af", "recursion", "chapman", "bilateral", "challenge"}


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# ----------------------------------------------------------------------
# registry


def test_registry_integrity():
    reg = registry()
    assert len(reg) > 100
    for ident, entry in reg.entries.items():
        assert entry.lhs is not None or entry.check is not None, ident
        assert set(entry.tags) <= TAGS, (ident, entry.tags)
        if "corrected" in entry.tags and ident.endswith("-corrected"):
            assert ident[: -len("-corrected")] in reg, ident


def test_registry_rejects_duplicates(tmp_path):
    from qlab.harness import Registry

    data = {"identities": [{"id": "x", "lhs": "q"}, {"id": "x", "lhs": "q"}]}
    with pytest.raises(ValueError):
        Registry(data)
    path = tmp_path / "reg.yaml"
    path.write_text(yaml.safe_dump({"identities": [{"id": "y", "lhs": "q", "rhs": "q"}]}))
    assert load_registry_data(path)["identities"][0]["id"] == "y"


def test_parse_id():
    assert parse_id("fine-12.2") == ("fine-12.2", None)
    assert parse_id("fine-12.2@a=0,b=−1,t=-1") == ("fine-12.2", {"a": "0", "b": "-1", "t": "-1"})
    with pytest.raises(ValueError):
        parse_id("fine-12.2@a")


def test_unknown_identity():
    with pytest.raises(UnknownIdentity):
        verify("no-such-identity", 10)
    with pytest.raises(UnknownSeries):
        build("no_such_series", 10)


# ----------------------------------------------------------------------
# verification


def test_verify_specialization():
    r = verify("fine-12.2@a=0,b=−1,t=−1", 200)
    assert r.status == "match" and r.ok
    assert r.lhs_hash == r.rhs_hash
    assert r.id == "fine-12.2@a=0,b=-1,t=-1"


def test_verify_printed_M1_renormalization():
    assert verify("thm-mock-B-M1", 300).status == "match"


def test_verify_perturbed_rhs():
    entry = Identity(id="perturbed", lhs="sigma", rhs="sigma + q^5")
    r = verify(entry, 60)
    assert r.status == "mismatch"
    assert Fraction(r.first_mismatch_exp) == 5
    assert r.lhs_hash != r.rhs_hash


def test_verify_reports_errors():
    r = verify(Identity(id="broken", lhs="poch(q;q", rhs="1"), 10)
    assert r.status == "error" and not r.ok
    assert "TermSyntaxError" in r.message or "Error" in r.message


def test_verify_is_deterministic():
    a, b = verify("rogers-1", 80), verify("rogers-1", 80)
    assert (a.lhs_hash, a.rhs_hash) == (b.lhs_hash, b.rhs_hash)


def test_verify_all_filter():
    reports = verify_all(150, "sec3", jobs=1)
    assert len(reports) == 9
    assert all(r.status == "match" for r in reports), [(r.id, r.status) for r in reports]
    assert all(r.cases >= 3 for r in reports)
    assert verify_all(50, "nonexistent") == []


@pytest.mark.parametrize("ident", registry().ids("corrected"))
def test_corrected_entries_hold(ident):
    r = verify(ident, 100)
    assert r.status == "match", r.message


@pytest.mark.slow
def test_full_sweep_at_order_50():
    reports = verify_all(50, jobs=1)
    bad = [(r.id, r.status, r.first_mismatch_exp) for r in reports if not r.ok]
    assert not bad, bad


# ----------------------------------------------------------------------
# tables


def test_export_sigma(tmp_path):
    table = rows(export_table("sigma", 58, tmp_path / "sigma.csv").read_text())
    assert table[0] == ["k", "exp_num", "exp_den", "coeff_num", "coeff_den"]
    coeff = {int(r[0]): Fraction(int(r[3]), int(r[4])) for r in table[1:]}
    assert coeff[55] == 2 and coeff[57] == 1


def test_export_sigma_star(tmp_path):
    table = rows(export_table("sigma_star", 71, tmp_path / "s.csv").read_text())
    coeff = {int(r[0]): int(r[3]) for r in table[1:]}
    assert (coeff[66], coeff[67], coeff[70]) == (2, -2, -4)


def test_export_zero_series(tmp_path):
    text = export_table("0", 20, tmp_path / "z.csv").read_text()
    assert rows(text) == [["k", "exp_num", "exp_den", "coeff_num", "coeff_den"]]


def test_export_fractional_exponents(tmp_path):
    table = rows(export_table("eta", 2, tmp_path / "eta.csv").read_text())
    assert table[1][1:3] == ["1", "24"]


# ----------------------------------------------------------------------
# cache


def test_cache_round_trip(tmp_path):
    cache = SeriesCache(tmp_path)
    s = build("f", 80)
    cache.put("f", s)
    got = cache.get("f", 80)
    assert got == s and got.digest() == s.digest()
    assert len(cache.entries()) == 1


def test_cache_prefix(tmp_path):
    cache = SeriesCache(tmp_path)
    cache.build("sigma", 100)
    got = cache.get("sigma", 50)
    assert got.order == 50
    assert got == build("sigma", 50)
    assert cache.get("sigma", 150) is None


def test_cache_version_bump(tmp_path):
    SeriesCache(tmp_path, version="1").put("M2", build("M2", 40))
    bumped = SeriesCache(tmp_path, version="2")
    assert bumped.get("M2", 40) is None
    assert bumped.build("M2", 40) == build("M2", 40)
    assert bumped.get("M2", 40) is not None


def test_cache_evicts_corrupt_entries(tmp_path):
    cache = SeriesCache(tmp_path)
    path = cache.put("psi", build("psi", 30))
    path.write_bytes(b"not a cache blob")
    assert cache.get("psi", 30) is None
    assert not path.exists()


def test_cache_clear(tmp_path):
    cache = SeriesCache(tmp_path)
    cache.put("a", QSeries([1, 2], trunc=2))
    cache.put("b", QSeries([3], trunc=2))
    assert cache.clear() == 2
    assert cache.entries() == []
