"""Identity registry, verification driver, table export and coefficient cache."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

from qlab.errors import QLabError, UnknownIdentity
from qlab.series import QSeries, first_mismatch

__all__ = [
    "ENGINE_VERSION",
    "DEFAULT_ORDER",
    "Identity",
    "Registry",
    "VerifyReport",
    "SeriesCache",
    "load_registry_data",
    "registry",
    "parse_id",
    "verify",
    "verify_all",
    "export_table",
    "build",
]

ENGINE_VERSION = "1"
DEFAULT_ORDER = 200


# ----------------------------------------------------------------------
# registry


def load_registry_data(path=None):
    if path is None:
        text = resources.files("qlab").joinpath("data/registry.yaml").read_text()
    else:
        text = Path(path).read_text()
    return yaml.safe_load(text)


@dataclass(frozen=True)
class Identity:
    id: str
    tags: tuple = ()
    region: str = "unit-disk"
    lhs: str | None = None
    rhs: str | None = None
    also: tuple = ()
    cases: tuple = ()
    prefix: str | None = None
    prefix_order: int | None = None
    coefficients: tuple = ()
    check: str | None = None
    bound: int | None = None
    x_order: int | None = None
    q_order: int | None = None
    exploratory: bool = False
    about: str = ""

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(
            id=d.pop("id"),
            tags=tuple(d.pop("tags", ())),
            also=tuple(d.pop("also", ())),
            cases=tuple(tuple(sorted(c.items())) for c in d.pop("cases", ())),
            coefficients=tuple(sorted(d.pop("coefficients", {}).items())),
            **d,
        )

    @property
    def fixed(self):
        """Printed expansions carry their own length."""
        return self.prefix is not None or bool(self.coefficients)


class Registry:
    def __init__(self, data):
        self.entries = {}
        for raw in data.get("identities", []):
            entry = Identity.from_dict(raw)
            if entry.id in self.entries:
                raise ValueError(f"duplicate identity id {entry.id!r}")
            self.entries[entry.id] = entry

    def __contains__(self, ident):
        return ident in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, ident):
        try:
            return self.entries[ident]
        except KeyError:
            raise UnknownIdentity(ident) from None

    def ids(self, tag=None):
        if tag is None:
            return [i for i, e in self.entries.items() if "numeric" not in e.tags]
        return [i for i, e in self.entries.items() if tag in e.tags]


@lru_cache(maxsize=1)
def registry():
    return Registry(load_registry_data())


def parse_id(text):
    """Split ``"fine-12.2@a=0,b=-1"`` into the id and a parameter dict."""
    text = text.replace("−", "-")
    if "@" not in text:
        return text, None
    base, _, rest = text.partition("@")
    params = {}
    for part in rest.split(","):
        key, sep, value = part.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"bad parameter assignment {part!r} in {text!r}")
        params[key.strip()] = value.strip()
    return base, params


# ----------------------------------------------------------------------
# reports


@dataclass
class VerifyReport:
    id: str
    order: int
    status: str
    first_mismatch_exp: str | None = None
    elapsed_ms: float = 0.0
    lhs_hash: str | None = None
    rhs_hash: str | None = None
    cases: int = 1
    message: str = ""

    @property
    def ok(self):
        return self.status in ("match", "exploratory")

    def to_dict(self):
        return asdict(self)


def _combined(digests):
    if len(digests) == 1:
        return digests[0]
    return hashlib.sha256("|".join(digests).encode()).hexdigest()


class _Outcome:
    """Accumulates comparisons and keeps the smallest mismatch."""

    def __init__(self):
        self.lhs = []
        self.rhs = []
        self.worst = None
        self.notes = []

    def compare(self, a, b, label):
        self.lhs.append(a.digest())
        self.rhs.append(b.digest())
        fm = first_mismatch(a, b)
        if fm is not None:
            self.notes.append(f"{label}: first mismatch at q^{fm}")
            if self.worst is None or fm < self.worst:
                self.worst = fm

    def flag(self, where, lhs_digest, rhs_digest, label):
        self.lhs.append(lhs_digest)
        self.rhs.append(rhs_digest)
        if where is not None:
            self.notes.append(label)
            where = Fraction(where)
            if self.worst is None or where < self.worst:
                self.worst = where


def build(text, order, params=None):
    """Evaluate a builder expression (catalog id, term, or call) to ``q^order``."""
    from qlab.expr import evaluate

    return evaluate(text, order, params)


def _case_label(params):
    if not params:
        return ""
    return "@" + ",".join(f"{k}={v}" for k, v in sorted(params.items()))


def _check_disk(entry, order, params, out):
    cases = [dict(c) for c in entry.cases] or [{}]
    if params is not None:
        cases = [params]
    for case in cases:
        label = entry.id + _case_label(case)
        if entry.lhs is None:
            continue
        if entry.rhs is not None or entry.also:
            lhs = build(entry.lhs, order, case)
            for k, other in enumerate(([entry.rhs] if entry.rhs else []) + list(entry.also)):
                route = "rhs" if (k == 0 and entry.rhs) else f"also[{k - bool(entry.rhs)}]"
                out.compare(lhs, build(other, order, case), f"{label} {route}")
    if entry.prefix is not None:
        n = entry.prefix_order
        out.compare(build(entry.lhs, n), build(entry.prefix, n), f"{entry.id} printed prefix")
    if entry.coefficients:
        top = max(int(e) for e, _ in entry.coefficients) + 1
        s = build(entry.lhs, top)
        want = QSeries.from_terms({e: c for e, c in entry.coefficients}, top)
        got = QSeries.from_terms({e: s[e] for e, _ in entry.coefficients}, top)
        out.compare(got, want, f"{entry.id} printed coefficients")
    return len(cases)


def _run_check(entry, order, out):
    from qlab import checks

    fn = checks.CHECKS.get(entry.check)
    if fn is None:
        raise QLabError(f"{entry.id}: unknown check {entry.check!r}")
    result = fn(entry, order)
    out.flag(result.where, result.lhs_hash, result.rhs_hash, f"{entry.id}: {result.message}")
    return result.cases


def verify(ident, order=DEFAULT_ORDER, reg=None):
    """Verify a registered identity (or an :class:`Identity`) at ``order``."""
    t0 = time.perf_counter()
    params = None
    if isinstance(ident, Identity):
        entry = ident
    else:
        base, params = parse_id(ident)
        entry = (reg or registry()).get(base)
        ident = entry.id + _case_label(params)
    name = ident if isinstance(ident, str) else entry.id
    out = _Outcome()
    try:
        if entry.exploratory:
            s = build(entry.lhs, order)
            return VerifyReport(
                name, order, "exploratory", None,
                (time.perf_counter() - t0) * 1000, s.digest(), None, 1, "expansion only",
            )
        if entry.check:
            ncases = _run_check(entry, order, out)
        else:
            ncases = _check_disk(entry, order, params, out)
    except (QLabError, ArithmeticError, TypeError, ValueError) as exc:
        return VerifyReport(
            name, order, "error", None, (time.perf_counter() - t0) * 1000,
            message=f"{type(exc).__name__}: {exc}",
        )
    elapsed = (time.perf_counter() - t0) * 1000
    status = "match" if out.worst is None else "mismatch"
    return VerifyReport(
        name,
        order,
        status,
        None if out.worst is None else str(out.worst),
        elapsed,
        _combined(out.lhs) if out.lhs else None,
        _combined(out.rhs) if out.rhs else None,
        ncases,
        "; ".join(out.notes),
    )


def _verify_one(args):
    return verify(*args)


def verify_all(order=DEFAULT_ORDER, filter=None, jobs=None):
    """Verify every registered identity (or those tagged ``filter``)."""
    ids = registry().ids(filter)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(ids) <= 1:
        return [verify(i, order) for i in ids]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_verify_one, [(i, order) for i in ids]))


def export_table(name, order, path):
    """Write the coefficient table of ``name`` as CSV; returns the path."""
    s = build(name, order)
    path = Path(path)
    path.write_bytes(s.to_csv().encode())
    return path


# ----------------------------------------------------------------------
# on-disk cache


def default_cache_dir():
    env = os.environ.get("QLAB_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "qlab"


@dataclass
class SeriesCache:
    """Compressed coefficient blobs keyed by series id and engine version.

    A blob stores the series at the largest order built so far; lookups at a
    smaller order return a re-truncated prefix.
    """

    directory: Path = field(default_factory=default_cache_dir)
    version: str = ENGINE_VERSION

    def __post_init__(self):
        self.directory = Path(self.directory)

    def _path(self, name):
        key = hashlib.sha256(f"{name}\0{self.version}".encode()).hexdigest()[:32]
        return self.directory / f"{key}.qsz"

    def _load(self, path):
        blob = path.read_bytes()
        record = json.loads(zlib.decompress(blob))
        series = QSeries.from_canonical(record["series"])
        if series.digest() != record["digest"]:
            raise ValueError("digest mismatch")
        return record, series

    def _stored(self, name):
        path = self._path(name)
        if not path.exists():
            return None
        try:
            record, series = self._load(path)
        except (OSError, ValueError, KeyError, zlib.error):
            path.unlink(missing_ok=True)
            return None
        if record.get("id") != name or record.get("version") != self.version:
            return None
        return series

    def get(self, name, order):
        series = self._stored(name)
        order = Fraction(order)
        if series is None or (series.order is not None and series.order < order):
            return None
        return series.truncate(order)

    def put(self, name, series):
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self._path(name)
        old = self._stored(name)
        if old is not None and (old.order is None or (series.order is not None and old.order >= series.order)):
            return path
        record = {
            "id": name,
            "version": self.version,
            "series": series.canonical(),
            "digest": series.digest(),
        }
        blob = zlib.compress(json.dumps(record).encode())
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
        return path

    def build(self, name, order):
        """Cached :func:`build`."""
        hit = self.get(name, order)
        if hit is not None:
            return hit
        s = build(name, order)
        self.put(name, s)
        return s

    def clear(self):
        n = 0
        if self.directory.exists():
            for p in self.directory.glob("*.qsz"):
                p.unlink()
                n += 1
        return n

    def entries(self):
        if not self.directory.exists():
            return []
        return sorted(p.name for p in self.directory.glob("*.qsz"))
