"""Command line entry point: ``qlab verify | table | renorm | eval-root | probe | cache``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _print_reports(reports, stream):
    width = max((len(r.id) for r in reports), default=10)
    for r in reports:
        where = "" if r.first_mismatch_exp is None else f" first mismatch q^{r.first_mismatch_exp}"
        stream.write(f"{r.id:<{width}}  {r.status:<11} {r.elapsed_ms:9.1f} ms{where}\n")
        if r.status == "error":
            stream.write(f"{'':<{width}}  {r.message}\n")


def cmd_verify(args):
    from qlab.harness import DEFAULT_ORDER, verify, verify_all

    order = args.order or DEFAULT_ORDER
    if args.all or args.tag:
        reports = verify_all(order, args.tag, jobs=args.jobs)
    elif args.ids:
        reports = [verify(i, order) for i in args.ids]
    else:
        sys.stderr.write("qlab verify: give identity ids, --all, or --tag\n")
        return 2
    _print_reports(reports, sys.stdout)
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    bad = [r for r in reports if not r.ok]
    sys.stdout.write(f"{len(reports) - len(bad)}/{len(reports)} ok\n")
    return 0 if not bad else 1


def cmd_table(args):
    from qlab.harness import build

    s = build(args.series, args.order)
    text = s.to_csv()
    if args.csv:
        Path(args.csv).write_bytes(text.encode())
    else:
        sys.stdout.write(text)
    return 0


def cmd_renorm(args):
    from qlab.renorm import renormalize

    res = renormalize(args.series, args.order, args.alternate)
    sys.stdout.write(res.to_json() + "\n")
    return 0 if res.residual_zero else 1


def cmd_eval_root(args):
    from qlab.cyclotomic import CycNum, eval_terminating

    out = eval_terminating(args.series, args.num, args.den)
    if isinstance(out, CycNum):
        record = {"verdict": "finite", "value": out.to_dict(), "complex": repr(out.to_complex())}
    else:
        record = out.to_dict()
    record.update({"id": args.series, "a": args.num, "b": args.den})
    sys.stdout.write(json.dumps(record, indent=2) + "\n")
    return 0


def cmd_probe(args):
    from qlab.numeric import cocycle_probe

    report = cocycle_probe(args.bound, args.prec)
    text = json.dumps(report, indent=2) + "\n"
    if args.json:
        Path(args.json).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_cache(args):
    from qlab.harness import SeriesCache, default_cache_dir

    cache = SeriesCache(Path(args.dir) if args.dir else default_cache_dir())
    if args.clear:
        n = cache.clear()
        sys.stdout.write(f"removed {n} entries from {cache.directory}\n")
        return 0
    for name in args.build or ():
        s = cache.build(name, args.order)
        sys.stdout.write(f"cached {name} to q^{s.order}\n")
    entries = cache.entries()
    sys.stdout.write(f"{cache.directory}: {len(entries)} entries\n")
    for e in entries:
        sys.stdout.write(f"  {e}\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="qlab", description="Exact q-series identity lab.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify registered identities")
    v.add_argument("ids", nargs="*", help="identity ids, optionally with @name=value,...")
    v.add_argument("--all", action="store_true", help="run the whole registry")
    v.add_argument("--tag", help="run the entries carrying this tag")
    v.add_argument("--order", type=int, help="truncation order (default 200)")
    v.add_argument("--json", help="write the reports to this file")
    v.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("table", help="export a coefficient table as CSV")
    t.add_argument("series")
    t.add_argument("--order", type=int, required=True)
    t.add_argument("--csv", help="output file (default stdout)")
    t.set_defaults(func=cmd_table)

    r = sub.add_parser("renorm", help="tail, shadow, ghost and residual of a series")
    r.add_argument("series")
    r.add_argument("--order", type=int, required=True)
    r.add_argument("--alternate", help="use a registered alternate decomposition")
    r.set_defaults(func=cmd_renorm)

    e = sub.add_parser("eval-root", help="evaluate a terminating series at exp(2 pi i a/b)")
    e.add_argument("series")
    e.add_argument("--num", type=int, required=True)
    e.add_argument("--den", type=int, required=True)
    e.set_defaults(func=cmd_eval_root)

    pr = sub.add_parser("probe", help="numeric probes")
    pr.add_argument("kind", choices=["cocycle"])
    pr.add_argument("--bound", type=int, required=True)
    pr.add_argument("--prec", type=int, default=None, help="binary precision (default 53)")
    pr.add_argument("--json", help="write the report to this file")
    pr.set_defaults(func=cmd_probe)

    c = sub.add_parser("cache", help="inspect or manage the coefficient cache")
    c.add_argument("--dir", default=os.environ.get("QLAB_CACHE_DIR"))
    c.add_argument("--clear", action="store_true")
    c.add_argument("--build", nargs="*", help="series ids to build into the cache")
    c.add_argument("--order", type=int, default=200)
    c.set_defaults(func=cmd_cache)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    from qlab.errors import QLabError

    try:
        return args.func(args)
    except (QLabError, ValueError) as exc:
        sys.stderr.write(f"qlab {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
