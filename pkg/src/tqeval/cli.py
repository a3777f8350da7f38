"""Command line entry point `tq`."""
from __future__ import annotations

import argparse
import json
import random
import sys
from itertools import islice

from . import bench
from .decomp import DecompositionError, decompose, export_text, make_nice, width_report
from .io import LoadError, load_database_csv, load_edge_list
from .oracle import evaluate_tq_naive
from .querylang import QueryError, ThresholdQuery, as_threshold, combined_cq, load_query
from .threshold import (boolean_eval_tq, build_record_structure, count_tq, enumerate_tq,
                        sample_tq)


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tq", description="Threshold query engine")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, db=True, query=True):
        if db:
            g = p.add_mutually_exclusive_group(required=True)
            g.add_argument("--db", help="directory of <Relation>.csv files")
            g.add_argument("--edges", help="tab-separated edge list")
        if query:
            p.add_argument("--query", required=True, help="query file")
        p.add_argument("--format", choices=("tsv", "json"), default="tsv")

    p = sub.add_parser("widths", help="tree-width, free-connex width and star size")
    common(p, db=False)
    p = sub.add_parser("decompose", help="export a decomposition")
    common(p, db=False)
    p.add_argument("--variant", choices=("tw", "fc", "xconnex"), default="fc")
    p.add_argument("--nice", action="store_true", help="export the nice form")
    p = sub.add_parser("eval", help="evaluate a query")
    common(p)
    p.add_argument("--mode", choices=("bool", "count", "enum", "sample"), default="count")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("oracle-check", help="compare the engine with brute force")
    common(p)
    p = sub.add_parser("bench", help="pruned engine vs. baseline on a BA graph")
    p.add_argument("--template", choices=bench.TEMPLATES, default="neigh")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m0", type=int, default=10)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--threshold", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    return ap


def _db(args):
    return load_database_csv(args.db) if args.db else load_edge_list(args.edges)


def _emit_rows(rows, header, fmt, out):
    if fmt == "json":
        out.write(json.dumps([dict(zip(header, r)) for r in rows]) + "\n")
    else:
        for r in rows:
            out.write("\t".join(r) + "\n")


def _decomposition(query, variant):
    if isinstance(query, ThresholdQuery):
        r = combined_cq(query)
        xs = set(query.free)
        chain = {"tw": [], "fc": [xs], "xconnex": [xs, xs | set(query.tally)]}[variant]
    else:
        r = query
        xs = set(query.free_vars)
        chain = {"tw": [], "fc": [xs], "xconnex": [xs]}[variant]
    T, exact = decompose(r, chain)
    if not chain:
        T = T.with_connex(xs)
    return r, T, exact


def run_command(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage; a bad command line counts as an input error
        return 0 if not e.code else 1
    try:
        if args.command == "bench":
            cfg = bench.BenchConfig(template=args.template, n=args.n, m0=args.m0, k=args.k,
                                    threshold=args.threshold, seed=args.seed,
                                    repetitions=args.reps, timeout=args.timeout)
            rep = bench.run_comparison(cfg)
            if args.format == "json":
                out.write(json.dumps({"config": bench.config_dict(cfg), "agree": rep.agree,
                                      "results": [r.__dict__ for r in rep.results]}) + "\n")
            else:
                out.write(rep.to_tsv())
            return 0 if rep.agree in (True, None) else 2

        query = load_query(args.query)
        if args.command == "widths":
            rep = width_report(query)
            if args.format == "json":
                out.write(json.dumps(rep.as_dict()) + "\n")
            else:
                for k, v in rep.as_dict().items():
                    out.write(f"{k}\t{'' if v is None else v}\n")
            return 0
        if args.command == "decompose":
            r, T, exact = _decomposition(query, args.variant)
            if args.nice:
                T = make_nice(T, r)
            if args.format == "json":
                out.write(json.dumps({"width": T.width, "exact": exact,
                                      "nodes": [{"id": u, "parent": T.parent[u], "bag": sorted(T.bags[u])}
                                                for u in range(len(T))],
                                      "connex": sorted(T.connex) if T.connex is not None else None}) + "\n")
            else:
                out.write(export_text(T))
            return 0

        D = _db(args)
        t = as_threshold(query)
        if args.command == "oracle-check":
            expected = {tuple(b[x] for x in t.free) for b in evaluate_tq_naive(t, D).bindings()}
            s = build_record_structure(t, D)
            got = list(enumerate_tq(s))
            ok = set(got) == expected and len(got) == len(expected) and count_tq(s) == len(expected)
            ok = ok and boolean_eval_tq(t, D) == bool(expected)
            if args.format == "json":
                out.write(json.dumps({"agree": ok, "oracle": len(expected), "engine": len(got)}) + "\n")
            else:
                out.write(f"{'agree' if ok else 'MISMATCH'}\toracle={len(expected)}\tengine={len(got)}\n")
            return 0 if ok else 2

        mode = args.mode
        if mode == "bool":
            ans = boolean_eval_tq(t, D)
            out.write((json.dumps(ans) if args.format == "json" else str(ans).lower()) + "\n")
            return 0
        s = build_record_structure(t, D)
        if mode == "count":
            n = count_tq(s)
            out.write((json.dumps({"count": n}) if args.format == "json" else str(n)) + "\n")
        elif mode == "enum":
            rows = enumerate_tq(s)
            if args.limit is not None:
                rows = islice(rows, args.limit)
            _emit_rows(rows, t.free, args.format, out)
        else:
            if args.seed is None:
                raise UsageError("--mode sample needs --seed")
            rng = random.Random(args.seed)
            _emit_rows([sample_tq(s, rng) for _ in range(args.n)], t.free, args.format, out)
        return 0
    except (QueryError, LoadError, UsageError, OSError) as e:
        err.write(f"error: {e}\n")
        return 1
    except (DecompositionError, AssertionError) as e:
        err.write(f"internal error: {e}\n")
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
