"""Walk through the small fixture database: counts, records, answers and samples."""
from __future__ import annotations

import random
from collections import Counter
from pathlib import Path

from tqeval.decomp import TreeDecomposition, export_text, width_report
from tqeval.exactcount import count_grouped_exact
from tqeval.io import load_database_csv
from tqeval.querylang import load_query, parse_query
from tqeval.threshold import build_record_structure, count_tq, enumerate_tq, sample_tq

ROOT = Path(__file__).resolve().parent.parent / "fixtures"


def chain_tree() -> TreeDecomposition:
    # {x} root over two branches x-y-y1-u and x-z-z1-v
    bags = [{"x"},
            {"x", "y"}, {"y"}, {"y", "y1"}, {"y1", "u"},
            {"x", "z"}, {"z"}, {"z", "z1"}, {"z1", "v"}]
    parent = [None, 0, 1, 2, 3, 0, 5, 6, 7]
    return TreeDecomposition(bags, parent, 0)


def main() -> None:
    D = load_database_csv(ROOT / "fig4")
    t = load_query(ROOT / "main.tq")
    print("query:", t)
    print("widths:", width_report(t).as_dict())

    r = parse_query("r(y,u) :- D(y,y1), E(y1,u)")
    print("witnesses per y:", dict(sorted(count_grouped_exact(r, ["y"], D).as_dict().items())))

    s = build_record_structure(t, D, chain_tree())
    print("nice decomposition:")
    print(export_text(s.decomposition), end="")
    for u in sorted(s.records):
        print(f"  node {u} ({s.kinds[u]}):", [(dict(b), n, k) for b, n, k in s.node_records(u)])
    print("answers:", count_tq(s))
    for a in enumerate_tq(s):
        print("  ", a)
    rng = random.Random(1)
    freq = Counter(sample_tq(s, rng) for _ in range(10_000))
    print("10k samples:", {"/".join(a): n for a, n in sorted(freq.items())})


if __name__ == "__main__":
    main()
