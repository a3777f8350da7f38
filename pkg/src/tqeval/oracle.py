"""Brute-force reference semantics. Slow on purpose; keep it obviously right."""
from __future__ import annotations

from collections import defaultdict
from itertools import product

from .exactcount import GroupedCount
from .querylang import Const, as_threshold
from .relcore import BindingSet, Database


def matches(atoms, D: Database, start: dict | None = None):
    """Yield every assignment of the atoms' variables that satisfies them all.

    Plain nested loops over the relations in atom order.
    """
    atoms = list(atoms)

    def go(i, env):
        if i == len(atoms):
            yield dict(env)
            return
        a = atoms[i]
        for tup in D.get(a.relation):
            if len(tup) != len(a.terms):
                continue
            new = dict(env)
            ok = True
            for t, v in zip(a.terms, tup):
                if isinstance(t, Const):
                    if t.value != v:
                        ok = False
                        break
                elif new.setdefault(t, v) != v:
                    ok = False
                    break
            if ok:
                yield from go(i + 1, new)

    yield from go(0, dict(start or {}))


def evaluate_cq_naive(q, D: Database) -> BindingSet:
    head = q.free_vars
    return BindingSet.from_bindings(head, matches(q.atoms, D))


def evaluate_tq_naive(t, D: Database) -> BindingSet:
    t = as_threshold(t)
    xs = t.free
    if t.outer.atoms:
        qd = evaluate_cq_naive(t.outer, D)
    else:
        # no outer atoms: every binding of the free variables into the domain
        qd = BindingSet(xs, product(sorted(D.adom), repeat=len(xs)))
    pd = evaluate_cq_naive(t.inner, D)
    shared = [x for x in xs if x in pd.vars]
    per = defaultdict(int)
    for b in pd.bindings():
        per[tuple(b[x] for x in shared)] += 1
    keep = []
    for b in qd.bindings():
        k = per.get(tuple(b[x] for x in shared), 0)
        if t.lo <= k and (t.hi is None or k <= t.hi):
            keep.append(b)
    return BindingSet.from_bindings(xs, keep)


def count_grouped_naive(q, X, D: Database) -> GroupedCount:
    ans = evaluate_cq_naive(q, D)
    vs = tuple(sorted(X))
    rows = defaultdict(int)
    for b in ans.bindings():
        rows[tuple(b[x] for x in vs)] += 1
    return GroupedCount(vs, dict(rows))
