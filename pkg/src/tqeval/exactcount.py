"""Exact answer counts grouped by a variable set."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .decomp import (DecompositionError, TreeDecomposition, evaluate_views, is_nice,
                     make_nice, maximal_connex_set, subqueries, validate, decompose)
from .relcore import BindingSet, Database, evaluate_full, key_fn, merger


@dataclass
class GroupedCount:
    """Counts per binding of `vars`; bindings not listed count zero."""

    vars: tuple
    rows: dict = field(default_factory=dict)

    def get(self, binding, default: int = 0) -> int:
        if isinstance(binding, Mapping):
            binding = tuple(binding[x] for x in self.vars)
        return self.rows.get(binding, default)

    def as_dict(self) -> dict:
        """Single-variable groups keyed by the bare value, others by tuple."""
        if len(self.vars) == 1:
            return {k[0]: v for k, v in self.rows.items()}
        return dict(self.rows)

    def total(self) -> int:
        return sum(self.rows.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupedCount):
            return NotImplemented
        mine = {k: v for k, v in self.rows.items() if v}
        theirs = {k: v for k, v in other.rows.items() if v}
        return self.vars == other.vars and mine == theirs


def _prepare(q, X, T: TreeDecomposition | None) -> TreeDecomposition:
    X = frozenset(X)
    if not X <= set(q.free_vars):
        raise DecompositionError(f"grouping variables {sorted(X - set(q.free_vars))} are not free")
    if T is None:
        T = decompose(q, [X, q.free_vars], True)[0]
    validate(T, q)
    if T.bags[T.root] != X:
        raise DecompositionError(f"root bag {sorted(T.bags[T.root])} is not {sorted(X)}")
    if not is_nice(T, q):
        T = make_nice(T, q)
    return T


def count_grouped_exact(q, X: Iterable[str], D: Database,
                        T: TreeDecomposition | None = None) -> GroupedCount:
    """|q(D, eta)| for every eta over X with a nonzero count."""
    X = frozenset(X)
    T = _prepare(q, X, T)
    U = maximal_connex_set(T, q.free_vars)
    if U is None:
        raise DecompositionError("decomposition is not free-connex")
    views = subqueries(T, q)
    cache: dict = {}
    counts = {}  # node -> (vars, {row: count})
    for u in T.postorder():
        if u not in U:
            continue
        bag = tuple(sorted(T.bags[u]))
        kids = [v for v in T.children[u] if v in U]
        if not kids:
            sub = evaluate_views(T, views, D, u, cache)
            kf = key_fn(sub.vars, bag)
            counts[u] = (bag, {kf(r): 1 for r in sub.rows})
        elif len(kids) == 1:
            cv, crow = counts.pop(kids[0])
            kf = key_fn(cv, bag)
            acc = defaultdict(int)
            for r, k in crow.items():
                acc[kf(r)] += k
            counts[u] = (bag, dict(acc))
        else:
            (v1, c1), (v2, c2) = counts.pop(kids[0]), counts.pop(kids[1])
            local = evaluate_full(views[u].local.atoms, D, cache)
            counts[u] = (bag, _join_counts(v1, c1, v2, c2, bag, local))
    vs, rows = counts[T.root]
    return GroupedCount(vs, rows)


def _join_counts(v1, c1, v2, c2, bag, local: BindingSet) -> dict:
    shared = tuple(x for x in v1 if x in set(v2))
    k1, k2 = key_fn(v1, shared), key_fn(v2, shared)
    idx = defaultdict(list)
    for r, k in c2.items():
        idx[k2(r)].append((r, k))
    out, merge = merger(v1, v2)
    to_bag = key_fn(out, bag)
    check = key_fn(out, local.vars) if local.vars else None
    res = {}
    for r1, n1 in c1.items():
        for r2, n2 in idx.get(k1(r1), ()):
            row = merge(r1, r2)
            if check is not None and check(row) not in local.rows:
                continue
            if check is None and not local.rows:
                continue
            res[to_bag(row)] = n1 * n2
    return res
