"""Threshold query evaluation over nice decompositions.

* answers_grouped_up_to: per group of X keep at most c answers, pruning at
  every node so intermediate results never hold more than c rows per bag
  binding.
* boolean_eval_tq: one-sided bounds with exact counts.
* build_record_structure: (binding, multiplicity, witness count) records at
  the connex nodes, which back counting, enumeration and sampling.
"""
from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable

from .alias import AliasTable
from .decomp import (DecompositionError, TreeDecomposition, decompose, evaluate_views,
                     is_nice, make_nice, maximal_connex_set, restrict_subtree, subqueries,
                     validate)
from .exactcount import GroupedCount, count_grouped_exact
from .querylang import CQ, ThresholdQuery, as_threshold, combined_cq
from .relcore import (BindingSet, Database, evaluate_full, key_fn, merger,
                      project_set)


class UnsupportedBounds(ValueError):
    pass


class EmptyResult(LookupError):
    pass


@dataclass
class PruneStats:
    """Instrumentation for the pruned evaluation."""

    max_group: int = 0     # largest bag-binding group seen after a prune
    peak_rows: int = 0     # largest intermediate answer set
    prunes: int = 0

    def note(self, P: BindingSet, biggest: int) -> None:
        self.prunes += 1
        self.peak_rows = max(self.peak_rows, len(P))
        self.max_group = max(self.max_group, biggest)


def _nice_rooted(q, X: frozenset, T: TreeDecomposition | None) -> TreeDecomposition:
    if T is None:
        T = decompose(q, [X], True)[0]
    validate(T, q)
    if T.bags[T.root] != X:
        raise DecompositionError(f"root bag {sorted(T.bags[T.root])} is not {sorted(X)}")
    if not is_nice(T, q):
        T = make_nice(T, q)
    return T


def _groups(P: BindingSet, cols: tuple) -> dict:
    kf = key_fn(P.vars, cols)
    out = defaultdict(list)
    for r in P.rows:
        out[kf(r)].append(r)
    return out


def _project_prune(P: BindingSet, head, bag, c: int) -> tuple:
    """prune_groups(project_set(P, head), bag, c) in one pass."""
    head = tuple(sorted(head))
    hk = key_fn(P.vars, head)
    bk = key_fn(head, tuple(sorted(bag)))
    groups = defaultdict(set)
    for r in P.rows:
        h = hk(r)
        groups[bk(h)].add(h)
    rows, big = [], 0
    for grp in groups.values():
        if len(grp) > c:
            grp = sorted(grp)[:c]
        rows.extend(grp)
        big = max(big, len(grp))
    return BindingSet(head, rows), big


def _truncated_join(A1: BindingSet, A2: BindingSet, local: BindingSet, bag: frozenset, c: int) -> tuple:
    """A1 join A2 join local, keeping at most c rows per bag binding.

    Rows of one bag binding come from one pair of child groups, so the
    product of the two sorted groups is cut after c rows. Also returns the
    largest number of rows kept for one bag binding.
    """
    g1 = tuple(sorted(bag & set(A1.vars)))
    g2 = tuple(sorted(bag & set(A2.vars)))
    shared = tuple(x for x in g1 if x in set(g2))
    groups1 = _groups(A1, g1)
    groups2 = _groups(A2, g2)
    s2 = key_fn(g2, shared)
    idx = defaultdict(list)
    for key, rows in groups2.items():
        idx[s2(key)].append((key, rows))
    s1 = key_fn(g1, shared)
    gv, gmerge = merger(g1, g2)
    lcheck = key_fn(gv, local.vars)
    lrows = local.rows
    out_vars, merge = merger(A1.vars, A2.vars)
    extra = tuple(x for x in A1.vars if x in set(A2.vars) and x not in bag)
    e1, e2 = key_fn(A1.vars, extra), key_fn(A2.vars, extra)
    out, big = [], 0
    for k1, rows1 in groups1.items():
        sorted1 = None
        for k2, rows2 in idx.get(s1(k1), ()):
            if lcheck(gmerge(k1, k2)) not in lrows:
                continue
            if sorted1 is None:
                sorted1 = sorted(rows1) if len(rows1) > 1 else rows1
            if len(rows2) > 1:
                rows2.sort()
            if not extra and len(sorted1) * len(rows2) <= c:
                out.extend([merge(r1, r2) for r1 in sorted1 for r2 in rows2])
                big = max(big, len(sorted1) * len(rows2))
                continue
            left = c
            for r1 in sorted1:
                for r2 in rows2:
                    if extra and e1(r1) != e2(r2):
                        continue
                    out.append(merge(r1, r2))
                    left -= 1
                    if not left:
                        break
                if not left:
                    break
            big = max(big, c - left)
    return BindingSet(out_vars, out), big


def answers_grouped_up_to(p: CQ, X: Iterable[str], c: int, D: Database,
                          T: TreeDecomposition | None = None,
                          stats: PruneStats | None = None) -> BindingSet:
    """A subset of p(D) that is complete for X and c."""
    X = frozenset(X)
    if c < 1:
        raise ValueError("threshold must be positive")
    if not X <= set(p.free_vars):
        raise DecompositionError(f"grouping variables {sorted(X - set(p.free_vars))} are not free")
    T = _nice_rooted(p, X, T)
    views = subqueries(T, p)
    cache: dict = {}
    A = {}
    for u in T.postorder():
        bag = T.bags[u]
        head = views[u].sub.head
        ch = T.children[u]
        if not ch:
            res = project_set(evaluate_full(views[u].local.atoms, D, cache), head)
        elif len(ch) == 1:
            res, big = _project_prune(A.pop(ch[0]), head, bag, c)
        else:
            local = evaluate_full(views[u].local.atoms, D, cache)
            res, big = _truncated_join(A.pop(ch[0]), A.pop(ch[1]), local, bag, c)
            res = project_set(res, head)
        if stats is not None and ch:
            stats.note(res, big)
        A[u] = res
    return A[T.root]


def count_grouped_up_to(p: CQ, X: Iterable[str], c: int, D: Database,
                        T: TreeDecomposition | None = None,
                        stats: PruneStats | None = None) -> GroupedCount:
    """min(c, |p(D, eta)|) for every eta over X with a nonzero count."""
    A = answers_grouped_up_to(p, X, c, D, T, stats)
    vs = tuple(sorted(X))
    kf = key_fn(A.vars, vs)
    rows = defaultdict(int)
    for r in A.rows:
        rows[kf(r)] += 1
    return GroupedCount(vs, {k: min(c, v) for k, v in rows.items()})


# -- shared set-up for the record-based algorithms ---------------------------

def _tq_setup(t: ThresholdQuery, T: TreeDecomposition | None, chain):
    r = combined_cq(t)
    xs = frozenset(t.free)
    if T is None:
        T = decompose(r, chain, False)[0]
    validate(T, r)
    if not is_nice(T, r):
        T = make_nice(T, r)
    U = maximal_connex_set(T, xs)
    if U is None:
        raise DecompositionError("decomposition is not free-connex")
    for u in U:
        inside = [v for v in T.children[u] if v in U]
        if inside and len(inside) != len(T.children[u]):
            raise DecompositionError(f"connex node {u} has children on both sides")
    return T, U, subqueries(T, t.outer), subqueries(T, t.inner)


def _leaf_counts(pv, T: TreeDecomposition, u: int, G: frozenset, D: Database, exact: bool,
                 c: int, stats: PruneStats | None):
    """Grouped counts of p_u by G over the subtree below u."""
    sub = pv.sub
    if not sub.atoms:
        return GroupedCount((), {(): 1})
    Tp = restrict_subtree(T, u, sub.vars, top=G)
    Tp = make_nice(Tp, sub)
    if exact:
        return count_grouped_exact(sub, G, D, Tp)
    return count_grouped_up_to(sub, G, c, D, Tp, stats)


def _leaf_records(qrows: BindingSet, S: GroupedCount, bag: tuple, adom, keep_zero: bool):
    """Yield (row over bag, k) pairing q_u answers with grouped counts."""
    qv = qrows.vars
    sv = S.vars
    W = tuple(x for x in sv if x not in set(qv))
    shared = tuple(x for x in sv if x in set(qv))
    out_vars, merge = merger(qv, W)
    if set(out_vars) != set(bag):
        raise DecompositionError(f"connex leaf bag {list(bag)} != {list(out_vars)}")
    to_bag = key_fn(out_vars, bag)
    if not W:
        kf = key_fn(qv, sv)
        for r in qrows.rows:
            k = S.rows.get(kf(r), 0)
            if k or keep_zero:
                yield to_bag(r), k
        return
    by_shared = defaultdict(list)
    sk = key_fn(sv, shared)
    wk = key_fn(sv, W)
    for key, k in S.rows.items():
        by_shared[sk(key)].append((wk(key), k))
    qk = key_fn(qv, shared)
    for r in qrows.rows:
        hits = by_shared.get(qk(r), [])
        for w, k in hits:
            yield to_bag(merge(r, w)), k
        if keep_zero:
            seen = {w for w, _ in hits}
            for w in product(sorted(adom), repeat=len(W)):
                if w not in seen:
                    yield to_bag(merge(r, w)), 0


def _local_check(view, D, cache, vars_):
    L = evaluate_full(view.local.atoms, D, cache)
    if not view.local.atoms:
        return None
    return key_fn(vars_, L.vars), L.rows


# -- Boolean evaluation ---------------------------------------------------------

def boolean_root_records(t, D: Database, T: TreeDecomposition | None = None) -> dict:
    """Root records (bag binding -> extreme witness count) for one-sided bounds."""
    t = as_threshold(t)
    if t.lo > 0 and t.hi is not None:
        raise UnsupportedBounds("two-sided bounds need the record structure")
    xs = frozenset(t.free)
    T, U, qv, pv = _tq_setup(t, T, [xs, xs | set(t.tally)])
    pick = min if t.hi is not None else max
    keep_zero = t.lo == 0
    cache: dict = {}
    recs = {}
    for u in T.postorder():
        if u not in U:
            continue
        bag = tuple(sorted(T.bags[u]))
        kids = [v for v in T.children[u] if v in U]
        if not kids:
            Q = evaluate_views(T, qv, D, u, cache)
            G = frozenset(pv[u].sub.free_vars) & xs
            S = _leaf_counts(pv[u], T, u, G, D, True, 0, None)
            out = {}
            for row, k in _leaf_records(Q, S, bag, D.adom, keep_zero):
                out[row] = k
            recs[u] = out
        elif len(kids) == 1:
            child = recs.pop(kids[0])
            cv = tuple(sorted(T.bags[kids[0]]))
            kf = key_fn(cv, bag)
            out = {}
            for row, k in child.items():
                key = kf(row)
                out[key] = pick(out[key], k) if key in out else k
            recs[u] = out
        else:
            v1, v2 = kids
            b1, b2 = tuple(sorted(T.bags[v1])), tuple(sorted(T.bags[v2]))
            out = {}
            qchk = _local_check(qv[u], D, cache, bag)
            pchk = _local_check(pv[u], D, cache, bag)
            for row, k1, k2 in _pairs(recs.pop(v1), b1, recs.pop(v2), b2, bag):
                if qchk and qchk[0](row) not in qchk[1]:
                    continue
                k = k1 * k2
                if pchk and pchk[0](row) not in pchk[1]:
                    k = 0
                if k or keep_zero:
                    out[row] = k
            recs[u] = out
    return recs[T.root]


def _pairs(R1: dict, b1: tuple, R2: dict, b2: tuple, bag: tuple):
    shared = tuple(x for x in b1 if x in set(b2))
    k1, k2 = key_fn(b1, shared), key_fn(b2, shared)
    idx = defaultdict(list)
    for row, k in R2.items():
        idx[k2(row)].append((row, k))
    out_vars, merge = merger(b1, b2)
    to_bag = key_fn(out_vars, bag)
    for row, ka in R1.items():
        for row2, kb in idx.get(k1(row), ()):
            yield to_bag(merge(row, row2)), ka, kb


def boolean_eval_tq(t, D: Database, T: TreeDecomposition | None = None) -> bool:
    t = as_threshold(t)
    if t.lo > 0 and t.hi is not None:
        return count_tq(build_record_structure(t, D, T)) > 0
    recs = boolean_root_records(t, D, T)
    return any(t.lo <= k and (t.hi is None or k <= t.hi) for k in recs.values())


# -- record structure -----------------------------------------------------------

def c_join(R1: Iterable[tuple], R2: Iterable[tuple], c: int) -> list:
    """Records (binding dict, n, k) combined pairwise with the witness product capped at c."""
    out = []
    R2 = list(R2)
    for b1, n1, k1 in R1:
        for b2, n2, k2 in R2:
            if all(b2.get(x, v) == v for x, v in b1.items()):
                out.append(({**b1, **b2}, n1 * n2, min(c, k1 * k2)))
    return out


@dataclass
class RecordStructure:
    decomposition: TreeDecomposition
    c: int
    lo: int
    hi: int | None
    free: tuple
    connex: frozenset
    kinds: dict                    # node -> "leaf" | "project" | "join"
    kids: dict                     # node -> connex children
    bags: dict                     # node -> sorted bag variables
    records: dict                  # node -> list of (row, n, k)
    links: dict                    # node -> per record list of child indices / index pairs
    root_records: list             # indices into records[root] passing the bounds
    stats: PruneStats = field(default_factory=PruneStats)
    _tables: dict = field(default_factory=dict, repr=False)
    _root_table: AliasTable | None = field(default=None, repr=False)

    @property
    def root(self) -> int:
        return self.decomposition.root

    @property
    def total(self) -> int:
        return sum(self.records[self.root][i][1] for i in self.root_records)

    def node_records(self, u: int) -> list:
        bag = self.bags[u]
        return [(dict(zip(bag, row)), n, k) for row, n, k in self.records[u]]


def build_record_structure(t, D: Database, T: TreeDecomposition | None = None,
                           stats: PruneStats | None = None) -> RecordStructure:
    t = as_threshold(t)
    xs = frozenset(t.free)
    T, U, qv, pv = _tq_setup(t, T, [xs])
    c = t.c
    keep_zero = t.lo == 0
    stats = stats if stats is not None else PruneStats()
    cache: dict = {}
    kinds, kids_of, bags, records, links = {}, {}, {}, {}, {}
    for u in T.postorder():
        if u not in U:
            continue
        bag = tuple(sorted(T.bags[u]))
        bags[u] = bag
        kids = [v for v in T.children[u] if v in U]
        kids_of[u] = kids
        if not kids:
            kinds[u] = "leaf"
            Q = evaluate_views(T, qv, D, u, cache)
            G = frozenset(pv[u].sub.free_vars) & xs
            S = _leaf_counts(pv[u], T, u, G, D, False, c, stats)
            recs = sorted((row, 1, k) for row, k in _leaf_records(Q, S, bag, D.adom, keep_zero))
            records[u] = recs
            links[u] = None
        elif len(kids) == 1:
            kinds[u] = "project"
            v = kids[0]
            kf = key_fn(bags[v], bag)
            groups = defaultdict(list)
            for i, (row, n, k) in enumerate(records[v]):
                groups[(kf(row), k)].append(i)
            keys = sorted(groups)
            records[u] = [(row, sum(records[v][i][1] for i in groups[(row, k)]), k) for row, k in keys]
            links[u] = [groups[key] for key in keys]
        else:
            kinds[u] = "join"
            v1, v2 = kids
            qchk = _local_check(qv[u], D, cache, bag)
            pchk = _local_check(pv[u], D, cache, bag)
            shared = tuple(x for x in bags[v1] if x in set(bags[v2]))
            s1, s2 = key_fn(bags[v1], shared), key_fn(bags[v2], shared)
            idx = defaultdict(list)
            for j, rec in enumerate(records[v2]):
                idx[s2(rec[0])].append(j)
            out_vars, merge = merger(bags[v1], bags[v2])
            to_bag = key_fn(out_vars, bag)
            acc = defaultdict(int)
            pairs = defaultdict(list)
            for i, (r1, n1, k1) in enumerate(records[v1]):
                for j in idx.get(s1(r1), ()):
                    r2, n2, k2 = records[v2][j]
                    row = to_bag(merge(r1, r2))
                    if qchk and qchk[0](row) not in qchk[1]:
                        continue
                    k = min(c, k1 * k2)
                    if pchk and pchk[0](row) not in pchk[1]:
                        k = 0
                    if not k and not keep_zero:
                        continue
                    acc[(row, k)] += n1 * n2
                    pairs[(row, k)].append((i, j))
            keys = sorted(acc)
            records[u] = [(row, acc[(row, k)], k) for row, k in keys]
            links[u] = [pairs[key] for key in keys]
    root = T.root
    ok = [i for i, (_, _, k) in enumerate(records[root])
          if t.lo <= k and (t.hi is None or k <= t.hi)]
    s = RecordStructure(T, c, t.lo, t.hi, t.free, U, kinds, kids_of, bags, records, links, ok, stats)
    _build_tables(s)
    return s


def _build_tables(s: RecordStructure) -> None:
    if s.root_records:
        s._root_table = AliasTable([s.records[s.root][i][1] for i in s.root_records])
    for u, kind in s.kinds.items():
        if kind == "leaf":
            continue
        tabs = []
        if kind == "project":
            child = s.records[s.kids[u][0]]
            for opts in s.links[u]:
                tabs.append(AliasTable([child[i][1] for i in opts]) if len(opts) > 1 else None)
        else:
            c1, c2 = (s.records[v] for v in s.kids[u])
            for opts in s.links[u]:
                tabs.append(AliasTable([c1[i][1] * c2[j][1] for i, j in opts]) if len(opts) > 1 else None)
        s._tables[u] = tabs


def count_tq(s: RecordStructure) -> int:
    return s.total


@dataclass
class AccessCounter:
    count: int = 0
    per_answer_max: int = 0


def enumerate_tq(s: RecordStructure, counter: AccessCounter | None = None):
    """Yield each answer once as a tuple in head order."""
    out = {}
    free = s.free
    ctr = counter if counter is not None else AccessCounter()

    def walk(u, i):
        ctr.count += 1
        row = s.records[u][i][0]
        for x, v in zip(s.bags[u], row):
            out[x] = v
        kind = s.kinds[u]
        if kind == "leaf":
            yield
        elif kind == "project":
            v = s.kids[u][0]
            for j in s.links[u][i]:
                yield from walk(v, j)
        else:
            v1, v2 = s.kids[u]
            for j1, j2 in s.links[u][i]:
                for _ in walk(v1, j1):
                    yield from walk(v2, j2)

    last = 0
    for i in s.root_records:
        for _ in walk(s.root, i):
            ctr.per_answer_max = max(ctr.per_answer_max, ctr.count - last)
            last = ctr.count
            yield tuple(out[x] for x in free)


def sample_tq(s: RecordStructure, rng: random.Random | int, counter: AccessCounter | None = None) -> tuple:
    """One answer drawn uniformly at random."""
    if not s.root_records:
        raise EmptyResult("the query has no answers")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    out = {}
    touched = 0
    stack = [(s.root, s.root_records[s._root_table.draw(rng)])]
    while stack:
        u, i = stack.pop()
        touched += 1
        row = s.records[u][i][0]
        for x, v in zip(s.bags[u], row):
            out[x] = v
        kind = s.kinds[u]
        if kind == "leaf":
            continue
        opts = s.links[u][i]
        tab = s._tables[u][i]
        pick = opts[tab.draw(rng)] if tab is not None else opts[0]
        if kind == "project":
            stack.append((s.kids[u][0], pick))
        else:
            v1, v2 = s.kids[u]
            stack.append((v1, pick[0]))
            stack.append((v2, pick[1]))
    if counter is not None:
        counter.count += touched
        counter.per_answer_max = max(counter.per_answer_max, touched)
    return tuple(out[x] for x in s.free)
