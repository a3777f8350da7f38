"""Tree decompositions of queries.

Widths follow the max-bag-size convention (no minus one). Constrained
decompositions (X-rooted, X-connex and nested chains of those) come from
elimination orderings that eliminate variables outside the innermost sets
first; an exact subset DP finds the best such ordering for small queries and
a constrained min-fill heuristic handles the rest.
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .querylang import CQ, Atom, ThresholdQuery, as_threshold, combined_cq
from .relcore import BindingSet, Database, evaluate_full, join_sets, project_set

EXACT_LIMIT = 16


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple
    parent: tuple
    root: int
    connex: frozenset | None = None
    children: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(frozenset(b) for b in self.bags))
        object.__setattr__(self, "parent", tuple(self.parent))
        kids = [[] for _ in self.bags]
        for u, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(u)
        object.__setattr__(self, "children", tuple(tuple(k) for k in kids))
        if self.parent[self.root] is not None:
            raise DecompositionError("root has a parent")

    def __len__(self) -> int:
        return len(self.bags)

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0)

    @property
    def vars(self) -> frozenset:
        return frozenset().union(*self.bags)

    def preorder(self, start: int | None = None) -> list:
        out, stack = [], [self.root if start is None else start]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def postorder(self, start: int | None = None) -> list:
        return self.preorder(start)[::-1]

    def subtree_vars(self) -> dict:
        sv = {}
        for u in self.postorder():
            s = set(self.bags[u])
            for v in self.children[u]:
                s |= sv[v]
            sv[u] = frozenset(s)
        return sv

    def kind(self, u: int) -> str:
        ch = self.children[u]
        if not ch:
            return "leaf"
        if len(ch) == 1:
            return "project"
        return "join"

    def with_connex(self, X: Iterable[str]) -> "TreeDecomposition":
        return TreeDecomposition(self.bags, self.parent, self.root, maximal_connex_set(self, X))


def _compact(bags: dict, children: dict, root, connex_vars=None) -> TreeDecomposition:
    """Renumber a mutable tree (dicts keyed by arbitrary ids) in preorder."""
    order, stack = [], [root]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(reversed(children.get(u, ())))
    ids = {u: i for i, u in enumerate(order)}
    parent = [None] * len(order)
    for u in order:
        for v in children.get(u, ()):
            parent[ids[v]] = ids[u]
    T = TreeDecomposition([bags[u] for u in order], parent, 0)
    if connex_vars is not None:
        T = T.with_connex(connex_vars)
    return T


def _mutable(T: TreeDecomposition):
    bags = {u: set(b) for u, b in enumerate(T.bags)}
    children = {u: list(T.children[u]) for u in range(len(T))}
    return bags, children


# -- predicates -----------------------------------------------------------

def gaifman_graph(q) -> dict:
    adj = {x: set() for x in q.vars}
    for a in q.atoms:
        for x, y in combinations(sorted(a.vars), 2):
            adj[x].add(y)
            adj[y].add(x)
    return adj


def validate(T: TreeDecomposition, q) -> None:
    """Raise DecompositionError unless T covers q with connected occurrences."""
    for a in q.atoms:
        if not any(a.vars <= b for b in T.bags):
            raise DecompositionError(f"atom {a} is not covered")
    missing = q.vars - T.vars
    if missing:
        raise DecompositionError(f"variables {sorted(missing)} appear in no bag")
    for x in T.vars:
        nodes = [u for u, b in enumerate(T.bags) if x in b]
        # connected iff exactly one node's parent lacks x
        tops = [u for u in nodes if T.parent[u] is None or x not in T.bags[T.parent[u]]]
        if len(tops) != 1:
            raise DecompositionError(f"occurrences of {x} are not connected")


def is_valid(T: TreeDecomposition, q) -> bool:
    try:
        validate(T, q)
    except DecompositionError:
        return False
    return True


def covered_atoms(T: TreeDecomposition, q) -> dict:
    return {u: [a for a in q.atoms if a.vars <= b] for u, b in enumerate(T.bags)}


def unsafe_nodes(T: TreeDecomposition, q) -> list:
    cov = covered_atoms(T, q)
    seen, bad = {}, []
    for u in T.postorder():
        s = set().union(*(a.vars for a in cov[u]))
        for v in T.children[u]:
            s |= seen[v]
        seen[u] = s
        if not T.bags[u] <= s:
            bad.append(u)
    return bad


def is_nice(T: TreeDecomposition, q) -> bool:
    for u in range(len(T)):
        ch = T.children[u]
        if len(ch) == 1 and not T.bags[u] < T.bags[ch[0]]:
            return False
        if len(ch) == 2 and T.bags[u] != T.bags[ch[0]] | T.bags[ch[1]]:
            return False
        if len(ch) > 2:
            return False
    return not unsafe_nodes(T, q)


def maximal_connex_set(T: TreeDecomposition, X: Iterable[str]) -> frozenset | None:
    """Nodes with bag inside X reachable from the root through such nodes.

    Returns None when that set does not witness X-connexity.
    """
    X = frozenset(X)
    if not T.bags[T.root] <= X:
        return None
    U, stack = set(), [T.root]
    while stack:
        u = stack.pop()
        U.add(u)
        stack.extend(v for v in T.children[u] if T.bags[v] <= X)
    if frozenset().union(*(T.bags[u] for u in U)) != X:
        return None
    return frozenset(U)


def is_connex(T: TreeDecomposition, X: Iterable[str]) -> bool:
    return maximal_connex_set(T, X) is not None


def is_rooted(T: TreeDecomposition, X: Iterable[str]) -> bool:
    return T.bags[T.root] == frozenset(X)


# -- elimination orderings --------------------------------------------------

def _bits(mask: int):
    while mask:
        b = mask & -mask
        yield b.bit_length() - 1
        mask ^= b


def _min_fill_order(n: int, adj: list, rank: list) -> tuple:
    nb = [set(_bits(adj[i])) for i in range(n)]
    left = set(range(n))
    order, width = [], 0
    while left:
        low = min(rank[i] for i in left)
        best = None
        for v in sorted(left):
            if rank[v] != low:
                continue
            ns = nb[v]
            fill = sum(1 for a, b in combinations(ns, 2) if b not in nb[a])
            key = (fill, len(ns), v)
            if best is None or key < best[0]:
                best = (key, v)
        v = best[1]
        ns = nb[v]
        width = max(width, len(ns) + 1)
        for a, b in combinations(ns, 2):
            nb[a].add(b)
            nb[b].add(a)
        for a in ns:
            nb[a].discard(v)
        left.discard(v)
        order.append(v)
    return order, width


def _exact_order(n: int, adj: list, rank: list, ub: int):
    """Subset DP over elimination prefixes honouring the rank constraint."""
    full = (1 << n) - 1

    def cost(S: int, v: int) -> int:
        inside = S | (1 << v)
        comp = frontier = 1 << v
        reach = 0
        while frontier:
            b = frontier & -frontier
            frontier ^= b
            nbrs = adj[b.bit_length() - 1]
            reach |= nbrs
            new = nbrs & inside & ~comp
            comp |= new
            frontier |= new
        return bin(reach & ~inside).count("1") + 1

    level = {0: 0}
    pred = {}
    for _ in range(n):
        nxt = {}
        for S, w in level.items():
            rem = full & ~S
            low = min(rank[i] for i in _bits(rem))
            for v in _bits(rem):
                if rank[v] != low:
                    continue
                nw = max(w, cost(S, v))
                if nw > ub:
                    continue
                S2 = S | (1 << v)
                if nw < nxt.get(S2, ub + 1):
                    nxt[S2] = nw
                    pred[S2] = (S, v)
        level = nxt
    if full not in level:
        return None
    order, S = [], full
    while S:
        S, v = pred[S]
        order.append(v)
    return order[::-1], level[full]


def _tree_from_order(names: list, adj: list, order: list):
    n = len(names)
    nb = [set(_bits(adj[i])) for i in range(n)]
    pos = {v: i for i, v in enumerate(order)}
    bags, parent = {}, {}
    for v in order:
        ns = set(nb[v])
        bags[v] = {names[v]} | {names[a] for a in ns}
        parent[v] = min(ns, key=pos.__getitem__) if ns else None
        for a, b in combinations(ns, 2):
            nb[a].add(b)
            nb[b].add(a)
        for a in ns:
            nb[a].discard(v)
    root = order[-1]
    children = defaultdict(list)
    for v in order:
        p = parent[v]
        if p is None and v != root:
            p = root
        if p is not None:
            children[p].append(v)
    return bags, children, root


def _reroot(children: dict, root, new_root):
    if new_root == root:
        return children
    und = defaultdict(set)
    for p, ch in children.items():
        for c in ch:
            und[p].add(c)
            und[c].add(p)
    out, seen, stack = defaultdict(list), {new_root}, [new_root]
    while stack:
        u = stack.pop()
        for v in sorted(und[u], key=str):
            if v not in seen:
                seen.add(v)
                out[u].append(v)
                stack.append(v)
    return out


def _drop_redundant(bags: dict, children: dict, root) -> None:
    """Merge non-root nodes whose bag is inside their parent's bag."""
    changed = True
    while changed:
        changed = False
        for p in list(children):
            for c in list(children.get(p, ())):
                if bags[c] <= bags[p]:
                    children[p].remove(c)
                    children[p].extend(children.pop(c, []))
                    del bags[c]
                    changed = True


def decompose(q, chain: Sequence[Iterable[str]] = (), rooted: bool = False,
              exact_limit: int = EXACT_LIMIT) -> tuple:
    """Decomposition of q connex for every set of a nested chain.

    chain lists sets innermost first (each inside the next). With rooted=True
    the root bag equals chain[0]. Returns (T, exact) where exact says whether
    the width is proven minimal for the constraints.
    """
    chain = [frozenset(c) for c in chain]
    for a, b in zip(chain, chain[1:]):
        if not a <= b:
            raise DecompositionError("chain sets must be nested")
    names = sorted(q.vars | (chain[-1] if chain else frozenset()))
    n = len(names)
    if n == 0:
        return TreeDecomposition([frozenset()], [None], 0, frozenset({0}) if chain else None), True
    idx = {x: i for i, x in enumerate(names)}
    adj = [0] * n
    for a in q.atoms:
        for x, y in combinations(sorted(a.vars), 2):
            adj[idx[x]] |= 1 << idx[y]
            adj[idx[y]] |= 1 << idx[x]
    if rooted and chain:
        for x, y in combinations(sorted(chain[0]), 2):
            adj[idx[x]] |= 1 << idx[y]
            adj[idx[y]] |= 1 << idx[x]
    rank = [sum(1 for c in chain if x in c) for x in names]

    order, ub = _min_fill_order(n, adj, rank)
    exact = n <= exact_limit
    if exact:
        found = _exact_order(n, adj, rank, ub)
        if found is not None:
            order = found[0]
    bags, children, root = _tree_from_order(names, adj, order)

    if rooted and chain:
        R = chain[0]
        if R:
            first = next(v for v in order if names[v] in R)
            children = _reroot(children, root, first)
            root = first
            if bags[root] != R:
                raise DecompositionError("rooted construction failed")
    if chain and not chain[0] and bags[root]:
        bags["top"] = set()
        children["top"] = [root]
        root = "top"
    _drop_redundant(bags, children, root)
    T = _compact(bags, children, root, chain[0] if chain else None)
    return T, exact


def decomposition_from_order(q, order: Sequence[str]) -> TreeDecomposition:
    """The decomposition induced by eliminating variables in the given order."""
    names = sorted(q.vars)
    if sorted(order) != names:
        raise DecompositionError("order must list every variable once")
    if not names:
        return TreeDecomposition([frozenset()], [None], 0)
    idx = {x: i for i, x in enumerate(names)}
    adj = [0] * len(names)
    for a in q.atoms:
        for x, y in combinations(sorted(a.vars), 2):
            adj[idx[x]] |= 1 << idx[y]
            adj[idx[y]] |= 1 << idx[x]
    bags, children, root = _tree_from_order(names, adj, [idx[x] for x in order])
    return _compact(bags, children, root)


def reroot(T: TreeDecomposition, u: int) -> TreeDecomposition:
    bags = {v: T.bags[v] for v in range(len(T))}
    children = {v: list(T.children[v]) for v in range(len(T))}
    return _compact(bags, _reroot(children, T.root, u), u)


def min_width_decomposition(q, exact_limit: int = EXACT_LIMIT) -> TreeDecomposition:
    return decompose(q, (), False, exact_limit)[0]


def x_rooted_decomposition(q, X, exact_limit: int = EXACT_LIMIT) -> TreeDecomposition:
    return decompose(q, [X], True, exact_limit)[0]


def x_connex_decomposition(q, X, exact_limit: int = EXACT_LIMIT) -> TreeDecomposition:
    return decompose(q, [X], False, exact_limit)[0]


def free_connex_decomposition(q, exact_limit: int = EXACT_LIMIT) -> TreeDecomposition:
    return decompose(q, [q.free_vars], False, exact_limit)[0]


@dataclass(frozen=True)
class WidthReport:
    tw: int
    fc_tw: int
    star_size: int
    x_connex_tw: int | None = None
    method: str = "exact"

    def as_dict(self) -> dict:
        return {"tw": self.tw, "fc_tw": self.fc_tw, "star_size": self.star_size,
                "x_connex_tw": self.x_connex_tw, "method": self.method}


def width_report(query, exact_limit: int = EXACT_LIMIT) -> WidthReport:
    """Widths of a CQ, or of the combined CQ of a threshold query.

    For a threshold query fc_tw is taken for the free variables and
    x_connex_tw for the nested chain (free, free plus tally).
    """
    if isinstance(query, ThresholdQuery):
        r = combined_cq(query)
        xs = frozenset(query.free)
        T1, e1 = decompose(r, (), False, exact_limit)
        T2, e2 = decompose(r, [xs], False, exact_limit)
        T3, e3 = decompose(r, [xs, xs | set(query.tally)], False, exact_limit)
        ss = star_size(r)[0]
        exact = e1 and e2 and e3
        return WidthReport(T1.width, T2.width, ss, T3.width, "exact" if exact else "upper-bound")
    T1, e1 = decompose(query, (), False, exact_limit)
    T2, e2 = decompose(query, [query.free_vars], False, exact_limit)
    return WidthReport(T1.width, T2.width, star_size(query)[0], None,
                       "exact" if e1 and e2 else "upper-bound")


# -- nice decompositions ---------------------------------------------------

def make_nice(T: TreeDecomposition, q) -> TreeDecomposition:
    """Nice decomposition with the same root bag and at most the same width."""
    validate(T, q)
    connex_vars = None
    if T.connex is not None:
        connex_vars = frozenset().union(*(T.bags[u] for u in T.connex))
    bags, children = _mutable(T)
    root = T.root
    atoms = list(q.atoms)

    # 1. safety: drop bag variables that no atom at or below the node uses
    below = {}
    for u in T.postorder():
        s = set()
        for a in atoms:
            if a.vars <= bags[u]:
                s |= a.vars
        for v in children[u]:
            s |= below[v]
        below[u] = s
        bags[u] &= s

    # 2. intersection node on every edge
    fresh = len(T)
    for p in list(children):
        new = []
        for c in children[p]:
            bags[fresh] = bags[p] & bags[c]
            children[fresh] = [c]
            new.append(fresh)
            fresh += 1
        children[p] = new

    # 3. covering leaves where the children miss part of the bag
    for u in list(children):
        if not children[u]:
            continue
        missing = bags[u] - set().union(*(bags[c] for c in children[u]))
        if missing:
            leaf = set()
            for x in sorted(missing):
                a = next(a for a in atoms if x in a.vars and a.vars <= bags[u])
                leaf |= a.vars
            bags[fresh] = leaf
            children[fresh] = []
            children[u].append(fresh)
            fresh += 1

    # 4. collapse equal single children, binarize wide nodes
    stack = [root]
    while stack:
        u = stack.pop()
        while len(children[u]) == 1 and bags[children[u][0]] == bags[u]:
            c = children[u][0]
            children[u] = children.pop(c)
            del bags[c]
        ch = children[u]
        while len(ch) > 2:
            a, b = ch.pop(), ch.pop()
            bags[fresh] = bags[a] | bags[b]
            children[fresh] = [b, a]
            ch.append(fresh)
            fresh += 1
        stack.extend(ch)
    # a binarization node can equal one child's bag only as a join; recheck
    # single-child chains created above (none expected) and compact
    return _compact(bags, children, root, connex_vars)


# -- subqueries -------------------------------------------------------------

@dataclass(frozen=True)
class SubqueryView:
    node: int
    sub: CQ
    local: CQ


def subqueries(T: TreeDecomposition, q) -> dict:
    sv = T.subtree_vars()
    free = set(q.free_vars)
    ins = {}
    for u in range(len(T)):
        ins[u] = [i for i, a in enumerate(q.atoms) if a.vars <= sv[u]]
    views = {}
    for u in range(len(T)):
        mine = ins[u]
        below = set()
        for v in T.children[u]:
            below.update(ins[v])
        sub_atoms = [q.atoms[i] for i in mine]
        local_atoms = [q.atoms[i] for i in mine if i not in below]
        vs = frozenset().union(*(a.vars for a in sub_atoms))
        head = tuple(sorted(vs & (T.bags[u] | free)))
        lvs = frozenset().union(*(a.vars for a in local_atoms))
        views[u] = SubqueryView(u, CQ(head, sub_atoms, f"q{u}"), CQ(tuple(sorted(lvs)), local_atoms, f"l{u}"))
    return views


def evaluate_views(T: TreeDecomposition, views: dict, D: Database, start: int | None = None,
                   cache: dict | None = None) -> BindingSet:
    """q_u(D) for u = start, computed bottom-up over the subtree."""
    cache = {} if cache is None else cache
    res = {}
    for u in T.postorder(start):
        acc = evaluate_full(views[u].local.atoms, D, cache)
        for v in T.children[u]:
            acc = join_sets(acc, res.pop(v))
        res[u] = project_set(acc, views[u].sub.head)
    return res[T.root if start is None else start]


def restrict_subtree(T: TreeDecomposition, u: int, keep: Iterable[str],
                     top: Iterable[str] | None = None) -> TreeDecomposition:
    """The subtree at u with bags cut down to `keep`, optionally under a new root bag."""
    keep = frozenset(keep)
    nodes = T.preorder(u)
    bags = {v: T.bags[v] & keep for v in nodes}
    children = {v: list(T.children[v]) for v in nodes}
    root = u
    if top is not None:
        bags["top"] = frozenset(top)
        children["top"] = [u]
        root = "top"
    return _compact(bags, children, root)


def export_text(T: TreeDecomposition) -> str:
    order = T.preorder()
    ids = {u: i for i, u in enumerate(order)}
    lines = []
    for u in order:
        p = T.parent[u]
        lines.append(f"{ids[u]} {'-' if p is None else ids[p]} {{{','.join(sorted(T.bags[u]))}}}")
    if T.connex is not None:
        lines.append(f"connex: {{{','.join(str(i) for i in sorted(ids[u] for u in T.connex))}}}")
    return "\n".join(lines) + "\n"


_LINE = re.compile(r"^(\d+)\s+(-|\d+)\s+\{([^}]*)\}$")


def parse_text(text: str) -> TreeDecomposition:
    bags, parent, connex = {}, {}, None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("connex:"):
            body = line.split(":", 1)[1].strip().strip("{}")
            connex = frozenset(int(x) for x in body.split(",") if x.strip())
            continue
        m = _LINE.match(line)
        if not m:
            raise DecompositionError(f"bad decomposition line: {line!r}")
        u = int(m.group(1))
        bags[u] = frozenset(x.strip() for x in m.group(3).split(",") if x.strip())
        parent[u] = None if m.group(2) == "-" else int(m.group(2))
    n = len(bags)
    if sorted(bags) != list(range(n)):
        raise DecompositionError("node ids must be 0..n-1")
    roots = [u for u in range(n) if parent[u] is None]
    if len(roots) != 1:
        raise DecompositionError("exactly one root expected")
    return TreeDecomposition([bags[u] for u in range(n)], [parent[u] for u in range(n)], roots[0], connex)


# -- star size --------------------------------------------------------------

def star_size(q) -> tuple:
    """(star size, atom groups) with groups split along quantified components."""
    ex = q.exist_vars
    comp = {x: x for x in ex}

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for a in q.atoms:
        qs = sorted(a.vars & ex)
        for y in qs[1:]:
            comp[find(y)] = find(qs[0])
    groups, plain = defaultdict(list), []
    for a in q.atoms:
        qs = a.vars & ex
        if qs:
            groups[find(next(iter(qs)))].append(a)
        else:
            plain.append([a])
    free = set(q.free_vars)
    quantified = [groups[k] for k in sorted(groups)]
    ss = max((len(free & set().union(*(a.vars for a in g))) for g in quantified), default=0)
    return max(1, ss), quantified + plain


def fc_from_star_size(q, T: TreeDecomposition) -> TreeDecomposition:
    """Free-connex decomposition of width at most width(T) * max(1, ss(q))."""
    validate(T, q)
    free = frozenset(q.free_vars)
    ex = q.exist_vars
    groups = [g for g in star_size(q)[1] if any(a.vars & ex for a in g)]
    bags, children = _mutable(T)
    root = T.root
    info = []
    for g in groups:
        gv = frozenset().union(*(a.vars for a in g))
        info.append((gv & free, gv & ex, gv))
    # T': inflate bags touching a component, then drop quantified variables
    for u in range(len(T)):
        extra = set()
        for F, Q, _ in info:
            if T.bags[u] & Q:
                extra |= F
        bags[u] = (bags[u] | extra) - ex
    fresh = len(T)
    for F, Q, gv in info:
        touch = [u for u in T.preorder() if T.bags[u] & Q]
        sub_bags = {u: set(T.bags[u] & gv) for u in touch}
        touch_set = set(touch)
        sub_children = {u: [v for v in T.children[u] if v in touch_set] for u in touch}
        sub_root = touch[0]
        if F:
            x0 = min(F)
            holder = next(u for u in touch if x0 in T.bags[u])
            for u in touch:
                sub_bags[u] |= F - {x0}
            sub_children = _reroot(sub_children, sub_root, holder)
            sub_root = holder
        # relabel and hang under a T' node holding F
        ids = {}
        for u in touch:
            ids[u] = fresh
            fresh += 1
        for u in touch:
            bags[ids[u]] = sub_bags[u]
            children[ids[u]] = [ids[v] for v in sub_children.get(u, [])]
        top = fresh
        fresh += 1
        bags[top] = set(F)
        children[top] = [ids[sub_root]]
        anchor = next(u for u in T.preorder() if F <= bags[u] and u < len(T))
        children[anchor].append(top)
    orig_root = T.bags[T.root]
    if orig_root <= free and bags[root] != orig_root:
        bags["top"] = set(orig_root)
        children["top"] = [root]
        root = "top"
    _drop_redundant(bags, children, root)
    return _compact(bags, children, root, free)
