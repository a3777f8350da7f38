"""Relations, databases and the binding algebra.

Values are plain strings. A binding set stores its variables as a sorted
tuple and its rows as value tuples aligned with that order, so grouping and
pruning work on tuples directly.
"""
from __future__ import annotations

from collections import defaultdict
from operator import itemgetter
from typing import Iterable, Mapping

Value = str
Binding = dict  # variable name -> Value


def compatible(b1: Mapping[str, Value], b2: Mapping[str, Value]) -> bool:
    if len(b2) < len(b1):
        b1, b2 = b2, b1
    for x, v in b1.items():
        w = b2.get(x)
        if w is not None and w != v:
            return False
    return True


class BindingSet:
    """A set of bindings sharing one variable domain."""

    __slots__ = ("vars", "rows", "_pos")

    def __init__(self, variables: Iterable[str], rows: Iterable[tuple] = ()):
        vs = tuple(sorted(set(variables)))
        self.vars = vs
        self.rows = rows if isinstance(rows, frozenset) else frozenset(rows)
        self._pos = {x: i for i, x in enumerate(vs)}

    @classmethod
    def from_bindings(cls, variables: Iterable[str], bindings: Iterable[Mapping[str, Value]]) -> "BindingSet":
        vs = tuple(sorted(set(variables)))
        return cls(vs, (tuple(b[x] for x in vs) for b in bindings))

    @classmethod
    def unit(cls) -> "BindingSet":
        """The set holding only the empty binding."""
        return cls((), [()])

    @property
    def domain(self) -> frozenset:
        return frozenset(self.vars)

    def index(self, x: str) -> int:
        return self._pos[x]

    def positions(self, variables: Iterable[str]) -> tuple:
        return tuple(self._pos[x] for x in variables)

    def bindings(self) -> list:
        return [dict(zip(self.vars, r)) for r in sorted(self.rows)]

    def sorted_rows(self) -> list:
        return sorted(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __bool__(self) -> bool:
        return bool(self.rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BindingSet):
            return NotImplemented
        return self.vars == other.vars and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.vars, self.rows))

    def __contains__(self, item) -> bool:
        if isinstance(item, Mapping):
            try:
                item = tuple(item[x] for x in self.vars)
            except KeyError:
                return False
        return item in self.rows

    def __repr__(self) -> str:
        return f"BindingSet({list(self.vars)}, {len(self.rows)} rows)"


def key_fn(src: tuple, cols: Iterable[str]):
    """Return a function mapping a row over `src` to its restriction on `cols`."""
    pos = {x: i for i, x in enumerate(src)}
    idx = tuple(pos[x] for x in cols)
    if not idx:
        return lambda r: ()
    if len(idx) == 1:
        i = idx[0]
        return lambda r: (r[i],)
    return itemgetter(*idx)


def merger(v1: tuple, v2: tuple):
    """Output variables and a function merging a row over v1 with one over v2."""
    out = tuple(sorted(set(v1) | set(v2)))
    p1 = {x: i for i, x in enumerate(v1)}
    off = len(v1)
    p2 = {x: off + i for i, x in enumerate(v2)}
    idx = tuple(p1[x] if x in p1 else p2[x] for x in out)
    if not idx:
        return out, lambda r1, r2: ()
    if len(idx) == 1:
        i = idx[0]
        return out, lambda r1, r2: ((r1 + r2)[i],)
    get = itemgetter(*idx)
    return out, lambda r1, r2: get(r1 + r2)


def join_sets(P1: BindingSet, P2: BindingSet) -> BindingSet:
    if not P1.rows or not P2.rows:
        return BindingSet(set(P1.vars) | set(P2.vars))
    if len(P2) > len(P1):
        P1, P2 = P2, P1
    shared = tuple(x for x in P1.vars if x in P2._pos)
    k1, k2 = key_fn(P1.vars, shared), key_fn(P2.vars, shared)
    index = defaultdict(list)
    for r in P2.rows:
        index[k2(r)].append(r)
    out, merge = merger(P1.vars, P2.vars)
    rows = set()
    for r in P1.rows:
        for s in index.get(k1(r), ()):
            rows.add(merge(r, s))
    return BindingSet(out, rows)


def project_set(P: BindingSet, X: Iterable[str]) -> BindingSet:
    keep = tuple(sorted(set(X) & set(P.vars)))
    if keep == P.vars:
        return P
    kf = key_fn(P.vars, keep)
    return BindingSet(keep, {kf(r) for r in P.rows})


def semi_join(P: BindingSet, Q: BindingSet) -> BindingSet:
    shared = tuple(x for x in P.vars if x in Q._pos)
    keys = {key_fn(Q.vars, shared)(r) for r in Q.rows}
    kp = key_fn(P.vars, shared)
    return BindingSet(P.vars, {r for r in P.rows if kp(r) in keys})


def anti_join(P: BindingSet, Q: BindingSet) -> BindingSet:
    shared = tuple(x for x in P.vars if x in Q._pos)
    keys = {key_fn(Q.vars, shared)(r) for r in Q.rows}
    kp = key_fn(P.vars, shared)
    return BindingSet(P.vars, {r for r in P.rows if kp(r) not in keys})


def group_rows(P: BindingSet, Y: Iterable[str]) -> dict:
    """Map each Y-key to the sorted list of rows in that group."""
    kf = key_fn(P.vars, tuple(sorted(Y)))
    groups = defaultdict(list)
    for r in sorted(P.rows):
        groups[kf(r)].append(r)
    return groups


def prune_groups(P: BindingSet, Y: Iterable[str], c: int) -> BindingSet:
    return prune_groups_sized(P, Y, c)[0]


def prune_groups_sized(P: BindingSet, Y: Iterable[str], c: int) -> tuple:
    """prune_groups plus the largest group size left after pruning."""
    Y = set(Y)
    if not Y <= set(P.vars):
        raise ValueError(f"prune variables {sorted(Y - set(P.vars))} not in domain")
    if c < 1:
        raise ValueError("c must be positive")
    kf = key_fn(P.vars, tuple(sorted(Y)))
    groups = defaultdict(list)
    for r in P.rows:
        groups[kf(r)].append(r)
    rows, big = [], 0
    for grp in groups.values():
        if len(grp) > c:
            grp = sorted(grp)[:c]
        rows.extend(grp)
        big = max(big, len(grp))
    return BindingSet(P.vars, rows), big


class Database:
    """Named relations of constant tuples."""

    def __init__(self, relations: Mapping[str, Iterable[tuple]] | None = None,
                 arities: Mapping[str, int] | None = None):
        self.relations: dict[str, frozenset] = {}
        self.arities: dict[str, int | None] = dict(arities or {})
        for name, tuples in (relations or {}).items():
            rel = frozenset(tuple(str(v) for v in t) for t in tuples)
            ars = {len(t) for t in rel}
            if len(ars) > 1:
                raise ValueError(f"relation {name} has mixed arities {sorted(ars)}")
            if ars:
                ar = ars.pop()
                declared = self.arities.get(name)
                if declared is not None and declared != ar:
                    raise ValueError(f"relation {name}: arity {ar} != declared {declared}")
                self.arities[name] = ar
            else:
                self.arities.setdefault(name, None)
            self.relations[name] = rel
        self.adom = frozenset(v for rel in self.relations.values() for t in rel for v in t)

    def get(self, name: str) -> frozenset:
        return self.relations.get(name, frozenset())

    def size(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        mine = {k: v for k, v in self.relations.items() if v}
        theirs = {k: v for k, v in other.relations.items() if v}
        return mine == theirs

    def __repr__(self) -> str:
        parts = ", ".join(f"{k}:{len(v)}" for k, v in sorted(self.relations.items()))
        return f"Database({parts})"


def atom_bindings(atom, D: Database) -> BindingSet:
    """All bindings of the atom's variables that map it into D.

    Terms that are not strings are constants with a `.value`.
    """
    terms = atom.terms
    first = {}
    checks = []  # (position, required constant) or (position, earlier position)
    for i, t in enumerate(terms):
        if isinstance(t, str):
            if t in first:
                checks.append((i, first[t], True))
            else:
                first[t] = i
        else:
            checks.append((i, t.value, False))
    vs = tuple(sorted(first))
    idx = tuple(first[x] for x in vs)
    rel = D.get(atom.relation)
    if not checks:
        if idx == tuple(range(len(terms))):
            return BindingSet(vs, rel)
        if len(idx) > 1:
            get = itemgetter(*idx)
            return BindingSet(vs, {get(t) for t in rel if len(t) == len(terms)})
    rows = set()
    for tup in rel:
        if len(tup) != len(terms):
            continue
        ok = True
        for i, ref, is_pos in checks:
            if tup[i] != (tup[ref] if is_pos else ref):
                ok = False
                break
        if ok:
            rows.add(tuple(tup[i] for i in idx))
    return BindingSet(vs, rows)


def evaluate_full(atoms, D: Database, cache: dict | None = None) -> BindingSet:
    """Join all atoms; the result ranges over every variable of the atoms."""
    sets = []
    for a in atoms:
        if cache is not None:
            bs = cache.get(a)
            if bs is None:
                bs = cache[a] = atom_bindings(a, D)
        else:
            bs = atom_bindings(a, D)
        sets.append(bs)
    if not sets:
        return BindingSet.unit()
    # greedy order: smallest first, then prefer sets sharing variables
    sets.sort(key=len)
    acc = sets.pop(0)
    while sets:
        if not acc:
            return BindingSet(set(acc.vars).union(*(s.vars for s in sets)))
        bound = set(acc.vars)
        j = next((i for i, s in enumerate(sets) if bound & set(s.vars)), 0)
        acc = join_sets(acc, sets.pop(j))
    return acc
