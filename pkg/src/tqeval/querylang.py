"""Conjunctive queries, threshold queries and their textual syntax.

Grammar (one query per file, `--` starts a line comment)::

    tq    := head ":-" [atoms] [ "#exists" "[" nat "," (nat|"inf") "]" "(" vars ")" "." atoms ]
    head  := NAME "(" [vars] ")"
    atom  := NAME "(" term {"," term} ")"
    term  := variable | '"' constant '"'

Variables start with a lowercase letter or underscore. Body variables that
are neither in the head nor tallied are existential, in the outer query for
atoms before ``#exists`` and in the inner query for atoms after it.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True, order=True)
class Const:
    value: str

    def __str__(self) -> str:
        return '"' + self.value.replace('"', '""') + '"'


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple

    @property
    def vars(self) -> frozenset:
        return frozenset(t for t in self.terms if isinstance(t, str))

    def __str__(self) -> str:
        return f"{self.relation}({', '.join(str(t) for t in self.terms)})"


@dataclass(frozen=True)
class ConjunctiveQuery:
    """q(head) :- atoms. Head variables missing from the atoms are ignored."""

    head: tuple
    atoms: tuple
    name: str = "q"

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        arity = {}
        for a in self.atoms:
            if arity.setdefault(a.relation, len(a.terms)) != len(a.terms):
                raise QueryError(f"relation {a.relation} used with arities {arity[a.relation]} and {len(a.terms)}")

    @property
    def vars(self) -> frozenset:
        return frozenset().union(*(a.vars for a in self.atoms))

    @property
    def free_vars(self) -> tuple:
        vs = self.vars
        return tuple(x for x in self.head if x in vs)

    @property
    def exist_vars(self) -> frozenset:
        return self.vars - set(self.head)

    def with_head(self, head: Iterable[str]) -> "ConjunctiveQuery":
        return ConjunctiveQuery(tuple(head), self.atoms, self.name)

    def restrict(self, atoms: Iterable[Atom], head: Iterable[str]) -> "ConjunctiveQuery":
        return ConjunctiveQuery(tuple(head), tuple(atoms), self.name)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.head)}) :- {', '.join(str(a) for a in self.atoms)}"


CQ = ConjunctiveQuery


@dataclass(frozen=True)
class ThresholdQuery:
    """t(x) = q(x) and exists^{lo,hi} tally . p(x, tally); hi=None means infinity."""

    outer: ConjunctiveQuery
    lo: int
    hi: int | None
    inner: ConjunctiveQuery
    tally: tuple = field(default=())
    name: str = "t"

    def __post_init__(self):
        object.__setattr__(self, "tally", tuple(self.tally))
        if self.lo < 0 or (self.hi is not None and self.hi < self.lo):
            raise QueryError(f"bad bounds [{self.lo},{self.hi}]")
        head = set(self.outer.head)
        if head & set(self.tally):
            raise QueryError(f"tally variables {sorted(head & set(self.tally))} are also free")
        if set(self.inner.head) != head | set(self.tally):
            raise QueryError("inner head must be the free plus tally variables")
        missing = set(self.tally) - self.inner.vars
        if missing:
            raise QueryError(f"tally variables {sorted(missing)} do not occur in the inner query")
        if self.outer.atoms:
            missing = head - self.outer.vars
        else:
            missing = head - self.inner.vars
        if missing:
            raise QueryError(f"head variables {sorted(missing)} occur in no atom")
        clash = self.outer.exist_vars & self.inner.vars
        if clash:
            raise QueryError(f"existential variables {sorted(clash)} shared between outer and inner query")

    @property
    def free(self) -> tuple:
        return self.outer.head

    @property
    def c(self) -> int:
        """Effective threshold: b+1 if b is finite, else a (at least 1)."""
        if self.hi is not None:
            return self.hi + 1
        return max(1, self.lo)

    @property
    def kind(self) -> str:
        if self.hi is None:
            return "at-least"
        if self.lo == 0:
            return "at-most"
        return "between"

    def __str__(self) -> str:
        hi = "inf" if self.hi is None else str(self.hi)
        s = f"{self.name}({', '.join(self.outer.head)}) :- {', '.join(str(a) for a in self.outer.atoms)}"
        if self.inner.atoms or self.tally or (self.lo, self.hi) != (0, None):
            s += f" #exists[{self.lo},{hi}]({', '.join(self.tally)}) . "
            s += ", ".join(str(a) for a in self.inner.atoms)
        return s.replace(":-  #", ":- #")


class QueryError(ValueError):
    pass


def as_threshold(q) -> ThresholdQuery:
    if isinstance(q, ThresholdQuery):
        return q
    return ThresholdQuery(q, 0, None, CQ(q.head, (), "p"), (), q.name)


def classify_vars(t: ThresholdQuery) -> tuple:
    t = as_threshold(t)
    fvar = frozenset(t.outer.head)
    tvar = frozenset(t.tally)
    qvar = t.outer.exist_vars | (t.inner.vars - fvar - tvar)
    return fvar, tvar, qvar


def combined_cq(t: ThresholdQuery) -> ConjunctiveQuery:
    t = as_threshold(t)
    return CQ(t.outer.head + t.tally, t.outer.atoms + t.inner.atoms, "r")


def to_text(q) -> str:
    return str(q) + "\n"


# -- parser ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<implies>:-)
  | (?P<exists>\#exists)
  | (?P<const>"(?:[^"]|"")*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<punct>[(),.\[\]])
""", re.VERBOSE)


class _Tokens:
    def __init__(self, text: str):
        self.toks = []
        pos, line, col = 0, 1, 1
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise QueryError(f"syntax error at line {line}, column {col}: unexpected {text[pos]!r}")
            kind = m.lastgroup
            val = m.group()
            if kind != "ws":
                self.toks.append((kind, val, line, col))
            nl = val.count("\n")
            if nl:
                line += nl
                col = len(val) - val.rfind("\n")
            else:
                col += len(val)
            pos = m.end()
        self.toks.append(("eof", "", line, col))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, val=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (val is not None and tok[1] != val):
            want = val if val is not None else kind
            got = tok[1] or "end of input"
            raise QueryError(f"syntax error at line {tok[2]}, column {tok[3]}: expected {want}, got {got!r}")
        self.i += 1
        return tok

    def at(self, kind, val=None) -> bool:
        tok = self.toks[self.i]
        return tok[0] == kind and (val is None or tok[1] == val)


def _is_var(name: str) -> bool:
    return name[0].islower() or name[0] == "_"


def _vars(ts: _Tokens) -> list:
    out = []
    ts.take("punct", "(")
    if not ts.at("punct", ")"):
        while True:
            tok = ts.take("name")
            if not _is_var(tok[1]):
                raise QueryError(f"line {tok[2]}, column {tok[3]}: {tok[1]!r} is not a variable")
            out.append(tok[1])
            if ts.at("punct", ")"):
                break
            ts.take("punct", ",")
    ts.take("punct", ")")
    if len(set(out)) != len(out):
        raise QueryError("repeated variable in variable list")
    return out


def _atom(ts: _Tokens) -> Atom:
    rel = ts.take("name")[1]
    ts.take("punct", "(")
    terms = []
    while True:
        if ts.at("const"):
            raw = ts.take("const")[1]
            terms.append(Const(raw[1:-1].replace('""', '"')))
        else:
            tok = ts.take("name")
            if not _is_var(tok[1]):
                raise QueryError(f"line {tok[2]}, column {tok[3]}: variables must start lowercase, got {tok[1]!r}")
            terms.append(tok[1])
        if ts.at("punct", ")"):
            break
        ts.take("punct", ",")
    ts.take("punct", ")")
    return Atom(rel, tuple(terms))


def _atoms(ts: _Tokens, stop) -> list:
    out = []
    if stop():
        return out
    out.append(_atom(ts))
    while ts.at("punct", ","):
        ts.take("punct", ",")
        out.append(_atom(ts))
    return out


def _rename(atoms, mapping):
    return [Atom(a.relation, tuple(mapping.get(t, t) if isinstance(t, str) else t for t in a.terms)) for a in atoms]


def _fresh(base, used):
    i = 1
    while f"{base}_{i}" in used:
        i += 1
    name = f"{base}_{i}"
    used.add(name)
    return name


def parse_query(text: str):
    """Parse a CQ or a threshold query. Returns CQ when there is no #exists."""
    ts = _Tokens(text)
    name = ts.take("name")[1]
    head = _vars(ts)
    ts.take("implies")
    outer = _atoms(ts, lambda: ts.at("exists") or ts.at("eof") or ts.at("punct", "."))
    if not ts.at("exists"):
        if ts.at("punct", "."):
            ts.take("punct", ".")
        ts.take("eof")
        q = CQ(tuple(head), tuple(outer), name)
        missing = set(head) - q.vars
        if missing:
            raise QueryError(f"head variables {sorted(missing)} occur in no atom")
        return q
    ts.take("exists")
    ts.take("punct", "[")
    lo = int(ts.take("num")[1])
    ts.take("punct", ",")
    if ts.at("name", "inf"):
        ts.take("name")
        hi = None
    else:
        hi = int(ts.take("num")[1])
    ts.take("punct", "]")
    tally = _vars(ts)
    ts.take("punct", ".")
    inner = _atoms(ts, lambda: ts.at("eof"))
    if ts.at("punct", "."):
        ts.take("punct", ".")
    ts.take("eof")

    if set(tally) & set(head):
        raise QueryError(f"tally variables {sorted(set(tally) & set(head))} are also free")
    # existential variables of the two parts must be disjoint; rename clashes
    used = set(head) | set(tally)
    used |= {t for a in outer + inner for t in a.terms if isinstance(t, str)}
    q_ex = {t for a in outer for t in a.terms if isinstance(t, str)} - set(head)
    clash = q_ex & set(tally)
    outer = _rename(outer, {x: _fresh(x, used) for x in sorted(clash)})
    q_ex = {t for a in outer for t in a.terms if isinstance(t, str)} - set(head)
    p_ex = {t for a in inner for t in a.terms if isinstance(t, str)} - set(head) - set(tally)
    inner = _rename(inner, {x: _fresh(x, used) for x in sorted(q_ex & p_ex)})
    q = CQ(tuple(head), tuple(outer), name)
    p = CQ(tuple(head) + tuple(tally), tuple(inner), "p")
    arity = {}
    for a in outer + inner:
        if arity.setdefault(a.relation, len(a.terms)) != len(a.terms):
            raise QueryError(f"relation {a.relation} used with arities {arity[a.relation]} and {len(a.terms)}")
    return ThresholdQuery(q, lo, hi, p, tuple(tally), name)


def load_query(path) -> "ConjunctiveQuery | ThresholdQuery":
    with open(path, encoding="utf-8") as fh:
        return parse_query(fh.read())
