"""Loading and saving databases."""
from __future__ import annotations

import csv
import os
from collections import defaultdict
from pathlib import Path

from .relcore import Database


class LoadError(ValueError):
    pass


def load_database_csv(directory) -> Database:
    """One `<Relation>.csv` per relation, no header, comma separated."""
    d = Path(directory)
    if not d.is_dir():
        raise LoadError(f"{d} is not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix == ".csv")
    if not files:
        raise LoadError(f"no .csv files in {d}")
    rels, arities = {}, {}
    for path in files:
        rows = []
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                for lineno, row in enumerate(csv.reader(fh), 1):
                    if not row:
                        continue
                    if rows and len(row) != len(rows[0]):
                        raise LoadError(f"{path}:{lineno}: expected {len(rows[0])} fields, got {len(row)}")
                    rows.append(tuple(row))
        except OSError as e:
            raise LoadError(f"cannot read {path}: {e}") from e
        rels[path.stem] = rows
        if rows:
            arities[path.stem] = len(rows[0])
    return Database(rels, arities)


def save_database_csv(D: Database, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    for name, rel in D.relations.items():
        with open(Path(directory) / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for t in sorted(rel):
                w.writerow(t)


def load_edge_list(path) -> Database:
    """`src<TAB>dst` lines into R, or `label<TAB>src<TAB>dst` into one relation per label.

    A unary Node relation lists every endpoint.
    """
    rels = defaultdict(set)
    nodes = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) == 2:
                label, (s, t) = "R", parts
            elif len(parts) == 3:
                label, s, t = parts
            else:
                raise LoadError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
            if not s or not t or not label:
                raise LoadError(f"{path}:{lineno}: empty field")
            rels[label].add((s, t))
            nodes.update((s, t))
    rels["Node"] = {(n,) for n in nodes}
    return Database(rels)
