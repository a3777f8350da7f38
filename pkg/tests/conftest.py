import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from tqeval.decomp import TreeDecomposition
from tqeval.io import load_database_csv
from tqeval.querylang import load_query, parse_query

settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("dev", max_examples=50, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def tree(shape) -> TreeDecomposition:
    """Build a decomposition from nested (bag, [children]) pairs."""
    bags, parent = [], []

    def add(node, p):
        bag, kids = node
        u = len(bags)
        bags.append(frozenset(bag))
        parent.append(p)
        for k in kids:
            add(k, u)

    add(shape, None)
    return TreeDecomposition(bags, parent, 0)


@pytest.fixture(scope="session")
def small_db():
    return load_database_csv(FIXTURES / "fig4")


@pytest.fixture(scope="session")
def main_tq():
    return load_query(FIXTURES / "main.tq")


@pytest.fixture(scope="session")
def boolean_q():
    return parse_query("q(x,y,z) :- Assets(x,y), Subsidiary(w,x), Shareholder(w,z)")


@pytest.fixture(scope="session")
def star_q():
    """r(y,u): D then E, grouped by y in the worked example."""
    return parse_query("r(y,u) :- D(y,y1), E(y1,u)")


def t1():
    return tree(({"x", "y"}, [({"w", "x"}, [({"w", "z"}, [])])]))


def t2():
    return tree(({"x", "y", "z"}, [({"w", "x", "z"}, [])]))


def t3():
    ybranch = ({"x", "y"}, [({"y"}, [({"y", "u"}, [({"y", "y1", "u"}, [])])])])
    zbranch = ({"x", "z"}, [({"z"}, [({"z", "v"}, [({"z", "z1", "v"}, [])])])])
    return tree(({"x"}, [ybranch, zbranch]))


def t4():
    ybranch = ({"x", "y"}, [({"y"}, [({"y", "y1"}, [({"y1", "u"}, [])])])])
    zbranch = ({"x", "z"}, [({"z"}, [({"z", "z1"}, [({"z1", "v"}, [])])])])
    return tree(({"x"}, [ybranch, zbranch]))


def add_root(T: TreeDecomposition, X) -> TreeDecomposition:
    """T under a new root with bag X."""
    n = len(T)
    parent = list(T.parent) + [None]
    parent[T.root] = n
    return TreeDecomposition(list(T.bags) + [frozenset(X)], parent, n)
