from itertools import product

from tqeval.oracle import count_grouped_naive, evaluate_cq_naive, evaluate_tq_naive, matches
from tqeval.querylang import as_threshold, parse_query
from tqeval.relcore import Database


def test_boolean_query_on_fixture(small_db):
    # the company query with relations renamed onto the fixture database
    q = parse_query("q(x,y,z) :- B(x,y), C(w,x), D(w,z)")
    got = {tuple(b.values()) for b in evaluate_cq_naive(q, small_db).bindings()}
    # hand enumeration: all assignments of x,y,z,w over the domain
    dom = sorted(small_db.adom)
    want = set()
    for x, y, z, w in product(dom, repeat=4):
        if (x, y) in small_db.get("B") and (w, x) in small_db.get("C") and (w, z) in small_db.get("D"):
            want.add((x, y, z))
    assert got == want


def test_cq_trivial_cases(small_db):
    q = parse_query('q(x) :- B(x,y), B("zz", y)')
    assert not evaluate_cq_naive(q, small_db).rows
    q = parse_query("q(x,y) :- E(x,y)")
    assert evaluate_cq_naive(q, small_db).rows == small_db.get("E")


def test_tq_examples(small_db, main_tq):
    ans = {tuple(b[x] for x in "xyz") for b in evaluate_tq_naive(main_tq, small_db).bindings()}
    assert ans == {("a1", "b1", "c1"), ("a1", "b2", "c1"), ("a1", "b3", "c1"), ("a1", "b3", "c2")}
    q = parse_query("q(x,y) :- B(x,y)")
    assert evaluate_tq_naive(as_threshold(q), small_db).rows == small_db.get("B")
    t = parse_query("t(x) :- B(x,y1) #exists[1000,inf](y) . B(x,y)")
    assert not evaluate_tq_naive(t, small_db).rows


def test_empty_outer_body_ranges_over_domain():
    D = Database({"R": [("a", "b"), ("a", "c")], "S": [("d",)]})
    t = parse_query("t(x) :- #exists[0,0](y) . R(x,y)")
    got = {b["x"] for b in evaluate_tq_naive(t, D).bindings()}
    assert got == {"b", "c", "d"}


def test_grouped_counts(small_db, star_q):
    assert count_grouped_naive(star_q, ["y"], small_db).as_dict() == {
        "b1": 1, "b2": 1, "b3": 2, "c1": 3, "c2": 2}
    full = count_grouped_naive(star_q, ["y", "u"], small_db)
    assert set(full.rows.values()) == {1}
    empty = count_grouped_naive(star_q, ["y"], Database({}))
    assert not empty.rows


def test_matches_respects_start():
    D = Database({"R": [("a", "b"), ("c", "d")]})
    q = parse_query("q(x,y) :- R(x,y)")
    assert list(matches(q.atoms, D, {"x": "c"})) == [{"x": "c", "y": "d"}]
