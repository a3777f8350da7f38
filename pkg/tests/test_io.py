import pytest

from tqeval.io import LoadError, load_database_csv, load_edge_list, save_database_csv
from tqeval.relcore import Database


def test_fixture_database(small_db):
    assert small_db.arities == {"B": 2, "C": 2, "D": 2, "E": 2}
    assert len(small_db.adom) == 11
    assert small_db.adom == {"a1", "b1", "b2", "b3", "c1", "c2", "d1", "d2", "e1", "e2", "e3"}


def test_empty_relation_file(tmp_path):
    (tmp_path / "R.csv").write_text("a,b\n")
    (tmp_path / "S.csv").write_text("")
    D = load_database_csv(tmp_path)
    assert D.get("S") == frozenset() and D.size() == 1


def test_ragged_rows(tmp_path):
    (tmp_path / "R.csv").write_text("a,b\nc\n")
    with pytest.raises(LoadError, match="R.csv:2"):
        load_database_csv(tmp_path)


def test_missing_or_empty_directory(tmp_path):
    with pytest.raises(LoadError):
        load_database_csv(tmp_path)
    with pytest.raises(LoadError):
        load_database_csv(tmp_path / "nope")


def test_csv_round_trip(tmp_path, small_db):
    D = Database({"R": [("a", 'quo"te'), ("x,y", "b")], "S": [("c",)]})
    for db in (D, small_db):
        out = tmp_path / str(id(db))
        save_database_csv(db, out)
        assert load_database_csv(out) == db


def test_edge_lists(tmp_path):
    f = tmp_path / "g.tsv"
    f.write_text("1\t2\n2\t3\n3\t1\n1\t2\n")
    D = load_edge_list(f)
    assert len(D.get("R")) == 3 and D.get("Node") == {("1",), ("2",), ("3",)}
    f.write_text("knows\ta\tb\nlikes\tb\tc\n# comment\n")
    D = load_edge_list(f)
    assert D.get("knows") == {("a", "b")} and D.get("likes") == {("b", "c")}
    f.write_text("a\tb\nbroken\n")
    with pytest.raises(LoadError, match=":2"):
        load_edge_list(f)
