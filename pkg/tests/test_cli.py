import io
import json
import subprocess
import sys

from conftest import FIXTURES
from tqeval.cli import run_command

DB = str(FIXTURES / "fig4")
Q = str(FIXTURES / "main.tq")
ANSWERS = {"a1\tb1\tc1", "a1\tb2\tc1", "a1\tb3\tc1", "a1\tb3\tc2"}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_count():
    assert run("eval", "--db", DB, "--query", Q, "--mode", "count") == (0, "4\n", "")
    code, out, _ = run("eval", "--db", DB, "--query", Q, "--mode", "count", "--format", "json")
    assert json.loads(out) == {"count": 4}


def test_enum_limit():
    _, full, _ = run("eval", "--db", DB, "--query", Q, "--mode", "enum")
    assert set(full.splitlines()) == ANSWERS
    code, out, _ = run("eval", "--db", DB, "--query", Q, "--mode", "enum", "--limit", "2")
    assert code == 0 and out.splitlines() == full.splitlines()[:2]


def test_sample():
    code, out, _ = run("eval", "--db", DB, "--query", Q, "--mode", "sample", "--seed", "7", "--n", "1000")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 1000 and set(lines) == ANSWERS
    again = run("eval", "--db", DB, "--query", Q, "--mode", "sample", "--seed", "7", "--n", "1000")[1]
    assert again == out
    code, _, err = run("eval", "--db", DB, "--query", Q, "--mode", "sample")
    assert code == 1 and "--seed" in err


def test_bool_and_oracle_check():
    assert run("eval", "--db", DB, "--query", Q, "--mode", "bool") == (0, "true\n", "")
    code, out, _ = run("oracle-check", "--db", DB, "--query", Q)
    assert code == 0 and out.startswith("agree")


def test_widths_and_decompose():
    code, out, _ = run("widths", "--query", Q)
    rows = dict(line.split("\t") for line in out.splitlines())
    assert code == 0 and (rows["tw"], rows["fc_tw"], rows["x_connex_tw"]) == ("2", "2", "3")
    code, out, _ = run("decompose", "--query", Q, "--variant", "fc")
    assert code == 0 and out.splitlines()[-1].startswith("connex:")
    code, out, _ = run("decompose", "--query", Q, "--variant", "xconnex", "--nice", "--format", "json")
    doc = json.loads(out)
    assert doc["width"] == 3 and doc["connex"]


def test_errors(tmp_path):
    code, _, err = run("eval", "--db", DB, "--query", str(tmp_path / "missing.tq"))
    assert code == 1 and err.startswith("error")
    bad = tmp_path / "bad.tq"
    bad.write_text("t(x) :- B(x")
    code, _, err = run("eval", "--db", DB, "--query", str(bad))
    assert code == 1 and "line 1" in err
    code, _, _ = run("eval", "--db", str(tmp_path), "--query", Q)
    assert code == 1
    code, _, _ = run("frobnicate")
    assert code == 1


def test_edges_input(tmp_path):
    g = tmp_path / "g.tsv"
    g.write_text("a\tb\na\tc\nb\tc\n")
    q = tmp_path / "q.tq"
    q.write_text("t(x) :- Node(x) #exists[2,inf](y) . R(x,y)\n")
    assert run("eval", "--edges", str(g), "--query", str(q), "--mode", "enum") == (0, "a\n", "")


def test_oracle_check_reports_mismatch(monkeypatch):
    import tqeval.cli as cli
    monkeypatch.setattr(cli, "count_tq", lambda s: -1)
    code, out, _ = run("oracle-check", "--db", DB, "--query", Q)
    assert code == 2 and out.startswith("MISMATCH")


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "tqeval.cli", "eval", "--db", DB, "--query", Q],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "4\n"
