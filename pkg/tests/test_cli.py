import json

import pytest

from cfml.cli import compare_languages, main
from cfml.multiset import Multiset
from cfml.semantics import enumerate_language
from cfml.transforms import chomsky_normal_form

from genutil import DEMO_TEXT, demo_grammar

CATALAN = """
terminals: a
nonterminals: A
start: A
A -> A A
A -> a
"""

TWO_COPIES = """
terminals: a
nonterminals: A
start: A
A -> a
A -> a
"""

ONE_COPY = """
terminals: a
nonterminals: A
start: A
A -> a
"""


@pytest.fixture
def demo_file(tmp_path):
    path = tmp_path / "demo.g"
    path.write_text(DEMO_TEXT)
    return str(path)


@pytest.fixture
def catalan_file(tmp_path):
    path = tmp_path / "catalan.g"
    path.write_text(CATALAN)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_show_round_trips(demo_file, capsys):
    code, out, _ = run(capsys, "show", demo_file)
    assert code == 0
    from cfml import parse_grammar_text
    assert parse_grammar_text(out) == demo_grammar()


def test_analyze_text(demo_file, capsys):
    code, out, _ = run(capsys, "analyze", demo_file)
    assert code == 0
    assert "circular: B C" in out
    assert "cocircular-classes: {B C}" in out
    assert "A inf" in out


def test_analyze_empty_sections(tmp_path, capsys):
    path = tmp_path / "tiny.g"
    path.write_text("terminals: a\nnonterminals: A\nstart: A\nA -> a\n")
    code, out, _ = run(capsys, "analyze", str(path))
    assert code == 0
    assert "useless: (none)" in out
    assert "circular: (none)" in out


def test_analyze_json_chain(tmp_path, capsys):
    lines = ["terminals:", "nonterminals: A0 A1 A2 A3", "start: A3",
             "A0 -> _", "A0 -> _"]
    lines += [f"A{k} -> A{k-1} A{k-1}" for k in (1, 2, 3)]
    path = tmp_path / "chain.g"
    path.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "analyze", str(path), "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["nullable_counts"]["A3"] == "256"


def test_enumerate_text(catalan_file, capsys):
    code, out, _ = run(capsys, "enumerate", catalan_file, "--max-len", "4")
    assert code == 0
    assert out.splitlines() == ["1 * a", "1 * aa", "2 * aaa", "5 * aaaa"]


def test_enumerate_inf_token(demo_file, capsys):
    code, out, _ = run(capsys, "enumerate", demo_file, "--max-len", "0")
    assert code == 0
    assert out.splitlines() == ["inf * _"]


def test_enumerate_empty_start(tmp_path, capsys):
    path = tmp_path / "empty.g"
    path.write_text("terminals: a\nnonterminals: A\nstart:\nA -> a\n")
    code, out, _ = run(capsys, "enumerate", str(path), "--max-len", "3")
    assert code == 0
    assert out == ""


def test_enumerate_json(catalan_file, capsys):
    code, out, _ = run(capsys, "enumerate", catalan_file, "--max-len", "3",
                       "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload == [
        {"count": "1", "string": "a"},
        {"count": "1", "string": "aa"},
        {"count": "2", "string": "aaa"},
    ]


def test_enumerate_plot(catalan_file, tmp_path, capsys):
    fig = tmp_path / "spectrum.png"
    code, out, _ = run(capsys, "enumerate", catalan_file, "--max-len", "3",
                       "--plot", str(fig))
    assert code == 0
    assert out.splitlines()[0] == "1 * a"
    data = fig.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"


def test_analyze_plot(demo_file, tmp_path, capsys):
    fig = tmp_path / "counts.svg"
    code, _, _ = run(capsys, "analyze", demo_file, "--plot", str(fig))
    assert code == 0
    assert b"<svg" in fig.read_bytes()[:500]


def test_count_command(tmp_path, capsys):
    path = tmp_path / "pair.g"
    path.write_text("terminals: a b\nnonterminals: A B\nstart: A B\nA -> a\nB -> b\n")
    code, out, _ = run(capsys, "count", str(path), "--sigma", "A B", "a b")
    assert code == 0 and out.strip() == "1"
    code, out, _ = run(capsys, "derivations", str(path), "--sigma", "A B",
                       "--bound", "2", "a b")
    assert code == 0 and out.strip() == "2"
    code, out, _ = run(capsys, "oracle-count", str(path), "--sigma", "A B",
                       "--bound", "2", "a b")
    assert code == 0 and out.strip() == "1"


def test_count_inf(demo_file, capsys):
    code, out, _ = run(capsys, "count", demo_file, "--sigma", "A", "_")
    assert code == 0 and out.strip() == "inf"


def test_transform_command(demo_file, tmp_path, capsys):
    out_path = tmp_path / "out.g"
    code, _, _ = run(capsys, "transform", demo_file, "--pipeline", "cnf:keep-z",
                     "--out", str(out_path))
    assert code == 0
    from cfml import parse_grammar_text
    got = parse_grammar_text(out_path.read_text())
    expected = chomsky_normal_form(demo_grammar(), "keep-z").grammar
    assert got == expected


def test_transform_pipeline_errors(demo_file, capsys):
    code, _, err = run(capsys, "transform", demo_file, "--pipeline", "bogus")
    assert code == 3
    code, _, err = run(capsys, "transform", demo_file, "--pipeline", "nolr:A")
    assert code == 4  # the demo grammar is not in normal form


def test_transduce_builtin(tmp_path, capsys):
    path = tmp_path / "word.g"
    path.write_text("terminals: a b\nnonterminals: S A B\nstart: S\n"
                    "S -> A B\nA -> a\nB -> b\n")
    code, out, _ = run(capsys, "transduce", str(path), "--family", "prefix")
    assert code == 0
    from cfml import parse_grammar_text
    got = enumerate_language(parse_grammar_text(out), 4)
    rendered = {s.render(compact=True): c for s, c in got.items()}
    assert rendered == {"_": 1, "a": 1, "ab": 1}


def test_transduce_fst_file(tmp_path, capsys):
    gpath = tmp_path / "word.g"
    gpath.write_text("terminals: a\nnonterminals: A\nstart: A\nA -> a\n")
    mpath = tmp_path / "double.t"
    mpath.write_text("states: q0\nstart: q0\nq0 a -> q0\nq0 a => 1 * a a\n"
                     "q0 _ => 1 * _\n")
    code, out, _ = run(capsys, "transduce", str(gpath), "--family", str(mpath))
    assert code == 0
    from cfml import parse_grammar_text
    got = enumerate_language(parse_grammar_text(out), 4)
    assert {s.render(compact=True): c for s, c in got.items()} == {"aa": 1}


def test_equiv_levels(tmp_path, capsys):
    f1 = tmp_path / "one.g"
    f2 = tmp_path / "two.g"
    f1.write_text(ONE_COPY)
    f2.write_text(TWO_COPIES)
    code, out, _ = run(capsys, "equiv", str(f1), str(f2), "--max-len", "3")
    assert code == 1
    # supports agree but the 0/1/many classes do not
    assert out.splitlines()[0] == "similar"
    assert "'a' counts 1 vs 2" in out
    f3 = tmp_path / "other.g"
    f3.write_text("terminals: a\nnonterminals: A\nstart: A\nA -> a a\n")
    code, out, _ = run(capsys, "equiv", str(f1), str(f3), "--max-len", "3")
    assert code == 1
    assert out.splitlines()[0] == "different"


def test_equiv_multiset_equal(demo_file, tmp_path, capsys):
    out_path = tmp_path / "cnf.g"
    run(capsys, "transform", demo_file, "--pipeline", "cnf:keep-z", "--out", str(out_path))
    code, out, _ = run(capsys, "equiv", demo_file, str(out_path), "--max-len", "4")
    assert code == 0
    assert out.strip() == "multiset-equal"


def test_equiv_json(demo_file, tmp_path, capsys):
    sim = tmp_path / "sim.g"
    run(capsys, "transform", demo_file, "--pipeline", "cnf:similar", "--out", str(sim))
    code, out, _ = run(capsys, "equiv", demo_file, str(sim), "--max-len", "3",
                       "--format", "json")
    assert code == 1
    payload = json.loads(out)
    assert payload["level"] in ("strongly-equivalent", "similar")
    assert payload["first_divergence"]["count1"] == "inf"


def test_bad_input_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.g"
    path.write_text("terminals: a\nnonterminals: a\nstart: a\n")
    code, _, err = run(capsys, "analyze", str(path))
    assert code == 3
    code, _, err = run(capsys, "analyze", str(tmp_path / "missing.g"))
    assert code == 3


def test_verdict_implication_chain():
    m1 = Multiset.from_counts({"a": 1})
    assert compare_languages(m1, m1).level == "multiset-equal"
    m2 = Multiset.from_counts({"a": 2})
    m3 = Multiset.from_counts({"a": 3})
    assert compare_languages(m2, m3).level == "strongly-equivalent"
    assert compare_languages(m1, m2).level == "similar"
    assert compare_languages(m1, Multiset()).level == "different"
    assert compare_languages(m2, m3).first_divergence == ("a", "2", "3")


def test_outputs_are_deterministic(demo_file, capsys):
    first = run(capsys, "analyze", demo_file)
    second = run(capsys, "analyze", demo_file)
    assert first == second
    e1 = run(capsys, "enumerate", demo_file, "--max-len", "3")
    e2 = run(capsys, "enumerate", demo_file, "--max-len", "3")
    assert e1 == e2


def test_transform_full_pipeline_example(tmp_path, capsys):
    path = tmp_path / "lr.g"
    path.write_text("terminals: a b\nnonterminals: X B\nstart: X\n"
                    "X -> X B\nX -> a\nB -> b\n")
    out_path = tmp_path / "gnf.g"
    code, _, _ = run(capsys, "transform", str(path),
                     "--pipeline", "reduce,cnf:strict,nolr:X,gnf",
                     "--out", str(out_path))
    assert code == 0
    code, out, _ = run(capsys, "equiv", str(path), str(out_path), "--max-len", "5")
    assert code == 0 and out.strip() == "multiset-equal"
