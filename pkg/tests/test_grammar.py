import pytest

from cfml import (EPSILON, Grammar, GrammarError, GrammarTextError, Multiset,
                  ParseForest, ParseForestError, ParseNode, Production,
                  SymString, make_grammar, nonterm, parse_grammar_text,
                  render_grammar_text, term, verify_parse)

from genutil import demo_grammar


def test_symbol_validation():
    with pytest.raises(GrammarError):
        term("")
    with pytest.raises(GrammarError):
        nonterm("has space")
    with pytest.raises(GrammarError):
        term("_")


def test_symstring_behaves_like_a_sequence():
    a, b = term("a"), term("b")
    s = SymString([a, b])
    assert len(s) == 2
    assert list(s) == [a, b]
    assert s[0:1] == SymString([a])
    assert s + SymString([a]) == SymString([a, b, a])
    assert s * 2 == SymString([a, b, a, b])
    assert EPSILON.render() == "_"
    assert s.render() == "a b"
    assert s.render(compact=True) == "ab"


def test_parse_demo_grammar():
    g = demo_grammar()
    assert {t.name for t in g.terminals} == {"a"}
    assert {t.name for t in g.nonterminals} == {"A", "B", "C"}
    assert g.start == Multiset([g.sym_string("A")])
    assert len(g.productions) == 6
    assert len({p.pid for p in g.productions}) == 6


def test_repeated_lines_get_distinct_pids():
    g = parse_grammar_text("""
terminals: a
nonterminals: A
start: A
A -> a
A -> a
""")
    assert len(g.productions) == 2
    assert g.productions[0].pid != g.productions[1].pid


def test_count_prefix_repeats_entries():
    g = parse_grammar_text("""
terminals:
nonterminals: C
start: 2 * C
2 * C -> _
""")
    assert len(g.productions) == 2
    assert g.start.count(g.sym_string("C")) == 2


def test_epsilon_spelling():
    g = parse_grammar_text("terminals:\nnonterminals: A\nstart: _\nA -> _\n")
    assert g.productions[0].rhs == EPSILON
    assert g.start.count(EPSILON) == 1


def test_symbol_in_both_alphabets_rejected():
    with pytest.raises(GrammarTextError):
        parse_grammar_text("terminals: a\nnonterminals: a\nstart: a\n")


def test_undeclared_symbol_rejected_with_line():
    bad = "terminals: a\nnonterminals: A\nstart: A\nA -> q\n"
    with pytest.raises(GrammarTextError) as err:
        parse_grammar_text(bad)
    assert err.value.line == 4


def test_malformed_multiplicity():
    with pytest.raises(GrammarTextError):
        parse_grammar_text("terminals: a\nnonterminals: A\nstart: A\nA -> _ _\n")


def test_round_trip():
    g = demo_grammar()
    assert parse_grammar_text(render_grammar_text(g)) == g


def test_round_trip_multiplicity_shorthand():
    g = parse_grammar_text("terminals:\nnonterminals: C\nstart:\n2 * C -> _\n")
    text = render_grammar_text(g)
    assert "2 * C -> _" in text
    assert "start:" in text.splitlines()[2]
    assert parse_grammar_text(text) == g


def test_basic_strings():
    g = demo_grammar()
    expected = Multiset([
        g.sym_string("A"),
        g.sym_string("A A a"), g.sym_string("B"), EPSILON,
        g.sym_string("C C"), g.sym_string("B B"), EPSILON,
    ])
    assert g.basic_strings() == expected


def test_basic_strings_no_productions():
    g = make_grammar("a b", "A", ["a b"], [])
    assert g.basic_strings() == Multiset([g.sym_string("a b")])


def test_productions_of():
    g = demo_grammar()
    a = g.symbol("A")
    assert g.productions_of(a) == Multiset(
        [g.sym_string("A A a"), g.sym_string("B"), EPSILON])
    b = g.symbol("B")
    assert g.productions_of(b) == Multiset([g.sym_string("C C")])
    g2 = make_grammar("a", "A B", ["A"], ["A -> a"])
    assert g2.productions_of(g2.symbol("B")) == Multiset()
    with pytest.raises(GrammarError):
        g.productions_of(term("a"))


def test_step():
    g = make_grammar("a b", "A B", ["A B"], ["A -> a", "B -> b"])
    got = g.step(g.sym_string("A B"))
    assert got == Multiset([g.sym_string("a B"), g.sym_string("A b")])
    assert g.step(g.sym_string("a b")) == Multiset()
    g2 = make_grammar("a", "A", ["A"], ["A -> a", "A -> a"])
    assert g2.step(g2.sym_string("A")) == Multiset.from_counts({g2.sym_string("a"): 2})


def test_step_distributes_over_msum():
    g = demo_grammar()
    s1, s2 = g.sym_string("A B"), g.sym_string("C")
    both = g.step(s1).msum(g.step(s2))
    merged = Multiset([s1, s2])
    stepped = Multiset()
    for s, c in merged.items():
        stepped = stepped.msum(g.step(s).scale(c))
    assert stepped == both


def test_verify_parse_two_tree_forest():
    g = make_grammar("a b", "A B", ["A B"], ["A -> a", "B -> b"])
    a, b = g.symbol("a"), g.symbol("b")
    pa = next(p for p in g.productions if p.lhs.name == "A")
    pb = next(p for p in g.productions if p.lhs.name == "B")
    forest = ParseForest((
        ParseNode(pa.lhs, pa.pid, (ParseNode(a),)),
        ParseNode(pb.lhs, pb.pid, (ParseNode(b),)),
    ))
    source, target, steps = verify_parse(g, forest)
    assert source == g.sym_string("A B")
    assert target == g.sym_string("a b")
    assert steps == 2


def test_verify_parse_empty_forest():
    g = demo_grammar()
    source, target, steps = verify_parse(g, ParseForest(()))
    assert source == EPSILON and target == EPSILON and steps == 0


def test_verify_parse_epsilon_node_has_no_children():
    g = demo_grammar()
    pe = next(p for p in g.productions if p.lhs.name == "A" and len(p.rhs) == 0)
    forest = ParseForest((ParseNode(g.symbol("A"), pe.pid, ()),))
    source, target, steps = verify_parse(g, forest)
    assert (source, target, steps) == (g.sym_string("A"), EPSILON, 1)


def test_verify_parse_label_mismatch():
    g = make_grammar("a b", "A B", ["A B"], ["A -> a", "B -> b"])
    pb = next(p for p in g.productions if p.lhs.name == "B")
    bad = ParseForest((ParseNode(g.symbol("A"), pb.pid, (ParseNode(g.symbol("b")),)),))
    with pytest.raises(ParseForestError):
        verify_parse(g, bad)


def test_grammar_equality_ignores_pids():
    g1 = make_grammar("a", "A", ["A"], ["A -> a", "A -> a"])
    prods = [Production(10, g1.symbol("A"), g1.sym_string("a")),
             Production(99, g1.symbol("A"), g1.sym_string("a"))]
    g2 = Grammar(g1.terminals, g1.nonterminals, g1.start, prods)
    assert g1 == g2


def test_empty_start_renders_and_parses():
    g = make_grammar("a", "A", [], ["A -> a"])
    text = render_grammar_text(g)
    assert "start:" in text
    assert parse_grammar_text(text) == g


def test_multicharacter_symbol_names():
    g = parse_grammar_text("""
terminals: plus num
nonterminals: Expr
start: Expr
Expr -> Expr plus num
Expr -> num
""")
    assert g.sym_string("Expr plus num").render() == "Expr plus num"
    assert parse_grammar_text(render_grammar_text(g)) == g


def test_round_trip_random_grammars():
    import random
    from genutil import random_grammar
    rng = random.Random(55)
    for _ in range(60):
        g = random_grammar(rng)
        assert parse_grammar_text(render_grammar_text(g)) == g
