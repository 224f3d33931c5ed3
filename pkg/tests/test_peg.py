import random

import pytest
from hypothesis import given, settings, strategies as st

from stencilflow import peg
from stencilflow.peg import (
    Choice, CharClass, Literal, Not, OneOrMore, RuleRef, Sequence,
)

from grammar_gen import outcome, random_grammar, random_input


# -- compile_grammar ----------------------------------------------------------


def test_single_rule_one_or_more():
    g = peg.compile_grammar("S <- 'a'+")
    assert g.start == "S"
    assert g.rules == {"S": OneOrMore(Literal("a"))}


def test_rule_reference():
    g = peg.compile_grammar("S <- A  A <- 'x'")
    assert g.rules["S"] == RuleRef("A")
    assert g.rules["A"] == Literal("x")


def test_undefined_rule_named():
    with pytest.raises(peg.UndefinedRuleError) as err:
        peg.compile_grammar("S <- B")
    assert err.value.name == "B"


def test_notation_operators():
    g = peg.compile_grammar("S <- ('a' / [b-c]) !'d'  # trailing comment\n")
    assert g.rules["S"] == Sequence((Choice((Literal("a"), CharClass((("b", "c"),)))), Not(Literal("d"))))


def test_literal_escapes():
    g = peg.compile_grammar(r"S <- 'it\'s' '\\'")
    assert g.rules["S"] == Sequence((Literal("it's"), Literal("\\")))


def test_syntax_error_has_position():
    with pytest.raises(peg.GrammarSyntaxError) as err:
        peg.compile_grammar("S <- 'a'\nT <- ( 'b'")
    assert err.value.line == 2


def test_unterminated_literal():
    with pytest.raises(peg.GrammarSyntaxError):
        peg.compile_grammar("S <- 'abc")


def test_empty_grammar_rejected():
    with pytest.raises(peg.GrammarSyntaxError):
        peg.compile_grammar("# nothing here\n")


@pytest.mark.parametrize("text", [
    "S <- S 'a'",
    "S <- A 'x'\nA <- S / 'y'",
    "S <- 'a'? S",
    "S <- !'b' S",
])
def test_left_recursion_rejected(text):
    with pytest.raises(peg.LeftRecursionError):
        peg.compile_grammar(text)


def test_right_recursion_accepted():
    g = peg.compile_grammar("S <- 'a' S / 'a'")
    assert peg.match(g, "S", "aaa").span == (0, 3)


# -- match --------------------------------------------------------------------


def test_greedy_repetition():
    g = peg.compile_grammar("S <- 'a'+")
    assert peg.match(g, "S", "aaa").span == (0, 3)


def test_ordered_choice_commits():
    g = peg.compile_grammar("S <- 'a' / 'ab'")
    assert peg.match(g, "S", "ab").span == (0, 1)


def test_not_predicate_fails_at_zero():
    g = peg.compile_grammar("S <- !'b' 'a'")
    with pytest.raises(peg.NoMatch) as err:
        peg.match(g, "S", "b")
    assert err.value.position == 0


def test_and_predicate_consumes_nothing():
    g = peg.compile_grammar("S <- &'ab' 'a'")
    assert peg.match(g, "S", "abc").span == (0, 1)


def test_farthest_failure_position():
    g = peg.compile_grammar("S <- 'a' 'b' 'c' / 'a'")
    tree = peg.match(g, "S", "abx")
    assert tree.span == (0, 1)
    with pytest.raises(peg.NoMatch) as err:
        peg.parse(g, "abx")
    assert err.value.position == 2
    assert (err.value.line, err.value.column) == (1, 3)


def test_parse_requires_full_input():
    g = peg.compile_grammar("S <- 'a'*")
    assert peg.parse(g, "aaa").span == (0, 3)
    with pytest.raises(peg.NoMatch):
        peg.parse(g, "aab")


def test_child_trees_follow_rule_refs():
    g = peg.compile_grammar("S <- A B  A <- 'x'+  B <- 'y'")
    tree = peg.match(g, "S", "xxy")
    assert tree.shape() == ("S", (0, 3), (("A", (0, 2), ()), ("B", (2, 3), ())))
    assert tree.find("B")[0].text("xxy") == "y"


def test_unknown_start_rule():
    g = peg.compile_grammar("S <- 'a'")
    with pytest.raises(peg.UndefinedRuleError):
        peg.match(g, "T", "a")


def test_line_col():
    assert peg.line_col("ab\ncd", 0) == (1, 1)
    assert peg.line_col("ab\ncd", 4) == (2, 2)


def test_memo_hits_on_backtracking():
    # both alternatives start with A, so the second reuses the memo entry
    g = peg.compile_grammar("S <- A 'x' / A 'y'  A <- 'a'+")
    stats = peg.MatchStats()
    peg.match(g, "S", "aaay", stats=stats)
    assert stats.memo_hits >= 1
    assert stats.distinct == stats.evaluations


def test_exponential_grammar_stays_linear():
    # without memoization this grammar backtracks exponentially in depth
    g = peg.compile_grammar("S <- A 'z' / A  A <- 'a' A 'b' / 'a' A 'c' / 'a'")
    text = "a" * 18
    stats = peg.MatchStats()
    peg.match(g, "S", text, stats=stats)
    assert stats.distinct <= len(g.rules) * (len(text) + 1)


def _spans_nested(tree):
    last = tree.span[0]
    for child in tree.children:
        assert tree.span[0] <= child.span[0] <= child.span[1] <= tree.span[1]
        assert child.span[0] >= last
        last = child.span[1]
        _spans_nested(child)


def test_random_memo_agreement_and_bound():
    rng = random.Random(20240611)
    for _ in range(300):
        _, g = random_grammar(rng)
        text = random_input(rng)
        stats = peg.MatchStats()
        memo = outcome(g, text, True, stats)
        assert memo == outcome(g, text, False)
        assert stats.distinct <= len(g.rules) * (len(text) + 1)
        if memo[0] == "tree":
            _spans_nested(peg.match(g, g.start, text))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_property_memo_agreement(seed):
    rng = random.Random(seed)
    _, g = random_grammar(rng)
    text = random_input(rng)
    assert outcome(g, text, True) == outcome(g, text, False)


def test_grammar_shared_between_threads():
    from concurrent.futures import ThreadPoolExecutor

    g = peg.compile_grammar("S <- ('a' / 'b')+")
    with ThreadPoolExecutor(4) as pool:
        spans = list(pool.map(lambda n: peg.match(g, "S", "ab" * n).span, range(1, 50)))
    assert spans == [(0, 2 * n) for n in range(1, 50)]
