"""Program text parsing and load-time validation."""

from __future__ import annotations

import pytest

from star.logic import (
    Compound,
    Constant,
    Integer,
    Literal,
    ParseError,
    RangeRestrictionError,
    StratificationError,
    Variable,
    parse_program,
    parse_query,
)
from star.logic.program import Constraint


def test_single_fact():
    p = parse_program("p(a).")
    assert len(p.rules) == 1
    assert p.rules[0].head == Compound("p", (Constant("a"),))
    assert p.rules[0].body == ()


def test_default_rule_with_negation():
    p = parse_program("flies(X) :- bird(X), not abnormal_bird(X).")
    (rule,) = p.rules
    assert rule.head == Compound("flies", (Variable("X"),))
    first, second = rule.body
    assert isinstance(first, Literal) and not first.negated
    assert first.atom == Compound("bird", (Variable("X"),))
    assert isinstance(second, Literal) and second.negated
    assert second.atom == Compound("abnormal_bird", (Variable("X"),))


def test_unguarded_negated_variable_rejected():
    with pytest.raises(RangeRestrictionError):
        parse_program("p(X) :- not q(X).")


def test_unguarded_head_variable_rejected():
    with pytest.raises(RangeRestrictionError):
        parse_program("p(X) :- q(a).")


def test_underscore_head_variable_allowed():
    p = parse_program("p(_Out, X) :- q(X).")
    assert len(p.rules) == 1


def test_nonground_fact_rejected():
    with pytest.raises(RangeRestrictionError):
        parse_program("p(X).")


def test_negation_cycle_rejected():
    with pytest.raises(StratificationError) as exc:
        parse_program("p(X) :- q(X), not r(X). r(X) :- q(X), p(X). q(a).")
    assert "p/1" in str(exc.value)
    assert "r/1" in str(exc.value)


def test_positive_recursion_is_stratified():
    p = parse_program("e(a,b). e(b,c). path(X,Y) :- e(X,Y). path(X,Z) :- e(X,Y), path(Y,Z).")
    assert len(p.rules) == 4


def test_syntax_error_carries_position():
    with pytest.raises(ParseError) as exc:
        parse_program("p(a)\nq(b).")
    assert exc.value.line == 2


def test_comments_and_whitespace_skipped():
    p = parse_program("% a comment\np(a).   % trailing\n\nq(b).\n")
    assert len(p.rules) == 2


def test_constraint_parsing():
    p = parse_program("r(X, Y) :- s(X, Y), X #= Y - 3.")
    con = p.rules[0].body[1]
    assert isinstance(con, Constraint)
    assert con.rel == "#="
    assert con.rhs == Compound("-", (Variable("Y"), Integer(3)))


def test_negated_constraint_inverts_relation():
    p = parse_program("r(X) :- s(X), not X #< 3.")
    con = p.rules[0].body[1]
    assert isinstance(con, Constraint)
    assert con.rel == "#>="


def test_integrity_constraint_head():
    p = parse_program("false :- person(X), sit(X), stand(X). person(a).")
    assert p.rules[0].is_integrity
    assert len(p.integrity_rules) == 1


def test_lists_and_negative_integers():
    p = parse_program("p([a, -2, [b]]).")
    head = p.rules[0].head
    assert head is not None
    inner = head.args[0]
    assert inner.elements[1] == Integer(-2)


def test_anonymous_variables_are_distinct():
    p = parse_program("p(X) :- q(_, X), r(_).")
    body = p.rules[0].body
    first_anon = body[0].atom.args[0]
    second_anon = body[1].atom.args[0]
    assert first_anon != second_anon


def test_parse_query_conjunction():
    goals = parse_query("bird(X), not abnormal_bird(X)")
    assert len(goals) == 2
    assert goals[1].negated


def test_source_order_preserved():
    p = parse_program("a(x). a(y). a(z).")
    heads = [r.head.args[0].symbol for r in p.rules]
    assert heads == ["x", "y", "z"]


def test_program_text_round_trip():
    text = "flies(X) :- bird(X), not abnormal_bird(X)."
    p = parse_program(text)
    again = parse_program(p.text())
    assert again.rules[0].head == p.rules[0].head
    assert again.rules[0].body == p.rules[0].body
