import random

import pytest
from hypothesis import given, settings, strategies as st

from slicer.formula import LinExpr, Var, conj, eq, ne
from slicer.lang import (
    Assign, Decl, If, ParseError, While, format_program, load_program, lower_to_cfa, parse_program,
)
from slicer.oracle import random_program

x, y, c = Var("x"), Var("y"), Var("c")


def test_minimal_program():
    p = parse_program("int x; x = 0;")
    assert p.statements == (Decl(("x",)), Assign("x", LinExpr.of(0)))
    assert p.variables == ("x",)


def test_sign_shape(program_text):
    p = parse_program(program_text("sign_doubling.prog"))
    kinds = [type(s) for s in p.statements]
    assert kinds.count(If) == 1 and kinds.count(While) == 1


@pytest.mark.parametrize("text,line,fragment", [
    ("x = ;", 1, "expected"),
    ("int x;\nx = y + 1;", 2, "undeclared"),
    ("int x, y;\nx = x * y;", 2, "non-linear"),
    ("int x;\nwhile (x < 1) { x = x + 1;", 2, "unterminated"),
    ("int __x;", 1, "reserved"),
])
def test_parse_errors(text, line, fragment):
    with pytest.raises(ParseError) as err:
        parse_program(text)
    assert err.value.span.line == line
    assert fragment in str(err.value)


def test_constant_multiplication_is_linear():
    p = parse_program("int x; x = 3 * (x + 1) - x * 2;")
    assert p.statements[1].expr == LinExpr.of(x) + 3


def test_frame_condition_on_assignment():
    c_ = load_program("int x, y; x = x + 1;")
    (edge,) = c_.edges
    assert edge.formula == conj(eq(x.prime(), LinExpr.of(x) + 1), eq(y.prime(), y))


def test_assert_lowering():
    c_ = load_program("int c; c = nondet(); assert(c == 100);")
    err = [e for e in c_.edges if e.dst == c_.error]
    ok = [e for e in c_.edges if e.src == err[0].src and e.dst != c_.error]
    assert len(err) == 1 and len(ok) == 1
    assert err[0].formula == conj(ne(c, 100), eq(c.prime(), c))
    assert ok[0].formula == conj(eq(c, 100), eq(c.prime(), c))


def test_program_without_assert_has_no_error_node():
    assert load_program("int x; x = 0;").error is None


def test_nondet_condition_projects_both_ways():
    c_ = load_program("int x; if (nondet() && x > 0) { x = 1; }")
    guards = [e.formula for e in c_.out_edges(c_.n0)]
    assert len(guards) == 2


def test_while_has_head_body_and_exit():
    c_ = load_program("int i; i = 0; while (i < 3) { i = i + 1; }")
    head = next(n for n, l in c_.labels.items() if l.endswith(":while"))
    assert len(c_.out_edges(head)) == 2
    assert len(c_.in_edges(head)) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_format_parse_round_trip(seed):
    p = random_program(random.Random(seed))
    again = parse_program(format_program(p))
    assert again == p
    lower_to_cfa(again)
