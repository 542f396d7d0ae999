"""Parser shape checks: grammar coverage, precedence, errors, warnings."""

import pytest

from pdgsim.lexer import tokenize
from pdgsim.parser import (Assign, Binary, Call, For, If, Index, Input,
                           IntLit, ParseError, Return, Skip, Switch, Throw,
                           Unary, Var, While, expr_vars, parse, parse_source)


def body(source):
    return parse_source(source).body


def first(source):
    return body(source)[0]


def test_single_assignment_method():
    m = parse_source("def m(a) { x = a; }")
    assert m.name == "m"
    assert m.params == ("a",)
    assert m.body == (Assign("x", None, Var("a"), 1),)


def test_if_without_else():
    stmt = first("def m() { if (x > 0) { skip; } }")
    assert isinstance(stmt, If)
    assert stmt.orelse == ()
    assert len(stmt.then) == 1 and isinstance(stmt.then[0], Skip)


def test_missing_operand_is_parse_error():
    with pytest.raises(ParseError, match="expression"):
        parse_source("def m() { x = ; }")


def test_error_carries_line_and_token():
    with pytest.raises(ParseError, match="line 2") as info:
        parse_source("def m() {\n x = ; }")
    assert info.value.found.text == ";"


def test_eof_error():
    with pytest.raises(ParseError, match="end of input"):
        parse_source("def m() {")


def test_one_method_per_file():
    with pytest.raises(ParseError, match="one method"):
        parse_source("def m() { skip; } def n() { skip; }")


@pytest.mark.parametrize("src, expected", [
    ("a + b * c", Binary("+", Var("a"), Binary("*", Var("b"), Var("c")))),
    ("a * b + c", Binary("+", Binary("*", Var("a"), Var("b")), Var("c"))),
    ("(a + b) * c", Binary("*", Binary("+", Var("a"), Var("b")), Var("c"))),
    ("-a * b", Binary("*", Unary("-", Var("a")), Var("b"))),
    ("!a && b", Binary("&&", Unary("!", Var("a")), Var("b"))),
    ("a < b == c < d",
     Binary("==", Binary("<", Var("a"), Var("b")),
            Binary("<", Var("c"), Var("d")))),
    ("a && b || c && d",
     Binary("||", Binary("&&", Var("a"), Var("b")),
            Binary("&&", Var("c"), Var("d")))),
    ("a - b - c", Binary("-", Binary("-", Var("a"), Var("b")), Var("c"))),
    ("input() + 1", Binary("+", Input(), IntLit(1))),
])
def test_expression_precedence(src, expected):
    stmt = first(f"def m() {{ x = {src}; }}")
    assert stmt.value == expected


def test_array_read_and_write():
    stmt = first("def m() { a[i] = b[j] + 1; }")
    assert stmt.target == "a"
    assert stmt.index == Var("i")
    assert stmt.value == Binary("+", Index("b", Var("j")), IntLit(1))


def test_while_and_for():
    w = first("def m() { while (i < n) { i = i + 1; } }")
    assert isinstance(w, While)
    f = first("def m() { for (i = 0; i < n; i = i + 1) { skip; } }")
    assert isinstance(f, For)
    assert f.init == Assign("i", None, IntLit(0), 1)
    assert f.update.target == "i"


def test_switch_cases_and_default():
    s = first("def m() { switch (x) { case 1: { a = 1; } case 2: { a = 2; } "
              "default: { a = 3; } } }")
    assert isinstance(s, Switch)
    assert [label for label, _ in s.cases] == [1, 2]
    assert s.default is not None
    s2 = first("def m() { switch (x) { case 7: { skip; } } }")
    assert s2.default is None


def test_call_return_throw():
    stmts = body("def m(a) { call f(a, a + 1); return a; throw a; }")
    call, ret, thr = stmts
    assert isinstance(call, Call) and call.name == "f" and len(call.args) == 2
    assert isinstance(ret, Return) and ret.value == Var("a")
    assert isinstance(thr, Throw)
    bare = first("def m() { return; }")
    assert bare.value is None


def test_nested_if_else_association():
    stmt = first("def m() { if (a < b) { skip; } else { if (c < d) { x = 1; } } }")
    assert stmt.orelse != ()
    inner = stmt.orelse[0]
    assert isinstance(inner, If) and inner.orelse == ()


def test_expr_vars():
    stmt = first("def m() { x = a[i] + b * 2 - input(); }")
    assert expr_vars(stmt.value) == {"a", "i", "b"}


def test_use_before_assignment_warnings():
    m = parse_source("def m(a) { x = a + y; y = 1; z = y; }")
    assert len(m.warnings) == 1
    assert "'y'" in m.warnings[0]
    clean = parse_source("def m(a) { x = a; y = x; }")
    assert clean.warnings == ()


def test_indexed_write_warns_on_unassigned_array():
    m = parse_source("def m(i) { a[i] = 1; }")
    assert any("'a'" in w for w in m.warnings)


def test_parse_accepts_token_list():
    m = parse(tokenize("def m() { skip; }"))
    assert m.name == "m" and m.params == ()
