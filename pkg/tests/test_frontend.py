from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purifl.mutation import MutationOperator, generate
from purifl.nodes import (
    ASSERTION_TYPES,
    Assert,
    AssertEq,
    Binary,
    Bool,
    Call,
    Num,
    Str,
    Unary,
    Var,
    walk_block,
)
from purifl.parser import ParseError, parse
from purifl.printer import format_expr, to_source

from conftest import src


def test_minimal_function():
    p = src("fn id(x){ return x; }")
    assert len(p.functions) == 1
    assert len(p.statements()) == 1
    assert p.functions[0].params == ("x",)


def test_minimal_test():
    p = src("test t { assert(true); }")
    assert len(p.tests) == 1
    (stmt,) = p.tests[0].body
    assert isinstance(stmt, Assert) and not stmt.soft


def test_nanminmax_shape(nanminmax):
    assert [f.name for f in nanminmax.functions] == ["min3", "min2", "max3", "max2"]
    (t1,) = nanminmax.tests
    assertions = [s for s in walk_block(t1.body) if isinstance(s, ASSERTION_TYPES)]
    assert len(assertions) == 3


@pytest.mark.parametrize(
    "text, message, line, column",
    [
        ("fn f( {", "expected identifier", 1, 7),
        ("fn f() {\n  let x = 1;\n", "unterminated block", 1, 8),
        ("fn f() { return 1; }\nfn f() { return 2; }", "duplicate function", 2, 1),
        ("test t { }\ntest t { }", "duplicate test", 2, 1),
        ("fn f() { let = 3; }", "expected identifier", 1, 14),
        ("test t { x = ; }", "unexpected token", 1, 14),
    ],
)
def test_diagnostics_carry_spans(text, message, line, column):
    with pytest.raises(ParseError) as info:
        parse(text, "bad.ml0")
    diag = info.value.diagnostics[0]
    assert message in diag.message
    assert (diag.span.line, diag.span.column) == (line, column)
    assert diag.span.file == "bad.ml0"


def test_errors_in_several_definitions_are_all_reported():
    with pytest.raises(ParseError) as info:
        parse("fn a( { }\nfn b() { let 1; }\nfn c() { return 1; }")
    assert len(info.value.diagnostics) >= 2


def test_assertions_only_in_tests():
    with pytest.raises(ParseError, match="assert"):
        parse("fn f() { assert(true); }")


def test_user_cannot_write_soft_assertions_in_functions():
    with pytest.raises(ParseError):
        parse("fn f() { soft_assert(true); }")


def test_soft_assertion_prints_with_prefix():
    p = src("test t { soft_assert(1 < 2); soft_assert_eq(1, 1); assert(true); }")
    text = to_source(p)
    assert "soft_assert(1 < 2);" in text
    assert "soft_assert_eq(1, 1);" in text
    assert src(text).tests[0].body[0].soft


def test_minimal_round_trip_token_stream():
    text = "fn id(x){ return x; }"
    tokens = lambda s: re.findall(r"\w+|[^\s\w]", s)  # noqa: E731
    assert tokens(to_source(src(text))) == tokens(text)


def test_corpus_round_trip(corpus):
    for name, program in corpus.items():
        again = parse(to_source(program), program.file)
        assert again.functions == program.functions, name
        assert again.tests == program.tests, name
        assert [s.sid.ordinal for s in again.statements()] == [s.sid.ordinal for s in program.statements()]


def test_ordinals_dense_and_stable(corpus):
    for program in corpus.values():
        ords = [s.sid.ordinal for s in program.statements()]
        assert sorted(ords) == list(range(len(ords)))
        assert max(ords) + 1 == len(ords)
        text = to_source(program)
        assert [s.sid.ordinal for s in parse(text).statements()] == [s.sid.ordinal for s in parse(text).statements()]


def test_function_statements_numbered_before_tests(nanminmax):
    n_prog = len(nanminmax.program_statements())
    assert all(s.sid.ordinal < n_prog for s in nanminmax.program_statements())
    assert all(s.sid.ordinal >= n_prog for s in nanminmax.test_statements())


def test_comments_and_nan_literal():
    p = src("// header\nfn f() { return nan; } // trailing\n")
    value = p.functions[0].body[0].value
    assert isinstance(value, Num) and value.value != value.value


def test_negated_conditional_mutant_differs_in_one_token_region(nanminmax):
    """Token-diff oracle: the printed mutant differs from the printed original in one
    contiguous run of tokens."""
    tok = lambda s: re.findall(r"\d+\.\d+|\w+|&&|\|\||[<>=!]=|[^\s\w]", s)  # noqa: E731
    base = tok(to_source(nanminmax))
    for m in generate(nanminmax):
        if m.operator is not MutationOperator.NEGATE_CONDITIONALS:
            continue
        mut = tok(to_source(m.program))
        i = 0
        while i < min(len(base), len(mut)) and base[i] == mut[i]:
            i += 1
        j = 0
        while j < min(len(base), len(mut)) - i and base[-1 - j] == mut[-1 - j]:
            j += 1
        assert base[:i] + base[len(base) - j:] == mut[:i] + mut[len(mut) - j:]
        assert (len(mut) - i - j) + (len(base) - i - j) > 0
        changed = [a != b for a, b in zip(to_source(nanminmax).splitlines(), to_source(m.program).splitlines())]
        assert sum(changed) == 1


# ---------------------------------------------------------------- property tests

_names = st.sampled_from(["a", "b", "x", "total"])
_nums = st.one_of(
    st.integers(0, 10**6).map(float),
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False),
    st.just(float("nan")),
)
_leaf = st.one_of(
    _nums.map(Num),
    st.booleans().map(Bool),
    st.text("abc xyz\"\\", max_size=5).map(Str),
    _names.map(Var),
)
_binops = st.sampled_from(["+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"])


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["-", "!"]), children).map(lambda t: Unary(*t)),
        st.tuples(_binops, children, children).map(lambda t: Binary(*t)),
        st.lists(children, max_size=3).map(lambda args: Call("g", tuple(args))),
        st.lists(children, min_size=1, max_size=1).map(lambda args: Call("abs", tuple(args))),
    )


exprs = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_expression_print_parse_round_trip(e):
    text = f"fn g(a, b, x, total) {{ return {format_expr(e)}; }}"
    parsed = parse(text).functions[0].body[0].value
    assert parsed == e


@settings(max_examples=100, deadline=None)
@given(exprs, exprs)
def test_assert_eq_round_trip(left, right):
    text = f"fn g(a, b, x, total) {{ return 0; }}\ntest t {{ let a = 1; let b = 2; let x = 3; let total = 4; assert_eq({format_expr(left)}, {format_expr(right)}); }}"
    stmt = parse(text).tests[0].body[-1]
    assert isinstance(stmt, AssertEq)
    assert (stmt.left, stmt.right) == (left, right)
