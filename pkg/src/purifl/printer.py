"""Canonical MiniLang printer.

Output is stable for a given tree, re-parses to a structurally equal tree, and keeps
statement ordinals because functions are emitted before tests.
"""

from __future__ import annotations

import math

from .nodes import (
    Assert,
    AssertEq,
    Assign,
    Binary,
    Bool,
    Call,
    CompoundAssign,
    ExprStmt,
    If,
    Let,
    Num,
    Program,
    Return,
    Str,
    Unary,
    Var,
    While,
)
from .parser import BINARY_PREC

_UNARY_PREC = len(BINARY_PREC) + 1
INDENT = "  "


def format_number(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        raise ValueError("infinite literals are not representable")
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _escape(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _prec(e) -> int:
    if isinstance(e, Binary):
        return BINARY_PREC[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    return _UNARY_PREC + 1


def format_expr(e) -> str:
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Str):
        return _escape(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        inner = format_expr(e.operand)
        if isinstance(e.operand, Binary):
            inner = f"({inner})"
        elif isinstance(e.operand, Unary):
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = BINARY_PREC[e.op]
        left, right = format_expr(e.left), format_expr(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def format_stmt_head(s) -> str:
    """One-line rendering of a statement without nested blocks (for reports)."""
    if isinstance(s, Let):
        return f"let {s.name} = {format_expr(s.value)};"
    if isinstance(s, Assign):
        return f"{s.name} = {format_expr(s.value)};"
    if isinstance(s, CompoundAssign):
        return f"{s.name} {s.op} {format_expr(s.value)};"
    if isinstance(s, If):
        return f"if ({format_expr(s.cond)})"
    if isinstance(s, While):
        return f"while ({format_expr(s.cond)})"
    if isinstance(s, Return):
        return "return;" if s.value is None else f"return {format_expr(s.value)};"
    if isinstance(s, ExprStmt):
        return f"{format_expr(s.expr)};"
    prefix = "soft_" if s.soft else ""
    if isinstance(s, Assert):
        return f"{prefix}assert({format_expr(s.cond)});"
    if isinstance(s, AssertEq):
        return f"{prefix}assert_eq({format_expr(s.left)}, {format_expr(s.right)});"
    raise TypeError(f"not a statement: {s!r}")


def _block(stmts, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    for s in stmts:
        if isinstance(s, If):
            out.append(f"{pad}{format_stmt_head(s)} {{")
            _block(s.then, depth + 1, out)
            if s.orelse is not None:
                out.append(f"{pad}}} else {{")
                _block(s.orelse, depth + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(s, While):
            out.append(f"{pad}{format_stmt_head(s)} {{")
            _block(s.body, depth + 1, out)
            out.append(f"{pad}}}")
        else:
            out.append(pad + format_stmt_head(s))


def to_source(program: Program) -> str:
    out: list[str] = []
    for f in program.functions:
        out.append(f"fn {f.name}({', '.join(f.params)}) {{")
        _block(f.body, 1, out)
        out.append("}")
        out.append("")
    for t in program.tests:
        out.append(f"test {t.name} {{")
        _block(t.body, 1, out)
        out.append("}")
        out.append("")
    return "\n".join(out)
