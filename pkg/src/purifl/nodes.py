"""MiniLang syntax tree.

Every statement carries a :class:`StatementId` whose ordinal is its position in a
pre-order walk over all function bodies followed by all test bodies. Spans are
ignored by equality so that a re-parsed printout compares equal to its source tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Iterator, Union


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 0

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid span {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True, order=True)
class StatementId:
    ordinal: int
    span: SourceSpan | None = field(default=None, compare=False, hash=False, repr=False)

    @property
    def line(self) -> int:
        return self.span.line if self.span else 0


NO_ID = StatementId(-1)


# --------------------------------------------------------------------------- exprs


@dataclass(frozen=True, eq=False)
class Num:
    value: float
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def _key(self):
        return "nan" if math.isnan(self.value) else self.value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Num) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(("Num", self._key()))


@dataclass(frozen=True)
class Bool:
    value: bool
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Str:
    value: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: Expr
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Expr, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


Expr = Union[Num, Bool, Str, Var, Unary, Binary, Call]
EXPR_TYPES = (Num, Bool, Str, Var, Unary, Binary, Call)


# ---------------------------------------------------------------------- statements


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class CompoundAssign:
    name: str
    op: str  # "+=" or "-="
    value: Expr
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple[Stmt, ...]
    orelse: tuple[Stmt, ...] | None = None
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple[Stmt, ...]
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class Return:
    value: Expr | None = None
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class Assert:
    cond: Expr
    soft: bool = False
    sid: StatementId = NO_ID


@dataclass(frozen=True)
class AssertEq:
    left: Expr
    right: Expr
    soft: bool = False
    sid: StatementId = NO_ID


Stmt = Union[Let, Assign, CompoundAssign, If, While, Return, ExprStmt, Assert, AssertEq]
STMT_TYPES = (Let, Assign, CompoundAssign, If, While, Return, ExprStmt, Assert, AssertEq)
ASSERTION_TYPES = (Assert, AssertEq)
Block = tuple  # tuple[Stmt, ...]


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TestDef:
    name: str
    body: tuple[Stmt, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class Program:
    functions: tuple[FuncDef, ...] = ()
    tests: tuple[TestDef, ...] = ()
    file: str = field(default="<string>", compare=False)

    def function(self, name: str) -> FuncDef | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def test(self, name: str) -> TestDef:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)

    def with_tests(self, tests) -> Program:
        return replace(self, tests=tuple(tests))

    def program_statements(self) -> list[Stmt]:
        """Statements of function bodies in ordinal order (the ranked candidates)."""
        out: list[Stmt] = []
        for f in self.functions:
            out.extend(walk_block(f.body))
        return out

    def test_statements(self) -> list[Stmt]:
        out: list[Stmt] = []
        for t in self.tests:
            out.extend(walk_block(t.body))
        return out

    def statements(self) -> list[Stmt]:
        return self.program_statements() + self.test_statements()

    def statement(self, ordinal: int) -> Stmt:
        for s in self.statements():
            if s.sid.ordinal == ordinal:
                return s
        raise KeyError(ordinal)


# ------------------------------------------------------------------------ traversal


def sub_blocks(stmt: Stmt) -> list[tuple[str, tuple[Stmt, ...]]]:
    if isinstance(stmt, If):
        blocks = [("then", stmt.then)]
        if stmt.orelse is not None:
            blocks.append(("orelse", stmt.orelse))
        return blocks
    if isinstance(stmt, While):
        return [("body", stmt.body)]
    return []


def walk_block(block) -> Iterator[Stmt]:
    """Pre-order iteration over a block, descending into if/while bodies."""
    for stmt in block:
        yield stmt
        for _, inner in sub_blocks(stmt):
            yield from walk_block(inner)


def map_block(block, fn: Callable[[Stmt], Stmt | None]) -> tuple[Stmt, ...]:
    """Rebuild ``block`` bottom-up; ``fn`` may return None to drop a statement."""
    out = []
    for stmt in block:
        kids = sub_blocks(stmt)
        if kids:
            stmt = replace(stmt, **{k: map_block(b, fn) for k, b in kids})
        new = fn(stmt)
        if new is not None:
            out.append(new)
    return tuple(out)


def node_children(node) -> list[tuple[tuple, object]]:
    """Direct syntax children of an expression or statement as (path-step, child).

    Nested statement blocks are not children here: expression paths stop at the
    statement boundary.
    """
    out = []
    for f in fields(node):
        if f.name in ("span", "sid"):
            continue
        value = getattr(node, f.name)
        if isinstance(value, EXPR_TYPES):
            out.append(((f.name,), value))
        elif f.name == "args":
            for i, arg in enumerate(value):
                out.append(((f.name, i), arg))
    return out


def get_at(node, path: tuple):
    for step in path:
        name, *idx = step
        node = getattr(node, name)
        if idx:
            node = node[idx[0]]
    return node


def replace_at(node, path: tuple, new):
    if not path:
        return new
    (name, *idx), rest = path[0], path[1:]
    child = getattr(node, name)
    if idx:
        items = list(child)
        items[idx[0]] = replace_at(items[idx[0]], rest, new)
        return replace(node, **{name: tuple(items)})
    return replace(node, **{name: replace_at(child, rest, new)})


def walk_expr(node, path: tuple = ()) -> Iterator[tuple[tuple, object]]:
    """Pre-order (path, expr) pairs for every expression under ``node``."""
    for step, child in node_children(node):
        p = path + (step,)
        yield p, child
        yield from walk_expr(child, p)


def number_statements(program: Program) -> Program:
    """Assign dense pre-order ordinals: all functions first, then all tests."""
    counter = iter(range(1 << 62))

    def number(block):
        out = []
        for stmt in block:
            sid = StatementId(next(counter), stmt.sid.span)
            kids = {k: number(b) for k, b in sub_blocks(stmt)}
            out.append(replace(stmt, sid=sid, **kids))
        return tuple(out)

    functions = tuple(replace(f, body=number(f.body)) for f in program.functions)
    tests = tuple(replace(t, body=number(t.body)) for t in program.tests)
    return replace(program, functions=functions, tests=tests)
