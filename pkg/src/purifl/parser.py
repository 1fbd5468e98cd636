"""Lexer and recursive-descent parser for MiniLang (``.ml0``)."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .nodes import (
    Assert,
    AssertEq,
    Assign,
    Binary,
    Bool,
    Call,
    CompoundAssign,
    ExprStmt,
    FuncDef,
    If,
    Let,
    Num,
    Program,
    Return,
    SourceSpan,
    StatementId,
    Str,
    TestDef,
    Unary,
    Var,
    While,
    number_statements,
)

KEYWORDS = {
    "fn", "test", "let", "if", "else", "while", "return",
    "assert", "assert_eq", "soft_assert", "soft_assert_eq",
    "true", "false", "nan",
}
BUILTINS = {"is_nan": 1, "abs": 1, "print": 1}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>\+=|-=|==|!=|<=|>=|&&|\|\||[-+*/%<>=!(){},;])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # "number" | "ident" | "keyword" | "string" | "op" | "eof"
    text: str
    span: SourceSpan


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan
    message: str

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


class ParseError(Exception):
    """Raised with every syntax diagnostic collected during one parse."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class _Bail(Exception):
    pass


def tokenize(source: str, file: str = "<string>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        span = SourceSpan(file, line, pos - line_start + 1, 1)
        if m is None:
            raise ParseError([Diagnostic(span, f"unexpected character {source[pos]!r}")])
        kind, text = m.lastgroup, m.group()
        if kind != "ws":
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, SourceSpan(file, line, span.column, len(text))))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(file, line, pos - line_start + 1, 0)))
    return tokens


def _unescape(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


# binary operators by ascending precedence; all left-associative
PRECEDENCE = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]
BINARY_PREC = {op: i + 1 for i, ops in enumerate(PRECEDENCE) for op in ops}


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.i = 0
        self.file = file
        self.diagnostics: list[Diagnostic] = []
        self.in_test = False

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "keyword") and self.tok.text == text

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        self.diagnostics.append(Diagnostic(tok.span, message))
        raise _Bail

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of file"
            if self.tok.kind == "eof" and text == "}":
                self.error("unterminated block: expected '}'")
            self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.tok.text or 'end of file'!r}")
        return self.advance()

    # -- top level
    def program(self) -> Program:
        functions, tests = [], []
        seen_fn: dict[str, Token] = {}
        seen_test: dict[str, Token] = {}
        while self.tok.kind != "eof":
            start = self.i
            try:
                if self.at("fn"):
                    f = self.funcdef()
                    if f.name in seen_fn:
                        self.diagnostics.append(
                            Diagnostic(f.span, f"duplicate function name {f.name!r}"))
                    elif f.name in BUILTINS:
                        self.diagnostics.append(
                            Diagnostic(f.span, f"function name {f.name!r} shadows a builtin"))
                    seen_fn[f.name] = f
                    functions.append(f)
                elif self.at("test"):
                    t = self.testdef()
                    if t.name in seen_test:
                        self.diagnostics.append(
                            Diagnostic(t.span, f"duplicate test name {t.name!r}"))
                    seen_test[t.name] = t
                    tests.append(t)
                else:
                    self.error(f"expected 'fn' or 'test', found {self.tok.text!r}")
            except _Bail:
                self.recover(start)
        return Program(tuple(functions), tuple(tests), self.file)

    def recover(self, start: int) -> None:
        # skip to the next top-level definition keyword
        if self.i == start:
            self.advance()
        while self.tok.kind != "eof" and not (self.at("fn") or self.at("test")):
            self.advance()

    def funcdef(self) -> FuncDef:
        kw = self.expect("fn")
        name = self.ident()
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            while True:
                p = self.ident()
                if p.text in params:
                    self.error(f"duplicate parameter {p.text!r}", p)
                params.append(p.text)
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        self.in_test = False
        body = self.block()
        return FuncDef(name.text, tuple(params), body, self._span(kw, name))

    def testdef(self) -> TestDef:
        kw = self.expect("test")
        name = self.ident()
        self.in_test = True
        body = self.block()
        self.in_test = False
        return TestDef(name.text, body, self._span(kw, name))

    def _span(self, first: Token, last: Token) -> SourceSpan:
        s = first.span
        length = last.span.column + last.span.length - s.column if last.span.line == s.line else s.length
        return SourceSpan(s.file, s.line, s.column, length)

    def block(self) -> tuple:
        opening = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block: no matching '}'", opening)
            stmts.append(self.stmt())
        self.expect("}")
        return tuple(stmts)

    # -- statements
    def stmt(self):
        tok = self.tok
        sid = StatementId(-1, tok.span)
        if self.at("let"):
            self.advance()
            name = self.ident().text
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return Let(name, value, sid)
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.at("else"):
                self.advance()
                orelse = self.block()
            return If(cond, then, orelse, sid)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return While(cond, self.block(), sid)
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return Return(value, sid)
        if tok.kind == "keyword" and tok.text in ("assert", "soft_assert", "assert_eq", "soft_assert_eq"):
            if not self.in_test:
                self.error("assertions are only allowed in test bodies")
            self.advance()
            soft = tok.text.startswith("soft_")
            self.expect("(")
            first = self.expr()
            if tok.text.endswith("_eq"):
                self.expect(",")
                second = self.expr()
                self.expect(")")
                self.expect(";")
                return AssertEq(first, second, soft, sid)
            self.expect(")")
            self.expect(";")
            return Assert(first, soft, sid)
        if tok.kind == "ident" and self.peek().kind == "op":
            nxt = self.peek().text
            if nxt == "=":
                self.advance()
                self.advance()
                value = self.expr()
                self.expect(";")
                return Assign(tok.text, value, sid)
            if nxt in ("+=", "-="):
                self.advance()
                self.advance()
                value = self.expr()
                self.expect(";")
                return CompoundAssign(tok.text, nxt, value, sid)
        expr = self.expr()
        self.expect(";")
        return ExprStmt(expr, sid)

    # -- expressions (precedence climbing)
    def expr(self, level: int = 1):
        if level > len(PRECEDENCE):
            return self.unary()
        left = self.expr(level + 1)
        ops = PRECEDENCE[level - 1]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.advance()
            right = self.expr(level + 1)
            left = Binary(op.text, left, right, op.span)
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in ("-", "!"):
            op = self.advance()
            return Unary(op.text, self.unary(), op.span)
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text), tok.span)
        if tok.kind == "string":
            self.advance()
            return Str(_unescape(tok.text), tok.span)
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self.advance()
            return Bool(tok.text == "true", tok.span)
        if tok.kind == "keyword" and tok.text == "nan":
            self.advance()
            return Num(math.nan, tok.span)
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.at(","):
                            break
                        self.advance()
                self.expect(")")
                return Call(tok.text, tuple(args), tok.span)
            return Var(tok.text, tok.span)
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        self.error(f"unexpected token {tok.text or 'end of file'!r}")


def parse(source: str, file: str = "<string>") -> Program:
    """Parse MiniLang source; raises :class:`ParseError` listing all diagnostics."""
    parser = _Parser(tokenize(source, file), file)
    program = parser.program()
    if parser.diagnostics:
        raise ParseError(parser.diagnostics)
    return number_statements(program)


def parse_file(path) -> Program:
    from pathlib import Path

    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))
