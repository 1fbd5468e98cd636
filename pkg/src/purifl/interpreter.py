"""Deterministic tree-walking evaluator with coverage and dynamic dependence tracing.

One statement execution is one step and one :class:`TraceEvent`. Events are appended
when the statement completes (or aborts), so the events of any callee invoked while
evaluating a statement precede that statement's own event. Predicates of ``if`` and
``while`` are recorded before their bodies run.

Variables are function-scoped and qualified by frame instance (``frame#3:x``); the
value returned by a frame is written to ``frame#n:$ret`` and read by the calling
statement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

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
    StatementId,
    Str,
    TestDef,
    Unary,
    Var,
    While,
)

UNIT = None


class OutcomeKind(str, enum.Enum):
    PASS = "pass"
    FAILURE = "failure"
    ERROR = "error"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class TestOutcome:
    kind: OutcomeKind
    broken: StatementId | None = None
    message: str = ""

    __test__ = False

    @property
    def failed(self) -> bool:
        """True for every non-pass outcome (failure, error and timeout)."""
        return self.kind is not OutcomeKind.PASS

    @classmethod
    def passed(cls) -> TestOutcome:
        return cls(OutcomeKind.PASS)


@dataclass(frozen=True)
class TraceEvent:
    index: int
    stmt: StatementId
    defs: frozenset[str]
    uses: frozenset[str]
    control_parent: int | None
    call_depth: int
    # event of the ``let`` that introduced the variable an assignment writes; an
    # assignment cannot run without its declaration, so slices must keep both
    decl: int | None = None


@dataclass
class ExecutionTrace:
    events: list[TraceEvent] = field(default_factory=list)
    coverage: frozenset[int] = frozenset()  # ordinals of program statements
    step_count: int = 0
    output: list[str] = field(default_factory=list)

    def last_event_of(self, ordinal: int) -> TraceEvent | None:
        for ev in reversed(self.events):
            if ev.stmt.ordinal == ordinal:
                return ev
        return None

    def dump(self) -> str:
        lines = []
        for ev in self.events:
            ctrl = "-" if ev.control_parent is None else str(ev.control_parent)
            lines.append(
                f"{ev.index}\t{ev.stmt.ordinal}\tdefs={','.join(sorted(ev.defs))}"
                f"\tuses={','.join(sorted(ev.uses))}\tctrl={ctrl}"
            )
        return "\n".join(lines) + ("\n" if lines else "")


class MiniLangError(Exception):
    """Runtime error inside the evaluated program (becomes an Error outcome)."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message
        self.broken: StatementId | None = None


class _AssertionFailed(Exception):
    def __init__(self, stmt: StatementId, message: str):
        super().__init__(message)
        self.stmt = stmt
        self.message = message


class _StepBudgetExceeded(Exception):
    pass


class UnknownTestError(KeyError):
    pass


class _Frame:
    __slots__ = ("id", "vars", "decls", "depth", "ctrl")

    def __init__(self, fid: int, depth: int, ctrl: int | None):
        self.id = fid
        self.vars: dict[str, object] = {}
        self.decls: dict[str, int] = {}
        self.depth = depth
        self.ctrl = ctrl  # innermost enclosing predicate event for new events


def _type_name(v) -> str:
    if v is None:
        return "unit"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, float):
        return "number"
    return "string"


def _num(v, what: str) -> float:
    if type(v) is not float:
        raise MiniLangError(f"{what} expects a number, got {_type_name(v)}")
    return v


def _bool(v, what: str) -> bool:
    if type(v) is not bool:
        raise MiniLangError(f"{what} expects a bool, got {_type_name(v)}")
    return v


def values_equal(a, b) -> bool:
    """MiniLang ``==``: IEEE for numbers, so NaN is unequal to everything."""
    if type(a) is not type(b):
        return False
    return a == b


def render(v) -> str:
    if v is None:
        return "()"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return str(int(v)) if v.is_integer() and abs(v) < 1e16 else repr(v)
    return v


class _Run:
    def __init__(self, program: Program, budget: int):
        self.functions = {f.name: f for f in program.functions}
        self.budget = budget
        self.events: list[TraceEvent] = []
        self.steps = 0
        self.frames = 0
        self.output: list[str] = []
        self.program_ids = {s.sid.ordinal for s in program.program_statements()}

    # -- bookkeeping
    def _new_frame(self, depth: int, ctrl: int | None) -> _Frame:
        frame = _Frame(self.frames, depth, ctrl)
        self.frames += 1
        return frame

    def _emit(self, stmt, frame: _Frame, defs, uses, decl=None) -> int:
        idx = len(self.events)
        self.events.append(
            TraceEvent(idx, stmt.sid, frozenset(defs), frozenset(uses), frame.ctrl, frame.depth, decl)
        )
        return idx

    def _q(self, frame: _Frame, name: str) -> str:
        return f"frame#{frame.id}:{name}"

    # -- expressions
    def eval(self, e, frame: _Frame, uses: set):
        t = type(e)
        if t is Num or t is Bool or t is Str:
            return e.value
        if t is Var:
            if e.name not in frame.vars:
                raise MiniLangError(f"undefined variable {e.name!r}")
            uses.add(self._q(frame, e.name))
            return frame.vars[e.name]
        if t is Binary:
            return self._binary(e, frame, uses)
        if t is Unary:
            v = self.eval(e.operand, frame, uses)
            if e.op == "-":
                return -_num(v, "unary '-'")
            return not _bool(v, "'!'")
        if t is Call:
            return self._call(e, frame, uses)
        raise TypeError(e)

    def _binary(self, e: Binary, frame: _Frame, uses: set):
        op = e.op
        if op == "&&" or op == "||":
            left = _bool(self.eval(e.left, frame, uses), f"'{op}'")
            if (op == "&&" and not left) or (op == "||" and left):
                return left
            return _bool(self.eval(e.right, frame, uses), f"'{op}'")
        a = self.eval(e.left, frame, uses)
        b = self.eval(e.right, frame, uses)
        if op == "==":
            return values_equal(a, b)
        if op == "!=":
            return not values_equal(a, b)
        if op == "+" and type(a) is str and type(b) is str:
            return a + b
        x, y = _num(a, f"'{op}'"), _num(b, f"'{op}'")
        if op == "+":
            return x + y
        if op == "-":
            return x - y
        if op == "*":
            return x * y
        if op == "/":
            if y == 0:
                raise MiniLangError("division by zero")
            return x / y
        if op == "%":
            if y == 0:
                raise MiniLangError("modulo by zero")
            return math.fmod(x, y)
        if op == "<":
            return x < y
        if op == "<=":
            return x <= y
        if op == ">":
            return x > y
        if op == ">=":
            return x >= y
        raise TypeError(op)

    def _call(self, e: Call, frame: _Frame, uses: set):
        args = [self.eval(a, frame, uses) for a in e.args]
        fn = self.functions.get(e.name)
        if fn is None:
            if e.name == "is_nan":
                self._arity(e, 1)
                return math.isnan(_num(args[0], "is_nan"))
            if e.name == "abs":
                self._arity(e, 1)
                return abs(_num(args[0], "abs"))
            if e.name == "print":
                self._arity(e, 1)
                self.output.append(render(args[0]))
                return UNIT
            raise MiniLangError(f"unknown function {e.name!r}")
        if len(args) != len(fn.params):
            raise MiniLangError(f"{e.name} expects {len(fn.params)} arguments, got {len(args)}")
        callee = self._new_frame(frame.depth + 1, frame.ctrl)
        callee.vars.update(zip(fn.params, args))
        result = self.block(fn.body, callee)
        if result is not None:
            uses.add(self._q(callee, "$ret"))
            return result[0]
        return UNIT

    @staticmethod
    def _arity(e: Call, n: int) -> None:
        if len(e.args) != n:
            raise MiniLangError(f"{e.name} expects {n} argument(s), got {len(e.args)}")

    # -- statements
    def block(self, stmts, frame: _Frame):
        """Run statements; returns ``(value,)`` when a ``return`` fired, else None."""
        for stmt in stmts:
            result = self.stmt(stmt, frame)
            if result is not None:
                return result
        return None

    def _tick(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise _StepBudgetExceeded

    def stmt(self, s, frame: _Frame):
        self._tick()
        t = type(s)
        if t is If:
            return self._if(s, frame)
        if t is While:
            return self._while(s, frame)
        uses: set = set()
        try:
            if t is Let:
                frame.vars[s.name] = self.eval(s.value, frame, uses)
                frame.decls[s.name] = self._emit(s, frame, {self._q(frame, s.name)}, uses)
                return None
            if t is Assign or t is CompoundAssign:
                if s.name not in frame.vars:
                    raise MiniLangError(f"assignment to undeclared variable {s.name!r}")
                value = self.eval(s.value, frame, uses)
                if t is CompoundAssign:
                    uses.add(self._q(frame, s.name))
                    old = _num(frame.vars[s.name], f"'{s.op}'")
                    step = _num(value, f"'{s.op}'")
                    value = old + step if s.op == "+=" else old - step
                frame.vars[s.name] = value
                self._emit(s, frame, {self._q(frame, s.name)}, uses, frame.decls.get(s.name))
                return None
            if t is Return:
                value = UNIT if s.value is None else self.eval(s.value, frame, uses)
                self._emit(s, frame, {self._q(frame, "$ret")}, uses)
                return (value,)
            if t is ExprStmt:
                self.eval(s.expr, frame, uses)
                self._emit(s, frame, (), uses)
                return None
            if t is Assert or t is AssertEq:
                return self._assertion(s, frame, uses)
        except MiniLangError as err:
            self._abort(s, frame, uses, err)
            raise
        raise TypeError(s)

    def _abort(self, s, frame: _Frame, uses: set, err: MiniLangError) -> None:
        # the aborting statement still gets an event so it can anchor a slice
        self._emit(s, frame, (), uses)
        if err.broken is None and frame.depth == 0:
            err.broken = s.sid

    def _predicate(self, s, frame: _Frame, what: str) -> tuple[bool, int]:
        uses: set = set()
        try:
            cond = _bool(self.eval(s.cond, frame, uses), what)
        except MiniLangError as err:
            self._abort(s, frame, uses, err)
            raise
        return cond, self._emit(s, frame, (), uses)

    def _if(self, s: If, frame: _Frame):
        cond, pred = self._predicate(s, frame, "if condition")
        branch = s.then if cond else s.orelse
        if not branch:
            return None
        saved, frame.ctrl = frame.ctrl, pred
        try:
            return self.block(branch, frame)
        finally:
            frame.ctrl = saved

    def _while(self, s: While, frame: _Frame):
        saved = frame.ctrl
        try:
            while True:
                # each re-evaluation is control dependent on the previous one
                cond, pred = self._predicate(s, frame, "while condition")
                if not cond:
                    return None
                frame.ctrl = pred
                result = self.block(s.body, frame)
                if result is not None:
                    return result
                self._tick()
        finally:
            frame.ctrl = saved

    def _assertion(self, s, frame: _Frame, uses: set):
        try:
            if type(s) is Assert:
                ok = _bool(self.eval(s.cond, frame, uses), "assert")
                message = "assertion failed"
            else:
                left = self.eval(s.left, frame, uses)
                right = self.eval(s.right, frame, uses)
                ok = values_equal(left, right)
                message = f"expected {render(right)} but was {render(left)}"
        except MiniLangError:
            if not s.soft:
                raise
            ok, message = True, ""  # swallowed like a catch-all around the assertion
        self._emit(s, frame, (), uses)
        if not ok and not s.soft:
            raise _AssertionFailed(s.sid, message)
        return None


def run_test_def(program: Program, test: TestDef, step_budget: int) -> tuple[TestOutcome, ExecutionTrace]:
    """Run a test body (that need not belong to ``program``) against its functions."""
    if step_budget <= 0:
        raise ValueError("step_budget must be positive")
    run = _Run(program, step_budget)
    frame = run._new_frame(0, None)
    try:
        run.block(test.body, frame)
        outcome = TestOutcome.passed()
    except _AssertionFailed as fail:
        outcome = TestOutcome(OutcomeKind.FAILURE, fail.stmt, fail.message)
    except MiniLangError as err:
        outcome = TestOutcome(OutcomeKind.ERROR, err.broken, err.message)
    except _StepBudgetExceeded:
        outcome = TestOutcome(OutcomeKind.TIMEOUT, None, f"step budget {step_budget} exceeded")
    except RecursionError:
        outcome = TestOutcome(OutcomeKind.TIMEOUT, None, "call depth exceeded")
    coverage = frozenset(ev.stmt.ordinal for ev in run.events if ev.stmt.ordinal in run.program_ids)
    trace = ExecutionTrace(run.events, coverage, run.steps, run.output)
    return outcome, trace


def run_test(program: Program, test_name: str, step_budget: int) -> tuple[TestOutcome, ExecutionTrace]:
    try:
        test = program.test(test_name)
    except KeyError:
        raise UnknownTestError(test_name) from None
    return run_test_def(program, test, step_budget)


def run_suite(program: Program, step_budget) -> dict[str, tuple[TestOutcome, ExecutionTrace]]:
    """Run every test in a fresh interpreter.

    ``step_budget`` is an int applied to all tests or a mapping test name -> budget.
    """
    results = {}
    for test in program.tests:
        budget = step_budget[test.name] if isinstance(step_budget, dict) else step_budget
        results[test.name] = run_test_def(program, test, budget)
    return results
