"""Single-change mutants of program functions and detection filtering.

Replacement conventions for operators whose description leaves a choice open:
``+ -> -``, ``- -> +``, ``* -> /``, ``/ -> *``, ``% -> *``; numeric returns are
increased by one, boolean returns are flipped.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, replace
from typing import Iterable

from .interpreter import run_suite
from .nodes import (
    Binary,
    Bool,
    Call,
    CompoundAssign,
    If,
    Num,
    Program,
    Return,
    Unary,
    While,
    get_at,
    map_block,
    replace_at,
    walk_expr,
)
from .printer import format_expr, format_stmt_head

BASELINE_BUDGET = 1_000_000
MIN_BUDGET = 1000

MATH_SWAP = {"+": "-", "-": "+", "*": "/", "/": "*", "%": "*"}
BOUNDARY_SWAP = {"<": "<=", "<=": "<", ">": ">=", ">=": ">"}
EQUALITY_SWAP = {"==": "!=", "!=": "=="}
_BOOLEAN_OPS = {"<", "<=", ">", ">=", "==", "!=", "&&", "||"}


class MutationOperator(str, enum.Enum):
    INVERT_NEGATIVES = "invert_negatives"
    RETURN_VALUES = "return_values"
    MATH = "math"
    NEGATE_CONDITIONALS = "negate_conditionals"
    CONDITIONAL_BOUNDARY = "conditional_boundary"
    INCREMENTS = "increments"


OPERATOR_ORDER = {op: i for i, op in enumerate(MutationOperator)}


class GreenSuiteError(RuntimeError):
    """The unmutated program does not pass its own test suite."""


@dataclass(frozen=True)
class MutationPoint:
    operator: MutationOperator
    ordinal: int
    path: tuple  # expression path inside the statement; () replaces the statement
    original: object
    replacement: object
    line: int


@dataclass(frozen=True)
class Mutant:
    id: str
    operator: MutationOperator
    ordinal: int
    path: tuple
    line: int
    description: str
    program: Program

    def manifest_entry(self, detected: bool | None = None) -> dict:
        return {
            "id": self.id,
            "operator": self.operator.value,
            "stmt_ordinal": self.ordinal,
            "line": self.line,
            "description": self.description,
            "detected": detected,
        }


def _is_boolean(e) -> bool:
    if isinstance(e, Bool):
        return True
    if isinstance(e, Unary):
        return e.op == "!"
    if isinstance(e, Binary):
        return e.op in _BOOLEAN_OPS
    return isinstance(e, Call) and e.name == "is_nan"


def _negate(e):
    if isinstance(e, Unary) and e.op == "!":
        return e.operand
    if isinstance(e, Bool):
        return Bool(not e.value, e.span)
    return Unary("!", e, getattr(e, "span", None))


def _points_in(stmt, op: MutationOperator):
    """Yield (path, original, replacement) for one statement."""
    if op is MutationOperator.INCREMENTS:
        if isinstance(stmt, CompoundAssign):
            yield (), stmt, replace(stmt, op="-=" if stmt.op == "+=" else "+=")
        return
    if op is MutationOperator.RETURN_VALUES:
        if isinstance(stmt, Return) and stmt.value is not None:
            v = stmt.value
            new = _negate(v) if _is_boolean(v) else Binary("+", v, Num(1.0), getattr(v, "span", None))
            yield (("value",),), v, new
        return
    if op is MutationOperator.NEGATE_CONDITIONALS and isinstance(stmt, (If, While)):
        cond = stmt.cond
        if not (isinstance(cond, Binary) and cond.op in EQUALITY_SWAP):
            yield (("cond",),), cond, _negate(cond)
    for path, e in walk_expr(stmt):
        if op is MutationOperator.INVERT_NEGATIVES:
            if isinstance(e, Unary) and e.op == "-":
                yield path, e, e.operand
            elif isinstance(e, Num) and e.value == e.value and e.value != 0:
                parent = get_at(stmt, path[:-1])
                if not (isinstance(parent, Unary) and parent.op == "-"):
                    yield path, e, Unary("-", e, e.span)
        elif isinstance(e, Binary):
            table = {
                MutationOperator.MATH: MATH_SWAP,
                MutationOperator.NEGATE_CONDITIONALS: EQUALITY_SWAP,
                MutationOperator.CONDITIONAL_BOUNDARY: BOUNDARY_SWAP,
            }.get(op, {})
            if e.op in table:
                yield path, e, replace(e, op=table[e.op])


def mutation_points(program: Program, op: MutationOperator) -> list[MutationPoint]:
    points = []
    for stmt in program.program_statements():
        for path, original, new in _points_in(stmt, op):
            points.append(MutationPoint(op, stmt.sid.ordinal, path, original, new, stmt.sid.line))
    return points


def apply(program: Program, point: MutationPoint) -> Program:
    def swap(s):
        if s.sid.ordinal != point.ordinal:
            return s
        return replace_at(s, point.path, point.replacement)

    functions = tuple(replace(f, body=map_block(f.body, swap)) for f in program.functions)
    return replace(program, functions=functions)


def describe(point: MutationPoint) -> str:
    if point.path:
        before, after = format_expr(point.original), format_expr(point.replacement)
    else:
        before, after = format_stmt_head(point.original), format_stmt_head(point.replacement)
    return f"line {point.line}: {before} -> {after}"


def generate(program: Program, seed: int = 0, caps: dict | None = None, prefix: str = "m") -> list[Mutant]:
    """One mutant per (operator, point), ordered by operator, ordinal and path.

    ``caps`` optionally limits the number of points per operator; a seeded subset is
    taken when a cap bites.
    """
    caps = caps or {}
    chosen: list[MutationPoint] = []
    for op in MutationOperator:
        points = mutation_points(program, op)
        cap = caps.get(op, caps.get(op.value))
        if cap is not None and cap < len(points):
            keep = set(random.Random(f"{seed}:{op.value}").sample(range(len(points)), cap))
            points = [p for i, p in enumerate(points) if i in keep]
        chosen.extend(points)
    chosen.sort(key=lambda p: (OPERATOR_ORDER[p.operator], p.ordinal, repr(p.path)))
    return [
        Mutant(f"{prefix}-{k:04d}", p.operator, p.ordinal, p.path, p.line, describe(p), apply(program, p))
        for k, p in enumerate(chosen)
    ]


def baseline_steps(program: Program) -> dict[str, int]:
    """Step counts of each test on the unmutated program; raises if any test fails."""
    results = run_suite(program, BASELINE_BUDGET)
    red = sorted(name for name, (outcome, _) in results.items() if outcome.failed)
    if red:
        raise GreenSuiteError(f"{program.file}: tests fail on the original program: {', '.join(red)}")
    return {name: trace.step_count for name, (_, trace) in results.items()}


def mutant_budgets(baseline: dict[str, int], multiplier: float = 5, floor: int = MIN_BUDGET) -> dict[str, int]:
    if multiplier < 1:
        raise ValueError("budget multiplier must be >= 1")
    return {name: max(floor, int(multiplier * steps)) for name, steps in baseline.items()}


def is_detected(mutant: Mutant, budgets: dict[str, int]) -> bool:
    results = run_suite(mutant.program, budgets)
    return any(outcome.failed for outcome, _ in results.values())


def filter_detected(program: Program, mutants: Iterable[Mutant], multiplier: float = 5) -> list[Mutant]:
    """Keep mutants for which at least one test fails, errors or times out."""
    budgets = mutant_budgets(baseline_steps(program), multiplier)
    return [m for m in mutants if is_detected(m, budgets)]


def sample(mutants, n: int, seed: int) -> list[Mutant]:
    """Uniform sample without replacement, returned in the input order."""
    mutants = list(mutants)
    if n > len(mutants):
        raise ValueError(f"cannot sample {n} mutants from {len(mutants)}")
    picked = set(random.Random(seed).sample(range(len(mutants)), n))
    return [m for i, m in enumerate(mutants) if i in picked]


def write_manifest(entries: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
