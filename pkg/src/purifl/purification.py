"""Test case purification: atomize failing tests, slice them, collect their spectra.

A failing test with k hard assertions becomes k single-assertion variants (the other
assertions turned soft). Each failing variant is cut down to the statements its broken
statement dynamically depends on, re-executed, and its program coverage recorded. The
resulting coverage rows feed the ratio term of rank refinement.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .interpreter import ExecutionTrace, OutcomeKind, TestOutcome, run_test_def
from .nodes import ASSERTION_TYPES, If, Program, StatementId, TestDef, While, map_block, walk_block
from .printer import to_source


@dataclass(frozen=True)
class AtomizedTest:
    origin: str
    kept_assertion: StatementId
    index: int  # 1-based position of the kept assertion in the original test
    body: TestDef


@dataclass(frozen=True)
class ExecutedVariant:
    variant: AtomizedTest
    outcome: TestOutcome
    trace: ExecutionTrace

    @property
    def broken(self) -> StatementId:
        return self.outcome.broken


@dataclass(frozen=True)
class SliceCriterion:
    b: int  # trace index of the broken statement's final occurrence
    V: frozenset[str]


@dataclass(frozen=True)
class PurifiedTest:
    origin: str
    kept_assertion: StatementId
    index: int
    body: TestDef
    fallback: bool
    broken: StatementId
    coverage: frozenset[int]

    @property
    def file_name(self) -> str:
        return f"{self.origin}__a{self.index}.ml0"


@dataclass(frozen=True)
class PurifiedRow:
    origin: str
    kept_ordinal: int  # -1 when the row is the unsliced original test
    covered: frozenset[int]
    source: str  # "sliced" | "fallback" | "original"


@dataclass
class PurifiedSpectra:
    statements: tuple[int, ...]
    rows: list[PurifiedRow]
    dropped_duplicates: int = 0
    notes: list[str] = field(default_factory=list)

    def b_ef(self, ordinal: int) -> int:
        return sum(ordinal in r.covered for r in self.rows)

    def b_nf(self, ordinal: int) -> int:
        return len(self.rows) - self.b_ef(ordinal)


class PhaseTimer:
    """Accumulates wall time and invocation counts per pipeline phase."""

    def __init__(self) -> None:
        self.seconds: dict[str, float] = defaultdict(float)
        self.counts: dict[str, int] = defaultdict(int)

    def add(self, phase: str, seconds: float, count: int = 1) -> None:
        self.seconds[phase] += seconds
        self.counts[phase] += count

    def merge(self, other: PhaseTimer) -> None:
        for k, v in other.seconds.items():
            self.seconds[k] += v
        for k, v in other.counts.items():
            self.counts[k] += v


# ----------------------------------------------------------------------- atomization


def hard_assertions(test: TestDef) -> list:
    return [s for s in walk_block(test.body) if isinstance(s, ASSERTION_TYPES) and not s.soft]


def atomize(test: TestDef) -> list[AtomizedTest]:
    hard = hard_assertions(test)
    if len(hard) <= 1:
        return [AtomizedTest(test.name, s.sid, 1, test) for s in hard]
    variants = []
    for i, keep in enumerate(hard, 1):

        def soften(s, keep=keep):
            if isinstance(s, ASSERTION_TYPES) and not s.soft and s.sid != keep.sid:
                return replace(s, soft=True)
            return s

        variants.append(AtomizedTest(test.name, keep.sid, i, replace(test, body=map_block(test.body, soften))))
    return variants


def _run_variants(program: Program, variants, step_budget: int) -> list[ExecutedVariant]:
    return [ExecutedVariant(v, *run_test_def(program, v.body, step_budget)) for v in variants]


def execute_atomized(program: Program, variants, step_budget: int) -> list[ExecutedVariant]:
    """Failing (failure or error) variants with their broken statements; timeouts dropped."""
    return [
        ev for ev in _run_variants(program, variants, step_budget)
        if ev.outcome.kind in (OutcomeKind.FAILURE, OutcomeKind.ERROR)
    ]


# -------------------------------------------------------------------------- slicing


def criterion_for(trace: ExecutionTrace, broken: StatementId) -> SliceCriterion:
    for ev in reversed(trace.events):
        if ev.stmt.ordinal == broken.ordinal and ev.call_depth == 0:
            return SliceCriterion(ev.index, ev.uses)
    raise KeyError(f"broken statement {broken.ordinal} does not occur in the trace")


def _dependencies(trace: ExecutionTrace) -> list[list[int]]:
    """Per event: indices it depends on (last definitions, control parent, declaration)."""
    last_def: dict[str, int] = {}
    deps = []
    for ev in trace.events:
        d = [last_def[v] for v in ev.uses if v in last_def]
        if ev.control_parent is not None:
            d.append(ev.control_parent)
        if ev.decl is not None:
            d.append(ev.decl)
        deps.append(d)
        for v in ev.defs:
            last_def[v] = ev.index
    return deps


def _closure(deps: list[list[int]], seeds) -> set[int]:
    seen = set(seeds)
    work = list(seeds)
    while work:
        for d in deps[work.pop()]:
            if d not in seen:
                seen.add(d)
                work.append(d)
    return seen


def backward_slice(trace: ExecutionTrace, criterion: SliceCriterion) -> set[int]:
    """Ordinals of test-body statements the criterion event transitively depends on."""
    if not 0 <= criterion.b < len(trace.events):
        raise KeyError(f"criterion event {criterion.b} is not in the trace")
    events = trace.events
    closure = _closure(_dependencies(trace), [criterion.b])
    return {events[i].stmt.ordinal for i in closure if events[i].call_depth == 0}


def slice_test(test: TestDef, trace: ExecutionTrace, criterion: SliceCriterion) -> TestDef:
    """Remove test statements outside the slice.

    An ``if``/``while`` is kept whole when any part of it is in the slice; the events
    nested in a kept compound then join the slice so it stays runnable.
    """
    events = trace.events
    deps = _dependencies(trace)
    nested: dict[int, set[int]] = {}
    for s in walk_block(test.body):
        if isinstance(s, (If, While)):
            nested[s.sid.ordinal] = {n.sid.ordinal for n in walk_block(s.then if isinstance(s, If) else s.body)}
            if isinstance(s, If) and s.orelse:
                nested[s.sid.ordinal] |= {n.sid.ordinal for n in walk_block(s.orelse)}
    top_events = [ev for ev in events if ev.call_depth == 0]
    closure = _closure(deps, [criterion.b])
    while True:
        kept = {events[i].stmt.ordinal for i in closure if events[i].call_depth == 0}
        inside = set().union(*(nested[c] for c in kept if c in nested)) if nested else set()
        extra = [ev.index for ev in top_events if ev.stmt.ordinal in inside and ev.index not in closure]
        if not extra:
            break
        closure = _closure(deps, list(closure) + extra)

    def prune(block):
        out = []
        for s in block:
            if s.sid.ordinal in kept:
                out.append(s)  # compounds are retained whole
        return tuple(out)

    return replace(test, body=prune(test.body))


# ------------------------------------------------------------------------- pipeline


def _budget_for(step_budget, name: str) -> int:
    return step_budget[name] if isinstance(step_budget, Mapping) else step_budget


def purify(
    program: Program,
    failing_tests: Mapping[str, tuple[TestOutcome, ExecutionTrace]],
    step_budget,
    timer: PhaseTimer | None = None,
) -> tuple[list[PurifiedTest], PurifiedSpectra]:
    """Purify every failing original test.

    ``failing_tests`` maps test names to their original (outcome, trace);
    ``step_budget`` is an int or a per-test mapping.
    """
    timer = timer or PhaseTimer()
    candidates = tuple(sorted(s.sid.ordinal for s in program.program_statements()))
    purified: list[PurifiedTest] = []
    keyed_rows: list[tuple[tuple[str, int], PurifiedRow]] = []
    notes: list[str] = []

    for name in sorted(failing_tests):
        outcome, original_trace = failing_tests[name]
        test = program.test(name)
        budget = _budget_for(step_budget, name)

        t0 = time.perf_counter()
        variants = atomize(test)
        executed = _run_variants(program, variants, budget)
        timer.add("atomization", time.perf_counter() - t0)

        failing = [ev for ev in executed if ev.outcome.kind in (OutcomeKind.FAILURE, OutcomeKind.ERROR)]
        if not failing:
            if outcome.kind is OutcomeKind.TIMEOUT:
                notes.append(f"{name}: timed out and no variant fails; no purified row")
            else:
                why = "has no assertion" if not variants else "no single-assertion variant fails"
                notes.append(f"{name}: {why}; original spectrum used")
                keyed_rows.append(((name, -1), PurifiedRow(name, -1, original_trace.coverage, "original")))
            continue

        t0 = time.perf_counter()
        for ev in failing:
            crit = criterion_for(ev.trace, ev.broken)
            body = slice_test(ev.variant.body, ev.trace, crit)
            replay, replay_trace = run_test_def(program, body, budget)
            same = replay.kind is ev.outcome.kind and replay.broken == ev.broken
            coverage = replay_trace.coverage if same else ev.trace.coverage
            if not same:
                body = ev.variant.body
                notes.append(f"{name}__a{ev.variant.index}: slice did not reproduce the failure; unsliced variant used")
            pt = PurifiedTest(name, ev.variant.kept_assertion, ev.variant.index, body, not same, ev.broken, coverage)
            purified.append(pt)
            row = PurifiedRow(name, pt.kept_assertion.ordinal, coverage, "fallback" if pt.fallback else "sliced")
            keyed_rows.append(((name, pt.kept_assertion.ordinal), row))
        timer.add("slicing", time.perf_counter() - t0)

    keyed_rows.sort(key=lambda kr: kr[0])
    rows, seen = [], set()
    for _, row in keyed_rows:
        if row.covered in seen:
            continue
        seen.add(row.covered)
        rows.append(row)
    spectra = PurifiedSpectra(candidates, rows, len(keyed_rows) - len(rows), notes)
    return purified, spectra


def write_purified(program: Program, purified, out_dir) -> list[Path]:
    """Emit each purified test as a standalone program ``<origin>__a<k>.ml0``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for pt in purified:
        test = replace(pt.body, name=f"{pt.origin}__a{pt.index}")
        path = out_dir / pt.file_name
        path.write_text(to_source(program.with_tests([test])), encoding="utf-8")
        paths.append(path)
    return paths
