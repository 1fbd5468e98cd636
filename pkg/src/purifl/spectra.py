"""Spectrum matrices and the six spectrum-based suspiciousness metrics."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .interpreter import ExecutionTrace, TestOutcome
from .nodes import StatementId


class Technique(str, enum.Enum):
    TARANTULA = "tarantula"
    SBI = "sbi"
    OCHIAI = "ochiai"
    JACCARD = "jaccard"
    OCHIAI2 = "ochiai2"
    KULCZYNSKI2 = "kulczynski2"

    @classmethod
    def parse(cls, name: str) -> Technique:
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown technique {name!r}; choose from {[t.value for t in cls]}") from None


class LocalizationError(ValueError):
    """Raised when suspiciousness is requested for a matrix with no failing row."""


@dataclass(frozen=True)
class CoverageCounters:
    a_ef: int
    a_nf: int
    a_ep: int
    a_np: int

    def __post_init__(self) -> None:
        if min(self.a_ef, self.a_nf, self.a_ep, self.a_np) < 0:
            raise ValueError(f"negative counter in {self}")


@dataclass(frozen=True)
class SpectrumMatrix:
    """Tests x candidate statements coverage flags plus per-test failure flags.

    ``statements`` holds program-statement ordinals (the candidate set) in ascending
    order; ``covered[i, j]`` says whether test ``tests[i]`` executed ``statements[j]``.
    """

    statements: tuple[int, ...]
    tests: tuple[str, ...]
    covered: np.ndarray  # bool, shape (len(tests), len(statements))
    failed: np.ndarray  # bool, shape (len(tests),)

    @property
    def n_failing(self) -> int:
        return int(self.failed.sum())

    @property
    def n_passing(self) -> int:
        return len(self.tests) - self.n_failing

    def column(self, ordinal: int) -> int:
        try:
            return self.statements.index(ordinal)
        except ValueError:
            raise KeyError(f"statement {ordinal} is not a candidate statement") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["test", "failed", *self.statements])
        for i, name in enumerate(self.tests):
            w.writerow([name, int(self.failed[i]), *self.covered[i].astype(int).tolist()])
        return buf.getvalue()


def build_matrix(
    suite_results: Mapping[str, tuple[TestOutcome, ExecutionTrace]],
    statements: Sequence[StatementId | int],
) -> SpectrumMatrix:
    """Rows ordered by test name, columns by ordinal; any non-pass outcome is failing."""
    if not suite_results:
        raise ValueError("cannot build a spectrum matrix from an empty suite")
    ordinals = tuple(sorted(s.ordinal if isinstance(s, StatementId) else s for s in statements))
    col = {o: j for j, o in enumerate(ordinals)}
    names = tuple(sorted(suite_results))
    covered = np.zeros((len(names), len(ordinals)), dtype=bool)
    failed = np.zeros(len(names), dtype=bool)
    for i, name in enumerate(names):
        outcome, trace = suite_results[name]
        failed[i] = outcome.failed
        for o in trace.coverage:
            covered[i, col[o]] = True
    return SpectrumMatrix(ordinals, names, covered, failed)


def counters(matrix: SpectrumMatrix, stmt: StatementId | int) -> CoverageCounters:
    ordinal = stmt.ordinal if isinstance(stmt, StatementId) else stmt
    column = matrix.covered[:, matrix.column(ordinal)]
    ef = int((column & matrix.failed).sum())
    ep = int((column & ~matrix.failed).sum())
    return CoverageCounters(ef, matrix.n_failing - ef, ep, matrix.n_passing - ep)


def _div(num: float, den: float) -> float:
    # zero denominators evaluate to 0 for every fraction and every whole formula
    return num / den if den else 0.0


def suspiciousness(c: CoverageCounters, technique: Technique) -> float:
    ef, nf, ep, np_ = c.a_ef, c.a_nf, c.a_ep, c.a_np
    if technique is Technique.TARANTULA:
        fail_ratio = _div(ef, ef + nf)
        pass_ratio = _div(ep, ep + np_)
        return _div(fail_ratio, fail_ratio + pass_ratio)
    if technique is Technique.SBI:
        return _div(ef, ef + nf)
    if technique is Technique.OCHIAI:
        return _div(ef, math.sqrt((ef + nf) * (ef + ep)))
    if technique is Technique.JACCARD:
        return _div(ef, ef + nf + ep)
    if technique is Technique.OCHIAI2:
        return _div(ef * np_, math.sqrt((ef + ep) * (np_ + nf) * (ef + nf) * (ep + np_)))
    if technique is Technique.KULCZYNSKI2:
        return 0.5 * (_div(ef, ef + nf) + _div(ef, ef + ep))
    raise ValueError(technique)


def localize(matrix: SpectrumMatrix, technique: Technique) -> dict[int, float]:
    """Suspiciousness for every candidate statement, keyed by ordinal."""
    if matrix.n_failing == 0:
        raise LocalizationError("no failing test: localization is undefined")
    return {o: suspiciousness(counters(matrix, o), technique) for o in matrix.statements}
