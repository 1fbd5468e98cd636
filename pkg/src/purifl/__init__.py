"""Spectrum-based fault localization over a small test-carrying language, with
test purification (atomization, dynamic slicing, rank refinement) and a
mutation-based evaluation harness."""

from .interpreter import ExecutionTrace, OutcomeKind, TestOutcome, run_suite, run_test
from .parser import ParseError, parse, parse_file
from .printer import to_source
from .spectra import Technique, build_matrix, localize

__all__ = [
    "ExecutionTrace", "OutcomeKind", "ParseError", "Technique", "TestOutcome",
    "build_matrix", "localize", "parse", "parse_file", "run_suite", "run_test", "to_source",
]
