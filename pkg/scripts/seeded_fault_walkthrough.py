"""Show the motivating example: rankings before and after purification.

The faulty statement ties with ten others under Tarantula; purification separates
it and the effort drops from 6.0 to 1.5.
"""

from __future__ import annotations

import sys

from purifl import pipeline
from purifl.parser import parse_file
from purifl.ranking import compare, stmt_effort
from purifl.spectra import Technique

FAULT = pipeline.CORPUS_DIR / "faults" / "nanminmax_fault.ml0"
FAULT_LINE = 27


def main() -> int:
    program = parse_file(FAULT)
    loc = pipeline.localize_program(program, [Technique.TARANTULA], True, 100_000)
    faulty = next(s.sid.ordinal for s in program.program_statements() if s.sid.line == FAULT_LINE)

    print("purified tests:")
    for pt in loc.purified:
        print(f"  {pt.origin}__a{pt.index}: broken at ordinal {pt.broken.ordinal}, covers {sorted(pt.coverage)}")
    print()
    print(pipeline.ranking_csv(pipeline.ranking_rows(loc, Technique.TARANTULA)))

    before = stmt_effort(loc.susp[Technique.TARANTULA], faulty)
    after = stmt_effort(loc.scores(Technique.TARANTULA), faulty)
    result = compare(before, after)
    print(f"faulty statement: ordinal {faulty} (line {FAULT_LINE})")
    print(f"effort {before} -> {after}: {result.outcome.value}, saved {result.stmt_save}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
