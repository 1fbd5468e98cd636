from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purifl.interpreter import OutcomeKind, run_suite
from purifl.spectra import (
    CoverageCounters,
    LocalizationError,
    Technique,
    build_matrix,
    counters,
    localize,
    suspiciousness,
)

from conftest import src
from oracles import metric_oracle

counts = st.integers(0, 50)


def test_exactly_six_techniques():
    assert [t.value for t in Technique] == ["tarantula", "sbi", "ochiai", "jaccard", "ochiai2", "kulczynski2"]
    assert Technique.parse("Ochiai") is Technique.OCHIAI
    with pytest.raises(ValueError):
        Technique.parse("dstar")


@pytest.mark.parametrize(
    "technique, c, expected",
    [
        (Technique.TARANTULA, (1, 0, 0, 1), 1.0),
        (Technique.OCHIAI, (2, 1, 2, 5), 2 / math.sqrt(12)),
        (Technique.JACCARD, (0, 3, 4, 1), 0.0),
        (Technique.KULCZYNSKI2, (1, 1, 1, 0), 0.5),
        (Technique.KULCZYNSKI2, (1, 1, 1, 7), 0.5),
        (Technique.SBI, (3, 1, 9, 9), 0.75),
    ],
)
def test_formula_examples(technique, c, expected):
    assert suspiciousness(CoverageCounters(*c), technique) == pytest.approx(expected, rel=1e-12)


def test_all_zero_counters_give_zero():
    for t in Technique:
        assert suspiciousness(CoverageCounters(0, 0, 0, 0), t) == 0.0


def test_negative_counters_rejected():
    with pytest.raises(ValueError):
        CoverageCounters(-1, 0, 0, 0)


@settings(max_examples=1000, deadline=None)
@given(counts, counts, counts, counts)
def test_metrics_match_oracle(ef, nf, ep, np_):
    c = CoverageCounters(ef, nf, ep, np_)
    for t in Technique:
        got = suspiciousness(c, t)
        want = metric_oracle(t.value, ef, nf, ep, np_)
        assert math.isfinite(got) and got >= 0
        assert got == pytest.approx(want, rel=1e-12, abs=0)


@settings(max_examples=300, deadline=None)
@given(counts, counts, counts, counts)
def test_monotone_in_failing_coverage(ef, nf, ep, np_):
    lo, hi = CoverageCounters(ef, nf, ep, np_), CoverageCounters(ef + 1, nf, ep, np_)
    for t in (Technique.TARANTULA, Technique.SBI, Technique.OCHIAI, Technique.JACCARD, Technique.KULCZYNSKI2):
        assert suspiciousness(hi, t) >= suspiciousness(lo, t) - 1e-15


# ------------------------------------------------------------------------- matrices


def _suite(text):
    p = src(text)
    return p, run_suite(p, 10_000)


TWO_TESTS = """
fn a() { return 1; }
fn b() { return 2; }
fn unused() { return 3; }
test pass_a { assert_eq(a(), 1); }
test fail_b { assert_eq(b(), 3); }
"""


def test_matrix_layout_and_counters():
    p, results = _suite(TWO_TESTS)
    m = build_matrix(results, [s.sid for s in p.program_statements()])
    assert m.tests == ("fail_b", "pass_a")
    assert m.statements == (0, 1, 2)
    assert m.failed.tolist() == [True, False]
    assert m.covered.tolist() == [[False, True, False], [True, False, False]]
    assert counters(m, 1) == CoverageCounters(1, 0, 0, 1)
    assert counters(m, 2) == CoverageCounters(0, 1, 0, 1)  # covered by no row
    assert not (m.covered[0] & m.covered[1]).any()
    with pytest.raises(KeyError):
        counters(m, 99)


def test_matrix_csv():
    p, results = _suite(TWO_TESTS)
    m = build_matrix(results, [s.sid for s in p.program_statements()])
    assert m.to_csv() == "test,failed,0,1,2\nfail_b,1,0,1,0\npass_a,0,1,0,0\n"


def test_errors_and_timeouts_count_as_failing():
    p, results = _suite("fn f() { return 1; }\ntest e { let x = 1 / 0; }\ntest loop { while (true) { } }\ntest ok { assert_eq(f(), 1); }")
    assert results["loop"][0].kind is OutcomeKind.TIMEOUT
    m = build_matrix(results, [s.sid for s in p.program_statements()])
    assert m.n_failing == 2 and m.n_passing == 1


def test_empty_suite_rejected():
    with pytest.raises(ValueError):
        build_matrix({}, [])


def test_localize_requires_a_failing_row():
    p, results = _suite("fn f() { return 1; }\ntest ok { assert_eq(f(), 1); }")
    m = build_matrix(results, [s.sid for s in p.program_statements()])
    with pytest.raises(LocalizationError):
        localize(m, Technique.OCHIAI)


def test_single_covered_statement_strictly_maximal():
    # a passing row is needed: Ochiai2's numerator carries a_np
    p, results = _suite("fn f() { return 1; }\nfn g() { return 2; }\ntest bad { assert_eq(f(), 2); }\ntest ok { assert(true); }")
    m = build_matrix(results, [s.sid for s in p.program_statements()])
    for t in Technique:
        susp = localize(m, t)
        assert susp[0] > susp[1], t


def test_ochiai2_is_flat_without_passing_rows():
    p, results = _suite("fn f() { return 1; }\nfn g() { return 2; }\ntest bad { assert_eq(f(), 2); }")
    m = build_matrix(results, [s.sid for s in p.program_statements()])
    assert set(localize(m, Technique.OCHIAI2).values()) == {0.0}


def test_nanminmax_tarantula_tie(nanminmax_fault):
    results = run_suite(nanminmax_fault, 10_000)
    m = build_matrix(results, [s.sid for s in nanminmax_fault.program_statements()])
    assert m.n_failing == 1
    assert int(m.covered[list(m.tests).index("t1")].sum()) == 11
    susp = localize(m, Technique.TARANTULA)
    covered = {o for o, v in susp.items() if o in results["t1"][1].coverage}
    assert len({susp[o] for o in covered}) == 1
    assert max(susp[o] for o in susp if o not in covered) < min(susp[o] for o in covered)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_counters_match_brute_force_recount(data):
    rows = data.draw(st.integers(1, 8))
    cols = data.draw(st.integers(1, 10))
    cov = data.draw(st.lists(st.lists(st.booleans(), min_size=cols, max_size=cols), min_size=rows, max_size=rows))
    fail = data.draw(st.lists(st.booleans(), min_size=rows, max_size=rows))
    from purifl.spectra import SpectrumMatrix

    m = SpectrumMatrix(tuple(range(cols)), tuple(f"t{i}" for i in range(rows)), np.array(cov), np.array(fail))
    for j in range(cols):
        ef = nf = ep = np_ = 0
        for i in range(rows):
            if fail[i]:
                ef += cov[i][j]
                nf += not cov[i][j]
            else:
                ep += cov[i][j]
                np_ += not cov[i][j]
        assert counters(m, j) == CoverageCounters(ef, nf, ep, np_)
