"""End-to-end orchestration: localization with and without purification, and the
mutation-based evaluation over a corpus of programs."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .interpreter import run_suite
from .mutation import (
    GreenSuiteError,
    Mutant,
    baseline_steps,
    generate,
    is_detected,
    mutant_budgets,
    sample,
)
from .nodes import Program
from .parser import parse_file
from .purification import PhaseTimer, PurifiedSpectra, PurifiedTest, purify
from .ranking import RefinedScores, RefineVariant, compare, refine, stmt_effort
from .spectra import SpectrumMatrix, Technique, build_matrix, localize

CORPUS_DIR = Path(__file__).parent / "corpus"
REPORT_FORMATS = ("json", "csv", "text")
CATEGORIES = ("s=1", "1<s<=10", "s>10")
ROW_COLUMNS = (
    "mutant", "program", "operator", "stmt_ordinal", "line", "technique",
    "effort_original", "effort_purified", "outcome", "stmt_save",
)
AGGREGATE_COLUMNS = (
    "technique", "total", "positive", "negative", "neutral",
    "pct_positive", "pct_negative", "pct_neutral",
    "mean_effort_original", "mean_effort_purified", "mean_stmt_save",
    "optimal_total", "optimal_regressions",
)


def corpus_programs() -> list[Path]:
    """The bundled green programs (seeded-fault variants live in a subdirectory)."""
    return sorted(CORPUS_DIR.glob("*.ml0"))


@dataclass(frozen=True)
class RunConfig:
    programs: tuple[str, ...] = ()  # empty means the bundled corpus
    techniques: tuple[Technique, ...] = tuple(Technique)
    purify: bool = True
    refine_variant: RefineVariant = RefineVariant.PRODUCT
    budget_mult: float = 5
    sample: int = 100
    seed: int = 0
    out: str | None = None
    format: str = "json"
    mutants: tuple[str, ...] = ()  # explicit mutant ids bypass sampling
    workers: int = 1

    def __post_init__(self) -> None:
        if self.budget_mult < 1:
            raise ValueError("budget multiplier must be >= 1")
        if self.sample < 1:
            raise ValueError("sample size must be >= 1")
        if self.format not in REPORT_FORMATS:
            raise ValueError(f"unknown report format {self.format!r}")
        if not self.techniques:
            raise ValueError("at least one technique is required")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def program_paths(self) -> list[Path]:
        return [Path(p) for p in self.programs] if self.programs else corpus_programs()

    def describe(self) -> dict:
        """Settings that shape the report (paths reduced to file names for portability)."""
        return {
            "programs": [p.name for p in self.program_paths()],
            "techniques": [t.value for t in self.techniques],
            "purify": self.purify,
            "refine_variant": self.refine_variant.value,
            "budget_mult": self.budget_mult,
            "sample": self.sample,
            "seed": self.seed,
            "mutants": list(self.mutants),
        }


# ---------------------------------------------------------------------- localization


@dataclass
class Localization:
    program: Program
    matrix: SpectrumMatrix
    susp: dict[Technique, dict[int, float]]
    purified: list[PurifiedTest] | None = None
    spectra: PurifiedSpectra | None = None
    refined: dict[Technique, RefinedScores] = field(default_factory=dict)

    def scores(self, technique: Technique) -> dict[int, float]:
        """Final ranking scores: refined when purification ran, base otherwise."""
        if technique in self.refined:
            return self.refined[technique].score
        return self.susp[technique]


def localize_program(
    program: Program,
    techniques: Sequence[Technique],
    do_purify: bool,
    budgets,
    variant: RefineVariant = RefineVariant.PRODUCT,
    timer: PhaseTimer | None = None,
) -> Localization:
    """Run the suite, build the spectrum, rank, and optionally purify and refine.

    Raises ``spectra.LocalizationError`` when no test fails.
    """
    timer = timer if timer is not None else PhaseTimer()
    results = run_suite(program, budgets)
    matrix = build_matrix(results, [s.sid for s in program.program_statements()])
    susp = {t: localize(matrix, t) for t in techniques}
    loc = Localization(program, matrix, susp)
    if not do_purify:
        return loc
    failing = {name: res for name, res in results.items() if res[0].failed}
    loc.purified, loc.spectra = purify(program, failing, budgets, timer)
    t0 = time.perf_counter()
    loc.refined = {t: refine(susp[t], loc.spectra, variant) for t in techniques}
    timer.add("refinement", time.perf_counter() - t0, len(techniques))
    return loc


# ------------------------------------------------------------------------ evaluation


@dataclass(frozen=True)
class EvaluationRow:
    mutant: str
    program: str
    operator: str
    stmt_ordinal: int
    line: int
    technique: str
    effort_original: float
    effort_purified: float
    outcome: str
    stmt_save: float

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in ROW_COLUMNS}


@dataclass
class EvaluationReport:
    config: dict
    rows: list[EvaluationRow]
    detected: int  # detected mutants available for sampling
    generated: int
    purified_tests: int = 0
    fallbacks: int = 0
    phase_counts: dict[str, int] = field(default_factory=dict)
    phase_seconds: dict[str, float] = field(default_factory=dict)

    def techniques(self) -> list[str]:
        return list(dict.fromkeys(r.technique for r in self.rows)) or list(self.config.get("techniques", []))

    def aggregates(self) -> dict[str, dict]:
        return {t: aggregate([r for r in self.rows if r.technique == t]) for t in self.techniques()}

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "mutants": {"generated": self.generated, "detected": self.detected, "evaluated": len(self.mutant_ids())},
            "purification": {"purified_tests": self.purified_tests, "fallbacks": self.fallbacks},
            "phases": dict(self.phase_counts),
            "rows": [r.as_dict() for r in self.rows],
            "aggregates": self.aggregates(),
        }

    def mutant_ids(self) -> list[str]:
        return list(dict.fromkeys(r.mutant for r in self.rows))


def category(effort_original: float) -> str:
    if effort_original <= 1:
        return "s=1"
    if effort_original <= 10:
        return "1<s<=10"
    return "s>10"


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _outcome_block(rows: list[EvaluationRow]) -> dict:
    n = len(rows)
    counts = {k: sum(r.outcome == k for r in rows) for k in ("Positive", "Negative", "Neutral")}
    block = {
        "total": n,
        "positive": counts["Positive"],
        "negative": counts["Negative"],
        "neutral": counts["Neutral"],
    }
    for k, v in counts.items():
        block[f"pct_{k.lower()}"] = 100.0 * v / n if n else 0.0
    block["mean_stmt_save"] = _mean([r.stmt_save for r in rows])
    return block


def aggregate(rows: list[EvaluationRow]) -> dict:
    block = _outcome_block(rows)
    block["mean_effort_original"] = _mean([r.effort_original for r in rows])
    block["mean_effort_purified"] = _mean([r.effort_purified for r in rows])
    optimal = [r for r in rows if r.effort_original == 1]
    block["optimal_total"] = len(optimal)
    block["optimal_regressions"] = sum(r.effort_purified > r.effort_original for r in optimal)
    block["categories"] = {c: _outcome_block([r for r in rows if category(r.effort_original) == c]) for c in CATEGORIES}
    return block


@dataclass(frozen=True)
class _Job:
    mutant: Mutant
    program_name: str
    budgets: Mapping[str, int]
    techniques: tuple[Technique, ...]
    purify: bool
    variant: RefineVariant


def _evaluate_one(job: _Job) -> tuple[list[EvaluationRow], int, int, PhaseTimer]:
    timer = PhaseTimer()
    m = job.mutant
    loc = localize_program(m.program, job.techniques, job.purify, job.budgets, job.variant, timer)
    rows = []
    for t in job.techniques:
        e_orig = stmt_effort(loc.susp[t], m.ordinal)
        e_pur = stmt_effort(loc.scores(t), m.ordinal) if job.purify else e_orig
        cmp = compare(e_orig, e_pur)
        rows.append(EvaluationRow(
            m.id, job.program_name, m.operator.value, m.ordinal, m.line, t.value,
            e_orig, e_pur, cmp.outcome.value, cmp.stmt_save,
        ))
    purified = loc.purified or []
    return rows, len(purified), sum(p.fallback for p in purified), timer


@dataclass
class CorpusEntry:
    name: str
    program: Program
    budgets: dict[str, int]
    mutants: list[Mutant]
    detected: list[Mutant]


def load_corpus(paths: Iterable[Path], budget_mult: float, seed: int = 0) -> list[CorpusEntry]:
    """Parse, check green suites, and generate + filter mutants for each program.

    Mutant ids are prefixed with the program's file stem, e.g. ``arith-0007``.
    """
    entries = []
    for path in paths:
        program = parse_file(path)
        budgets = mutant_budgets(baseline_steps(program), budget_mult)
        mutants = generate(program, seed=seed, prefix=Path(path).stem)
        detected = [m for m in mutants if is_detected(m, budgets)]
        entries.append(CorpusEntry(Path(path).stem, program, budgets, mutants, detected))
    return entries


def select_mutants(entries: list[CorpusEntry], config: RunConfig) -> list[tuple[CorpusEntry, Mutant]]:
    pool = [(e, m) for e in entries for m in e.detected]
    if config.mutants:
        by_id = {m.id: (e, m) for e, m in pool}
        every = {m.id for e in entries for m in e.mutants}
        missing = [i for i in config.mutants if i not in by_id]
        if missing:
            undetected = [i for i in missing if i in every]
            if undetected:
                raise ValueError(f"mutants not detected by their suites: {', '.join(undetected)}")
            raise ValueError(f"unknown mutant ids: {', '.join(missing)}")
        return sorted((by_id[i] for i in set(config.mutants)), key=lambda em: em[1].id)
    picked = sample([m for _, m in pool], config.sample, config.seed)
    owner = {m.id: e for e, m in pool}
    return [(owner[m.id], m) for m in picked]


def evaluate(config: RunConfig, entries: list[CorpusEntry] | None = None) -> EvaluationReport:
    """generate -> filter -> sample -> localize with/without purification -> compare."""
    if entries is None:
        entries = load_corpus(config.program_paths(), config.budget_mult, config.seed)
    chosen = select_mutants(entries, config)
    jobs = [
        _Job(m, e.name, e.budgets, tuple(config.techniques), config.purify, config.refine_variant)
        for e, m in chosen
    ]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate_one, jobs, chunksize=4))
    else:
        results = [_evaluate_one(j) for j in jobs]

    timer = PhaseTimer()
    rows: list[EvaluationRow] = []
    purified = fallbacks = 0
    for job_rows, n_pur, n_fb, t in results:
        rows.extend(job_rows)
        purified += n_pur
        fallbacks += n_fb
        timer.merge(t)
    rows.sort(key=lambda r: (r.mutant, config.techniques.index(Technique(r.technique))))
    counts = {p: timer.counts.get(p, 0) for p in ("atomization", "slicing", "refinement")}
    seconds = {p: timer.seconds.get(p, 0.0) for p in counts}
    return EvaluationReport(
        config.describe(), rows,
        detected=sum(len(e.detected) for e in entries),
        generated=sum(len(e.mutants) for e in entries),
        purified_tests=purified, fallbacks=fallbacks,
        phase_counts=counts, phase_seconds=seconds,
    )


# --------------------------------------------------------------------- serialization


def _fmt_number(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError(f"non-finite number {v!r} in report")
    out = f"{v:.4f}"
    return "0.0000" if out == "-0.0000" else out


def dumps_stable(obj, indent: int = 0) -> str:
    """JSON with sorted keys and every float printed with four decimals."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, int, float)):
        return _fmt_number(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps_stable(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + dumps_stable(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v) -> str:
    return _fmt_number(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else str(v)


def report_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_COLUMNS)
    for r in report.rows:
        w.writerow([_cell(v) for v in r.as_dict().values()])
    w.writerow([])
    w.writerow(AGGREGATE_COLUMNS)
    for t, agg in report.aggregates().items():
        w.writerow([t] + [_cell(agg[c]) for c in AGGREGATE_COLUMNS[1:]])
    return buf.getvalue()


def report_text(report: EvaluationReport) -> str:
    d = report.as_dict()
    m = d["mutants"]
    lines = [
        f"mutants: generated {m['generated']}, detected {m['detected']}, evaluated {m['evaluated']}",
        f"purified tests: {report.purified_tests} ({report.fallbacks} unsliced fallbacks)",
        "",
        f"{'technique':<12} {'pos':>4} {'neg':>4} {'neu':>4} {'%pos':>8} {'%neg':>8} "
        f"{'effort':>9} {'purified':>9} {'save':>8} {'opt-reg':>8}",
    ]
    for t, a in d["aggregates"].items():
        lines.append(
            f"{t:<12} {a['positive']:>4} {a['negative']:>4} {a['neutral']:>4} "
            f"{a['pct_positive']:>8.2f} {a['pct_negative']:>8.2f} "
            f"{a['mean_effort_original']:>9.4f} {a['mean_effort_purified']:>9.4f} "
            f"{a['mean_stmt_save']:>8.4f} {a['optimal_regressions']:>4}/{a['optimal_total']:<3}"
        )
    for t, a in d["aggregates"].items():
        lines.append("")
        lines.append(f"{t} by original effort:")
        for c, b in a["categories"].items():
            lines.append(
                f"  {c:<9} n={b['total']:<4} pos={b['positive']:<4} neg={b['negative']:<4} "
                f"neu={b['neutral']:<4} save={b['mean_stmt_save']:.4f}"
            )
    return "\n".join(lines) + "\n"


def render_report(report: EvaluationReport, fmt: str) -> str:
    if fmt == "json":
        return dumps_stable(report.as_dict()) + "\n"
    if fmt == "csv":
        return report_csv(report)
    if fmt == "text":
        return report_text(report)
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report: EvaluationReport, fmt: str, path) -> Path:
    """Write the deterministic report; wall-clock phase timings go to a sidecar file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report, fmt), encoding="utf-8")
    sidecar = path.with_name(path.name + ".timings.json")
    timings = {"counts": report.phase_counts, "seconds": report.phase_seconds}
    sidecar.write_text(dumps_stable(timings) + "\n", encoding="utf-8")
    return path


def ranking_rows(loc: Localization, technique: Technique) -> list[dict]:
    """One row per candidate statement in final rank order."""
    scores = loc.scores(technique)
    refined = loc.refined.get(technique)
    lines = {s.sid.ordinal: s.sid.line for s in loc.program.program_statements()}
    rows = []
    for o in sorted(scores, key=lambda s: (-scores[s], s)):
        rows.append({
            "ordinal": o,
            "line": lines[o],
            "susp": loc.susp[technique][o],
            "norm": refined.norm[o] if refined else None,
            "ratio": refined.ratio[o] if refined else None,
            "score": scores[o],
            "rank_effort_if_faulty": stmt_effort(scores, o),
        })
    return rows


def ranking_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ("ordinal", "line", "susp", "norm", "ratio", "score", "rank_effort_if_faulty")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r[c] is None else _cell(r[c]) for c in cols])
    return buf.getvalue()


__all__ = [
    "CorpusEntry", "EvaluationReport", "EvaluationRow", "GreenSuiteError", "Localization", "RunConfig",
    "aggregate", "category", "corpus_programs", "dumps_stable", "evaluate", "load_corpus",
    "localize_program", "ranking_csv", "ranking_rows", "render_report", "write_report",
]
