from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from purifl import cli, pipeline
from purifl.pipeline import CATEGORIES, EvaluationReport, RunConfig, render_report
from purifl.ranking import RefineVariant
from purifl.spectra import Technique

from conftest import FAULT_LINE, NANMINMAX, NANMINMAX_FAULT

NANMINMAX_MUTANT = "nanminmax-0013"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ------------------------------------------------------------------------- localize


def test_localize_without_purification(capsys, tmp_path):
    code, out, _ = run(["localize", NANMINMAX_FAULT, "--faulty-line", FAULT_LINE, "--out", tmp_path], capsys)
    assert code == 0
    assert "tarantula: effort 6.0000" in out
    rows = list(csv.DictReader((tmp_path / "ranking.csv").open()))
    assert list(rows[0]) == ["ordinal", "line", "susp", "norm", "ratio", "score", "rank_effort_if_faulty"]
    faulty = next(r for r in rows if r["line"] == str(FAULT_LINE))
    assert faulty["rank_effort_if_faulty"] == "6.0000"
    assert (tmp_path / "matrix.csv").read_text().startswith("test,failed,0,1,2")
    assert not (tmp_path / "purified").exists()


def test_localize_with_purification(capsys, tmp_path):
    code, out, _ = run(["localize", NANMINMAX_FAULT, "--purify", "--faulty-line", FAULT_LINE, "--out", tmp_path], capsys)
    assert code == 0
    assert "effort 6.0000 -> 1.5000" in out
    rows = list(csv.DictReader((tmp_path / "ranking.csv").open()))
    assert [r["ordinal"] for r in rows[:2]] == ["9", "10"]
    assert rows[0]["ratio"] == rows[1]["ratio"] == "1.0000"
    assert sorted(p.name for p in (tmp_path / "purified").iterdir()) == ["t1__a2.ml0", "t1__a3.ml0"]
    code, out, _ = run(["run", tmp_path / "purified" / "t1__a3.ml0"], capsys)
    assert code == 0 and "failure" in out


def test_localize_to_stdout_and_several_techniques(capsys):
    code, out, err = run(["localize", NANMINMAX_FAULT, "--technique", "ochiai", "--faulty-ordinal", 9], capsys)
    assert code == 0
    assert out.startswith("ordinal,line,susp")
    assert "ochiai: effort" in err
    code, _, _ = run(["localize", NANMINMAX_FAULT, "--technique", "all"], capsys)
    assert code == 0


def test_exit_codes(capsys, tmp_path, monkeypatch):
    bad = tmp_path / "bad.ml0"
    bad.write_text("fn f( {")
    code, _, err = run(["localize", bad], capsys)
    assert code == cli.EXIT_PARSE and "bad.ml0:1:7" in err

    code, _, err = run(["localize", NANMINMAX], capsys)
    assert code == cli.EXIT_GREEN and "nothing to localize" in err

    code, _, err = run(["localize", NANMINMAX_FAULT, "--technique", "dstar"], capsys)
    assert code == cli.EXIT_USAGE

    code, _, _ = run(["localize", NANMINMAX_FAULT, "--faulty-line", 1], capsys)
    assert code == cli.EXIT_USAGE

    code, _, _ = run(["localize", tmp_path / "missing.ml0"], capsys)
    assert code == cli.EXIT_USAGE

    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == cli.EXIT_USAGE

    code, _, _ = run(["evaluate", "--sample", 0], capsys)
    assert code == cli.EXIT_USAGE

    code, _, _ = run(["evaluate", NANMINMAX_FAULT, "--sample", 1], capsys)
    assert code == cli.EXIT_GREEN

    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(pipeline, "localize_program", boom)
    code, _, err = run(["localize", NANMINMAX_FAULT], capsys)
    assert code == cli.EXIT_INTERNAL and "kaput" in err


# ---------------------------------------------------------------------- run / mutate


def test_run_with_trace_dump(capsys, tmp_path):
    code, out, _ = run(["run", NANMINMAX_FAULT, "--trace-dir", tmp_path], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("t1\tfailure")
    first = (tmp_path / "t1.trace").read_text().splitlines()[0]
    assert first.split("\t") == ["0", "16", "defs=frame#0:x", "uses=", "ctrl=-"]
    code, _, _ = run(["run", NANMINMAX_FAULT, "--test", "nope"], capsys)
    assert code == cli.EXIT_USAGE


def test_mutate_writes_manifest_and_sources(capsys, tmp_path):
    code, out, _ = run(["mutate", NANMINMAX, "--out", tmp_path, "--emit-sources"], capsys)
    assert code == 0
    entries = [json.loads(line) for line in (tmp_path / "manifest.jsonl").read_text().splitlines()]
    assert len(entries) == 18 and sum(e["detected"] for e in entries) == 13
    hit = next(e for e in entries if e["id"] == NANMINMAX_MUTANT)
    assert hit["operator"] == "negate_conditionals" and hit["stmt_ordinal"] == 9 and hit["detected"]
    code, out, _ = run(["run", tmp_path / "mutants" / f"{NANMINMAX_MUTANT}.ml0"], capsys)
    assert "t1\tfailure" in out

    code, _, _ = run(["mutate", NANMINMAX, "--out", tmp_path / "s", "--sample", 5, "--seed", 2], capsys)
    assert code == 0
    assert len((tmp_path / "s" / "manifest.jsonl").read_text().splitlines()) == 5


# -------------------------------------------------------------------------- config


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        "# evaluation settings\n[evaluate]\ntechnique = [\"ochiai\", \"jaccard\"]\n"
        "purify = false\nseed = 11\nsample = 7\nbudget_mult = 2.5\nrefine_variant = \"average\"\n"
    )
    args = cli.build_parser().parse_args(["evaluate", "--config", str(cfg), "--seed", "4", "--purify"])
    config = cli.build_config(args, purify_default=True)
    assert config.techniques == (Technique.OCHIAI, Technique.JACCARD)
    assert config.purify is True and config.seed == 4 and config.sample == 7
    assert config.budget_mult == 2.5 and config.refine_variant is RefineVariant.AVERAGE


def test_config_errors(tmp_path):
    with pytest.raises(cli.UsageError):
        cli.parse_config("nonsense line")
    with pytest.raises(cli.UsageError):
        cli.parse_config("colour = blue")
    with pytest.raises(ValueError):
        RunConfig(budget_mult=0.5)
    with pytest.raises(ValueError):
        RunConfig(sample=0)


# ------------------------------------------------------------------------ evaluate


@pytest.fixture(scope="module")
def entries():
    return pipeline.load_corpus(pipeline.corpus_programs(), 5)


def test_nanminmax_single_mutant_report(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _, _ = run(["evaluate", NANMINMAX, "--mutant", NANMINMAX_MUTANT, "--technique", "tarantula", "--out", out], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    (row,) = report["rows"]
    assert row["outcome"] == "Positive" and row["stmt_save"] == 4.5
    assert row["effort_original"] == 6.0 and row["effort_purified"] == 1.5
    assert (tmp_path / "r.json.timings.json").exists()
    code, _, err = run(["evaluate", NANMINMAX, "--mutant", "nanminmax-0000"], capsys)
    assert code == cli.EXIT_USAGE and "not detected" in err
    code, _, err = run(["evaluate", NANMINMAX, "--mutant", "zzz"], capsys)
    assert code == cli.EXIT_USAGE and "unknown" in err


def test_no_purification_is_all_neutral_and_builds_nothing(entries):
    report = pipeline.evaluate(RunConfig(sample=30, purify=False), entries)
    assert {r.outcome for r in report.rows} == {"Neutral"}
    assert report.phase_counts == {"atomization": 0, "slicing": 0, "refinement": 0}
    assert report.purified_tests == 0


def test_report_aggregates_are_consistent(entries):
    report = pipeline.evaluate(RunConfig(sample=40, seed=3), entries)
    data = report.as_dict()
    assert data["mutants"]["evaluated"] == 40
    for t, agg in data["aggregates"].items():
        rows = [r for r in data["rows"] if r["technique"] == t]
        assert agg["total"] == len(rows) == 40
        assert agg["positive"] + agg["negative"] + agg["neutral"] == 40
        assert abs(agg["pct_positive"] + agg["pct_negative"] + agg["pct_neutral"] - 100) < 1e-9
        assert sum(agg["categories"][c]["total"] for c in CATEGORIES) == 40
        for c in CATEGORIES:
            assert agg["categories"][c]["total"] == sum(pipeline.category(r["effort_original"]) == c for r in rows)
        for r in rows:
            assert r["stmt_save"] == r["effort_original"] - r["effort_purified"]
    # csv carries the same aggregates
    text = render_report(report, "csv")
    _, agg_part = text.split("\n\n")
    for rec in csv.DictReader(io.StringIO(agg_part)):
        agg = data["aggregates"][rec["technique"]]
        assert int(rec["positive"]) == agg["positive"]
        assert float(rec["mean_stmt_save"]) == pytest.approx(agg["mean_stmt_save"], abs=5e-5)
    assert "tarantula" in render_report(report, "text")


def test_reports_are_byte_identical_across_runs_and_workers(tmp_path):
    paths = []
    for i, workers in enumerate([1, 1, 3]):
        config = RunConfig(sample=25, seed=9, workers=workers)
        paths.append(pipeline.write_report(pipeline.evaluate(config), "json", tmp_path / f"r{i}.json"))
    texts = [p.read_bytes() for p in paths]
    assert texts[0] == texts[1] == texts[2]
    for fmt in ("csv", "text"):
        a = render_report(pipeline.evaluate(RunConfig(sample=10, seed=1)), fmt)
        b = render_report(pipeline.evaluate(RunConfig(sample=10, seed=1)), fmt)
        assert a == b


def test_empty_report_has_valid_schema():
    report = EvaluationReport(RunConfig().describe(), [], detected=0, generated=0)
    data = json.loads(render_report(report, "json"))
    assert data["rows"] == []
    assert set(data) == {"aggregates", "config", "mutants", "phases", "purification", "rows"}
    assert set(data["aggregates"]) == {t.value for t in Technique}
    assert data["aggregates"]["ochiai"]["total"] == 0
    assert render_report(report, "csv").startswith("mutant,program,operator")


def test_stable_json_formatting():
    text = pipeline.dumps_stable({"b": 1.0, "a": [0.123456, -0.0, 2], "c": {"z": None, "y": True}})
    assert text == '{\n  "a": [\n    0.1235,\n    0.0000,\n    2\n  ],\n  "b": 1.0000,\n  "c": {\n    "y": true,\n    "z": null\n  }\n}'
    with pytest.raises(ValueError):
        pipeline.dumps_stable(float("nan"))


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "purifl", "localize", str(NANMINMAX_FAULT), "--purify", "--faulty-line", str(FAULT_LINE)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "6.0000 -> 1.5000" in proc.stderr
