"""Command line entry point: ``run``, ``localize``, ``mutate`` and ``evaluate``.

Exit codes: 0 ok, 2 usage, 3 parse error, 4 green suite, 5 internal error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import mutation, pipeline
from .interpreter import run_suite
from .mutation import GreenSuiteError
from .parser import ParseError, parse_file
from .purification import write_purified
from .ranking import RefineVariant, stmt_effort
from .spectra import LocalizationError, Technique

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_GREEN, EXIT_INTERNAL = 0, 2, 3, 4, 5

CONFIG_KEYS = {
    "programs", "technique", "purify", "refine_variant", "budget_mult",
    "sample", "seed", "out", "format", "mutants", "workers",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------- config


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` pairs; ``#`` comments and ``[section]`` headers are ignored."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "techniques":
            key = "technique"
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {n}: unknown key {key!r}")
        out[key] = _unquote(value)
    return out


def _split_list(v: str) -> list[str]:
    v = v.strip()
    if v.startswith("[") and v.endswith("]"):
        v = v[1:-1]
    return [_unquote(p) for p in v.split(",") if p.strip()]


def _parse_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    low = str(v).strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _techniques(v) -> tuple[Technique, ...]:
    names = _split_list(v) if isinstance(v, str) else list(v)
    if any(n.lower() == "all" for n in names):
        return tuple(Technique)
    return tuple(dict.fromkeys(Technique.parse(n) for n in names))


def build_config(args: argparse.Namespace, purify_default: bool) -> pipeline.RunConfig:
    """Merge defaults, the ``--config`` file and explicit flags (flags win)."""
    settings: dict = {}
    if getattr(args, "config", None):
        try:
            settings.update(parse_config(Path(args.config).read_text(encoding="utf-8")))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value not in (None, [], ()):
            settings[key] = value
    kw: dict = {"purify": purify_default}
    try:
        if "programs" in settings:
            p = settings["programs"]
            kw["programs"] = tuple(_split_list(p) if isinstance(p, str) else p)
        if "technique" in settings:
            kw["techniques"] = _techniques(settings["technique"])
        if "purify" in settings:
            kw["purify"] = _parse_bool(settings["purify"])
        if "refine_variant" in settings:
            kw["refine_variant"] = RefineVariant(str(settings["refine_variant"]).lower())
        if "budget_mult" in settings:
            kw["budget_mult"] = float(settings["budget_mult"])
        for key in ("sample", "seed", "workers"):
            if key in settings:
                kw[key] = int(settings[key])
        if "out" in settings:
            kw["out"] = str(settings["out"])
        if "format" in settings:
            kw["format"] = str(settings["format"])
        if "mutants" in settings:
            m = settings["mutants"]
            kw["mutants"] = tuple(_split_list(m) if isinstance(m, str) else m)
        known = {f.name for f in fields(pipeline.RunConfig)}
        return pipeline.RunConfig(**{k: v for k, v in kw.items() if k in known})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -------------------------------------------------------------------------- commands


def _emit(text: str, out: str | None, name: str) -> Path | None:
    if out is None:
        sys.stdout.write(text)
        return None
    path = Path(out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def cmd_run(args) -> int:
    program = parse_file(args.program)
    names = args.test or [t.name for t in program.tests]
    missing = [n for n in names if n not in {t.name for t in program.tests}]
    if missing:
        raise UsageError(f"unknown tests: {', '.join(missing)}")
    results = run_suite(program.with_tests([program.test(n) for n in names]), args.budget)
    failed = 0
    for name in names:
        outcome, trace = results[name]
        failed += outcome.failed
        where = f"\tline {outcome.broken.line}" if outcome.failed and outcome.broken.ordinal >= 0 else ""
        msg = f"\t{outcome.message}" if outcome.message else ""
        print(f"{name}\t{outcome.kind.value}\t{trace.step_count} steps{where}{msg}")
        if args.trace_dir:
            d = Path(args.trace_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{name}.trace").write_text(trace.dump(), encoding="utf-8")
    print(f"{len(names) - failed} passed, {failed} failed")
    return EXIT_OK


def _faulty_ordinal(program, args) -> int | None:
    if args.faulty_ordinal is not None:
        return args.faulty_ordinal
    if args.faulty_line is None:
        return None
    on_line = [s.sid.ordinal for s in program.program_statements() if s.sid.line == args.faulty_line]
    if not on_line:
        raise UsageError(f"no program statement on line {args.faulty_line}")
    return min(on_line)


def cmd_localize(args) -> int:
    config = build_config(args, purify_default=False)
    program = parse_file(args.program)
    faulty = _faulty_ordinal(program, args)
    budget = max(mutation.MIN_BUDGET, int(args.budget)) if args.budget else mutation.BASELINE_BUDGET
    try:
        loc = pipeline.localize_program(
            program, config.techniques, config.purify, budget, config.refine_variant,
        )
    except LocalizationError:
        raise GreenSuiteError(f"{program.file}: every test passes; nothing to localize") from None
    for t in config.techniques:
        name = "ranking.csv" if len(config.techniques) == 1 else f"ranking_{t.value}.csv"
        _emit(pipeline.ranking_csv(pipeline.ranking_rows(loc, t)), config.out, name)
    if config.out:
        _emit(loc.matrix.to_csv(), config.out, "matrix.csv")
        if loc.purified:
            write_purified(program, loc.purified, Path(config.out) / "purified")
    if loc.spectra is not None:
        for note in loc.spectra.notes:
            print(f"note: {note}", file=sys.stderr)
    if faulty is not None:
        for t in config.techniques:
            base = stmt_effort(loc.susp[t], faulty)
            line = f"{t.value}: effort {base:.4f}"
            if config.purify:
                line += f" -> {stmt_effort(loc.scores(t), faulty):.4f} with purification"
            print(line, file=sys.stderr if config.out is None else sys.stdout)
    return EXIT_OK


def cmd_mutate(args) -> int:
    config = build_config(args, purify_default=False)
    program = parse_file(args.program)
    budgets = mutation.mutant_budgets(mutation.baseline_steps(program), config.budget_mult)
    mutants = mutation.generate(program, seed=config.seed, prefix=Path(args.program).stem)
    flags = {m.id: mutation.is_detected(m, budgets) for m in mutants}
    if args.sample is not None:
        try:
            mutants = mutation.sample([m for m in mutants if flags[m.id]], config.sample, config.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    out = Path(config.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    mutation.write_manifest((m.manifest_entry(flags[m.id]) for m in mutants), out / "manifest.jsonl")
    if args.emit_sources:
        from .printer import to_source

        d = out / "mutants"
        d.mkdir(exist_ok=True)
        for m in mutants:
            (d / f"{m.id}.ml0").write_text(f"// {m.description}\n" + to_source(m.program), encoding="utf-8")
    kept = sum(flags[m.id] for m in mutants)
    print(f"{len(mutants)} mutants, {kept} detected -> {out / 'manifest.jsonl'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = build_config(args, purify_default=True)
    try:
        report = pipeline.evaluate(config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if config.out:
        path = pipeline.write_report(report, config.format, config.out)
        print(f"report written to {path}")
    else:
        sys.stdout.write(pipeline.render_report(report, config.format))
    return EXIT_OK


# ---------------------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, sampling: bool = False) -> None:
    p.add_argument("--config", help="key = value settings file; flags override it")
    p.add_argument("--technique", help="comma-separated metric names or 'all'")
    p.add_argument("--purify", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--refine-variant", dest="refine_variant", choices=[v.value for v in RefineVariant])
    p.add_argument("--budget-mult", dest="budget_mult", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    if sampling:
        p.add_argument("--sample", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="purifl", description="Spectrum-based fault localization with test purification.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a program's tests")
    p.add_argument("program")
    p.add_argument("--test", action="append", help="run only this test (repeatable)")
    p.add_argument("--budget", type=int, default=mutation.BASELINE_BUDGET, help="step budget per test")
    p.add_argument("--trace-dir", help="write one <test>.trace dependence dump per test")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("localize", help="rank statements of a program with failing tests")
    p.add_argument("program")
    _add_common(p)
    p.add_argument("--budget", type=int, help="step budget per test")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--faulty-line", dest="faulty_line", type=int, help="report the effort for this line")
    g.add_argument("--faulty-ordinal", dest="faulty_ordinal", type=int)
    p.set_defaults(func=cmd_localize, technique=None)

    p = sub.add_parser("mutate", help="generate mutants and a detection manifest")
    p.add_argument("program")
    _add_common(p, sampling=True)
    p.add_argument("--emit-sources", action="store_true", help="also write each mutant as .ml0")
    p.set_defaults(func=cmd_mutate)

    p = sub.add_parser("evaluate", help="compare localization with and without purification over mutants")
    p.add_argument("programs", nargs="*", help="programs to mutate (default: bundled corpus)")
    _add_common(p, sampling=True)
    p.add_argument("--format", choices=pipeline.REPORT_FORMATS)
    p.add_argument("--mutant", dest="mutants", action="append", help="evaluate this mutant id (repeatable)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "localize" and args.technique is None and not args.config:
        args.technique = "tarantula"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"purifl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        for d in exc.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_PARSE
    except GreenSuiteError as exc:
        print(f"purifl: {exc}", file=sys.stderr)
        return EXIT_GREEN
    except OSError as exc:
        print(f"purifl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"purifl: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
