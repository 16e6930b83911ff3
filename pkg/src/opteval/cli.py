"""Command-line entry point: ``opteval {run,score,solve,report,bench}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, metrics, report
from .benchsuite import PROBLEM_IDS, PROMPT_IDS, AssetError, list_cases, load_case
from .evaluate import as_scalar, load_candidate, score_models
from .gateway import MODEL_IDS, MODES, REPLAY, ModelConfig
from .parser import ParseError, parse_any
from .runner import MissingAssets, RunConfig, run
from .solver import INFEASIBLE, UNBOUNDED, solve_lp, solve_milp

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_UNBOUNDED = 3
EXIT_PARSE = 4
EXIT_ASSETS = 5


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_model(source: str, strict: bool = True):
    """A path to an OFIR or math-text file, or the id of a shipped benchmark."""
    if not Path(source).is_file() and source in PROBLEM_IDS:
        return load_case(source).model()
    return as_scalar(parse_any(_read(source), strict=strict))


def cmd_solve(args) -> int:
    try:
        model = _load_model(args.file)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    result = solve_lp(model) if args.relax else solve_milp(model)
    print(f"status: {result.status}")
    if result.optimal:
        print(f"objective: {result.objective:.12g}")
        for name, value in result.assignment.items():
            print(f"{name}: {value:.12g}")
    print(f"nodes: {result.nodes}")
    print(f"pivots: {result.pivots}")
    if result.status == INFEASIBLE:
        return EXIT_INFEASIBLE
    if result.status == UNBOUNDED:
        return EXIT_UNBOUNDED
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        gt = _load_model(args.gt)
        outcome = load_candidate(_read(args.pred), strict=args.strict)
        cand = as_scalar(outcome)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    ev = score_models(gt, cand, seed=args.seed, n=args.samples)
    doc = ev.to_json()
    doc["warnings"] = [list(w) for w in outcome.warnings]
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def _models(names: list[str], mode: str, endpoint: str | None) -> list[ModelConfig]:
    out = []
    for name in names:
        model = MODEL_IDS.get(name, name)
        kwargs = {"mode": mode}
        if endpoint:
            kwargs["endpoint"] = endpoint
        out.append(ModelConfig(model, **kwargs))
    return out


def cmd_run(args) -> int:
    if args.config:
        doc = json.loads(_read(args.config))
        cfg = RunConfig.from_json(doc)
    else:
        cfg = RunConfig(
            problems=args.problems or list(PROBLEM_IDS),
            prompts=args.prompts or list(PROMPT_IDS),
            models=_models(args.models or list(MODEL_IDS), args.mode, args.endpoint),
            mode=args.mode,
            seed=args.seed,
            out=Path(args.out),
            fixtures=Path(args.fixtures) if args.fixtures else None,
            strict=args.strict,
            workers=args.workers,
        )
    if args.config and args.out != "out":
        cfg.out = Path(args.out)
    try:
        cells, manifest = run(cfg)
    except MissingAssets as exc:
        print(f"missing assets: {exc}", file=sys.stderr)
        return EXIT_ASSETS
    print(f"{manifest['cells']} cells written to {cfg.out / 'records.json'}")
    if manifest["absent"]:
        print(f"{len(manifest['absent'])} cells absent (see manifest.json)", file=sys.stderr)
    if manifest["cells"] == 0:
        return EXIT_ASSETS
    return EXIT_OK


def cmd_report(args) -> int:
    records = json.loads(_read(args.input))["records"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if args.tables:
            for problem, text in report.emit_tables(records, args.tables).items():
                path = out / f"table_{problem}.{args.tables}"
                path.write_text(text, encoding="utf-8")
                written.append(path)
    except report.ReportError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    producers = {
        "radar": report.radar_csv,
        "heatmap": report.heatmap_csv,
        "correlations": report.correlations_csv,
    }
    for name, produce in producers.items():
        fmt = getattr(args, name)
        if fmt is None:
            continue
        if fmt != "csv":
            print(f"--{name} supports csv only", file=sys.stderr)
            return 1
        path = out / f"{name}.csv"
        path.write_text(produce(records), encoding="utf-8")
        written.append(path)
    for p in written:
        print(p)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        cases = list_cases()
    except AssetError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ASSETS
    for c in cases:
        print(f"{c['id']:<22}{c['difficulty']:<8}{c['type']:<30}optimum {c['optimum']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opteval", description="Evaluate optimization formulations.")
    p.add_argument("--version", action="version", version=f"opteval {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="evaluate a (problem x prompt x model) grid")
    s.add_argument("--config", help="JSON file mirroring the run configuration")
    s.add_argument("--problems", nargs="+", choices=PROBLEM_IDS)
    s.add_argument("--prompts", nargs="+", choices=PROMPT_IDS)
    s.add_argument("--models", nargs="+", help=f"model ids or aliases ({', '.join(MODEL_IDS)})")
    s.add_argument("--mode", choices=MODES, default=REPLAY)
    s.add_argument("--endpoint", help="chat-completions URL for live and record modes")
    s.add_argument("--fixtures", help="fixture directory (defaults to the shipped fixtures)")
    s.add_argument("--seed", type=int, default=metrics.DEFAULT_SEED)
    s.add_argument("--strict", action="store_true", help="strict math-text parsing")
    s.add_argument("--workers", type=int, default=0)
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("score", help="score a candidate against a ground truth")
    s.add_argument("--gt", required=True, help="OFIR file or benchmark id")
    s.add_argument("--pred", required=True, help="candidate file (OFIR or math text)")
    s.add_argument("--seed", type=int, default=metrics.DEFAULT_SEED)
    s.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLES)
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("solve", help="solve an OFIR or math-text model")
    s.add_argument("file")
    s.add_argument("--relax", action="store_true", help="drop integrality")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("report", help="tables and plot data from records.json")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--tables", choices=report.FORMATS)
    s.add_argument("--radar", choices=("csv",))
    s.add_argument("--heatmap", choices=("csv",))
    s.add_argument("--correlations", choices=("csv",))
    s.add_argument("--out", default="report")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("bench", help="benchmark assets")
    bsub = s.add_subparsers(dest="bench_command", required=True)
    b = bsub.add_parser("list", help="list shipped problems")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
