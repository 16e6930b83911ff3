"""Grid runs over (problem, prompt, model) cells."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, metrics
from .benchsuite import PROBLEM_IDS, PROMPT_IDS, asset_root, load_case, load_prompt, render_prompt
from .evaluate import load_candidate, score_models
from .gateway import (
    REPLAY,
    FixtureStore,
    Gateway,
    GatewayError,
    ModelConfig,
    Telemetry,
    model_dir,
)
from .metrics import MetricRecord
from .parser import ParseError
from .solver import solve_milp

FLAG_PARSE_FAILED = "parse-failed"
FLAG_REQUEST_FAILED = "request-failed"


@dataclass
class RunConfig:
    problems: list[str] = field(default_factory=lambda: list(PROBLEM_IDS))
    prompts: list[str] = field(default_factory=lambda: list(PROMPT_IDS))
    models: list[ModelConfig] = field(default_factory=list)
    mode: str = REPLAY
    seed: int = metrics.DEFAULT_SEED
    out: Path = Path("out")
    fixtures: Path | None = None
    strict: bool = False
    workers: int = 0

    def __post_init__(self):
        if not (self.problems and self.prompts and self.models):
            raise ValueError("problems, prompts and models must be nonempty")

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        mode = doc.get("mode", REPLAY)
        models = [
            ModelConfig(**{**m, "mode": mode}) if isinstance(m, dict) else ModelConfig(m, mode=mode)
            for m in doc["models"]
        ]
        return cls(
            problems=doc.get("problems", list(PROBLEM_IDS)),
            prompts=doc.get("prompts", list(PROMPT_IDS)),
            models=models,
            mode=mode,
            seed=doc.get("seed", metrics.DEFAULT_SEED),
            out=Path(doc.get("out", "out")),
            fixtures=Path(doc["fixtures"]) if doc.get("fixtures") else None,
            strict=doc.get("strict", False),
            workers=doc.get("workers", 0),
        )


@dataclass
class Cell:
    problem: str
    prompt: str
    model: str
    record: MetricRecord | None = None
    transcript: list[dict] = field(default_factory=list)
    absent: str | None = None
    error: str | None = None
    warnings: list = field(default_factory=list)

    def sort_key(self):
        return (self.problem, self.prompt, self.model)


class MissingAssets(RuntimeError):
    pass


def default_fixture_root() -> Path:
    return Path(str(asset_root() / "fixtures"))


def _failed_record(tel, flag: str) -> MetricRecord:
    return MetricRecord(0.0, 0.0, 0.0, 0.0, None, None, 0.0,
                        float(tel.latency_ms), tel.input_tokens or 0, tel.output_tokens or 0,
                        {flag, metrics.FLAG_GAP_UNDEFINED, metrics.FLAG_OBJ_RMSE_UNDEFINED})


def run_cell(gateway: Gateway, cfg: RunConfig, model: ModelConfig, case, gt, gt_solve, prompt) -> Cell:
    cell = Cell(case.id, prompt.id, model.model)
    messages = render_prompt(prompt, case)
    try:
        transcript = gateway.run_multistep(model, messages)
    except GatewayError as exc:
        if getattr(exc, "key", None) is not None:
            cell.absent = f"missing fixture {exc.key} at step {exc.step}"
            return cell
        cell.error = str(exc)
        partial = exc.transcript
        tel = partial.telemetry if partial is not None else Telemetry()
        cell.record = _failed_record(tel, FLAG_REQUEST_FAILED)
        return cell
    cell.transcript = transcript.messages
    tel = transcript.telemetry
    prompt_chars = "".join(m["content"] for m in transcript.messages if m["role"] == "user")
    try:
        outcome = load_candidate(transcript.text, strict=cfg.strict)
    except ParseError as exc:
        cell.error = str(exc)
        cell.record = _failed_record(tel, FLAG_PARSE_FAILED)
        return cell
    cell.warnings = [list(w) for w in outcome.warnings]
    ev = score_models(
        gt, outcome.model, seed=cfg.seed,
        latency_ms=tel.latency_ms, input_tokens=tel.input_tokens, output_tokens=tel.output_tokens,
        prompt_text=prompt_chars, response_text=transcript.text, gt_solve=gt_solve,
    )
    cell.record = ev.record
    return cell


def run(cfg: RunConfig, gateway: Gateway | None = None) -> tuple[list[Cell], dict]:
    """Evaluate every configured cell and write records, transcripts and a manifest."""
    try:
        cases = {p: load_case(p) for p in cfg.problems}
        prompts = {p: load_prompt(p) for p in cfg.prompts}
    except LookupError as exc:
        raise MissingAssets(str(exc)) from exc
    fixtures = cfg.fixtures or default_fixture_root()
    if cfg.mode == REPLAY and not fixtures.is_dir():
        raise MissingAssets(f"fixture directory {fixtures} not found")
    gateway = gateway or Gateway(FixtureStore(fixtures))
    grounded = {p: c.model() for p, c in cases.items()}
    solved = {p: solve_milp(m) for p, m in grounded.items()}

    jobs = [
        (model, cases[p], grounded[p], solved[p], prompts[q])
        for p in cfg.problems for q in cfg.prompts for model in cfg.models
    ]
    workers = cfg.workers or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_cell, gateway, cfg, *job) for job in jobs]
        cells = [f.result() for f in futures]
    cells.sort(key=Cell.sort_key)

    present = [c for c in cells if c.record is not None]
    manifest = {
        "tool": "opteval",
        "version": __version__,
        "format": "ofir/1",
        "seed": cfg.seed,
        "samples": metrics.DEFAULT_SAMPLES,
        "mode": cfg.mode,
        "problems": cfg.problems,
        "prompts": cfg.prompts,
        "models": [m.model for m in cfg.models],
        "cells": len(present),
        "absent": [
            {"problem": c.problem, "prompt": c.prompt, "model": c.model, "reason": c.absent}
            for c in cells if c.absent
        ],
        "errors": [
            {"problem": c.problem, "prompt": c.prompt, "model": c.model, "error": c.error}
            for c in cells if c.error
        ],
        "flag_counts": _flag_counts(present),
        "notes": [
            "latency is measured request-to-last-byte; replay reuses the recorded value",
            "correlations use all cells with pairwise-complete deletion",
        ],
    }
    _write(cfg.out, cells, manifest)
    return cells, manifest


def _flag_counts(cells: list[Cell]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for c in cells:
        for f in c.record.flags:
            counts[f] = counts.get(f, 0) + 1
    return dict(sorted(counts.items()))


def records_document(cells: list[Cell]) -> dict:
    return {
        "records": [
            {"problem": c.problem, "prompt": c.prompt, "model": c.model, **c.record.to_json()}
            for c in sorted(cells, key=Cell.sort_key)
            if c.record is not None
        ]
    }


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False) + "\n", encoding="utf-8")


def _write(out: Path, cells: list[Cell], manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    tdir = out / "transcripts"
    tdir.mkdir(exist_ok=True)
    _dump(out / "records.json", records_document(cells))
    _dump(out / "manifest.json", manifest)
    for c in cells:
        if c.record is None:
            continue
        name = f"{c.problem}__{c.prompt}__{model_dir(c.model)}.json"
        _dump(tdir / name, {"messages": c.transcript, "warnings": c.warnings, "error": c.error})


def load_records(path: Path | str) -> list[dict]:
    return json.loads(Path(path).read_text(encoding="utf-8"))["records"]
