"""Score one candidate formulation against a ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import metrics
from .grounder import ground
from .ir import ScalarModel
from .matcher import MatchResult, match
from .metrics import MetricRecord
from .parser import ParseOutcome, parse_any, parse_ofir
from .solver import SolveResult, solve_milp


@dataclass
class Evaluation:
    match: MatchResult
    record: MetricRecord
    gt_solve: SolveResult
    cand_solve: SolveResult
    cons_rmse_full: float

    def to_json(self) -> dict:
        return {
            "match": self.match.summary(),
            "metrics": self.record.to_json(),
            "ground_truth": {"status": self.gt_solve.status, "objective": self.gt_solve.objective},
            "candidate": {"status": self.cand_solve.status, "objective": self.cand_solve.objective},
        }


def as_scalar(outcome: ParseOutcome) -> ScalarModel:
    if isinstance(outcome.model, ScalarModel):
        return outcome.model
    return ground(outcome.model, outcome.data).model


def load_ground_truth(path: Path | str) -> ScalarModel:
    return as_scalar(parse_ofir(Path(path).read_text(encoding="utf-8")))


def load_candidate(text: str, strict: bool = False) -> ParseOutcome:
    return parse_any(text, strict=strict)


def score_models(
    gt: ScalarModel,
    cand: ScalarModel,
    seed: int = metrics.DEFAULT_SEED,
    n: int = metrics.DEFAULT_SAMPLES,
    latency_ms: float = 0.0,
    input_tokens: int | None = 0,
    output_tokens: int | None = 0,
    prompt_text: str = "",
    response_text: str = "",
    gt_solve: SolveResult | None = None,
) -> Evaluation:
    m = match(gt, cand)
    ratios, flags = metrics.precision_recall(m)
    gt_solve = gt_solve or solve_milp(gt)
    cand_solve = solve_milp(cand)
    gap, gap_flags = metrics.optimality_gap(gt_solve, cand_solve)
    flags |= gap_flags
    if cand_solve.optimal:
        obj = metrics.obj_rmse([gt_solve.objective], [cand_solve.objective])
    else:
        obj = None
        flags.add(metrics.FLAG_OBJ_RMSE_UNDEFINED)
    samples = metrics.sample(gt, seed, n)
    crmse, cflags = metrics.cons_rmse(m, samples)
    flags |= cflags
    full, _ = metrics.cons_rmse(m, samples, baseline="full")
    lat, tin, tout, eflags = metrics.efficiency(
        latency_ms, input_tokens, output_tokens, prompt_text, response_text
    )
    flags |= eflags
    record = MetricRecord(
        ratios["cons_p"], ratios["cons_r"], ratios["dv_p"], ratios["dv_r"],
        gap, obj, crmse, lat, tin, tout, flags,
    )
    return Evaluation(m, record, gt_solve, cand_solve, full)
