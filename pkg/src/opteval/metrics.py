"""Structural, numerical, solution-quality and efficiency metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ir import ScalarModel
from .matcher import MatchResult
from .solver import SolveResult

MASK64 = (1 << 64) - 1
DEFAULT_SEED = 42
DEFAULT_SAMPLES = 100
ZERO_OPT_TOL = 1e-9

FLAG_GAP_UNDEFINED = "gap-undefined"
FLAG_GAP_ABSOLUTE = "gap-undefined-denominator"
FLAG_TOKENS_APPROX = "tokens-approximate"
FLAG_NO_MATCHED = "no-matched-constraints"
FLAG_OBJ_RMSE_UNDEFINED = "obj-rmse-undefined"
FLAG_VACUOUS_CONS = "vacuous-constraints"
FLAG_VACUOUS_DV = "vacuous-variables"


class MetricError(ValueError):
    pass


def ratio(tp: int, other: int) -> tuple[float, bool]:
    """``tp / (tp + other)``; the empty case is 1.0 and reported as vacuous."""
    if tp + other == 0:
        return 1.0, True
    return tp / (tp + other), False


def precision_recall(m: MatchResult) -> tuple[dict[str, float], set[str]]:
    flags: set[str] = set()
    cp, v1 = ratio(m.cons_tp, m.cons_fp)
    cr, v2 = ratio(m.cons_tp, m.cons_fn)
    dp, v3 = ratio(m.var_tp, m.var_fp)
    dr, v4 = ratio(m.var_tp, m.var_fn)
    if v1 or v2:
        flags.add(FLAG_VACUOUS_CONS)
    if v3 or v4:
        flags.add(FLAG_VACUOUS_DV)
    return {"cons_p": cp, "cons_r": cr, "dv_p": dp, "dv_r": dr}, flags


def optimality_gap(gt: SolveResult, cand: SolveResult) -> tuple[float | None, set[str]]:
    if not gt.optimal:
        raise MetricError(f"ground truth is not optimal ({gt.status})")
    if not cand.optimal:
        return None, {FLAG_GAP_UNDEFINED}
    diff = abs(gt.objective - cand.objective)
    if abs(gt.objective) < ZERO_OPT_TOL:
        return diff, {FLAG_GAP_ABSOLUTE}
    return diff / abs(gt.objective), set()


def obj_rmse(truth: list[float], cand: list[float]) -> float:
    if len(truth) != len(cand):
        raise MetricError(f"length mismatch: {len(truth)} vs {len(cand)}")
    if not truth:
        raise MetricError("at least one instance is required")
    return math.sqrt(sum((t - c) ** 2 for t, c in zip(truth, cand)) / len(truth))


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def unit(self) -> float:
        return (self.next() >> 11) / float(1 << 53)


@dataclass(frozen=True)
class SampleSet:
    seed: int
    n: int
    names: tuple[str, ...]
    points: tuple[dict[str, float], ...]


def sampling_box(lo: float, hi: float) -> tuple[float, float]:
    """Finite sampling interval; an open side falls back to a width-100 box."""
    if not math.isfinite(lo):
        lo = hi - 100.0 if math.isfinite(hi) else 0.0
    if not math.isfinite(hi):
        hi = lo + 100.0
    return lo, hi


def sample(model: ScalarModel, seed: int = DEFAULT_SEED, n: int = DEFAULT_SAMPLES) -> SampleSet:
    boxes = []
    for v in model.variables:
        lo, hi = (float(b) for b in v.effective_bounds())
        lo, hi = sampling_box(lo, hi)
        if lo > hi:
            raise MetricError(f"empty domain for {v.name}: [{lo}, {hi}]")
        boxes.append((v.name, v.domain, lo, hi))
    rng = SplitMix64(seed)
    points = []
    for _ in range(n):
        point = {}
        for name, domain, lo, hi in boxes:
            if domain == "binary":
                point[name] = float(rng.next() >> 63)
            elif domain == "integer":
                a, b = math.ceil(lo), math.floor(hi)
                point[name] = float(a + math.floor(rng.unit() * (b - a + 1)))
            else:
                point[name] = lo + rng.unit() * (hi - lo)
        points.append(point)
    return SampleSet(seed, n, tuple(b[0] for b in boxes), tuple(points))


def _numeric(sense: str) -> bool:
    return sense in ("<=", "=")


def cons_rmse(m: MatchResult, samples: SampleSet, baseline: str = "matched") -> tuple[float, set[str]]:
    """Residual RMSE over matched pairs, or over every ground-truth row with ``baseline="full"``.

    Under the full baseline an unmatched ground-truth row is compared against
    a zero residual, so dropping a binding constraint raises the value.
    """
    pairs = [p for p in m.pairs if _numeric(m.gt_rows[p.gt].sense)]
    if baseline == "matched":
        if not pairs:
            return 0.0, {FLAG_NO_MATCHED}
        rows = [(m.gt_rows[p.gt], m.cand_rows[p.cand]) for p in pairs]
    elif baseline == "full":
        partner = {p.gt: m.cand_rows[p.cand] for p in pairs}
        rows = [(g, partner.get(g.name)) for g in m.gt_rows.values() if _numeric(g.sense)]
        if not rows:
            return 0.0, {FLAG_NO_MATCHED}
    else:
        raise MetricError(f"unknown baseline {baseline!r}")
    total = 0.0
    for point in samples.points:
        for g, c in rows:
            fg = g.value(point)
            fc = c.value(point) if c is not None else 0.0
            total += (fg - fc) ** 2
    return math.sqrt(total / (len(rows) * samples.n)), set()


def approx_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def efficiency(latency_ms: float, input_tokens: int | None, output_tokens: int | None,
               prompt_text: str = "", response_text: str = "") -> tuple[float, int, int, set[str]]:
    """Provider usage when reported, otherwise a characters/4 estimate (flagged)."""
    flags: set[str] = set()
    if input_tokens is None:
        input_tokens = approx_tokens(prompt_text)
        flags.add(FLAG_TOKENS_APPROX)
    if output_tokens is None:
        output_tokens = approx_tokens(response_text)
        flags.add(FLAG_TOKENS_APPROX)
    return float(latency_ms), int(input_tokens), int(output_tokens), flags


FIELDS = (
    "cons_p", "cons_r", "dv_p", "dv_r", "opt_gap", "obj_rmse", "cons_rmse",
    "latency_ms", "input_tokens", "output_tokens", "flags",
)


@dataclass
class MetricRecord:
    cons_p: float
    cons_r: float
    dv_p: float
    dv_r: float
    opt_gap: float | None
    obj_rmse: float | None
    cons_rmse: float
    latency_ms: float = 0.0
    input_tokens: int = 0
    output_tokens: int = 0
    flags: set[str] = field(default_factory=set)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in FIELDS}
        out["flags"] = sorted(self.flags)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MetricRecord":
        kwargs = {k: data[k] for k in FIELDS}
        kwargs["flags"] = set(data["flags"])
        return cls(**kwargs)
