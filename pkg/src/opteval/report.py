"""Aggregations over evaluated cells: radar scores, prompt heatmap, correlations, tables."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass

from .metrics import FLAG_GAP_ABSOLUTE, FLAG_GAP_UNDEFINED

BENEFIT = ("cons_p", "cons_r", "dv_p", "dv_r")
ERROR = ("opt_gap", "obj_rmse", "cons_rmse")
EFFICIENCY = ("latency_ms", "input_tokens", "output_tokens")
AXES = BENEFIT + ERROR + ("efficiency",)
NUMERIC = BENEFIT + ERROR + EFFICIENCY

COLUMNS = (
    "Prompt", "Model", "Cons-P", "Cons-R", "DV-P", "DV-R", "Opt. Gap",
    "Obj-RMSE", "Cons-RMSE", "Latency", "Input Tokens", "Output Tokens",
)
FORMATS = ("csv", "json", "md")
MODEL_LABELS = {
    "deepseek-math-7b-instruct": "DeepSeek",
    "meta-llama/Llama-3.1-8B-Instruct": "LLaMA 3.1",
    "gpt-5": "GPT-5",
}
UNDEFINED = "--"
CORRELATION_NOTE = "all cells, pairwise-complete deletion; undefined or flagged gaps excluded"


class ReportError(ValueError):
    pass


def _minmax(values: dict, invert: bool) -> dict:
    """Cell -> score in [0, 1]; a zero range scores every cell 1.0."""
    present = {k: v for k, v in values.items() if v is not None}
    if not present:
        return {}
    lo, hi = min(present.values()), max(present.values())
    if hi == lo:
        return {k: 1.0 for k in present}
    out = {}
    for k, v in present.items():
        norm = (v - lo) / (hi - lo)
        out[k] = 1.0 - norm if invert else norm
    return out


def cell_scores(records: list[dict]) -> list[dict[str, float]]:
    """Normalized axis scores for each record, normalized over the given slice."""
    idx = range(len(records))
    per_metric = {}
    for m in NUMERIC:
        per_metric[m] = _minmax({i: records[i].get(m) for i in idx}, invert=m not in BENEFIT)
    out = []
    for i in idx:
        scores = {m: per_metric[m][i] for m in BENEFIT + ERROR if i in per_metric[m]}
        eff = [per_metric[m][i] for m in EFFICIENCY if i in per_metric[m]]
        if eff:
            scores["efficiency"] = sum(eff) / len(eff)
        out.append(scores)
    return out


def _mean(xs):
    return sum(xs) / len(xs) if xs else None


def radar_scores(records: list[dict], problem: str) -> dict[str, dict[str, float | None]]:
    rows = sorted((r for r in records if r["problem"] == problem), key=_order)
    if not rows:
        raise ReportError(f"no records for problem {problem!r}")
    scores = cell_scores(rows)
    models = list(dict.fromkeys(r["model"] for r in rows))
    out: dict[str, dict[str, float | None]] = {}
    for model in models:
        mine = [s for r, s in zip(rows, scores) if r["model"] == model]
        out[model] = {a: _mean([s[a] for s in mine if a in s]) for a in AXES}
    return out


def heatmap_scores(records: list[dict]) -> dict[str, dict[str, float]]:
    """Problem -> prompt -> aggregate percentage (mean over models and axes)."""
    out: dict[str, dict[str, float]] = {}
    for problem in sorted({r["problem"] for r in records}):
        rows = sorted((r for r in records if r["problem"] == problem), key=_order)
        scores = cell_scores(rows)
        by_prompt: dict[str, list[float]] = {}
        for r, s in zip(rows, scores):
            by_prompt.setdefault(r["prompt"], []).extend(s.values())
        out[problem] = {p: 100.0 * sum(v) / len(v) for p, v in sorted(by_prompt.items()) if v}
    return out


@dataclass
class CorrelationMatrix:
    metrics: tuple[str, ...]
    r: dict[tuple[str, str], float | None]
    n: dict[tuple[str, str], int]

    def get(self, a: str, b: str) -> float | None:
        return self.r[(a, b)]


def _usable(record: dict, metric: str):
    value = record.get(metric)
    if value is None:
        return None
    if metric == "opt_gap":
        flags = set(record.get("flags", ()))
        if flags & {FLAG_GAP_UNDEFINED, FLAG_GAP_ABSOLUTE}:
            return None
    return float(value)


def correlations(records: list[dict], metrics: tuple[str, ...] = NUMERIC) -> CorrelationMatrix:
    r: dict[tuple[str, str], float | None] = {}
    n: dict[tuple[str, str], int] = {}
    for a in metrics:
        for b in metrics:
            xs, ys = [], []
            for rec in records:
                x, y = _usable(rec, a), _usable(rec, b)
                if x is not None and y is not None:
                    xs.append(x)
                    ys.append(y)
            n[(a, b)] = len(xs)
            if len(xs) < 3:
                r[(a, b)] = None
                continue
            try:
                r[(a, b)] = statistics.correlation(xs, ys)
            except statistics.StatisticsError:
                r[(a, b)] = None
    return CorrelationMatrix(tuple(metrics), r, n)


# ---------------------------------------------------------------------------
# Tables


def _order(rec: dict):
    labels = list(MODEL_LABELS)
    model = rec["model"]
    rank = labels.index(model) if model in labels else len(labels)
    return (rec["prompt"], rank, model)


def _fmt2(value) -> str:
    return UNDEFINED if value is None else f"{value:.2f}"


def table_rows(records: list[dict], problem: str) -> list[list[str]]:
    rows = []
    for rec in sorted((r for r in records if r["problem"] == problem), key=_order):
        rows.append([
            rec["prompt"],
            MODEL_LABELS.get(rec["model"], rec["model"]),
            _fmt2(rec["cons_p"]), _fmt2(rec["cons_r"]), _fmt2(rec["dv_p"]), _fmt2(rec["dv_r"]),
            _fmt2(rec["opt_gap"]), _fmt2(rec["obj_rmse"]), _fmt2(rec["cons_rmse"]),
            _fmt2(None if rec["latency_ms"] is None else rec["latency_ms"] / 1000.0),
            str(int(rec["input_tokens"])), str(int(rec["output_tokens"])),
        ])
    return rows


def emit_table(records: list[dict], problem: str, fmt: str) -> str:
    if fmt not in FORMATS:
        raise ReportError(f"unknown format {fmt!r}; use one of {', '.join(FORMATS)}")
    rows = table_rows(records, problem)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"problem": problem, "columns": list(COLUMNS), "rows": rows}, indent=2) + "\n"
    widths = [max(len(c), *(len(r[k]) for r in rows)) if rows else len(c) for k, c in enumerate(COLUMNS)]
    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    out = [line(COLUMNS), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def emit_tables(records: list[dict], fmt: str) -> dict[str, str]:
    """One document per problem present in ``records``."""
    problems = sorted({r["problem"] for r in records})
    return {p: emit_table(records, p, fmt) for p in problems}


def _num(value) -> str:
    return "" if value is None else repr(float(value))


def radar_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("problem", "model", *AXES))
    for problem in sorted({r["problem"] for r in records}):
        for model, scores in radar_scores(records, problem).items():
            w.writerow((problem, model, *(_num(scores[a]) for a in AXES)))
    return buf.getvalue()


def heatmap_csv(records: list[dict]) -> str:
    data = heatmap_scores(records)
    prompts = sorted({p for row in data.values() for p in row})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("problem", *prompts))
    for problem, row in data.items():
        w.writerow((problem, *(_num(row.get(p)) for p in prompts)))
    return buf.getvalue()


def correlations_csv(records: list[dict]) -> str:
    cm = correlations(records)
    buf = io.StringIO()
    buf.write(f"# {CORRELATION_NOTE}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", *cm.metrics))
    for a in cm.metrics:
        w.writerow((a, *(_num(cm.get(a, b)) for b in cm.metrics)))
    return buf.getvalue()
