"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""

from __future__ import annotations

import itertools
import json
import random
import time
from dataclasses import replace
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from opteval import report
from opteval.benchsuite import PROBLEM_IDS, load_case, read_asset
from opteval.evaluate import as_scalar, score_models
from opteval.gateway import MODEL_IDS, ModelConfig
from opteval.ir import LinearExpr, ScalarConstraint, ScalarModel, ScalarVar
from opteval.matcher import match
from opteval.metrics import cons_rmse, sample
from opteval.parser import parse_any, parse_mathtext
from opteval.runner import RunConfig, run
from opteval.solver import INFEASIBLE, OPTIMAL, solve_milp

DATA = Path(__file__).parent / "data"


def verdict(number: int, ok: bool, detail: str) -> None:
    print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")


def fig3_models(candidate_text: str | None = None):
    gt = as_scalar(parse_any(read_asset("scenarios", "fig3", "gt.ofir")))
    text = candidate_text if candidate_text is not None else read_asset("scenarios", "fig3", "candidate.txt")
    return gt, parse_mathtext(text).model


def test_c1_solver_optima():
    expected = {"knapsack": 220.0, "aircraft_assignment": 700.0, "diet": 31 / 3, "aircraft_landing": 0.0}
    models = {p: load_case(p).model() for p in PROBLEM_IDS}
    start = time.perf_counter()
    results = {p: solve_milp(m) for p, m in models.items()}
    elapsed = time.perf_counter() - start
    ok = elapsed < 1.0
    for p, want in expected.items():
        r = results[p]
        tol = 0.01 if p == "diet" else 1e-6 * (1 + abs(want))
        ok &= r.status == OPTIMAL and abs(r.objective - want) <= tol
    ok &= abs(results["diet"].objective - 10.33) <= 0.01
    verdict(1, ok, f"{ {p: round(r.objective, 6) for p, r in results.items()} } in {elapsed:.3f}s")
    assert ok


def test_c2_fig3_reproduction():
    gt, cand = fig3_models()
    ev = score_models(gt, cand)
    rec = ev.record
    ok = abs(rec.cons_p - 0.67) <= 0.005 and rec.cons_r == 0.5 and rec.opt_gap == 0.0
    verdict(2, ok, f"precision {rec.cons_p:.4f}, recall {rec.cons_r}, gap {rec.opt_gap}")
    assert ok


def test_c3_self_evaluation_identity():
    bad = []
    for p in PROBLEM_IDS:
        m = load_case(p).model()
        rec = score_models(m, m).record
        values = (rec.cons_p, rec.cons_r, rec.dv_p, rec.dv_r)
        if values != (1.0, 1.0, 1.0, 1.0) or rec.opt_gap != 0 or rec.obj_rmse != 0 or rec.cons_rmse != 0:
            bad.append(p)
    verdict(3, not bad, f"mismatches: {bad or 'none'}")
    assert not bad


def random_binary_milp(rng: random.Random) -> ScalarModel:
    n = rng.randint(1, 15)
    names = [f"x{k}" for k in range(n)]
    variables = tuple(ScalarVar(v, "binary") for v in names)
    objective = LinearExpr.build({v: Decimal(rng.randint(-10, 10)) for v in names})
    rows = []
    for k in range(rng.randint(0, 6)):
        coefs = {v: Decimal(rng.randint(-6, 9)) for v in names if rng.random() < 0.7}
        if not any(coefs.values()):
            continue
        sense = rng.choice(["<=", "<=", ">=", "="])
        rhs = Decimal(rng.randint(-3, 12))
        rows.append(ScalarConstraint(f"c{k}", LinearExpr.build(coefs), sense, rhs))
    return ScalarModel("rand", rng.choice(["min", "max"]), variables, objective, tuple(rows))


def enumerate_binary(m: ScalarModel) -> tuple[str, float | None]:
    names = m.var_names()
    pts = np.array(list(itertools.product((0.0, 1.0), repeat=len(names))))
    col = {v: k for k, v in enumerate(names)}

    def vec(expr: LinearExpr):
        w = np.zeros(len(names))
        for v, c in expr.terms:
            w[col[v]] = float(c)
        return w

    feasible = np.ones(len(pts), dtype=bool)
    for c in m.constraints:
        lhs = pts @ vec(c.lhs)
        rhs = float(c.rhs)
        if c.sense == "<=":
            feasible &= lhs <= rhs + 1e-9
        elif c.sense == ">=":
            feasible &= lhs >= rhs - 1e-9
        else:
            feasible &= np.abs(lhs - rhs) <= 1e-9
    if not feasible.any():
        return INFEASIBLE, None
    values = pts[feasible] @ vec(m.objective)
    return OPTIMAL, float(values.max() if m.sense == "max" else values.min())


def test_c4_solver_oracle():
    rng = random.Random(20240611)
    start = time.perf_counter()
    failures = []
    for trial in range(200):
        m = random_binary_milp(rng)
        status, best = enumerate_binary(m)
        got = solve_milp(m)
        if got.status != status or (best is not None and abs(got.objective - best) > 1e-6):
            failures.append((trial, status, best, got.status, got.objective))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30.0
    verdict(4, ok, f"200 instances, {len(failures)} mismatches, {elapsed:.2f}s")
    assert ok, failures[:3]


def scale_row(m: ScalarModel, index: int, k: Decimal) -> ScalarModel:
    c = m.constraints[index]
    terms = {v: coef * k for v, coef in c.lhs.terms}
    row = replace(c, lhs=LinearExpr.build(terms), rhs=c.rhs * k)
    return replace(m, constraints=m.constraints[:index] + (row,) + m.constraints[index + 1:])


def counts(r):
    return (r.cons_tp, r.cons_fp, r.cons_fn, r.var_tp, r.var_fp, r.var_fn)


def test_c5_matching_invariances():
    rng = random.Random(7)
    cases = {p: load_case(p).model() for p in PROBLEM_IDS}
    fig3_gt, fig3_cand = fig3_models()
    pairs = [(m, m) for m in cases.values()] + [(fig3_gt, fig3_cand)]
    base = [counts(match(g, c)) for g, c in pairs]
    broken = 0
    for _ in range(1000):
        idx = rng.randrange(len(pairs))
        gt, cand = pairs[idx]
        row = rng.randrange(len(cand.constraints))
        k = Decimal(str(round(rng.uniform(1e-3, 100.0), 6)))
        if counts(match(gt, scale_row(cand, row, k))) != base[idx]:
            broken += 1
    deletions_ok = True
    for gt, cand in pairs:
        before = match(gt, cand)
        for p in before.pairs:
            keep = tuple(c for c in cand.constraints if c.name != p.cand)
            if len(keep) == len(cand.constraints):
                continue
            after = match(gt, replace(cand, constraints=keep))
            deletions_ok &= after.cons_tp == before.cons_tp - 1
    ok = broken == 0 and deletions_ok
    verdict(5, ok, f"{broken}/1000 scaled trials changed counts; deletion drops TP by one: {deletions_ok}")
    assert ok


def test_c6_cons_rmse_protocol():
    gt = load_case("knapsack").model()
    cap = gt.constraints[0]
    name, coef = cap.lhs.terms[0]
    bent = replace(cap, lhs=LinearExpr.build({**cap.lhs.as_dict(), name: coef * Decimal("1.25")}))
    cand = replace(gt, constraints=(bent,) + gt.constraints[1:])
    m1, m2 = match(gt, cand), match(gt, cand)
    a, _ = cons_rmse(m1, sample(gt, 42, 100))
    b, _ = cons_rmse(m2, sample(gt, 42, 100))
    names = gt.var_names()
    extra = ScalarConstraint("stray", LinearExpr.build({names[0]: Decimal(3), names[-1]: Decimal(-1)}),
                             "<=", Decimal(7))
    m3 = match(gt, replace(cand, constraints=cand.constraints + (extra,)))
    c, _ = cons_rmse(m3, sample(gt, 42, 100))
    ok = a > 0 and a.hex() == b.hex() and c.hex() == a.hex() and m3.cons_fp == m1.cons_fp + 1
    verdict(6, ok, f"run1 {a!r}, run2 {b!r}, with unmatched extra {c!r}")
    assert ok


def _drop_block(text: str, heading: str) -> str:
    out, skipping = [], False
    for line in text.splitlines():
        if line.strip().endswith(":"):
            skipping = line.strip() == heading
            if skipping:
                continue
        if not skipping:
            out.append(line)
    return "\n".join(out) + "\n"


def test_c7_recall_violation_direction():
    text = read_asset("scenarios", "fig3", "candidate.txt")
    gt, full = fig3_models()
    _, no_demand = fig3_models(_drop_block(text, "Demand:"))
    _, no_nonneg = fig3_models(_drop_block(text, "Non-negativity:"))
    base = score_models(gt, full)
    d = score_models(gt, no_demand)
    n = score_models(gt, no_nonneg)
    relaxed_differs = d.cand_solve.objective != pytest.approx(base.gt_solve.objective)
    ok = (
        d.cons_rmse_full > base.cons_rmse_full
        and relaxed_differs
        and d.record.opt_gap > 0
        and n.record.opt_gap == 0
    )
    verdict(7, ok, f"full-baseline cons_rmse {base.cons_rmse_full:.4f} -> {d.cons_rmse_full:.4f}, "
                   f"gap without demand {d.record.opt_gap:.4f}, without bound {n.record.opt_gap}")
    assert ok


def pearson_oracle(xs, ys):
    return float(np.corrcoef(np.array(xs), np.array(ys))[0, 1])


def test_c8_report_math():
    records = json.loads((DATA / "report_cells.json").read_text())["records"]
    assert len(records) == 12
    cm = report.correlations(records)
    worst = 0.0
    for a in report.NUMERIC:
        for b in report.NUMERIC:
            xs, ys = [], []
            for r in records:
                x, y = r.get(a), r.get(b)
                undefined = {"gap-undefined", "gap-undefined-denominator"} & set(r["flags"])
                if "opt_gap" in (a, b) and undefined:
                    continue
                if x is None or y is None:
                    continue
                xs.append(x)
                ys.append(y)
            want = pearson_oracle(xs, ys) if len(xs) >= 3 and np.std(xs) > 0 and np.std(ys) > 0 else None
            got = cm.get(a, b)
            if want is None or got is None:
                assert want is got, (a, b, want, got)
            else:
                worst = max(worst, abs(want - got))

    slice3 = json.loads((DATA / "radar_slice.json").read_text())["records"]
    radar = report.radar_scores(slice3, "p")
    expected = {
        "A": [1, 0, 1, 1, 1, 1, 1, 1],
        "B": [0, 1, 1, 0, 0, 0, 0, 1 / 3],
        "C": [0.5, 1, 1, 1, 0.5, 0.5, 0.5, 2 / 3],
    }
    radar_err = max(abs(radar[m][a] - v) for m, row in expected.items() for a, v in zip(report.AXES, row))
    heat_err = abs(report.heatmap_scores(slice3)["p"]["P1"] - 62.5)

    table = report.emit_table(records, "landing", "md")
    undefined_rows = [line for line in table.splitlines() if "| --" in line]
    ok = worst <= 1e-12 and radar_err <= 1e-12 and heat_err <= 1e-12 and len(undefined_rows) == 1
    verdict(8, ok, f"pearson err {worst:.2e}, radar err {radar_err:.2e}, heatmap err {heat_err:.2e}, "
                   f"'--' rows {len(undefined_rows)}")
    assert ok


def test_c9_replay_determinism(tmp_path):
    models = [ModelConfig(m) for m in MODEL_IDS.values()]
    docs = []
    for name in ("a", "b"):
        cells, manifest = run(RunConfig(models=models, out=tmp_path / name))
        docs.append((tmp_path / name / "records.json").read_bytes())
    ok = docs[0] == docs[1] and manifest["cells"] == 72 and not manifest["absent"]
    verdict(9, ok, f"{manifest['cells']} cells, identical bytes: {docs[0] == docs[1]}")
    assert ok
