from __future__ import annotations

import math
from dataclasses import replace
from decimal import Decimal

import pytest

from conftest import model
from opteval import metrics
from opteval.ir import LinearExpr, ScalarVar
from opteval.matcher import MatchResult, match
from opteval.metrics import (
    MetricError,
    MetricRecord,
    SplitMix64,
    cons_rmse,
    efficiency,
    obj_rmse,
    optimality_gap,
    precision_recall,
    sample,
)
from opteval.solver import INFEASIBLE, OPTIMAL, SolveResult


def counts(tp, fp, fn, vtp=1, vfp=0, vfn=0):
    return MatchResult([], tp, fp, fn, [], vtp, vfp, vfn)


def test_precision_recall_fig3():
    ratios, flags = precision_recall(counts(2, 1, 2))
    assert round(ratios["cons_p"], 2) == 0.67 and ratios["cons_r"] == 0.5
    assert not flags


def test_precision_recall_vacuous():
    ratios, flags = precision_recall(counts(0, 0, 0, 0, 0, 0))
    assert set(ratios.values()) == {1.0}
    assert flags == {metrics.FLAG_VACUOUS_CONS, metrics.FLAG_VACUOUS_DV}


def opt(value):
    return SolveResult(OPTIMAL, value, {})


@pytest.mark.parametrize("gt,cand,want", [(220, 220, 0.0), (700, 728, 0.04), (700, 979, 0.39857142857142858)])
def test_gap(gt, cand, want):
    value, flags = optimality_gap(opt(gt), opt(cand))
    assert value == pytest.approx(want, abs=1e-12) and not flags


def test_gap_absolute_fallback():
    assert optimality_gap(opt(0.0), opt(0.0)) == (0.0, {metrics.FLAG_GAP_ABSOLUTE})
    assert optimality_gap(opt(0.0), opt(3.5)) == (3.5, {metrics.FLAG_GAP_ABSOLUTE})


def test_gap_undefined_and_misconfigured():
    assert optimality_gap(opt(1.0), SolveResult(INFEASIBLE)) == (None, {metrics.FLAG_GAP_UNDEFINED})
    with pytest.raises(MetricError):
        optimality_gap(SolveResult(INFEASIBLE), opt(1.0))


def test_obj_rmse():
    assert obj_rmse([700], [700]) == 0.0
    assert obj_rmse([700], [979]) == 279.0
    assert obj_rmse([1, 2, 3], [2, 3, 4]) == 1.0
    with pytest.raises(MetricError):
        obj_rmse([1], [1, 2])


def test_splitmix_reference_vector():
    # reference first outputs for seed 0
    r = SplitMix64(0)
    assert [r.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    ]


def test_sample_binary_closure():
    m = model("max", {"x1": 1, "x2": 1}, variables=(ScalarVar("x1", "binary"), ScalarVar("x2", "binary")))
    s = sample(m, 42, 100)
    assert len(s.points) == 100
    assert {v for p in s.points for v in p.values()} <= {0.0, 1.0}


def test_sample_determinism(benchmarks):
    m = benchmarks["aircraft_landing"]
    assert sample(m, 42, 100) == sample(m, 42, 100)
    assert sample(m, 42, 100) != sample(m, 43, 100)


def test_sample_mean_golden():
    m = model("min", {"x": 1}, variables=(ScalarVar("x", upper=Decimal(100)),))
    mean = sum(p["x"] for p in sample(m, 42, 100).points) / 100
    assert 35 <= mean <= 65
    assert mean == 49.5587678389461


def test_sample_integer_and_open_box():
    m = model("min", {"k": 1, "f": 1}, variables=(
        ScalarVar("k", "integer", Decimal(2), Decimal(4)),
        ScalarVar("f", lower=Decimal("-Infinity"), upper=Decimal(5)),
    ))
    pts = sample(m, 7, 200).points
    assert {p["k"] for p in pts} == {2.0, 3.0, 4.0}
    assert all(-95.0 <= p["f"] <= 5.0 for p in pts)


def _bent_knapsack(gt):
    cap = gt.constraints[0]
    bent = replace(cap, lhs=LinearExpr.build({**cap.lhs.as_dict(), "x_2": Decimal(25)}))
    return replace(gt, constraints=(bent,))


def test_cons_rmse_self_is_zero(benchmarks):
    for m in benchmarks.values():
        value, _ = cons_rmse(match(m, m), sample(m))
        assert value == 0.0


def test_cons_rmse_knapsack_golden(benchmarks):
    gt = benchmarks["knapsack"]
    s = sample(gt, 42, 100)
    value, flags = cons_rmse(match(gt, _bent_knapsack(gt)), s)
    # canonical residuals differ by x2 * 5/30 on the capacity row only
    ones = sum(p["x_2"] for p in s.points)
    assert ones == 54
    assert value == pytest.approx(math.sqrt(ones / 100) / 6, abs=1e-15)
    assert value == 0.12247448713915905
    assert not flags


def test_cons_rmse_no_pairs():
    gt = model("min", {"x1": 1, "x2": 1}, [({"x1": 1, "x2": 1}, ">=", 1)])
    cand = model("min", {"x1": 1, "x2": 1}, [({"x1": 1, "x2": -4}, "<=", 9)])
    value, flags = cons_rmse(match(gt, cand), sample(gt))
    assert value == 0.0 and flags == {metrics.FLAG_NO_MATCHED}


def test_cons_rmse_full_baseline_penalises_missing_rows():
    gt = model("min", {"x1": 1, "x2": 1}, [({"x1": 1, "x2": 1}, ">=", 1), ({"x1": 1, "x2": -1}, "<=", 3)])
    cand = replace(gt, constraints=gt.constraints[:1])
    s = sample(gt)
    matched, _ = cons_rmse(match(gt, cand), s)
    full, _ = cons_rmse(match(gt, cand), s, baseline="full")
    assert matched == 0.0 and full > 0.0
    with pytest.raises(MetricError):
        cons_rmse(match(gt, cand), s, baseline="other")


def test_efficiency_usage():
    assert efficiency(2000.0, 137, 39, "p", "r")[:3] == (2000.0, 137, 39)


def test_efficiency_empty_response():
    lat, tin, tout, flags = efficiency(812.5, 90, None, "p", "")
    assert (lat, tin, tout) == (812.5, 90, 0)


def test_efficiency_character_rule():
    lat, tin, tout, flags = efficiency(10.0, 5, None, "prompt", "a" * 400)
    assert tout == 100 and flags


def test_record_json_round_trip():
    rec = MetricRecord(1.0, 0.5, 1.0, 1.0, None, None, 0.25, 3.0, 4, 5, {"gap-undefined"})
    doc = rec.to_json()
    assert list(doc) == list(metrics.FIELDS)
    assert MetricRecord.from_json(doc) == rec
