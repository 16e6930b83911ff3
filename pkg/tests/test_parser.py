from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_models
from opteval.benchsuite import PROBLEM_IDS, load_case
from opteval.ir import (
    Diagnostic,
    ScalarModel,
    SymbolicFormulation,
    emit,
    emit_scalar,
    validate,
)
from opteval.parser import (
    ParseError,
    canonical_identifier,
    parse_any,
    parse_mathtext,
    parse_ofir,
    render_mathtext,
)

KNAPSACK_TEXT = "maximize 60 x1 + 100 x2 + 120 x3\n10 x1 + 20 x2 + 30 x3 <= 50\nx1,x2,x3 in {0,1}"


def evaluate(expr, point):
    return float(expr.constant) + sum(float(c) * point[n] for n, c in expr.terms)


def _satisfied(c, point) -> bool:
    lhs = evaluate(c.lhs, point)
    rhs = float(c.rhs)
    return {"<=": lhs <= rhs, ">=": lhs >= rhs, "=": lhs == rhs}[c.sense]


class TestOfir:
    def test_knapsack_is_symbolic_with_one_constraint(self):
        out = parse_ofir(load_case("knapsack").ofir())
        f = out.model
        assert isinstance(f, SymbolicFormulation)
        assert len(f.constraints) == 1
        assert f.var("x").domain == "binary"
        assert validate(f) == []

    def test_empty_document(self):
        with pytest.raises(ParseError, match="missing objective"):
            parse_ofir("OFIR/1\n")

    def test_duplicate_declaration_has_location(self):
        text = "OFIR/1\nPROBLEM p\nSET I = {1, 2}\nSET I = {3}\nVAR x[I]\nOBJ min sum(i in I, x[i])\n"
        with pytest.raises(ParseError) as info:
            parse_ofir(text)
        assert info.value.line == 4

    @pytest.mark.parametrize("problem", PROBLEM_IDS)
    def test_benchmarks_round_trip(self, problem):
        text = load_case(problem).ofir()
        out = parse_ofir(text)
        assert emit(out.model, out.data) == text

    def test_spans_cover_constraints(self):
        text = load_case("knapsack").ofir()
        out = parse_ofir(text)
        start, end = out.spans["con:capacity"]
        assert text.encode()[start:end].decode().startswith("CON capacity:")

    def test_undeclared_parameter_is_diagnosed(self):
        text = load_case("knapsack").ofir().replace("PARAM ItemWeight[I] = [10, 20, 30] \"weight of item i\"\n", "")
        try:
            f = parse_ofir(text).model
        except ParseError as exc:
            assert "ItemWeight" in str(exc)
        else:
            diags = validate(f)
            assert len(diags) == 1 and "ItemWeight" in str(diags[0])

    def test_nonlinear_product_rejected(self):
        text = "OFIR/1\nPROBLEM p\nSET I = {1, 2}\nVAR x[I] continuous\nOBJ min sum(i in I, x[i])\nCON bad: x[1] * x[2] <= 1\n"
        try:
            f = parse_ofir(text).model
        except ParseError as exc:
            assert "nonlinear" in str(exc)
        else:
            assert any("nonlinear" in d.message for d in validate(f))


class TestMathText:
    def test_knapsack_sample(self):
        m = parse_mathtext(KNAPSACK_TEXT).model
        assert m.sense == "max"
        assert [v.domain for v in m.variables] == ["binary"] * 3
        (c,) = m.constraints
        assert c.lhs.as_dict() == {"x1": 10, "x2": 20, "x3": 30} and c.rhs == 50
        assert "60 x1 + 100 x2 + 120 x3" in emit_scalar(m)

    def test_constant_objective_warns(self):
        out = parse_mathtext("minimize 0")
        assert out.model.constraints == ()
        assert any("no constraints" in msg for _, msg in out.warnings)

    def test_alias_folding(self):
        m = parse_mathtext("minimize x_2 + x_{2}\nx2 >= 1").model
        assert m.objective.as_dict() == {"x2": Decimal(2)}
        assert evaluate(m.objective, {"x2": 1.0}) == 2.0

    @pytest.mark.parametrize("spelling", ["x_{1,2}", "x[1,2]", "x_1_2", "x12", "X_{12}"])
    def test_spellings(self, spelling):
        assert canonical_identifier(spelling).casefold() == "x12"

    def test_unicode_and_latex(self):
        text = "Minimize Z = 3x_1 + 2·x_2\nSubject to:\n• x_1 + x_2 ≥ 4\n\\quad x_1 \\leq 3\nx_1, x_2 ≥ 0"
        m = parse_mathtext(text).model
        assert m.objective.as_dict() == {"x1": 3, "x2": 2}
        (row,) = m.constraints
        assert row.lhs.as_dict() == {"x1": 1, "x2": 1} and row.sense == ">=" and row.rhs == 4
        # a single-variable row reads as a bound declaration
        assert m.var("x1").upper == 3
        assert all(v.lower == 0 for v in m.variables)

    def test_chain_splits(self):
        m = parse_mathtext("minimize x\n1 <= x + y <= 5").model
        assert len(m.constraints) == 2

        def holds(s):
            pt = {"x": s / 2, "y": s / 2}
            return all(_satisfied(c, pt) for c in m.constraints)

        assert [holds(s) for s in (0.5, 1, 3, 5, 5.5)] == [False, True, True, True, False]

    def test_strict_mode_rejects_prose(self):
        text = "minimize x\nThe answer is clearly the best one\nx >= 1"
        lenient = parse_mathtext(text)
        assert lenient.warnings
        with pytest.raises(ParseError):
            parse_mathtext(text, strict=True)

    def test_parse_any_dispatch(self):
        assert isinstance(parse_any(load_case("knapsack").ofir()).model, SymbolicFormulation)
        assert isinstance(parse_any(KNAPSACK_TEXT).model, ScalarModel)


@settings(max_examples=150, deadline=None)
@given(scalar_models())
def test_scalar_emit_round_trip(m):
    back = parse_ofir(emit_scalar(m)).model
    assert emit_scalar(back) == emit_scalar(m)


@settings(max_examples=150, deadline=None)
@given(scalar_models(min_terms=2), st.dictionaries(st.sampled_from(["x1", "x2", "x3", "x4", "x5"]), st.integers(-5, 5)))
def test_mathtext_round_trip_preserves_values(m, raw):
    back = parse_mathtext(render_mathtext(m)).model
    point = {v.name: float(raw.get(v.name, 1)) for v in m.variables}
    assert evaluate(back.objective, point) == evaluate(m.objective, point)
    assert len(back.constraints) == len(m.constraints)
    for a, b in zip(m.constraints, back.constraints):
        assert a.sense == b.sense and a.rhs == b.rhs
        assert evaluate(a.lhs, point) == evaluate(b.lhs, point)
    original = {v.name: (v.domain, v.lower, v.upper) for v in m.variables}
    assert all(original[v.name] == (v.domain, v.lower, v.upper) for v in back.variables)


def test_diagnostic_str():
    assert str(Diagnostic("c1", "oops")) == "c1: oops"
