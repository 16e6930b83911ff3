from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import strategies as st

from opteval.benchsuite import PROBLEM_IDS, load_case
from opteval.ir import LinearExpr, ScalarConstraint, ScalarModel, ScalarVar


def D(x) -> Decimal:
    return Decimal(str(x))


def lin(**coefs) -> LinearExpr:
    return LinearExpr.build({k: D(v) for k, v in coefs.items()})


def model(sense, objective: dict, rows=(), variables=None) -> ScalarModel:
    """Small scalar model builder; rows are (lhs dict, sense, rhs)."""
    names = list(objective)
    for lhs, _, _ in rows:
        names.extend(n for n in lhs if n not in names)
    if variables is None:
        variables = tuple(ScalarVar(n) for n in dict.fromkeys(names))
    cons = tuple(
        ScalarConstraint(f"c{k}", LinearExpr.build({n: D(v) for n, v in lhs.items()}), s, D(rhs))
        for k, (lhs, s, rhs) in enumerate(rows)
    )
    return ScalarModel("m", sense, tuple(variables), LinearExpr.build({k: D(v) for k, v in objective.items()}), cons)


@pytest.fixture(scope="session")
def benchmarks() -> dict[str, ScalarModel]:
    return {p: load_case(p).model() for p in PROBLEM_IDS}


small_int = st.integers(min_value=-9, max_value=9)


@st.composite
def scalar_models(draw, max_vars: int = 5, max_rows: int = 4, domains=("continuous", "binary", "integer"),
                  min_terms: int = 1):
    n = draw(st.integers(1, max_vars))
    names = [f"x{k + 1}" for k in range(n)]
    variables = []
    for name in names:
        domain = draw(st.sampled_from(domains))
        lower = upper = None
        if domain != "binary" and draw(st.booleans()):
            lower = Decimal(draw(st.integers(0, 3)))
            if draw(st.booleans()):
                upper = lower + Decimal(draw(st.integers(1, 5)))
        variables.append(ScalarVar(name, domain, lower, upper))
    objective = LinearExpr.build({v: Decimal(draw(small_int)) for v in names})
    rows = []
    for k in range(draw(st.integers(0, max_rows))):
        coefs = {v: Decimal(draw(small_int)) for v in names if draw(st.booleans())}
        if sum(1 for c in coefs.values() if c) < min_terms:
            continue
        sense = draw(st.sampled_from(["<=", ">=", "="]))
        rows.append(ScalarConstraint(f"c{k + 1}", LinearExpr.build(coefs), sense, Decimal(draw(st.integers(-5, 20)))))
    sense = draw(st.sampled_from(["min", "max"]))
    return ScalarModel("h", sense, tuple(variables), objective, tuple(rows))
