"""Dense two-phase simplex with Bland's rule, plus depth-first branch-and-bound.

Sized for desk problems (tens of variables). Everything runs in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ir import MAXIMIZE, ScalarModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

FEAS_TOL = 1e-9
INT_TOL = 1e-6
NODE_LIMIT = 100_000


@dataclass
class SolveResult:
    status: str
    objective: float | None = None
    assignment: dict[str, float] | None = None
    nodes: int = 0
    pivots: int = 0
    dual_objective: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Std:
    """min c.x + c0  s.t.  A x (senses) b,  x >= 0, plus the map back to model variables."""

    A: np.ndarray
    b: np.ndarray
    senses: list[str]
    c: np.ndarray
    c0: float
    # model var k = offset[k] + sum(coef * std column)
    recover: list[tuple[float, list[tuple[int, float]]]]


def _standard_form(m: ScalarModel, bounds: list[tuple[float, float]]) -> _Std | None:
    names = m.var_names()
    index = {n: k for k, n in enumerate(names)}
    cols = 0
    recover: list[tuple[float, list[tuple[int, float]]]] = []
    extra_rows: list[tuple[int, float]] = []  # (column, upper) rows x' <= u
    for lo, hi in bounds:
        if lo > hi + FEAS_TOL:
            return None
        if math.isfinite(lo):
            recover.append((lo, [(cols, 1.0)]))
            if math.isfinite(hi):
                extra_rows.append((cols, hi - lo))
            cols += 1
        elif math.isfinite(hi):
            recover.append((hi, [(cols, -1.0)]))
            cols += 1
        else:
            recover.append((0.0, [(cols, 1.0), (cols + 1, -1.0)]))
            cols += 2

    sign = -1.0 if m.sense == MAXIMIZE else 1.0
    c = np.zeros(cols)
    c0 = sign * float(m.objective.constant)
    for name, coef in m.objective.terms:
        off, parts = recover[index[name]]
        c0 += sign * float(coef) * off
        for col, mult in parts:
            c[col] += sign * float(coef) * mult

    rows, rhs, senses = [], [], []
    for con in m.constraints:
        row = np.zeros(cols)
        b = float(con.rhs)
        for name, coef in con.lhs.terms:
            off, parts = recover[index[name]]
            b -= float(coef) * off
            for col, mult in parts:
                row[col] += float(coef) * mult
        rows.append(row)
        rhs.append(b)
        senses.append(con.sense)
    for col, ub in extra_rows:
        row = np.zeros(cols)
        row[col] = 1.0
        rows.append(row)
        rhs.append(ub)
        senses.append("<=")
    A = np.array(rows, dtype=float).reshape(len(rows), cols)
    b = np.array(rhs, dtype=float)
    # row scaling
    for i in range(A.shape[0]):
        scale = np.max(np.abs(A[i])) if cols else 0.0
        if scale > 0:
            A[i] /= scale
            b[i] /= scale
    return _Std(A, b, senses, c, c0, recover)


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int], limit: int):
        self.T = T
        self.basis = basis
        self.pivots = 0
        self.limit = limit

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        for i in range(T.shape[0]):
            if i != r and T[i, j] != 0.0:
                T[i] -= T[i, j] * T[r]
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed: int) -> str:
        T = self.T
        m = T.shape[0] - 1
        while True:
            cost = T[-1, :allowed]
            entering = next((j for j in range(allowed) if cost[j] < -FEAS_TOL), None)
            if entering is None:
                return OPTIMAL
            if self.pivots >= self.limit:
                return ITERATION_LIMIT
            col = T[:m, entering]
            best = None
            for i in range(m):
                if col[i] > FEAS_TOL:
                    ratio = T[i, -1] / col[i]
                    key = (ratio, self.basis[i])
                    if best is None or key[0] < best[0][0] - FEAS_TOL or (
                        abs(key[0] - best[0][0]) <= FEAS_TOL and key[1] < best[0][1]
                    ):
                        best = (key, i)
            if best is None:
                return UNBOUNDED
            self.pivot(best[1], entering)


def _solve_std(std: _Std, names: tuple[str, ...], pivot_limit: int | None) -> SolveResult:
    A, b, senses = std.A.copy(), std.b.copy(), list(std.senses)
    m, n = A.shape
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]
    n_slack = sum(1 for s in senses if s != "=")
    n_art = sum(1 for s in senses if s != "<=")
    total = n + n_slack + n_art
    limit = pivot_limit if pivot_limit is not None else 100 * (m + total)
    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = [0] * m
    s_col, a_col = n, n + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if s == ">=":
                T[i, s_col] = -1.0
                s_col += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            art_cols.append(a_col)
            a_col += 1
    # keep the unpermuted structural block for the dual recovery
    A_full = T[:m, :total].copy()
    tab = _Tableau(T, basis, limit)

    if art_cols:
        T[-1, art_cols] = 1.0
        for i, j in enumerate(basis):
            if j in art_cols:
                T[-1] -= T[i]
        status = tab.run(total)
        if status == ITERATION_LIMIT:
            return SolveResult(ITERATION_LIMIT, pivots=tab.pivots)
        if -T[-1, -1] > FEAS_TOL * max(1, m):
            return SolveResult(INFEASIBLE, pivots=tab.pivots)
        # drive artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if tab.basis[i] >= n + n_slack:
                j = next((j for j in range(n + n_slack) if abs(T[i, j]) > FEAS_TOL), None)
                if j is None:
                    continue
                tab.pivot(i, j)
            keep.append(i)
        if len(keep) < m:
            T = np.vstack([T[keep], T[-1:]])
            tab.T = T
            tab.basis = [tab.basis[i] for i in keep]
            A_full = A_full[keep]
            b = b[keep]
        T[:, n + n_slack : total] = 0.0
    allowed = n + n_slack

    T[-1] = 0.0
    T[-1, :n] = std.c
    for i, j in enumerate(tab.basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    status = tab.run(allowed)
    if status != OPTIMAL:
        return SolveResult(status, pivots=tab.pivots)

    x = np.zeros(total)
    for i, j in enumerate(tab.basis):
        x[j] = T[i, -1]
    z = float(std.c @ x[:n]) + std.c0

    dual = None
    cost_full = np.zeros(total)
    cost_full[:n] = std.c
    B = A_full[:, tab.basis]
    if B.shape[0]:
        try:
            y = np.linalg.solve(B.T, cost_full[tab.basis])
            dual = float(b @ y) + std.c0
        except np.linalg.LinAlgError:
            dual = None
    else:
        dual = std.c0

    assignment = {}
    for name, (off, parts) in zip(names, std.recover):
        assignment[name] = float(off + sum(mult * x[col] for col, mult in parts))
    return SolveResult(OPTIMAL, z, assignment, pivots=tab.pivots, dual_objective=dual)


def _bounds(m: ScalarModel) -> list[tuple[float, float]]:
    return [tuple(float(b) for b in v.effective_bounds()) for v in m.variables]


def _finish(m: ScalarModel, r: SolveResult) -> SolveResult:
    if r.status == OPTIMAL and m.sense == MAXIMIZE:
        r.objective = -r.objective
        if r.dual_objective is not None:
            r.dual_objective = -r.dual_objective
    return r


def solve_lp(m: ScalarModel, bounds: list[tuple[float, float]] | None = None,
             pivot_limit: int | None = None) -> SolveResult:
    """Solve the LP relaxation of ``m`` (integrality dropped, binary box kept)."""
    std = _standard_form(m, bounds if bounds is not None else _bounds(m))
    if std is None:
        return SolveResult(INFEASIBLE)
    return _finish(m, _solve_std(std, m.var_names(), pivot_limit))


def solve_milp(m: ScalarModel, node_limit: int = NODE_LIMIT) -> SolveResult:
    """Depth-first branch-and-bound on the most fractional integer variable."""
    names = m.var_names()
    integral = [v.domain in ("binary", "integer") for v in m.variables]
    root = _bounds(m)
    sign = -1.0 if m.sense == MAXIMIZE else 1.0
    stack = [root]
    incumbent: dict[str, float] | None = None
    best = math.inf  # internal minimization value
    nodes = pivots = 0
    while stack:
        if nodes >= node_limit:
            return SolveResult(ITERATION_LIMIT, nodes=nodes, pivots=pivots)
        bounds = stack.pop()
        nodes += 1
        r = solve_lp(m, bounds)
        pivots += r.pivots
        if r.status == INFEASIBLE:
            continue
        if r.status == UNBOUNDED:
            return SolveResult(UNBOUNDED, nodes=nodes, pivots=pivots)
        if r.status != OPTIMAL:
            return SolveResult(r.status, nodes=nodes, pivots=pivots)
        value = sign * r.objective
        if value >= best - FEAS_TOL * (1 + abs(best)):
            continue
        branch, frac_best = None, -1.0
        for k, name in enumerate(names):
            if not integral[k]:
                continue
            val = r.assignment[name]
            frac = val - math.floor(val)
            dist = min(frac, 1 - frac)
            if dist > INT_TOL and dist > frac_best + 1e-12:
                branch, frac_best = k, dist
        if branch is None:
            best, incumbent = value, r.assignment
            continue
        val = r.assignment[names[branch]]
        lo, hi = bounds[branch]
        down = list(bounds)
        down[branch] = (lo, math.floor(val))
        up = list(bounds)
        up[branch] = (math.ceil(val), hi)
        stack.append(up)
        stack.append(down)
    if incumbent is None:
        return SolveResult(INFEASIBLE, nodes=nodes, pivots=pivots)
    assignment = {
        n: (float(round(incumbent[n])) if integral[k] else incumbent[n]) for k, n in enumerate(names)
    }
    objective = float(m.objective.constant) + sum(
        float(c) * assignment[n] for n, c in m.objective.terms
    )
    return SolveResult(OPTIMAL, objective, assignment, nodes=nodes, pivots=pivots)


def evaluate_objective(m: ScalarModel, assignment: dict[str, float]) -> float:
    return float(m.objective.constant) + sum(float(c) * assignment.get(n, 0.0) for n, c in m.objective.terms)


def max_violation(m: ScalarModel, assignment: dict[str, float]) -> float:
    worst = 0.0
    for con in m.constraints:
        lhs = sum(float(c) * assignment.get(n, 0.0) for n, c in con.lhs.terms)
        gap = lhs - float(con.rhs)
        if con.sense == "<=":
            worst = max(worst, gap)
        elif con.sense == ">=":
            worst = max(worst, -gap)
        else:
            worst = max(worst, abs(gap))
    return worst
