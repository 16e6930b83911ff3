"""Constraint and variable matching between a ground-truth and a candidate model.

Counting happens at family level. A ground-truth family is either a named
constraint family (``availability[1]``, ``availability[2]`` ... share
``availability``) or a bound family keyed by variable role and bound kind
(every ``x_i >= 0`` together). A family is a true positive when all of its
rows found a partner. Candidate rows are grouped the same way, so writing
three availability rows that all match still counts as one unit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal

from .ir import ScalarConstraint, ScalarModel, variable_role

EXACT_TOL = 1e-9
TAU = 0.8
FUNCTIONAL = "functional"
BOUND = "bound"


class DegenerateConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    """A constraint or bound declaration over named columns, before normalization."""

    name: str
    coefs: dict[str, float]
    sense: str  # "<=", ">=", "=", "binary", "integer"
    rhs: float
    kind: str = FUNCTIONAL
    key: tuple = ()


@dataclass(frozen=True)
class CanonicalConstraint:
    name: str
    sense: str
    coefs: dict[str, float]
    rhs: float
    kind: str
    key: tuple

    def value(self, point: dict[str, float]) -> float:
        """The residual ``lhs(x) - rhs`` of the normalized row."""
        return sum(c * point.get(n, 0.0) for n, c in self.coefs.items()) - self.rhs


def canonicalize(row: Row) -> CanonicalConstraint:
    coefs = {n: float(c) for n, c in row.coefs.items() if c != 0}
    if not coefs:
        raise DegenerateConstraintError(f"constraint {row.name!r} has no nonzero coefficient")
    if row.sense in ("binary", "integer"):
        return CanonicalConstraint(row.name, row.sense, coefs, 0.0, row.kind, row.key)
    rhs = float(row.rhs)
    sense = row.sense
    if sense == ">=":
        coefs = {n: -c for n, c in coefs.items()}
        rhs = -rhs
        sense = "<="
    scale = max(abs(c) for c in coefs.values())
    coefs = {n: c / scale for n, c in coefs.items()}
    rhs /= scale
    if sense == "=":
        first = min(coefs)
        if coefs[first] < 0:
            coefs = {n: -c for n, c in coefs.items()}
            rhs = -rhs
    return CanonicalConstraint(row.name, sense, dict(sorted(coefs.items())), rhs, row.kind, row.key)


_NORM = re.compile(r"[_{}\[\],\s]")


def normalize_name(name: str) -> str:
    return _NORM.sub("", name.casefold())


@dataclass(frozen=True)
class ConstraintPair:
    gt: str
    cand: str
    tier: str  # "exact" | "similar"
    score: float


@dataclass
class MatchResult:
    pairs: list[ConstraintPair]
    cons_tp: int
    cons_fp: int
    cons_fn: int
    var_pairs: list[tuple[str, str]]
    var_tp: int
    var_fp: int
    var_fn: int
    gt_rows: dict[str, CanonicalConstraint] = field(default_factory=dict)
    cand_rows: dict[str, CanonicalConstraint] = field(default_factory=dict)
    column_of: dict[str, str] = field(default_factory=dict)
    gt_families: list = field(default_factory=list)
    cand_units: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "constraints": {"tp": self.cons_tp, "fp": self.cons_fp, "fn": self.cons_fn},
            "variables": {"tp": self.var_tp, "fp": self.var_fp, "fn": self.var_fn},
            "pairs": [
                {"gt": p.gt, "cand": p.cand, "tier": p.tier, "score": round(p.score, 12)}
                for p in self.pairs
            ],
            "variable_pairs": [list(p) for p in self.var_pairs],
        }


@dataclass
class VariableMatch:
    pairs: list[tuple[str, str]]
    tp: int
    fp: int
    fn: int
    column_of: dict[str, str]


def _family_counts(gt_groups: dict, cand_units: list, matched_gt: set) -> tuple[int, int, int, list]:
    tp_families = [g for g, members in gt_groups.items() if members and members <= matched_gt]
    tp = len(tp_families)
    units = list(dict.fromkeys(cand_units))
    return tp, len(units) - tp, len(gt_groups) - tp, units


def match_variables(gt: ScalarModel, cand: ScalarModel) -> VariableMatch:
    """Pair variables by normalized name, then by a unique nonzero objective coefficient."""
    free = list(cand.var_names())
    pairs: dict[str, str] = {}
    by_norm: dict[str, list[str]] = {}
    for n in free:
        by_norm.setdefault(normalize_name(n), []).append(n)
    for v in gt.var_names():
        bucket = by_norm.get(normalize_name(v))
        if bucket:
            pairs[v] = bucket.pop(0)
    used = set(pairs.values())

    gt_left = [v for v in gt.var_names() if v not in pairs]
    cand_left = [v for v in cand.var_names() if v not in used]

    def signatures(model: ScalarModel, names: list[str]) -> dict[Decimal, list[str]]:
        sig: dict[Decimal, list[str]] = {}
        for n in names:
            c = model.objective.coef(n)
            if c != 0:
                sig.setdefault(c, []).append(n)
        return sig

    gsig, csig = signatures(gt, gt_left), signatures(cand, cand_left)
    for coef, gnames in gsig.items():
        cnames = csig.get(coef, [])
        if len(gnames) == 1 and len(cnames) == 1:
            pairs[gnames[0]] = cnames[0]

    ordered = [(g, pairs[g]) for g in gt.var_names() if g in pairs]
    partner = {c: g for g, c in ordered}
    column_of = {c: partner.get(c, f"~{c}") for c in cand.var_names()}

    roles: dict[str, set[str]] = {}
    for v in gt.variables:
        roles.setdefault(v.role, set()).add(v.name)
    paired_gt = set(partner.values())
    units = [
        ("gt", variable_role(partner[c])) if c in partner else ("own", variable_role(c))
        for c in cand.var_names()
    ]
    tp, fp, fn, _ = _family_counts(roles, units, paired_gt)
    return VariableMatch(ordered, tp, fp, fn, column_of)


def model_rows(m: ScalarModel, column_of: dict[str, str] | None = None) -> list[Row]:
    """Functional rows first, then declared bounds and integrality in variable order."""
    col = (lambda n: column_of.get(n, n)) if column_of else (lambda n: n)
    rows: list[Row] = []
    for c in m.constraints:
        coefs = {col(n): float(v) for n, v in c.lhs.terms}
        if c.family is not None:
            key = ("family", c.family)
        else:
            stems = tuple(sorted({variable_role(n) for n, _ in c.lhs.terms}))
            key = ("row", c.sense, stems)
        rows.append(Row(c.name, coefs, c.sense, float(c.rhs), FUNCTIONAL, key))
    for v in m.variables:
        role = v.role
        if v.domain in ("binary", "integer"):
            rows.append(Row(f"{v.domain}({v.name})", {col(v.name): 1.0}, v.domain, 0.0, BOUND,
                            ("bound", role, v.domain)))
        if v.lower is not None and v.lower.is_finite():
            rows.append(Row(f"lb({v.name})", {col(v.name): 1.0}, ">=", float(v.lower), BOUND,
                            ("bound", role, "lower")))
        if v.upper is not None and v.upper.is_finite():
            rows.append(Row(f"ub({v.name})", {col(v.name): 1.0}, "<=", float(v.upper), BOUND,
                            ("bound", role, "upper")))
    return rows


def _exact(a: CanonicalConstraint, b: CanonicalConstraint) -> bool:
    if a.sense != b.sense or a.coefs.keys() != b.coefs.keys():
        return False
    if abs(a.rhs - b.rhs) > EXACT_TOL:
        return False
    return all(abs(a.coefs[k] - b.coefs[k]) <= EXACT_TOL for k in a.coefs)


def similarity(a: CanonicalConstraint, b: CanonicalConstraint) -> float:
    """0.5 * Jaccard of supports + 0.5 * cosine of coefficient vectors."""
    sa, sb = set(a.coefs), set(b.coefs)
    jac = len(sa & sb) / len(sa | sb)
    dot = sum(a.coefs[k] * b.coefs[k] for k in sa & sb)
    na = math.sqrt(sum(v * v for v in a.coefs.values()))
    nb = math.sqrt(sum(v * v for v in b.coefs.values()))
    cos = dot / (na * nb) if na and nb else 0.0
    return 0.5 * jac + 0.5 * cos


def match_constraints(gt_rows: list[CanonicalConstraint], cand_rows: list[CanonicalConstraint],
                      tau: float = TAU) -> list[ConstraintPair]:
    """Stage 1 exact (same-kind partners first), then greedy similarity above ``tau``."""
    gt_used: set[int] = set()
    cand_used: set[int] = set()
    found: list[tuple[int, int, str, float]] = []
    for same_kind in (True, False):
        for gi, g in enumerate(gt_rows):
            if gi in gt_used:
                continue
            for ci, c in enumerate(cand_rows):
                if ci in cand_used or (same_kind and g.kind != c.kind):
                    continue
                if _exact(g, c):
                    gt_used.add(gi)
                    cand_used.add(ci)
                    found.append((gi, ci, "exact", 1.0))
                    break
    scored = []
    for gi, g in enumerate(gt_rows):
        if gi in gt_used:
            continue
        for ci, c in enumerate(cand_rows):
            if ci in cand_used or g.sense != c.sense:
                continue
            s = similarity(g, c)
            if s >= tau:
                scored.append((-s, gi, ci))
    for neg, gi, ci in sorted(scored):
        if gi in gt_used or ci in cand_used:
            continue
        gt_used.add(gi)
        cand_used.add(ci)
        found.append((gi, ci, "similar", -neg))
    found.sort(key=lambda t: (t[0], t[1]))
    return [ConstraintPair(gt_rows[g].name, cand_rows[c].name, tier, s) for g, c, tier, s in found]


def match(gt: ScalarModel, cand: ScalarModel, tau: float = TAU) -> MatchResult:
    """Full comparison: variable alignment, canonical rows, pairing and family counts."""
    vm = match_variables(gt, cand)
    gt_canon = [canonicalize(r) for r in model_rows(gt)]
    cand_canon = [canonicalize(r) for r in model_rows(cand, vm.column_of)]
    pairs = match_constraints(gt_canon, cand_canon, tau)

    gt_by_name = {r.name: r for r in gt_canon}
    groups: dict[tuple, set[str]] = {}
    for r in gt_canon:
        groups.setdefault(r.key, set()).add(r.name)
    partner = {p.cand: p.gt for p in pairs}
    units = [
        ("gt", gt_by_name[partner[r.name]].key) if r.name in partner else ("own", r.key)
        for r in cand_canon
    ]
    tp, fp, fn, unit_list = _family_counts(groups, units, {p.gt for p in pairs})
    return MatchResult(
        pairs=pairs,
        cons_tp=tp,
        cons_fp=fp,
        cons_fn=fn,
        var_pairs=vm.pairs,
        var_tp=vm.tp,
        var_fp=vm.fp,
        var_fn=vm.fn,
        gt_rows=gt_by_name,
        cand_rows={r.name: r for r in cand_canon},
        column_of=vm.column_of,
        gt_families=list(groups),
        cand_units=unit_list,
    )


def scalar_row(c: ScalarConstraint) -> Row:
    return Row(c.name, {n: float(v) for n, v in c.lhs.terms}, c.sense, float(c.rhs))
