"""Formulation data model at the symbolic (set-indexed) and scalar (grounded) levels.

Numbers are held as :class:`decimal.Decimal` so that parsing and emitting are
bit-exact; numeric code (solver, metrics) converts to ``float`` at its edge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator, Union

MINIMIZE = "min"
MAXIMIZE = "max"
SENSES = ("<=", ">=", "=")
DOMAINS = ("binary", "integer", "continuous")
HEADER = "OFIR/1"

INF = Decimal("Infinity")


def fmt_decimal(value: Decimal) -> str:
    """Canonical base-10 rendering: no exponent, no trailing zeros."""
    if value.is_infinite():
        return "inf" if value > 0 else "-inf"
    if value == 0:
        return "0"
    text = format(value.normalize(), "f")
    return text


# ---------------------------------------------------------------------------
# Symbolic expressions


@dataclass(frozen=True)
class Const:
    value: Decimal


@dataclass(frozen=True)
class ParamRef:
    name: str
    indices: tuple[str, ...] = ()


@dataclass(frozen=True)
class VarRef:
    name: str
    indices: tuple[str, ...] = ()


@dataclass(frozen=True)
class Neg:
    body: "Expr"


@dataclass(frozen=True)
class Add:
    terms: tuple["Expr", ...]


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Condition:
    """Binder comparison used by quantifiers: ``i != j`` or ``i < j`` (set order)."""

    op: str
    left: str
    right: str

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Sum:
    index: str
    set_name: str
    body: "Expr"
    condition: Condition | None = None


Expr = Union[Const, ParamRef, VarRef, Neg, Add, Mul, Sum]


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Neg):
        yield from walk(expr.body)
    elif isinstance(expr, Add):
        for term in expr.terms:
            yield from walk(term)
    elif isinstance(expr, Mul):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Sum):
        yield from walk(expr.body)


def has_variable(expr: Expr) -> bool:
    return any(isinstance(node, VarRef) for node in walk(expr))


# Operator precedence for rendering: sums/additions bind loosest.
_PREC_ADD = 1
_PREC_MUL = 2
_PREC_ATOM = 3


def _prec(expr: Expr) -> int:
    if isinstance(expr, Add):
        return _PREC_ADD
    if isinstance(expr, (Mul, Neg)):
        return _PREC_MUL
    return _PREC_ATOM


def render_expr(expr: Expr) -> str:
    if isinstance(expr, Const):
        return fmt_decimal(expr.value)
    if isinstance(expr, (ParamRef, VarRef)):
        if expr.indices:
            return f"{expr.name}[{','.join(expr.indices)}]"
        return expr.name
    if isinstance(expr, Neg):
        inner = render_expr(expr.body)
        if _prec(expr.body) < _PREC_MUL or isinstance(expr.body, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, Add):
        parts: list[str] = []
        for pos, term in enumerate(expr.terms):
            if isinstance(term, Neg) and pos > 0:
                body = render_expr(term.body)
                if _prec(term.body) < _PREC_MUL or isinstance(term.body, Neg):
                    body = f"({body})"
                parts.append(f"- {body}")
            else:
                text = render_expr(term)
                if isinstance(term, Add):
                    text = f"({text})"
                parts.append(text if pos == 0 else f"+ {text}")
        return " ".join(parts)
    if isinstance(expr, Mul):
        left = render_expr(expr.left)
        right = render_expr(expr.right)
        if _prec(expr.left) < _PREC_MUL:
            left = f"({left})"
        # products parse left-associatively; keep right-nested groups explicit
        if isinstance(expr.right, (Add, Mul, Neg)):
            right = f"({right})"
        return f"{left} * {right}"
    if isinstance(expr, Sum):
        cond = f" | {expr.condition}" if expr.condition else ""
        return f"sum({expr.index} in {expr.set_name}{cond}, {render_expr(expr.body)})"
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Symbolic formulation


@dataclass(frozen=True)
class SetDecl:
    name: str
    description: str = ""


@dataclass(frozen=True)
class ParamDecl:
    name: str
    sets: tuple[str, ...] = ()
    description: str = ""


@dataclass(frozen=True)
class VarDecl:
    name: str
    sets: tuple[str, ...] = ()
    domain: str = "continuous"
    lower: Expr | None = None
    upper: Expr | None = None
    binders: tuple[str, ...] = ()
    condition: Condition | None = None
    description: str = ""


@dataclass(frozen=True)
class Quantifier:
    index: str
    set_name: str


@dataclass(frozen=True)
class SymbolicConstraint:
    name: str
    lhs: Expr
    sense: str
    rhs: Expr
    quantifiers: tuple[Quantifier, ...] = ()
    condition: Condition | None = None
    description: str = ""


@dataclass(frozen=True)
class SymbolicFormulation:
    name: str
    sense: str
    objective: Expr | None
    sets: tuple[SetDecl, ...] = ()
    parameters: tuple[ParamDecl, ...] = ()
    variables: tuple[VarDecl, ...] = ()
    constraints: tuple[SymbolicConstraint, ...] = ()

    def param(self, name: str) -> ParamDecl | None:
        return next((p for p in self.parameters if p.name == name), None)

    def var(self, name: str) -> VarDecl | None:
        return next((v for v in self.variables if v.name == name), None)


ParamTable = Union[Decimal, dict[tuple[str, ...], Decimal], None]


@dataclass(frozen=True)
class DataInstance:
    """Concrete set elements and parameter tables for one problem instance.

    A table of ``None`` marks a parameter left for the grounder to derive
    (only the landing big-M is derivable).
    """

    problem: str
    sets: dict[str, tuple[str, ...]] = field(default_factory=dict)
    params: dict[str, ParamTable] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Scalar model


@dataclass(frozen=True)
class LinearExpr:
    """``constant + sum(coef * var)``; terms keep first-appearance order, no zeros."""

    terms: tuple[tuple[str, Decimal], ...] = ()
    constant: Decimal = Decimal(0)

    @classmethod
    def build(cls, coefs: dict[str, Decimal], constant: Decimal = Decimal(0)) -> "LinearExpr":
        return cls(tuple((k, v) for k, v in coefs.items() if v != 0), constant)

    def coef(self, name: str) -> Decimal:
        for key, value in self.terms:
            if key == name:
                return value
        return Decimal(0)

    def as_dict(self) -> dict[str, Decimal]:
        return dict(self.terms)

    def variables(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.terms)


@dataclass(frozen=True)
class ScalarVar:
    """A grounded variable.

    ``lower``/``upper`` are ``None`` when no bound was declared; solvers then
    apply the LP-file convention (lower 0, upper +inf). Binary variables carry
    implied bounds [0, 1] regardless.
    """

    name: str
    domain: str = "continuous"
    lower: Decimal | None = None
    upper: Decimal | None = None

    @property
    def role(self) -> str:
        return variable_role(self.name)

    def effective_bounds(self) -> tuple[Decimal, Decimal]:
        if self.domain == "binary":
            lo = Decimal(0) if self.lower is None else max(self.lower, Decimal(0))
            hi = Decimal(1) if self.upper is None else min(self.upper, Decimal(1))
            return lo, hi
        lo = Decimal(0) if self.lower is None else self.lower
        hi = INF if self.upper is None else self.upper
        return lo, hi


@dataclass(frozen=True)
class ScalarConstraint:
    name: str
    lhs: LinearExpr
    sense: str
    rhs: Decimal

    @property
    def family(self) -> str | None:
        """Source family for grounded rows named ``family[labels]``."""
        if "[" in self.name:
            return self.name.split("[", 1)[0]
        return None


@dataclass(frozen=True)
class ScalarModel:
    name: str
    sense: str
    variables: tuple[ScalarVar, ...]
    objective: LinearExpr
    constraints: tuple[ScalarConstraint, ...] = ()

    def var(self, name: str) -> ScalarVar | None:
        return next((v for v in self.variables if v.name == name), None)

    def var_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)


_ROLE_SPLIT = re.compile(r"[_\[{\d]")


def variable_role(name: str) -> str:
    """Indexed-family stem of a scalar variable name: ``x_1_2`` and ``x12`` -> ``x``."""
    head = _ROLE_SPLIT.split(name, 1)[0]
    return head or name


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.element}: {self.message}"


def _nonlinear_products(expr: Expr) -> Iterator[Mul]:
    for node in walk(expr):
        if isinstance(node, Mul) and has_variable(node.left) and has_variable(node.right):
            yield node


def validate(f: SymbolicFormulation) -> list[Diagnostic]:
    """Check the structural invariants of a symbolic formulation.

    Returns an empty list iff every referenced symbol is declared, quantifier
    indices are unique per constraint, there is exactly one objective and all
    expressions are linear in the variables.
    """
    diags: list[Diagnostic] = []
    set_names = {s.name for s in f.sets}
    params = {p.name for p in f.parameters}
    variables = {v.name for v in f.variables}

    seen: set[str] = set()
    for decl in (*f.sets, *f.parameters, *f.variables):
        if decl.name in seen:
            diags.append(Diagnostic(decl.name, "duplicate declaration"))
        seen.add(decl.name)

    for p in f.parameters:
        for s in p.sets:
            if s not in set_names:
                diags.append(Diagnostic(p.name, f"undeclared set {s!r}"))
    for v in f.variables:
        if v.domain not in DOMAINS:
            diags.append(Diagnostic(v.name, f"unknown domain {v.domain!r}"))
        for s in v.sets:
            if s not in set_names:
                diags.append(Diagnostic(v.name, f"undeclared set {s!r}"))
        for bound in (v.lower, v.upper):
            if bound is not None:
                diags.extend(_check_refs(v.name, bound, set_names, params, variables))
                if has_variable(bound):
                    diags.append(Diagnostic(v.name, "bound expression references a variable"))

    if f.objective is None:
        diags.append(Diagnostic("objective", "missing objective"))
    else:
        diags.extend(_check_refs("objective", f.objective, set_names, params, variables))
        for _ in _nonlinear_products(f.objective):
            diags.append(Diagnostic("objective", "nonlinear product of variables"))

    for c in f.constraints:
        names = [q.index for q in c.quantifiers]
        if len(names) != len(set(names)):
            diags.append(Diagnostic(c.name, "quantifier index names are not unique"))
        for q in c.quantifiers:
            if q.set_name not in set_names:
                diags.append(Diagnostic(c.name, f"undeclared set {q.set_name!r}"))
        if c.sense not in SENSES:
            diags.append(Diagnostic(c.name, f"unknown sense {c.sense!r}"))
        for side in (c.lhs, c.rhs):
            diags.extend(_check_refs(c.name, side, set_names, params, variables))
            for _ in _nonlinear_products(side):
                diags.append(Diagnostic(c.name, "nonlinear product of variables"))
    return diags


def _check_refs(element, expr, set_names, params, variables) -> list[Diagnostic]:
    out = []
    for node in walk(expr):
        if isinstance(node, VarRef) and node.name not in variables:
            out.append(Diagnostic(element, f"undeclared symbol {node.name!r}"))
        elif isinstance(node, ParamRef) and node.name not in params:
            out.append(Diagnostic(element, f"undeclared symbol {node.name!r}"))
        elif isinstance(node, Sum) and node.set_name not in set_names:
            out.append(Diagnostic(element, f"undeclared set {node.set_name!r}"))
    return out


# ---------------------------------------------------------------------------
# Emit


def _quote(text: str) -> str:
    return f' "{text}"' if text else ""


def _render_linear(expr: LinearExpr) -> str:
    parts: list[str] = []
    for name, coef in expr.terms:
        mag = abs(coef)
        term = name if mag == 1 else f"{fmt_decimal(mag)} {name}"
        if not parts:
            parts.append(term if coef > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if coef > 0 else f"- {term}")
    if expr.constant != 0 or not parts:
        c = expr.constant
        if not parts:
            parts.append(fmt_decimal(c))
        else:
            parts.append(f"+ {fmt_decimal(c)}" if c > 0 else f"- {fmt_decimal(-c)}")
    return " ".join(parts)


def _render_bounds(lower: str | None, upper: str | None) -> str:
    if lower is None and upper is None:
        return ""
    return f" [{lower or ''}, {upper or ''}]"


def emit_scalar(m: ScalarModel) -> str:
    lines = [HEADER, f"PROBLEM {m.name}"]
    for v in m.variables:
        lo = None if v.lower is None else fmt_decimal(v.lower)
        hi = None if v.upper is None else fmt_decimal(v.upper)
        lines.append(f"VAR {v.name} {v.domain}{_render_bounds(lo, hi)}")
    lines.append(f"OBJ {m.sense} {_render_linear(m.objective)}")
    for c in m.constraints:
        lines.append(f"CON {c.name}: {_render_linear(c.lhs)} {c.sense} {fmt_decimal(c.rhs)}")
    return "\n".join(lines) + "\n"


def _render_table(decl: ParamDecl, table: ParamTable, sets: dict[str, tuple[str, ...]]) -> str:
    if table is None:
        return "auto"
    if isinstance(table, Decimal):
        return fmt_decimal(table)

    def nest(depth: int, prefix: tuple[str, ...]) -> str:
        labels = sets[decl.sets[depth]]
        if depth == len(decl.sets) - 1:
            return "[" + ", ".join(fmt_decimal(table[prefix + (lab,)]) for lab in labels) + "]"
        return "[" + ", ".join(nest(depth + 1, prefix + (lab,)) for lab in labels) + "]"

    return nest(0, ())


def emit_symbolic(f: SymbolicFormulation, data: DataInstance | None = None) -> str:
    lines = [HEADER, f"PROBLEM {f.name}"]
    for s in f.sets:
        if data is not None and s.name in data.sets:
            labels = ", ".join(data.sets[s.name])
            lines.append(f"SET {s.name} = {{{labels}}}{_quote(s.description)}")
        else:
            lines.append(f"SET {s.name}{_quote(s.description)}")
    for p in f.parameters:
        head = f"PARAM {p.name}" + (f"[{','.join(p.sets)}]" if p.sets else "")
        if data is not None and p.name in data.params:
            head += f" = {_render_table(p, data.params[p.name], data.sets)}"
        lines.append(head + _quote(p.description))
    for v in f.variables:
        if v.binders:
            idx = ", ".join(f"{b} in {s}" for b, s in zip(v.binders, v.sets))
            if v.condition:
                idx += f" | {v.condition}"
            head = f"VAR {v.name}[{idx}]"
        else:
            head = f"VAR {v.name}" + (f"[{','.join(v.sets)}]" if v.sets else "")
        lo = None if v.lower is None else render_expr(v.lower)
        hi = None if v.upper is None else render_expr(v.upper)
        lines.append(f"{head} {v.domain}{_render_bounds(lo, hi)}{_quote(v.description)}")
    obj = "0" if f.objective is None else render_expr(f.objective)
    lines.append(f"OBJ {f.sense} {obj}")
    for c in f.constraints:
        head = f"CON {c.name}"
        if c.quantifiers:
            head += " forall " + ", ".join(f"{q.index} in {q.set_name}" for q in c.quantifiers)
            if c.condition:
                head += f" | {c.condition}"
        lines.append(
            f"{head}: {render_expr(c.lhs)} {c.sense} {render_expr(c.rhs)}{_quote(c.description)}"
        )
    return "\n".join(lines) + "\n"


def emit(model: ScalarModel | SymbolicFormulation, data: DataInstance | None = None) -> str:
    """Deterministic OFIR rendering of a scalar model or a symbolic formulation."""
    if isinstance(model, ScalarModel):
        return emit_scalar(model)
    return emit_symbolic(model, data)
