"""Expand set-indexed formulations into flat scalar models."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from decimal import Decimal

from .ir import (
    Add,
    Condition,
    Const,
    DataInstance,
    Expr,
    LinearExpr,
    Mul,
    Neg,
    ParamRef,
    ScalarConstraint,
    ScalarModel,
    ScalarVar,
    Sum,
    SymbolicFormulation,
    VarRef,
)


class GroundingError(ValueError):
    pass


@dataclass
class GroundingReport:
    model: ScalarModel
    expansion: dict[str, list[str]] = field(default_factory=dict)
    variables: dict[str, list[str]] = field(default_factory=dict)


def scalar_name(name: str, labels: tuple[str, ...]) -> str:
    return "_".join((name, *labels)) if labels else name


def derive_big_m(d: DataInstance) -> Decimal:
    """(max L - min E) + max S for a landing-style instance."""
    try:
        early, late, sep = d.params["E"], d.params["L"], d.params["S"]
    except KeyError as exc:
        raise GroundingError(f"cannot derive big-M: parameter {exc.args[0]!r} missing") from None
    if not all(isinstance(t, dict) for t in (early, late, sep)):
        raise GroundingError("cannot derive big-M: E, L and S must be tables")
    return (max(late.values()) - min(early.values())) + max(sep.values())


class _Lin:
    __slots__ = ("coefs", "const")

    def __init__(self, coefs: dict[str, Decimal] | None = None, const: Decimal = Decimal(0)):
        self.coefs = coefs or {}
        self.const = const

    def plus(self, other: "_Lin", sign: int = 1) -> "_Lin":
        coefs = dict(self.coefs)
        for k, v in other.coefs.items():
            coefs[k] = coefs.get(k, Decimal(0)) + sign * v
        return _Lin(coefs, self.const + sign * other.const)

    def times(self, k: Decimal) -> "_Lin":
        return _Lin({n: v * k for n, v in self.coefs.items()}, self.const * k)

    def is_const(self) -> bool:
        return all(v == 0 for v in self.coefs.values())


@dataclass(frozen=True)
class _Binding:
    label: str
    set_name: str


class _Grounder:
    def __init__(self, f: SymbolicFormulation, d: DataInstance):
        self.f = f
        self.d = d
        self.params = dict(d.params)
        for p in f.parameters:
            if p.name not in self.params:
                raise GroundingError(f"missing parameter {p.name!r}")
            if self.params[p.name] is None:
                if p.name != "M":
                    raise GroundingError(f"parameter {p.name!r} has no data")
                self.params[p.name] = derive_big_m(d)
        self.var_names: set[str] = set()

    def labels(self, set_name: str) -> tuple[str, ...]:
        if set_name not in self.d.sets:
            raise GroundingError(f"set {set_name!r} has no elements in the data instance")
        return self.d.sets[set_name]

    def check(self, cond: Condition | None, env: dict[str, _Binding]) -> bool:
        if cond is None:
            return True
        a, b = env[cond.left], env[cond.right]
        if cond.op == "!=":
            return a.label != b.label
        pa = self.labels(a.set_name).index(a.label)
        pb = self.labels(b.set_name).index(b.label)
        return pa < pb

    def resolve(self, indices: tuple[str, ...], env: dict[str, _Binding]) -> tuple[str, ...]:
        return tuple(env[i].label if i in env else i for i in indices)

    def expr(self, e: Expr, env: dict[str, _Binding]) -> _Lin:
        if isinstance(e, Const):
            return _Lin(const=e.value)
        if isinstance(e, ParamRef):
            table = self.params.get(e.name)
            if table is None:
                raise GroundingError(f"unknown parameter {e.name!r}")
            if isinstance(table, Decimal):
                value = table
            else:
                key = self.resolve(e.indices, env)
                if key not in table:
                    raise GroundingError(f"missing entry {e.name}[{','.join(key)}]")
                value = table[key]
            if not value.is_finite():
                raise GroundingError(f"non-finite value for {e.name}")
            return _Lin(const=value)
        if isinstance(e, VarRef):
            name = scalar_name(e.name, self.resolve(e.indices, env))
            if name not in self.var_names:
                raise GroundingError(f"index out of range: {name}")
            return _Lin({name: Decimal(1)})
        if isinstance(e, Neg):
            return self.expr(e.body, env).times(Decimal(-1))
        if isinstance(e, Add):
            acc = _Lin()
            for t in e.terms:
                acc = acc.plus(self.expr(t, env))
            return acc
        if isinstance(e, Mul):
            left, right = self.expr(e.left, env), self.expr(e.right, env)
            if left.is_const():
                return right.times(left.const)
            if right.is_const():
                return left.times(right.const)
            raise GroundingError("nonlinear product of variables")
        if isinstance(e, Sum):
            acc = _Lin()
            for lab in self.labels(e.set_name):
                inner = {**env, e.index: _Binding(lab, e.set_name)}
                if self.check(e.condition, inner):
                    acc = acc.plus(self.expr(e.body, inner))
            return acc
        raise GroundingError(f"unsupported expression node {e!r}")

    def envs(self, binders, sets, cond):
        pools = [[_Binding(lab, s) for lab in self.labels(s)] for s in sets]
        for combo in itertools.product(*pools):
            env = dict(zip(binders, combo))
            if self.check(cond, env):
                yield env

    def bound(self, e: Expr | None, env) -> Decimal | None:
        if e is None:
            return None
        if isinstance(e, Const) and e.value.is_infinite():
            return e.value
        if isinstance(e, Neg) and isinstance(e.body, Const) and e.body.value.is_infinite():
            return -e.body.value
        value = self.expr(e, env)
        if not value.is_const():
            raise GroundingError("bound expression references a variable")
        return value.const

    def run(self) -> GroundingReport:
        variables: list[ScalarVar] = []
        var_map: dict[str, list[str]] = {}
        for v in self.f.variables:
            binders = v.binders or tuple(f"_{k}" for k in range(len(v.sets)))
            names = []
            for env in self.envs(binders, v.sets, v.condition):
                labels = tuple(env[b].label for b in binders)
                name = scalar_name(v.name, labels)
                lower, upper = self.bound(v.lower, env), self.bound(v.upper, env)
                if lower is not None and upper is not None and lower > upper:
                    raise GroundingError(f"empty bound interval for {name}")
                variables.append(ScalarVar(name, v.domain, lower, upper))
                self.var_names.add(name)
                names.append(name)
            var_map[v.name] = names

        if self.f.objective is None:
            raise GroundingError("missing objective")
        obj = self.expr(self.f.objective, {})
        objective = LinearExpr.build(obj.coefs, obj.const)

        constraints: list[ScalarConstraint] = []
        expansion: dict[str, list[str]] = {}
        for c in self.f.constraints:
            binders = tuple(q.index for q in c.quantifiers)
            sets = tuple(q.set_name for q in c.quantifiers)
            names = []
            for env in self.envs(binders, sets, c.condition):
                labels = tuple(env[b].label for b in binders)
                name = f"{c.name}[{','.join(labels)}]" if labels else c.name
                diff = self.expr(c.lhs, env).plus(self.expr(c.rhs, env), -1)
                lhs = LinearExpr.build(diff.coefs)
                if not lhs.terms:
                    continue
                constraints.append(ScalarConstraint(name, lhs, c.sense, -diff.const))
                names.append(name)
            expansion[c.name] = names

        model = ScalarModel(self.f.name, self.f.sense, tuple(variables), objective, tuple(constraints))
        return GroundingReport(model, expansion, var_map)


def ground(f: SymbolicFormulation, d: DataInstance) -> GroundingReport:
    """Ground ``f`` against ``d``; sums and quantifiers follow declared set order."""
    return _Grounder(f, d).run()
