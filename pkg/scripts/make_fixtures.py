"""Regenerate the shipped replay fixtures.

Each (problem, prompt, model) cell gets a synthetic response derived from the
ground truth by a small recipe of edits (dropped families, extra bounds,
hallucinated variables, a scaled objective, an infeasible row). Telemetry
(latency, token counts) is copied from a fixed table of reference values;
P6 cells split it evenly over the four steps.

Run from the repository root:  python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import argparse
import shutil
from dataclasses import replace
from decimal import Decimal
from pathlib import Path

from opteval.benchsuite import load_case, load_prompt, render_prompt
from opteval.gateway import MODEL_IDS, FixtureStore, Telemetry
from opteval.ir import INF, LinearExpr, ScalarConstraint, ScalarModel, fmt_decimal
from opteval.matcher import model_rows

# (cons_p, cons_r, dv_p, dv_r, gap, latency_s, input_tokens, output_tokens); gap None = "--"
TABLES = {
    "knapsack": {
        "P1": {"deepseek": (1, 1, 1, 1, 0, 5.79, 137, 205), "llama": (0.66, 1, 1, 1, 0, 7.97, 137, 251), "gpt5": (1, 1, 1, 1, 0, 2.00, 137, 39)},
        "P2": {"deepseek": (1, 1, 1, 1, 0, 5.08, 149, 186), "llama": (0.66, 1, 1, 1, 0, 8.12, 149, 256), "gpt5": (1, 1, 1, 1, 0, 7.00, 149, 60)},
        "P3": {"deepseek": (1, 1, 1, 1, 0, 1.00, 158, 214), "llama": (1, 1, 1, 1, 0, 6.45, 158, 204), "gpt5": (1, 1, 1, 1, 0, 1.00, 158, 48)},
        "P4": {"deepseek": (1, 1, 1, 1, 0, 4.51, 142, 164), "llama": (0.66, 1, 1, 1, 0, 6.41, 142, 203), "gpt5": (1, 1, 1, 1, 0, 1.00, 142, 50)},
        "P5": {"deepseek": (1, 1, 1, 1, 0, 19.66, 146, 714), "llama": (1, 1, 1, 1, 0, 6.10, 146, 193), "gpt5": (1, 1, 1, 1, 0, 15.00, 146, 55)},
        "P6": {"deepseek": (1, 1, 1, 1, 0, 1.81, 429, 60), "llama": (0.66, 1, 1, 1, 0, 7.32, 429, 230), "gpt5": (1, 1, 1, 1, 0, 8.00, 429, 20)},
    },
    "aircraft_assignment": {
        "P1": {"deepseek": (1, 1, 1, 1, 0, 12.34, 198, 439), "llama": (1, 1, 0.50, 1, 0.04, 11.32, 198, 358), "gpt5": (1, 1, 1, 1, 0, 11.00, 198, 159)},
        "P2": {"deepseek": (0.66, 0.66, 0.50, 1, 0, 5.91, 210, 210), "llama": (1, 1, 0.50, 1, 0.04, 11.64, 210, 364), "gpt5": (1, 1, 1, 1, 0, 10.00, 210, 329)},
        "P3": {"deepseek": (0.75, 1, 0.50, 1, 0.45, 9.28, 219, 340), "llama": (0.66, 0.66, 0.50, 1, None, 10.44, 219, 331), "gpt5": (1, 1, 1, 1, 0, 13.00, 219, 292)},
        "P4": {"deepseek": (0.66, 0.66, 0.50, 1, 0.12, 4.43, 203, 163), "llama": (0.66, 0.66, 0.33, 1, None, 8.23, 203, 262), "gpt5": (1, 1, 1, 1, 0, 5.00, 203, 253)},
        "P5": {"deepseek": (1, 1, 1, 1, 0, 7.73, 207, 281), "llama": (0.33, 0.33, 0.33, 1, 160.0, 9.91, 207, 312), "gpt5": (1, 1, 1, 1, 0, 21.00, 207, 460)},
        "P6": {"deepseek": (0.50, 1, 1, 1, 0.45, 3.56, 432, 123), "llama": (1, 1, 1, 1, 0, 6.80, 432, 214), "gpt5": (1, 1, 1, 1, 0, 7.00, 432, 31)},
    },
    "diet": {
        "P1": {"deepseek": (1, 1, 1, 1, 0, 8.56, 210, 328), "llama": (1, 1, 1, 1, 0, 8.56, 210, 271), "gpt5": (1, 1, 1, 1, 0, 2.00, 210, 209)},
        "P2": {"deepseek": (1, 0.80, 1, 1, 0, 10.49, 223, 271), "llama": (1, 1, 1, 1, 0, 10.49, 223, 331), "gpt5": (1, 1, 1, 1, 0, 3.00, 223, 214)},
        "P3": {"deepseek": (1, 1, 1, 1, 0, 6.37, 229, 415), "llama": (1, 1, 1, 1, 0, 6.37, 229, 199), "gpt5": (1, 1, 1, 1, 0, 4.00, 229, 180)},
        "P4": {"deepseek": (1, 0.80, 1, 1, 0, 7.58, 216, 391), "llama": (0.71, 1, 0.50, 1, 0, 7.58, 216, 241), "gpt5": (1, 0.40, 1, 1, 0, 0.60, 216, 68)},
        "P5": {"deepseek": (1, 0.80, 1, 1, 0, 19.17, 219, 467), "llama": (1, 0.80, 1, 1, 0, 19.17, 219, 610), "gpt5": (1, 1, 1, 1, 0, 2.00, 219, 210)},
        "P6": {"deepseek": (1, 0.80, 0, 0, 0, 5.68, 476, 297), "llama": (1, 1, 1, 1, 0, 5.68, 476, 178), "gpt5": (1, 1, 1, 1, 0, 0.60, 476, 34)},
    },
    "aircraft_landing": {
        "P1": {"deepseek": (1, 0.66, 1, 0.75, 0, 10.75, 248, 393), "llama": (1, 0.66, 0.50, 0.50, 0.85, 13.65, 248, 432), "gpt5": (1, 0.75, 1, 0.75, 0, 24.00, 248, 248)},
        "P2": {"deepseek": (1, 0.75, 1, 0.25, 0.24, 12.16, 260, 445), "llama": (0.75, 0.50, 0.50, 0.50, 0.85, 16.10, 260, 509), "gpt5": (1, 0.75, 1, 0.75, 0, 27.00, 260, 247)},
        "P3": {"deepseek": (1, 0.50, 1, 0.25, 0.89, 14.26, 269, 522), "llama": (0.75, 0.50, 0.50, 0.50, 0.85, 15.63, 269, 496), "gpt5": (1, 0.75, 1, 0.75, 0, 22.00, 269, 161)},
        "P4": {"deepseek": (1, 1, 1, 0.25, 0.92, 5.85, 253, 213), "llama": (1, 1, 0.33, 0.25, 0.85, 10.29, 253, 325), "gpt5": (1, 0.75, 1, 0.75, 0, 56.00, 253, 98)},
        "P5": {"deepseek": (1, 0.50, 1, 0.25, 1.00, 20.73, 257, 755), "llama": (1, 0.66, 0.50, 0.25, 1.00, 13.82, 257, 435), "gpt5": (1, 1, 1, 0.75, 0, 15.00, 257, 168)},
        "P6": {"deepseek": (1, 1, 1, 0.25, 0.75, 5.80, 1008, 199), "llama": (1, 1, 0.25, 0.25, None, 9.70, 1008, 298), "gpt5": (1, 1, 1, 1, 0, 5.00, 1008, 65)},
    },
}

STYLES = {"deepseek": "sub", "llama": "bracket", "gpt5": "plain"}


# ---------------------------------------------------------------------------
# model edits


def drop_rows(m: ScalarModel, key) -> ScalarModel:
    if key[0] == "bound":
        _, role, kind = key
        variables = []
        for v in m.variables:
            if v.role != role:
                variables.append(v)
            elif kind in ("binary", "integer") and v.domain == kind:
                variables.append(replace(v, domain="continuous"))
            elif kind == "lower":
                variables.append(replace(v, lower=None))
            elif kind == "upper":
                variables.append(replace(v, upper=None))
            else:
                variables.append(v)
        return replace(m, variables=tuple(variables))
    family = key[1]
    return replace(m, constraints=tuple(c for c in m.constraints if c.family != family))


def add_nonneg(m: ScalarModel) -> tuple[ScalarModel, bool]:
    changed = False
    variables = []
    for v in m.variables:
        if v.lower is None:
            variables.append(replace(v, lower=Decimal(0)))
            changed = True
        else:
            variables.append(v)
    return replace(m, variables=tuple(variables)), changed


def add_redundant_row(m: ScalarModel, k: int) -> ScalarModel:
    names = m.var_names()
    total = LinearExpr.build({n: Decimal(1) for n in names})
    row = ScalarConstraint(f"extra{k}", total, "<=", Decimal(1000 + k))
    return replace(m, constraints=m.constraints + (row,))


def add_infeasible_row(m: ScalarModel) -> ScalarModel:
    total = LinearExpr.build({n: Decimal(1) for n in m.var_names()})
    return replace(m, constraints=m.constraints + (ScalarConstraint("bad", total, "<=", Decimal(-1)),))


def drop_role(m: ScalarModel, role: str) -> ScalarModel:
    keep = {v.name for v in m.variables if v.role != role}
    variables = tuple(v for v in m.variables if v.name in keep)
    objective = LinearExpr.build({n: c for n, c in m.objective.terms if n in keep}, m.objective.constant)
    constraints = []
    for c in m.constraints:
        terms = {n: v for n, v in c.lhs.terms if n in keep}
        if terms:
            constraints.append(replace(c, lhs=LinearExpr.build(terms)))
    return replace(m, variables=variables, objective=objective, constraints=tuple(constraints))


def scale_objective(m: ScalarModel, factor: Decimal) -> ScalarModel:
    terms = {n: c * factor for n, c in m.objective.terms}
    return replace(m, objective=LinearExpr.build(terms, m.objective.constant))


def shift_objective(m: ScalarModel, amount: Decimal) -> ScalarModel:
    return replace(m, objective=LinearExpr(m.objective.terms, m.objective.constant + amount))


def perturb_coefficient(m: ScalarModel) -> ScalarModel:
    if not m.constraints:
        return m
    c = m.constraints[-1]
    name, coef = c.lhs.terms[0]
    terms = dict(c.lhs.terms)
    terms[name] = coef * Decimal("1.25")
    return replace(m, constraints=m.constraints[:-1] + (replace(c, lhs=LinearExpr.build(terms)),))


def candidate_for(gt: ScalarModel, target, opt: float) -> tuple[ScalarModel, list[str]]:
    cons_p, cons_r, dv_p, dv_r, gap = target[:5]
    m = gt
    extras: list[str] = []
    roles = list(dict.fromkeys(v.role for v in gt.variables))
    n_drop_roles = round((1 - dv_r) * len(roles))
    for role in roles[::-1][:n_drop_roles]:
        m = drop_role(m, role)
    families = list(dict.fromkeys(r.key for r in model_rows(gt)))
    n_drop = round((1 - cons_r) * len(families)) if n_drop_roles == 0 else 0
    bound_first = [k for k in families if k[0] == "bound"] + [k for k in families if k[0] != "bound"][::-1]
    for key in bound_first[:n_drop]:
        m = drop_rows(m, key)
    tp = len(families) - n_drop
    if cons_p < 1:
        want_fp = max(1, round(tp / cons_p - tp)) if cons_p > 0 else 1
        m, added = add_nonneg(m)
        want_fp -= int(added)
        for k in range(want_fp):
            m = add_redundant_row(m, k)
    if dv_p < 1:
        kept_roles = len(roles) - n_drop_roles
        want = max(1, round(kept_roles / dv_p - kept_roles)) if dv_p > 0 else 1
        extras = [f"y{k + 1}" for k in range(want)]
    if gap is None:
        m = add_infeasible_row(m)
    elif gap > 0:
        if abs(opt) > 1e-9:
            m = scale_objective(m, Decimal(str(1 + gap)))
        else:
            m = shift_objective(m, Decimal(str(gap)))
    return m, extras


# ---------------------------------------------------------------------------
# rendering


def spell(name: str, style: str) -> str:
    role, *labels = name.split("_")
    if not labels:
        return name
    if style == "bracket":
        return f"{role}[{','.join(labels)}]"
    if style == "plain":
        return role + "".join(labels)
    return name


def linear(expr: LinearExpr, style: str, extras=()) -> str:
    parts = []
    for name, coef in expr.terms:
        mag = abs(coef)
        term = spell(name, style) if mag == 1 else f"{fmt_decimal(mag)} {spell(name, style)}"
        if not parts:
            parts.append(term if coef > 0 else f"-{term}")
        else:
            parts.append(("+ " if coef > 0 else "- ") + term)
    for y in extras:
        parts.append(f"+ 0 {y}")
    if expr.constant != 0 or not parts:
        c = expr.constant
        parts.append(fmt_decimal(c) if not parts else ("+ " if c > 0 else "- ") + fmt_decimal(abs(c)))
    return " ".join(parts)


def render(m: ScalarModel, style: str, extras=()) -> dict[str, str]:
    le, ge = ("≤", "≥") if style == "sub" else ("<=", ">=")
    sense_word = "maximize" if m.sense == "max" else "minimize"
    variables = ", ".join(spell(v.name, style) for v in m.variables)
    if extras:
        variables += ", " + ", ".join(extras)
    objective = f"{sense_word} {linear(m.objective, style, extras)}"
    rows = []
    for c in m.constraints:
        sym = {"<=": le, ">=": ge, "=": "="}[c.sense]
        rows.append(f"{linear(c.lhs, style)} {sym} {fmt_decimal(c.rhs)}")
    domains = []
    binaries = [spell(v.name, style) for v in m.variables if v.domain == "binary"]
    if binaries:
        domains.append(f"{', '.join(binaries)} in {{0,1}}")
    ints = [spell(v.name, style) for v in m.variables if v.domain == "integer"]
    if ints:
        domains.append(f"{', '.join(ints)} integer")
    for v in m.variables:
        lo = None if v.lower is None or v.lower == -INF else fmt_decimal(v.lower)
        hi = None if v.upper is None or v.upper == INF else fmt_decimal(v.upper)
        s = spell(v.name, style)
        if lo is not None and hi is not None:
            domains.append(f"{lo} {le} {s} {le} {hi}")
        elif lo is not None:
            domains.append(f"{s} {ge} {lo}")
        elif hi is not None:
            domains.append(f"{s} {le} {hi}")
    body = [objective, "subject to", *rows, *domains]
    if style == "bracket":
        body = ["Formulation:", *body]
    return {
        "variables": f"Decision variables: {variables}",
        "objective": objective,
        "constraints": "\n".join(rows + domains),
        "full": "\n".join(body) + "\n",
    }


def split(total: float | int, parts: int) -> list:
    if isinstance(total, int):
        base = [total // parts] * parts
        base[-1] += total - sum(base)
        return base
    share = round(total / parts, 3)
    out = [share] * parts
    out[-1] = round(total - share * (parts - 1), 3)
    return out


def generate(root: Path) -> int:
    from opteval.solver import solve_milp

    if root.exists():
        shutil.rmtree(root)
    store = FixtureStore(root)
    count = 0
    for problem, prompts in TABLES.items():
        case = load_case(problem)
        gt = case.model()
        opt = solve_milp(gt).objective
        for prompt_id, models in prompts.items():
            prompt = load_prompt(prompt_id)
            steps = render_prompt(prompt, case)
            for alias, target in models.items():
                model_id = MODEL_IDS[alias]
                cand, extras = candidate_for(gt, target, opt)
                texts = render(cand, STYLES[alias], extras)
                latency_ms = round(target[5] * 1000, 3)
                if len(steps) == 1:
                    replies = [texts["full"]]
                else:
                    replies = [texts["variables"], texts["objective"], texts["constraints"], texts["full"]]
                lat = split(latency_ms, len(steps))
                tin = split(int(target[6]), len(steps))
                tout = split(int(target[7]), len(steps))
                history: list[dict] = []
                for k, (msg, reply) in enumerate(zip(steps, replies)):
                    messages = history + [{"role": "user", "content": msg}]
                    store.save(model_id, messages, reply, Telemetry(lat[k], tin[k], tout[k]),
                               recorded="synthetic")
                    history = messages + [{"role": "assistant", "content": reply}]
                    count += 1
    return count


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default = Path(__file__).resolve().parents[1] / "src" / "opteval" / "assets" / "fixtures"
    ap.add_argument("--out", type=Path, default=default)
    args = ap.parse_args()
    n = generate(args.out)
    print(f"wrote {n} fixtures under {args.out}")


if __name__ == "__main__":
    main()
