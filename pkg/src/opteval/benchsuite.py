"""Shipped benchmark problems and prompt templates."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources

from .grounder import ground
from .ir import DataInstance, ScalarModel, SymbolicFormulation
from .parser import parse_ofir

PROBLEM_IDS = ("knapsack", "aircraft_assignment", "diet", "aircraft_landing")
PROMPT_IDS = ("P1", "P2", "P3", "P4", "P5", "P6")
PLACEHOLDER = "{PROBLEM}"
FORMAT_DELIM = "=== OUTPUT FORMAT ==="
STEP_DELIM = "=== STEP ==="


class AssetError(LookupError):
    pass


def asset_root():
    return resources.files("opteval") / "assets"


def read_asset(*parts: str) -> str:
    node = asset_root()
    for p in parts:
        node = node / p
    try:
        return node.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise AssetError(f"missing asset {'/'.join(parts)}") from exc


@dataclass(frozen=True)
class BenchmarkCase:
    id: str
    difficulty: str
    problem_type: str
    gt: SymbolicFormulation
    instances: tuple[DataInstance, ...]
    known_optimum: tuple[Fraction, ...]
    description: str

    def model(self, instance: int = 0) -> ScalarModel:
        return ground(self.gt, self.instances[instance]).model

    def ofir(self) -> str:
        return read_asset("benchmarks", f"{self.id}.ofir")


@lru_cache(maxsize=1)
def manifest() -> dict:
    return json.loads(read_asset("benchmarks", "manifest.json"))


def list_cases() -> list[dict]:
    return list(manifest()["cases"])


def load_case(case_id: str) -> BenchmarkCase:
    entry = next((c for c in manifest()["cases"] if c["id"] == case_id), None)
    if entry is None:
        raise AssetError(f"unknown benchmark {case_id!r}; known: {', '.join(PROBLEM_IDS)}")
    outcome = parse_ofir(read_asset("benchmarks", entry["file"]))
    return BenchmarkCase(
        id=case_id,
        difficulty=entry["difficulty"],
        problem_type=entry["type"],
        gt=outcome.model,
        instances=(outcome.data,),
        known_optimum=(Fraction(entry["optimum"]),),
        description=read_asset("benchmarks", entry["description"]).strip(),
    )


def check_optimum(case: BenchmarkCase) -> list[str]:
    """Problems where the solver disagrees with the recorded optimum."""
    from .solver import solve_milp

    problems = []
    for k, opt in enumerate(case.known_optimum):
        result = solve_milp(case.model(k))
        target = float(opt)
        if not result.optimal or abs(result.objective - target) > 1e-6 * (1 + abs(target)):
            problems.append(f"{case.id}[{k}]: solver {result.status} {result.objective} vs {target}")
    return problems


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    title: str
    steps: tuple[str, ...]
    output_format: str

    @property
    def multistep(self) -> bool:
        return len(self.steps) > 1


def load_prompt(prompt_id: str) -> PromptTemplate:
    if prompt_id not in PROMPT_IDS:
        raise AssetError(f"unknown prompt {prompt_id!r}")
    raw = read_asset("prompts", f"{prompt_id}.txt")
    title = prompt_id
    lines = []
    for line in raw.splitlines():
        if line.startswith("# title:"):
            title = line.split(":", 1)[1].strip()
        else:
            lines.append(line)
    body = "\n".join(lines)
    body, _, fmt = body.partition(FORMAT_DELIM)
    steps = tuple(s.strip() for s in body.split(STEP_DELIM))
    return PromptTemplate(prompt_id, title, steps, fmt.strip())


def render_prompt(p: PromptTemplate, case: BenchmarkCase | str, with_format: bool = True) -> list[str]:
    """One message per step; the output-format block goes on the last step only."""
    text = case if isinstance(case, str) else case.description
    messages = [s.replace(PLACEHOLDER, text) for s in p.steps]
    if with_format and p.output_format:
        messages[-1] = f"{messages[-1]}\n\n{p.output_format}"
    return messages
