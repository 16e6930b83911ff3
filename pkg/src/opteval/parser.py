"""Readers for the OFIR interchange format and for plain linear math text.

OFIR (``ofir/1``) is line oriented::

    OFIR/1
    PROBLEM knapsack
    SET I = {1, 2, 3} "items"
    PARAM ItemValue[I] = [60, 100, 120]
    VAR x[I] binary
    OBJ max sum(i in I, x[i] * ItemValue[i])
    CON capacity: sum(i in I, x[i] * ItemWeight[i]) <= MaxWeightKnapsack

Math text is what a model typically writes when asked for "only the
formulation": an objective line, constraint lines and domain lines over
scalar variables (``x1``, ``x_1``, ``x[1]`` and ``x_{1}`` are one variable).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Union

from . import ir
from .ir import (
    Add,
    Condition,
    Const,
    DataInstance,
    Expr,
    LinearExpr,
    Mul,
    Neg,
    ParamDecl,
    ParamRef,
    Quantifier,
    ScalarConstraint,
    ScalarModel,
    ScalarVar,
    SetDecl,
    Sum,
    SymbolicConstraint,
    SymbolicFormulation,
    VarDecl,
    VarRef,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass
class ParseOutcome:
    model: Union[ScalarModel, SymbolicFormulation]
    data: DataInstance | None = None
    warnings: list[tuple[str, str]] = field(default_factory=list)
    spans: dict[str, tuple[int, int]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Shared expression tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?|\.\d+)
  | (?P<op><=|>=|!=|==|[-+*/()\[\],|<>=:{}])
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int, col0: int = 1) -> list[_Tok]:
    out: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), col0 + pos))
        pos = m.end()
    return out


# ---------------------------------------------------------------------------
# OFIR

_DESC = re.compile(r'\s+"([^"]*)"\s*$')


def _strip_comment(line: str) -> str:
    in_quote = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def _split_desc(body: str) -> tuple[str, str]:
    m = _DESC.search(body)
    if m:
        return body[: m.start()], m.group(1)
    return body, ""


class _OfirExpr:
    """Recursive-descent reader for OFIR expressions."""

    def __init__(self, toks: list[_Tok], variables: set[str], line: int):
        self.toks = toks
        self.pos = 0
        self.variables = variables
        self.line = line

    def peek(self, offset: int = 0) -> _Tok | None:
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def take(self, text: str | None = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of expression (expected {text or 'token'})", self.line)
        if text is not None and tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", self.line, tok.col)
        self.pos += 1
        return tok

    def done(self) -> bool:
        return self.pos >= len(self.toks)

    def expr(self) -> Expr:
        terms: list[Expr] = []
        tok = self.peek()
        if tok is not None and tok.text in "+-" and tok.kind == "op":
            self.take()
            first = self.term()
            terms.append(Neg(first) if tok.text == "-" else first)
        else:
            terms.append(self.term())
        while (tok := self.peek()) is not None and tok.text in ("+", "-"):
            self.take()
            t = self.term()
            terms.append(Neg(t) if tok.text == "-" else t)
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def _starts_factor(self, tok: _Tok | None) -> bool:
        return tok is not None and (tok.kind in ("ident", "num") or tok.text == "(")

    def term(self) -> Expr:
        node = self.unary()
        while True:
            tok = self.peek()
            if tok is not None and tok.text == "*":
                self.take()
                node = Mul(node, self.unary())
            elif self._starts_factor(tok):
                node = Mul(node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.text == "-":
            self.take()
            return Neg(self.unary())
        return self.factor()

    def factor(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Const(Decimal(tok.text))
        if tok.text == "(":
            inner = self.expr()
            self.take(")")
            return inner
        if tok.kind == "ident":
            if tok.text == "sum" and self.peek() is not None and self.peek().text == "(":
                return self.sum_()
            indices: tuple[str, ...] = ()
            if (nxt := self.peek()) is not None and nxt.text == "[":
                self.take("[")
                labels = [self.label()]
                while self.peek() is not None and self.peek().text == ",":
                    self.take(",")
                    labels.append(self.label())
                self.take("]")
                indices = tuple(labels)
            if tok.text in self.variables:
                return VarRef(tok.text, indices)
            return ParamRef(tok.text, indices)
        raise ParseError(f"unexpected token {tok.text!r}", self.line, tok.col)

    def label(self) -> str:
        tok = self.take()
        if tok.kind not in ("ident", "num"):
            raise ParseError(f"bad index {tok.text!r}", self.line, tok.col)
        return tok.text

    def binder(self) -> tuple[str, str]:
        idx = self.take()
        if idx.kind != "ident":
            raise ParseError(f"bad index name {idx.text!r}", self.line, idx.col)
        self.take("in")
        set_name = self.take()
        if set_name.kind != "ident":
            raise ParseError(f"bad set name {set_name.text!r}", self.line, set_name.col)
        return idx.text, set_name.text

    def condition(self) -> Condition:
        left = self.take()
        op = self.take()
        right = self.take()
        if op.text not in ("!=", "<") or left.kind != "ident" or right.kind != "ident":
            raise ParseError("conditions must read 'i != j' or 'i < j'", self.line, op.col)
        return Condition(op.text, left.text, right.text)

    def sum_(self) -> Expr:
        self.take("(")
        binders = [self.binder()]
        cond = None
        while True:
            tok = self.peek()
            if tok is not None and tok.text == "|":
                self.take()
                cond = self.condition()
                self.take(",")
                break
            self.take(",")
            # another binder follows when the next tokens read "<ident> in"
            if (
                self.peek() is not None
                and self.peek(1) is not None
                and self.peek(1).text == "in"
            ):
                binders.append(self.binder())
                continue
            break
        body = self.expr()
        self.take(")")
        for pos, (index, set_name) in enumerate(reversed(binders)):
            body = Sum(index, set_name, body, cond if pos == 0 else None)
        return body


def _expr_from(text: str, variables: set[str], line: int, col: int) -> Expr:
    parser = _OfirExpr(_tokenize(text, line, col), variables, line)
    node = parser.expr()
    if not parser.done():
        tok = parser.peek()
        raise ParseError(f"unexpected token {tok.text!r}", line, tok.col)
    return node


def _parse_decimal(text: str, line: int) -> Decimal:
    text = text.strip()
    if text in ("inf", "+inf"):
        return ir.INF
    if text == "-inf":
        return -ir.INF
    try:
        return Decimal(text)
    except InvalidOperation:
        raise ParseError(f"bad number {text!r}", line) from None


def _parse_table(text: str, line: int):
    text = text.strip()
    if text == "auto":
        return None
    if not text.startswith("["):
        return _parse_decimal(text, line)
    pos = 0

    def value():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos < len(text) and text[pos] == "[":
            pos += 1
            items = []
            while True:
                while pos < len(text) and text[pos].isspace():
                    pos += 1
                if pos < len(text) and text[pos] == "]":
                    pos += 1
                    return items
                items.append(value())
                while pos < len(text) and text[pos].isspace():
                    pos += 1
                if pos < len(text) and text[pos] == ",":
                    pos += 1
        m = re.compile(r"-?\d+(?:\.\d*)?|-?\.\d+").match(text, pos)
        if not m:
            raise ParseError(f"bad table near {text[pos:pos + 10]!r}", line)
        pos = m.end()
        return Decimal(m.group())

    nested = value()
    if text[pos:].strip():
        raise ParseError("trailing text after table", line)
    return nested


def _flatten(nested, sets: tuple[str, ...], labels: dict[str, tuple[str, ...]], name: str, line: int):
    table: dict[tuple[str, ...], Decimal] = {}

    def rec(node, depth: int, prefix: tuple[str, ...]):
        if depth == len(sets):
            if isinstance(node, list):
                raise ParseError(f"arity mismatch in table of {name}", line)
            table[prefix] = node
            return
        if not isinstance(node, list) or len(node) != len(labels[sets[depth]]):
            raise ParseError(f"arity mismatch in table of {name}", line)
        for lab, child in zip(labels[sets[depth]], node):
            rec(child, depth + 1, prefix + (lab,))

    rec(nested, 0, ())
    return table


_HEAD = re.compile(r"^(PROBLEM|SET|PARAM|VAR|OBJ|CON)\b\s*(.*)$")
_NAME_IDX = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)\s*(?:\[([^\]]*)\])?\s*(.*)$")


def parse_ofir(text: str) -> ParseOutcome:
    """Read an OFIR document.

    Documents without sets, parameters or indexed variables come back as a
    :class:`ScalarModel`; anything else as a :class:`SymbolicFormulation`
    with its :class:`DataInstance`.
    """
    records: list[tuple[int, int, int, str, str]] = []  # line, start, end, keyword, body
    offset = 0
    saw_header = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        start = offset
        offset += len(raw.encode("utf-8")) + 1
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("OFIR/"):
            if line != ir.HEADER:
                raise ParseError(f"unsupported version {line!r}", lineno, 1)
            if records or saw_header:
                raise ParseError("version header must come first", lineno, 1)
            saw_header = True
            continue
        m = _HEAD.match(line)
        if not m:
            raise ParseError(f"unknown record {line.split()[0]!r}", lineno, 1)
        records.append((lineno, start, start + len(raw.encode("utf-8")), m.group(1), m.group(2)))

    spans: dict[str, tuple[int, int]] = {}
    name = "unnamed"
    sets: list[SetDecl] = []
    set_labels: dict[str, tuple[str, ...]] = {}
    params: list[ParamDecl] = []
    raw_tables: dict[str, tuple[str | None, int]] = {}
    var_heads: list[tuple[int, str, str, str]] = []
    declared: set[str] = set()

    def declare(ident: str, lineno: int):
        if ident in declared:
            raise ParseError(f"duplicate declaration of {ident!r}", lineno, 1)
        declared.add(ident)

    # first pass: declarations
    for lineno, start, end, kw, body in records:
        if kw == "PROBLEM":
            name = body.strip() or name
            spans["problem"] = (start, end)
        elif kw == "SET":
            body, desc = _split_desc(body)
            m = re.match(r"^([A-Za-z][A-Za-z0-9_]*)\s*(?:=\s*\{(.*)\})?\s*$", body)
            if not m:
                raise ParseError("malformed SET record", lineno, 5)
            declare(m.group(1), lineno)
            sets.append(SetDecl(m.group(1), desc))
            if m.group(2) is not None:
                labels = tuple(s.strip() for s in m.group(2).split(",") if s.strip())
                if len(set(labels)) != len(labels):
                    raise ParseError(f"duplicate label in set {m.group(1)!r}", lineno, 5)
                set_labels[m.group(1)] = labels
            spans[f"set:{m.group(1)}"] = (start, end)
        elif kw == "PARAM":
            body, desc = _split_desc(body)
            m = re.match(r"^([A-Za-z][A-Za-z0-9_]*)\s*(?:\[([^\]]*)\])?\s*(?:=\s*(.*))?$", body)
            if not m:
                raise ParseError("malformed PARAM record", lineno, 7)
            declare(m.group(1), lineno)
            idx = tuple(s.strip() for s in m.group(2).split(",")) if m.group(2) else ()
            params.append(ParamDecl(m.group(1), idx, desc))
            raw_tables[m.group(1)] = (m.group(3), lineno)
            spans[f"param:{m.group(1)}"] = (start, end)
        elif kw == "VAR":
            body, desc = _split_desc(body)
            m = _NAME_IDX.match(body)
            if not m:
                raise ParseError("malformed VAR record", lineno, 5)
            declare(m.group(1), lineno)
            var_heads.append((lineno, body, desc, m.group(1)))
            spans[f"var:{m.group(1)}"] = (start, end)

    variables_set = {h[3] for h in var_heads}
    set_names = {s.name for s in sets}

    data_params: dict[str, ir.ParamTable] = {}
    for p in params:
        raw, lineno = raw_tables[p.name]
        if raw is None:
            continue
        value = _parse_table(raw, lineno)
        if value is None or isinstance(value, Decimal):
            if p.sets and value is not None:
                raise ParseError(f"arity mismatch in table of {p.name}", lineno)
            data_params[p.name] = value
            continue
        for s in p.sets:
            if s not in set_labels:
                raise ParseError(f"table of {p.name} needs elements of set {s!r}", lineno)
        data_params[p.name] = _flatten(value, p.sets, set_labels, p.name, lineno)

    variables: list[VarDecl] = []
    for lineno, body, desc, vname in var_heads:
        m = _NAME_IDX.match(body)
        idx_text, rest = m.group(2), m.group(3)
        binders: tuple[str, ...] = ()
        var_sets: tuple[str, ...] = ()
        cond = None
        if idx_text:
            if " in " in f" {idx_text} ":
                toks = _OfirExpr(_tokenize(idx_text, lineno), set(), lineno)
                pairs = [toks.binder()]
                while not toks.done():
                    tok = toks.take()
                    if tok.text == "|":
                        cond = toks.condition()
                        break
                    if tok.text != ",":
                        raise ParseError("malformed variable index", lineno, tok.col)
                    pairs.append(toks.binder())
                binders = tuple(b for b, _ in pairs)
                var_sets = tuple(s for _, s in pairs)
            else:
                var_sets = tuple(s.strip() for s in idx_text.split(","))
        dm = re.match(r"^(binary|integer|continuous)\b\s*(.*)$", rest)
        if not dm:
            raise ParseError(f"variable {vname!r} needs a domain", lineno)
        lower = upper = None
        bounds = dm.group(2).strip()
        if bounds:
            if not (bounds.startswith("[") and bounds.endswith("]")):
                raise ParseError(f"malformed bounds for {vname!r}", lineno)
            inner = bounds[1:-1]
            depth = 0
            cut = -1
            for i, ch in enumerate(inner):
                if ch in "([":
                    depth += 1
                elif ch in ")]":
                    depth -= 1
                elif ch == "," and depth == 0:
                    cut = i
                    break
            if cut < 0:
                raise ParseError(f"bounds for {vname!r} need 'lb, ub'", lineno)
            lo_text, hi_text = inner[:cut].strip(), inner[cut + 1 :].strip()
            lower = _bound_expr(lo_text, lineno)
            upper = _bound_expr(hi_text, lineno)
        variables.append(VarDecl(vname, var_sets, dm.group(1), lower, upper, binders, cond, desc))

    objective: Expr | None = None
    sense = ir.MINIMIZE
    constraints: list[SymbolicConstraint] = []
    con_names: set[str] = set()
    for lineno, start, end, kw, body in records:
        if kw == "OBJ":
            if objective is not None:
                raise ParseError("more than one objective", lineno, 1)
            m = re.match(r"^(min|max)\s+(.*)$", body.strip())
            if not m:
                raise ParseError("objective must read 'OBJ min|max <expr>'", lineno, 5)
            sense = m.group(1)
            objective = _expr_from(m.group(2), variables_set, lineno, 9)
            spans["objective"] = (start, end)
        elif kw == "CON":
            body, desc = _split_desc(body)
            if ":" not in body:
                raise ParseError("constraint needs ':' after its name", lineno)
            head, expr_text = body.split(":", 1)
            hm = re.match(r"^([A-Za-z][A-Za-z0-9_]*(?:\[[^\]]*\])?)\s*(?:forall\s+(.*))?$", head.strip())
            if not hm:
                raise ParseError("malformed constraint head", lineno, 5)
            cname = hm.group(1).replace(" ", "")
            if cname in con_names:
                raise ParseError(f"duplicate declaration of constraint {cname!r}", lineno, 5)
            con_names.add(cname)
            quants: list[Quantifier] = []
            cond = None
            if hm.group(2):
                qp = _OfirExpr(_tokenize(hm.group(2), lineno), set(), lineno)
                b, s = qp.binder()
                quants.append(Quantifier(b, s))
                while not qp.done():
                    tok = qp.take()
                    if tok.text == "|":
                        cond = qp.condition()
                        break
                    if tok.text != ",":
                        raise ParseError("malformed quantifier", lineno, tok.col)
                    b, s = qp.binder()
                    quants.append(Quantifier(b, s))
            lhs_text, sense_text, rhs_text = _split_relation(expr_text, lineno)
            col = len(head) + 6
            lhs = _expr_from(lhs_text, variables_set, lineno, col)
            rhs = _expr_from(rhs_text, variables_set, lineno, col)
            constraints.append(
                SymbolicConstraint(cname, lhs, sense_text, rhs, tuple(quants), cond, desc)
            )
            spans[f"con:{cname}"] = (start, end)

    if objective is None:
        raise ParseError("missing objective")

    for p in params:
        if p.name in data_params and isinstance(data_params[p.name], dict):
            continue
        for s in p.sets:
            if s not in set_names:
                raise ParseError(f"parameter {p.name!r} uses undeclared set {s!r}")

    _check_arity(objective, params, variables, "objective")
    for c in constraints:
        _check_arity(c.lhs, params, variables, c.name)
        _check_arity(c.rhs, params, variables, c.name)

    formulation = SymbolicFormulation(
        name, sense, objective, tuple(sets), tuple(params), tuple(variables), tuple(constraints)
    )
    data = DataInstance(name, dict(set_labels), data_params)
    scalar = not sets and not params and all(not v.sets for v in variables)
    if scalar:
        from .grounder import ground

        model = ground(formulation, data).model
        return ParseOutcome(model, None, [], spans)
    return ParseOutcome(formulation, data, [], spans)


def _bound_expr(text: str, line: int) -> Expr | None:
    if not text:
        return None
    if text in ("inf", "+inf"):
        return Const(ir.INF)
    if text == "-inf":
        return Neg(Const(ir.INF))
    return _expr_from(text, set(), line, 1)


def _split_relation(text: str, line: int) -> tuple[str, str, str]:
    depth = 0
    hits: list[tuple[int, str]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif depth == 0:
            two = text[i : i + 2]
            if two in ("<=", ">="):
                hits.append((i, two))
                i += 2
                continue
            if two == "!=":
                i += 2
                continue
            if ch == "=":
                hits.append((i, "="))
        i += 1
    if len(hits) != 1:
        raise ParseError("constraint needs exactly one of <=, >=, =", line)
    pos, sense = hits[0]
    return text[:pos], sense, text[pos + len(sense) :]


def _check_arity(expr: Expr, params, variables, element: str) -> None:
    arity = {p.name: len(p.sets) for p in params}
    arity.update({v.name: len(v.sets) for v in variables})
    for node in ir.walk(expr):
        if isinstance(node, (ParamRef, VarRef)) and node.name in arity:
            if len(node.indices) != arity[node.name]:
                raise ParseError(
                    f"arity mismatch: {node.name} takes {arity[node.name]} indices in {element}"
                )


# ---------------------------------------------------------------------------
# Math text

_REPLACEMENTS = [
    ("\\leqslant", "<="),
    ("\\geqslant", ">="),
    ("\\leq", "<="),
    ("\\geq", ">="),
    ("\\le", "<="),
    ("\\ge", ">="),
    ("\\cdot", "*"),
    ("\\times", "*"),
    ("\\in", " in "),
    ("\\{", "{"),
    ("\\}", "}"),
    ("\\quad", " "),
    ("\\,", " "),
    ("\\;", " "),
    ("≤", "<="),
    ("≥", ">="),
    ("⩽", "<="),
    ("⩾", ">="),
    ("−", "-"),
    ("–", "-"),
    ("·", "*"),
    ("⋅", "*"),
    ("×", "*"),
    ("∈", " in "),
    ("$", ""),
    ("**", ""),
    ("`", ""),
]

_IDENT_SPELL = re.compile(
    r"[A-Za-z][A-Za-z0-9]*(?:_\{[^{}]*\}|_[A-Za-z0-9]+|\[[^\[\]]*\])*"
)
_SPELL_STRIP = re.compile(r"[_{}\[\],\s]")
_KEYWORDS = {"in", "binary", "integer", "integers", "continuous", "free", "and"}
_OBJ_RE = re.compile(r"^(maximize|minimize|maximise|minimise|max|min)\b\.?\s*:?\s*(.*)$", re.I)
_ST_RE = re.compile(r"^(subject\s+to|s\.\s*t\.|st|such\s+that)\b\s*:?\s*(.*)$", re.I)
_LABEL_RE = re.compile(r"^([A-Za-z][A-Za-z0-9 _\-()]*?)\s*:\s*(.*\S.*)$")
_BULLET_RE = re.compile(r"^(?:[-*•]\s+|\(?\d+[.)]\s+|\(\d+\)\s*)")
_DOMAIN_WORD = re.compile(
    r"^(.*?)\s*(?:(?:is|are)\s+)?(binary|integers?|continuous|free)\s*(?:variables?)?\.?$", re.I
)
_BINARY_SET = re.compile(r"^(.*?)\s+in\s*\{\s*0\s*,\s*1\s*\}\s*\.?$", re.I)


def canonical_identifier(spelling: str) -> str:
    """``x_1``, ``x[1]``, ``x_{1}`` -> ``x1``."""
    return _SPELL_STRIP.sub("", spelling)


class _Linear:
    __slots__ = ("coefs", "const")

    def __init__(self, coefs=None, const=Decimal(0)):
        self.coefs: dict[str, Decimal] = dict(coefs or {})
        self.const = const

    def add(self, other: "_Linear", sign: int = 1) -> "_Linear":
        out = _Linear(self.coefs, self.const + sign * other.const)
        for k, v in other.coefs.items():
            out.coefs[k] = out.coefs.get(k, Decimal(0)) + sign * v
        return out

    def scale(self, k: Decimal) -> "_Linear":
        return _Linear({n: v * k for n, v in self.coefs.items()}, self.const * k)

    @property
    def is_const(self) -> bool:
        return all(v == 0 for v in self.coefs.values())


class _MathExpr:
    def __init__(self, toks: list[_Tok], line: int, order: dict[str, None]):
        self.toks = toks
        self.pos = 0
        self.line = line
        self.order = order

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression", self.line)
        self.pos += 1
        return tok

    def expr(self) -> _Linear:
        acc = _Linear()
        sign = 1
        tok = self.peek()
        if tok is not None and tok.text in ("+", "-"):
            self.take()
            sign = -1 if tok.text == "-" else 1
        acc = acc.add(self.term(), sign)
        while (tok := self.peek()) is not None and tok.text in ("+", "-"):
            self.take()
            acc = acc.add(self.term(), -1 if tok.text == "-" else 1)
        return acc

    def term(self) -> _Linear:
        node = self.factor()
        while True:
            tok = self.peek()
            if tok is not None and tok.text in ("*", "/"):
                self.take()
                rhs = self.factor()
                if tok.text == "/":
                    if not rhs.is_const or rhs.const == 0:
                        raise ParseError("division by a non-constant", self.line, tok.col)
                    node = node.scale(1 / rhs.const)
                else:
                    node = self._mul(node, rhs, tok)
            elif tok is not None and (tok.kind in ("ident", "num") or tok.text == "("):
                node = self._mul(node, self.factor(), tok)
            else:
                return node

    def _mul(self, a: _Linear, b: _Linear, tok: _Tok) -> _Linear:
        if a.is_const:
            return b.scale(a.const)
        if b.is_const:
            return a.scale(b.const)
        raise ParseError("nonlinear product of variables", self.line, tok.col)

    def factor(self) -> _Linear:
        tok = self.take()
        if tok.text == "-":
            return self.factor().scale(Decimal(-1))
        if tok.kind == "num":
            return _Linear(const=Decimal(tok.text))
        if tok.text == "(":
            inner = self.expr()
            close = self.take()
            if close.text != ")":
                raise ParseError("expected ')'", self.line, close.col)
            return inner
        if tok.kind == "ident" and tok.text.lower() not in _KEYWORDS:
            self.order.setdefault(tok.text, None)
            return _Linear({tok.text: Decimal(1)})
        raise ParseError(f"unexpected token {tok.text!r}", self.line, tok.col)


def _normalize_spellings(text: str) -> str:
    return _IDENT_SPELL.sub(lambda m: canonical_identifier(m.group()), text)


def _math_linear(text: str, line: int, col: int, order: dict[str, None]) -> _Linear:
    toks = _tokenize(text, line, col)
    parser = _MathExpr(toks, line, order)
    value = parser.expr()
    if parser.peek() is not None:
        tok = parser.peek()
        raise ParseError(f"unexpected token {tok.text!r}", line, tok.col)
    return value


_REL_SPLIT = re.compile(r"(<=|>=|==|=<|=>|<|>|=)")
_REL_CANON = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "=", "==": "="}


def _var_list(text: str) -> list[str] | None:
    parts = [p.strip() for p in re.split(r",|\band\b", text) if p.strip()]
    if not parts:
        return None
    if all(re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", p) and p.lower() not in _KEYWORDS for p in parts):
        return parts
    return None


@dataclass
class _MathState:
    order: dict[str, None] = field(default_factory=dict)
    objective: tuple[str, _Linear] | None = None
    constraints: list[tuple[str, _Linear, str, Decimal]] = field(default_factory=list)
    domains: dict[str, str] = field(default_factory=dict)
    lower: dict[str, Decimal] = field(default_factory=dict)
    upper: dict[str, Decimal] = field(default_factory=dict)
    spans: dict[str, tuple[int, int]] = field(default_factory=dict)


def _apply_bound(state: _MathState, name: str, sense: str, value: Decimal) -> None:
    state.order.setdefault(name, None)
    if sense in (">=", "="):
        cur = state.lower.get(name)
        state.lower[name] = value if cur is None else max(cur, value)
    if sense in ("<=", "="):
        cur = state.upper.get(name)
        state.upper[name] = value if cur is None else min(cur, value)


def _math_line(text: str, lineno: int, state: _MathState, span: tuple[int, int], pending_obj: list) -> bool:
    """Interpret one cleaned line; returns False when it is not recognized."""
    m = _BINARY_SET.match(text)
    if m and (names := _var_list(m.group(1))):
        for n in names:
            state.order.setdefault(n, None)
            state.domains[n] = "binary"
        return True
    m = _DOMAIN_WORD.match(text)
    if m and (names := _var_list(m.group(1))):
        kind = m.group(2).lower()
        for n in names:
            state.order.setdefault(n, None)
            if kind.startswith("integer"):
                state.domains[n] = "integer"
            elif kind == "binary":
                state.domains[n] = "binary"
            elif kind == "free":
                state.lower[n] = -ir.INF
        return True

    pieces = _REL_SPLIT.split(text)
    if len(pieces) == 1:
        if pending_obj:
            sense = pending_obj.pop()
            state.objective = (sense, _math_linear(text, lineno, 1, state.order))
            state.spans["objective"] = span
            return True
        return False
    exprs = pieces[0::2]
    rels = [_REL_CANON[r] for r in pieces[1::2]]

    # domain lines: "x1, x2 >= 0" and "0 <= x1 <= 10"
    if len(rels) == 1 and (names := _var_list(exprs[0])) is not None:
        try:
            value = _math_linear(exprs[1], lineno, 1, {})
        except ParseError:
            value = None
        if value is not None and value.is_const and (len(names) > 1 or rels[0] != "="):
            for n in names:
                _apply_bound(state, n, rels[0], value.const)
            return True
    if len(rels) == 2 and rels[0] == rels[1] and rels[0] != "=":
        names = _var_list(exprs[1])
        if names is not None and len(names) == 1:
            lo_side = _math_linear(exprs[0], lineno, 1, {})
            hi_side = _math_linear(exprs[2], lineno, 1, {})
            if lo_side.is_const and hi_side.is_const:
                a, b = (lo_side.const, hi_side.const) if rels[0] == "<=" else (hi_side.const, lo_side.const)
                _apply_bound(state, names[0], ">=", a)
                _apply_bound(state, names[0], "<=", b)
                return True

    sides = [_math_linear(e, lineno, 1, state.order) for e in exprs]
    for left, rel, right in zip(sides, rels, sides[1:]):
        diff = left.add(right, -1)
        lhs = _Linear({k: v for k, v in diff.coefs.items() if v != 0})
        if not lhs.coefs:
            raise ParseError("constraint has no variables", lineno, 1)
        name = f"c{len(state.constraints) + 1}"
        state.constraints.append((name, lhs, rel, -diff.const))
        state.spans[name] = span
    return True


def parse_mathtext(text: str, strict: bool = False) -> ParseOutcome:
    """Read plain linear math text into a :class:`ScalarModel`.

    In strict mode the first unrecognized line raises :class:`ParseError`;
    otherwise it is skipped and reported in ``warnings``.
    """
    state = _MathState()
    warnings: list[tuple[str, str]] = []
    pending_obj: list[str] = []
    offset = 0
    for lineno, raw_line in enumerate(text.split("\n"), start=1):
        line_start = offset
        offset += len(raw_line.encode("utf-8")) + 1
        for chunk in raw_line.split(";"):
            span = (line_start, line_start + len(raw_line.encode("utf-8")))
            line = chunk
            for old, new in _REPLACEMENTS:
                line = line.replace(old, new)
            line = line.strip().rstrip(",.")
            if not line or line.startswith("#") or line.startswith("```"):
                continue
            line = _BULLET_RE.sub("", line, count=1).strip()
            m = _ST_RE.match(line)
            if m:
                line = m.group(2).strip()
                if not line:
                    continue
            m = _OBJ_RE.match(line)
            if m:
                sense = ir.MAXIMIZE if m.group(1).lower().startswith("max") else ir.MINIMIZE
                body = m.group(2).strip()
                body = re.sub(r"^(?:[A-Za-z][A-Za-z0-9]*(?:\([^)]*\))?)\s*=\s*(?=[^=]*$)", "", body)
                if state.objective is not None:
                    raise ParseError("more than one objective", lineno, 1)
                if not body:
                    pending_obj.append(sense)
                    continue
                try:
                    body = _normalize_spellings(body)
                    state.objective = (sense, _math_linear(body, lineno, 1, state.order))
                    state.spans["objective"] = span
                except ParseError as exc:
                    raise ParseError(f"objective: {exc.message}", lineno, exc.column) from None
                continue
            if re.fullmatch(r"[A-Za-z][A-Za-z0-9 _\-()/]*:", line):
                continue  # section heading
            lm = _LABEL_RE.match(line)
            if lm and not re.search(r"[<>=+]", lm.group(1)):
                line = lm.group(2).strip()
            line = _normalize_spellings(line)
            try:
                ok = _math_line(line, lineno, state, span, pending_obj)
                if not ok:
                    raise ParseError(f"unrecognized line {chunk.strip()!r}", lineno, 1)
            except ParseError as exc:
                if strict:
                    raise
                warnings.append((f"line {lineno}", f"skipped: {exc.message}"))
    if state.objective is None:
        raise ParseError("no objective found")

    sense, obj = state.objective
    names = list(state.order)
    variables = []
    for n in names:
        domain = state.domains.get(n, "continuous")
        variables.append(ScalarVar(n, domain, state.lower.get(n), state.upper.get(n)))
    constraints = tuple(
        ScalarConstraint(name, LinearExpr.build(lhs.coefs), rel, rhs)
        for name, lhs, rel, rhs in state.constraints
    )
    for n in names:
        state.spans.setdefault(f"var:{n}", state.spans.get("objective", (0, 0)))
    if not constraints and not state.lower and not state.upper and not state.domains:
        warnings.append(("document", "no constraints"))
    model = ScalarModel(
        "candidate", sense, tuple(variables), LinearExpr.build(obj.coefs, obj.const), constraints
    )
    return ParseOutcome(model, None, warnings, state.spans)


def render_mathtext(m: ScalarModel) -> str:
    """Plain math-text rendering of a scalar model (inverse of :func:`parse_mathtext`)."""
    lines = [f"{'maximize' if m.sense == ir.MAXIMIZE else 'minimize'} {ir._render_linear(m.objective)}"]
    lines.append("subject to")
    for c in m.constraints:
        lines.append(f"{ir._render_linear(c.lhs)} {c.sense} {ir.fmt_decimal(c.rhs)}")
    binaries = [v.name for v in m.variables if v.domain == "binary"]
    if binaries:
        lines.append(f"{', '.join(binaries)} in {{0,1}}")
    integers = [v.name for v in m.variables if v.domain == "integer"]
    if integers:
        lines.append(f"{', '.join(integers)} integer")
    for v in m.variables:
        lo, hi = v.lower, v.upper
        if lo is not None and lo == -ir.INF and hi is None:
            lines.append(f"{v.name} free")
        elif lo is not None and hi is not None:
            lines.append(f"{ir.fmt_decimal(lo)} <= {v.name} <= {ir.fmt_decimal(hi)}")
        elif lo is not None:
            lines.append(f"{v.name} >= {ir.fmt_decimal(lo)}")
        elif hi is not None:
            lines.append(f"{v.name} <= {ir.fmt_decimal(hi)}")
    return "\n".join(lines) + "\n"


def parse_any(text: str, strict: bool = False) -> ParseOutcome:
    """OFIR when the document carries the ``OFIR/1`` header, math text otherwise."""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            if stripped.startswith("OFIR/"):
                return parse_ofir(text)
            break
    return parse_mathtext(text, strict=strict)
