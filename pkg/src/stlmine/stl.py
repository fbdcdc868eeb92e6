"""Temporal-logic formulas over named signal channels.

The fragment covers single-channel predicates ``ch < c`` and ``ch >= c``,
Boolean connectives ``!``, ``&&``, ``||``, and the bounded temporal
operators ``F[a,b)`` (eventually) and ``G[a,b)`` (always) over half-open
windows. Thresholds and window endpoints may be symbolic parameters
written ``$name``; binding a valuation to all parameters yields a concrete
formula.

Concrete grammar (UTF-8 text)::

    phi  := or_term
    or   := and_term ("||" and_term)*
    and  := unary ("&&" unary)*
    unary:= "!" unary | ("F"|"G") "[" num "," num ")" unary | "(" phi ")" | pred
    pred := ident ("<" | ">=") (num | "$" ident)

``!`` binds tighter than ``&&``, which binds tighter than ``||``; a
temporal operator applies to the immediately following unary term.
Interval endpoints accept ``$`` parameters as well as numerals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

__all__ = [
    "ParamRef",
    "Predicate",
    "Not",
    "And",
    "Or",
    "Finally",
    "Globally",
    "Formula",
    "ParameterSpec",
    "ParametricFormula",
    "Valuation",
    "FormulaError",
    "ParseError",
    "ValuationError",
    "parse_formula",
    "formula_to_text",
    "instantiate",
    "horizon",
    "free_parameters",
    "is_concrete",
]


class FormulaError(ValueError):
    """Structurally invalid formula or parameter set."""


class ParseError(FormulaError):
    """Syntax error, carrying 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValuationError(FormulaError):
    """A valuation does not bind a parametric formula correctly."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ParamRef:
    """Occurrence of a named parameter inside a formula."""

    name: str


Bound = Union[float, ParamRef]


@dataclass(frozen=True)
class Predicate:
    channel: str
    op: str  # "<" or ">="
    threshold: Bound

    def __post_init__(self):
        if self.op not in ("<", ">="):
            raise FormulaError(f"unsupported comparator {self.op!r}")
        if not isinstance(self.threshold, ParamRef):
            t = float(self.threshold)
            if t != t or t in (float("inf"), float("-inf")):
                raise FormulaError(f"threshold must be finite, got {t}")
            object.__setattr__(self, "threshold", t)


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


def _check_interval(a: Bound, b: Bound) -> None:
    if isinstance(a, ParamRef) or isinstance(b, ParamRef):
        return
    if a < 0 or b < 0:
        raise FormulaError(f"window endpoints must be non-negative, got [{a}, {b})")
    if not a < b:
        raise FormulaError(f"empty window [{a}, {b}): need a < b")
    if b == float("inf"):
        raise FormulaError("window upper endpoint must be finite")


@dataclass(frozen=True)
class Finally:
    a: Bound
    b: Bound
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Globally:
    a: Bound
    b: Bound
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


Formula = Union[Predicate, Not, And, Or, Finally, Globally]

#: A valuation assigns a real value to each parameter name.
Valuation = dict


@dataclass(frozen=True)
class ParameterSpec:
    """Search box and direction for one formula parameter.

    ``kind`` is "scale" for predicate thresholds and "time" for window
    endpoints. ``monotonicity`` states how the margin of the induced
    formula moves as this parameter grows ("increasing" or "decreasing");
    it may be left None until a synthesis step needs it.
    """

    name: str
    kind: str
    lower: float
    upper: float
    monotonicity: str | None = None

    def __post_init__(self):
        if self.kind not in ("scale", "time"):
            raise FormulaError(f"parameter kind must be scale/time, got {self.kind!r}")
        if not self.lower < self.upper:
            raise FormulaError(
                f"parameter {self.name}: need lower < upper, got [{self.lower}, {self.upper}]"
            )
        if self.kind == "time" and self.lower < 0:
            raise FormulaError(f"time parameter {self.name} needs lower >= 0")
        if self.monotonicity not in (None, "increasing", "decreasing"):
            raise FormulaError(f"bad monotonicity {self.monotonicity!r}")


@dataclass(frozen=True)
class ParametricFormula:
    """A formula template together with specs for every ``$`` parameter."""

    root: Formula
    params: tuple[ParameterSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        used = free_parameters(self.root)
        declared = {}
        for spec in self.params:
            if spec.name in declared:
                raise FormulaError(f"parameter {spec.name} declared twice")
            declared[spec.name] = spec
        missing = set(used) - set(declared)
        if missing:
            raise FormulaError(f"parameters without a spec: {sorted(missing)}")
        unused = set(declared) - set(used)
        if unused:
            raise FormulaError(f"specs for unused parameters: {sorted(unused)}")
        for name, kind in used.items():
            if declared[name].kind != kind:
                raise FormulaError(
                    f"parameter {name} used as {kind} but declared {declared[name].kind}"
                )

    def spec(self, name: str) -> ParameterSpec:
        for s in self.params:
            if s.name == name:
                return s
        raise KeyError(name)

    def with_parameter_specs(self, specs) -> "ParametricFormula":
        """Replace all parameter specs (names must match the template)."""
        return ParametricFormula(self.root, tuple(specs))


def free_parameters(node: Formula) -> dict[str, str]:
    """Map parameter name -> kind ("scale"/"time") over a formula.

    Raises if one name is used both as a threshold and as an endpoint.
    """
    out: dict[str, str] = {}

    def note(name: str, kind: str):
        if out.setdefault(name, kind) != kind:
            raise FormulaError(f"parameter {name} used as both scale and time")

    def walk(n: Formula):
        if isinstance(n, Predicate):
            if isinstance(n.threshold, ParamRef):
                note(n.threshold.name, "scale")
        elif isinstance(n, Not):
            walk(n.child)
        elif isinstance(n, (And, Or)):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, (Finally, Globally)):
            for end in (n.a, n.b):
                if isinstance(end, ParamRef):
                    note(end.name, "time")
            walk(n.child)
        else:
            raise FormulaError(f"not a formula node: {n!r}")

    walk(node)
    return out


def is_concrete(node: Formula) -> bool:
    return not free_parameters(node)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
    | (?P<param>\$[A-Za-z_][A-Za-z0-9_]*)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op>>=|&&|\|\||[!<>()\[\],)])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            got = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {got!r}", tok.line, tok.column)
        return self.advance()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.column)

    # grammar -------------------------------------------------------------

    def formula(self) -> Formula:
        node = self.and_term()
        while self.peek().text == "||":
            self.advance()
            node = Or(node, self.and_term())
        return node

    def and_term(self) -> Formula:
        node = self.unary()
        while self.peek().text == "&&":
            self.advance()
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.text == "!":
            self.advance()
            return Not(self.unary())
        if tok.text in ("F", "G"):
            self.advance()
            self.expect("[")
            a = self.bound("time")
            self.expect(",")
            b = self.bound("time")
            self.expect(")")
            child = self.unary()
            cls = Finally if tok.text == "F" else Globally
            try:
                return cls(a, b, child)
            except FormulaError as exc:
                raise ParseError(str(exc), tok.line, tok.column) from None
        if tok.text == "(":
            self.advance()
            node = self.formula()
            self.expect(")")
            return node
        if tok.kind == "ident":
            return self.predicate()
        self.fail(f"expected a formula, found {tok.text or 'end of input'!r}")

    def predicate(self) -> Predicate:
        chan = self.advance()
        op = self.peek()
        if op.text not in ("<", ">="):
            raise ParseError(
                f"expected comparator '<' or '>=', found {op.text or 'end of input'!r}",
                op.line,
                op.column,
            )
        self.advance()
        rhs = self.bound("scale")
        return Predicate(chan.text, op.text, rhs)

    def bound(self, kind: str) -> Bound:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return float(tok.text)
        if tok.kind == "param":
            self.advance()
            return ParamRef(tok.text[1:])
        self.fail(f"expected a number or $parameter, found {tok.text or 'end of input'!r}")


def parse_formula(text: str) -> ParametricFormula:
    """Parse formula text into a template.

    Each distinct ``$name`` gets a placeholder ParameterSpec whose kind is
    inferred from where it occurs (threshold -> scale, window endpoint ->
    time) and whose box is unbounded (times start at 0). Callers that run
    synthesis attach real boxes and monotonicity directions with
    :meth:`ParametricFormula.with_parameter_specs`.
    """
    parser = _Parser(text)
    root = parser.formula()
    trailing = parser.peek()
    if trailing.kind != "eof":
        raise ParseError(
            f"unexpected trailing input {trailing.text!r}", trailing.line, trailing.column
        )
    specs = []
    for name, kind in sorted(free_parameters(root).items()):
        lo = 0.0 if kind == "time" else float("-inf")
        specs.append(ParameterSpec(name, kind, lo, float("inf")))
    return ParametricFormula(root, tuple(specs))


# ---------------------------------------------------------------------------
# Printing

def _bound_text(x: Bound) -> str:
    if isinstance(x, ParamRef):
        return f"${x.name}"
    return repr(float(x))


def formula_to_text(node: Formula) -> str:
    """Render a formula; output re-parses to a structurally equal AST."""
    if isinstance(node, Predicate):
        return f"{node.channel} {node.op} {_bound_text(node.threshold)}"
    if isinstance(node, Not):
        return f"!{_wrap(node.child)}"
    if isinstance(node, And):
        return f"{_wrap(node.left)} && {_wrap(node.right)}"
    if isinstance(node, Or):
        return f"{_wrap(node.left)} || {_wrap(node.right)}"
    if isinstance(node, (Finally, Globally)):
        op = "F" if isinstance(node, Finally) else "G"
        return f"{op}[{_bound_text(node.a)},{_bound_text(node.b)}){_wrap(node.child)}"
    raise FormulaError(f"not a formula node: {node!r}")


def _wrap(node: Formula) -> str:
    # Parenthesize composite children; the grammar then reassembles the
    # exact tree regardless of operator precedence.
    return f"({formula_to_text(node)})"


# ---------------------------------------------------------------------------
# Instantiation and horizon


def instantiate(pf: ParametricFormula, valuation: Valuation) -> Formula:
    """Substitute a valuation into a template, yielding a concrete formula.

    Every parameter must be assigned, within its spec box; the induced
    windows must satisfy a < b. Constant subtrees pass through unchanged.
    """
    by_name = {s.name: s for s in pf.params}
    missing = set(by_name) - set(valuation)
    if missing:
        raise ValuationError(f"valuation missing parameters: {sorted(missing)}")
    for name, spec in by_name.items():
        v = float(valuation[name])
        if not (spec.lower <= v <= spec.upper):
            raise ValuationError(
                f"{name}={v} outside its box [{spec.lower}, {spec.upper}]"
            )

    def sub_bound(x: Bound) -> float:
        if isinstance(x, ParamRef):
            return float(valuation[x.name])
        return float(x)

    def walk(n: Formula) -> Formula:
        if isinstance(n, Predicate):
            if isinstance(n.threshold, ParamRef):
                return Predicate(n.channel, n.op, sub_bound(n.threshold))
            return n
        if isinstance(n, Not):
            return Not(walk(n.child))
        if isinstance(n, And):
            return And(walk(n.left), walk(n.right))
        if isinstance(n, Or):
            return Or(walk(n.left), walk(n.right))
        if isinstance(n, (Finally, Globally)):
            a, b = sub_bound(n.a), sub_bound(n.b)
            cls = Finally if isinstance(n, Finally) else Globally
            try:
                return cls(a, b, walk(n.child))
            except FormulaError as exc:
                raise ValuationError(str(exc)) from None
        raise FormulaError(f"not a formula node: {n!r}")

    return walk(pf.root)


def horizon(node: Formula) -> float:
    """Trace length (seconds past the evaluation time) the formula inspects.

    Predicates look only at the current sample; a temporal operator adds
    its upper endpoint on top of its child's needs; Boolean nodes take the
    max over children. Only defined for concrete formulas.
    """
    if isinstance(node, Predicate):
        if isinstance(node.threshold, ParamRef):
            raise FormulaError("horizon of a parametric formula is undefined")
        return 0.0
    if isinstance(node, Not):
        return horizon(node.child)
    if isinstance(node, (And, Or)):
        return max(horizon(node.left), horizon(node.right))
    if isinstance(node, (Finally, Globally)):
        if isinstance(node.a, ParamRef) or isinstance(node.b, ParamRef):
            raise FormulaError("horizon of a parametric formula is undefined")
        return float(node.b) + horizon(node.child)
    raise FormulaError(f"not a formula node: {node!r}")
