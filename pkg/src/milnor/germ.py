"""Polynomial map germs written in a tiny expression language.

A germ file declares its variables on the first line and then lists the
k component polynomials separated by ``;``::

    vars x y z
    x^2*z + y^3 - z;   # first component
    x

Grammar (whitespace is insignificant, ``#`` comments run to end of line)::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := atom ('^' UINT)?
    atom   := IDENT | RATIONAL | '(' expr ')' | '-' atom

Note that unary minus is an atom, so ``-x^2`` reads as ``(-x)^2``; the
parser emits a warning when it sees that pattern.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dual import Jet
from .numkernel import factorize

# ---------------------------------------------------------------------------
# Expression tree


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Var | Const | Add | Sub | Mul | Neg | Pow


def variables_used(expr: Expr) -> set[int]:
    if isinstance(expr, Var):
        return {expr.index}
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, (Add, Sub, Mul)):
        return variables_used(expr.left) | variables_used(expr.right)
    if isinstance(expr, Neg):
        return variables_used(expr.operand)
    return variables_used(expr.base)


def _compile(expr: Expr) -> Callable:
    # Closures work unchanged on floats as well as on Jets or numpy arrays.
    if isinstance(expr, Var):
        i = expr.index
        return lambda x: x[i]
    if isinstance(expr, Const):
        c = float(expr.value)
        return lambda x: c
    if isinstance(expr, Add):
        a, b = _compile(expr.left), _compile(expr.right)
        return lambda x: a(x) + b(x)
    if isinstance(expr, Sub):
        a, b = _compile(expr.left), _compile(expr.right)
        return lambda x: a(x) - b(x)
    if isinstance(expr, Mul):
        a, b = _compile(expr.left), _compile(expr.right)
        return lambda x: a(x) * b(x)
    if isinstance(expr, Neg):
        a = _compile(expr.operand)
        return lambda x: -a(x)
    if isinstance(expr, Pow):
        a, e = _compile(expr.base), expr.exponent
        return lambda x: a(x) ** e
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class ParseDiagnostic:
    """A parser or validator message. ``span`` is a half-open byte range."""

    message: str
    severity: str = "error"
    span: tuple[int, int] | None = None

    def to_dict(self):
        return {"message": self.message, "severity": self.severity,
                "span": list(self.span) if self.span is not None else None}


class GermSyntaxError(ValueError):
    def __init__(self, diagnostics: Sequence[ParseDiagnostic]):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0]
        where = f" at bytes {first.span[0]}-{first.span[1]}" if first.span else ""
        extra = len(self.diagnostics) - 1
        more = f" (+{extra} more)" if extra else ""
        super().__init__(f"{first.message}{where}{more}")


class DimensionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Map germs


@dataclass(frozen=True)
class MapGerm:
    name: str
    variables: tuple[str, ...]
    components: tuple[Expr, ...]
    warnings: tuple[ParseDiagnostic, ...] = ()
    _funcs: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_funcs", tuple(_compile(c) for c in self.components))

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def k(self) -> int:
        return len(self.components)

    def __call__(self, x):
        return evaluate(self, x)

    def jacobian(self, x):
        return jacobian(self, x)


def _check_point(germ: MapGerm, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (germ.n,):
        raise DimensionError(f"{germ.name}: expected a point in R^{germ.n}, got shape {x.shape}")
    return x


def evaluate(germ: MapGerm, x) -> np.ndarray:
    x = _check_point(germ, x)
    xs = [float(v) for v in x]
    return np.array([float(f(xs)) for f in germ._funcs])


def jacobian(germ: MapGerm, x) -> np.ndarray:
    """k x n Jacobian computed with first-order jets."""
    x = _check_point(germ, x)
    n = germ.n
    jets = [Jet.variable(v, i, n) for i, v in enumerate(x)]
    rows = []
    for f in germ._funcs:
        out = f(jets)
        rows.append(out.grad if isinstance(out, Jet) else np.zeros(n))
    return np.array(rows).reshape(germ.k, n)


def value_and_jacobian(germ: MapGerm, x) -> tuple[np.ndarray, np.ndarray]:
    x = _check_point(germ, x)
    n = germ.n
    jets = [Jet.variable(v, i, n) for i, v in enumerate(x)]
    vals, rows = [], []
    for f in germ._funcs:
        out = f(jets)
        if isinstance(out, Jet):
            vals.append(out.value)
            rows.append(out.grad)
        else:
            vals.append(float(out))
            rows.append(np.zeros(n))
    return np.array(vals), np.array(rows).reshape(germ.k, n)


# ---------------------------------------------------------------------------
# Lexer / parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<decimal>\d+\.\d*|\.\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*^/();])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    start: int
    end: int


class _Fail(Exception):
    pass


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.diagnostics: list[ParseDiagnostic] = []
        self._byte_offsets = None

    def _bytes(self, i: int) -> int:
        if self._byte_offsets is None:
            offs = [0]
            for ch in self.source:
                offs.append(offs[-1] + len(ch.encode("utf-8")))
            self._byte_offsets = offs
        return self._byte_offsets[i]

    def error(self, message, start, end, severity="error"):
        self.diagnostics.append(ParseDiagnostic(
            message, severity, (self._bytes(start), self._bytes(max(end, start)))))

    def tokenize(self, start: int) -> list[_Tok]:
        toks = []
        pos = start
        src = self.source
        while pos < len(src):
            m = _TOKEN_RE.match(src, pos)
            if m is None:
                self.error(f"unexpected character {src[pos]!r}", pos, pos + 1)
                pos += 1
                continue
            kind = m.lastgroup
            if kind not in ("ws", "comment"):
                toks.append(_Tok(kind, m.group(), m.start(), m.end()))
            pos = m.end()
        toks.append(_Tok("eof", "", len(src), len(src)))
        return toks

    # header ---------------------------------------------------------------

    def parse_header(self) -> tuple[list[str], int]:
        src = self.source
        pos = 0
        for line in src.splitlines(keepends=True):
            body = line.split("#", 1)[0]
            if body.strip():
                break
            pos += len(line)
        else:
            self.error("empty germ: expected a 'vars' line", 0, len(src))
            raise _Fail
        end = src.find("\n", pos)
        end = len(src) if end < 0 else end
        line = src[pos:end].split("#", 1)[0]
        words = [(m.group(), pos + m.start(), pos + m.end())
                 for m in re.finditer(r"\S+", line)]
        if not words or words[0][0] != "vars":
            s, e = (words[0][1], words[0][2]) if words else (pos, end)
            self.error("first line must be 'vars' followed by variable names", s, e)
            raise _Fail
        names = []
        for word, s, e in words[1:]:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", word):
                self.error(f"invalid variable name {word!r}", s, e)
            elif word in names:
                self.error(f"variable {word!r} declared twice", s, e)
            elif word == "vars":
                self.error("'vars' is reserved", s, e)
            else:
                names.append(word)
        if not names:
            self.error("'vars' declares no variables", words[0][1], words[0][2])
            raise _Fail
        return names, end

    # body -----------------------------------------------------------------

    def parse(self, name: str) -> MapGerm:
        try:
            names, body_start = self.parse_header()
        except _Fail:
            raise GermSyntaxError(self.diagnostics) from None
        self.index = {v: i for i, v in enumerate(names)}
        self.toks = self.tokenize(body_start)
        self.pos = 0
        components = []
        while self.peek().kind != "eof":
            try:
                components.append(self.expr())
                tok = self.peek()
                if tok.text == ";":
                    self.pos += 1
                elif tok.kind != "eof":
                    self.error(f"expected ';' or end of input, found {tok.text!r}",
                               tok.start, tok.end)
                    raise _Fail
            except _Fail:
                self.skip_component()
        if not components and not self.has_errors():
            self.error("germ has no components", body_start, len(self.source))
        if self.has_errors():
            raise GermSyntaxError([d for d in self.diagnostics if d.severity == "error"]
                                  + [d for d in self.diagnostics if d.severity != "error"])
        return MapGerm(name, tuple(names), tuple(components), tuple(self.diagnostics))

    def has_errors(self):
        return any(d.severity == "error" for d in self.diagnostics)

    def skip_component(self):
        while self.peek().kind != "eof" and self.peek().text != ";":
            self.pos += 1
        if self.peek().text == ";":
            self.pos += 1

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().text == "*":
            self.take()
            node = Mul(node, self.factor())
        return node

    def factor(self) -> Expr:
        first = self.peek()
        base = self.atom()
        if self.peek().text != "^":
            return base
        caret = self.take()
        tok = self.peek()
        if tok.kind == "int":
            self.take()
            if self.peek().text == "/":
                self.error("non-integer exponent: exponents must be integers >= 0",
                           caret.start, self.toks[self.pos + 1].end)
                raise _Fail
            if first.text == "-":
                self.error(f"'-...^{tok.text}' parses as (-...)^{tok.text}; "
                           "parenthesize to negate a power", first.start, tok.end,
                           severity="warning")
            return Pow(base, int(tok.text))
        # Exponent is not an unsigned integer literal: diagnose and recover.
        if tok.kind == "decimal" or tok.text in ("-", "("):
            end = tok.end
            if tok.text == "(":
                depth = 0
                for t in self.toks[self.pos:]:
                    depth += t.text == "("
                    depth -= t.text == ")"
                    end = t.end
                    if depth == 0 or t.kind == "eof":
                        break
            self.error("non-integer exponent: exponents must be integers >= 0",
                       caret.start, end)
        else:
            self.error(f"expected integer exponent after '^', found {tok.text or 'end of input'!r}",
                       tok.start, tok.end)
        raise _Fail

    def atom(self) -> Expr:
        tok = self.take()
        if tok.kind == "ident":
            if tok.text not in self.index:
                self.error(f"undeclared variable {tok.text!r}", tok.start, tok.end)
                return Var(-1, tok.text)
            return Var(self.index[tok.text], tok.text)
        if tok.kind == "int":
            num = int(tok.text)
            if self.peek().text == "/":
                slash = self.take()
                den = self.peek()
                if den.kind != "int":
                    self.error("expected a positive integer denominator", slash.start,
                               den.end if den.kind != "eof" else slash.end)
                    raise _Fail
                self.take()
                if int(den.text) == 0:
                    self.error("zero denominator", den.start, den.end)
                    raise _Fail
                return Const(Fraction(num, int(den.text)))
            return Const(Fraction(num))
        if tok.kind == "decimal":
            self.error(f"decimal constant {tok.text!r} not supported; use a rational like 3/2",
                       tok.start, tok.end)
            raise _Fail
        if tok.text == "(":
            node = self.expr()
            close = self.take()
            if close.text != ")":
                self.error("expected ')'", close.start, close.end)
                raise _Fail
            return node
        if tok.text == "-":
            return Neg(self.atom())
        if tok.kind == "eof":
            self.error("unexpected end of input", tok.start, tok.end)
        elif tok.text == "/":
            self.error("'/' is only allowed inside rational constants (integer/integer)",
                       tok.start, tok.end)
        else:
            self.error(f"unexpected {tok.text!r}", tok.start, tok.end)
        raise _Fail


def parse_germ(source: str, name: str = "germ") -> MapGerm:
    """Parse germ source text; raises GermSyntaxError with diagnostics."""
    return _Parser(source).parse(name)


def load_germ(path) -> MapGerm:
    path = Path(path)
    return parse_germ(path.read_text(encoding="utf-8"), name=path.stem)


# ---------------------------------------------------------------------------
# Pretty printing

_EXPR, _TERM, _FACTOR, _ATOM = range(4)


def _const_text(c: Fraction) -> str:
    body = str(abs(c.numerator)) if c.denominator == 1 else f"{abs(c.numerator)}/{c.denominator}"
    return "-" + body if c < 0 else body


def format_expr(expr: Expr, level: int = _EXPR) -> str:
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Const):
        text = _const_text(expr.value)
        if level == _ATOM and expr.value.denominator != 1:
            return f"({text})"
        return text
    if isinstance(expr, (Add, Sub)):
        op = " + " if isinstance(expr, Add) else " - "
        text = format_expr(expr.left, _EXPR) + op + format_expr(expr.right, _TERM)
        return f"({text})" if level > _EXPR else text
    if isinstance(expr, Mul):
        text = format_expr(expr.left, _TERM) + "*" + format_expr(expr.right, _FACTOR)
        return f"({text})" if level > _TERM else text
    if isinstance(expr, Neg):
        return "-" + format_expr(expr.operand, _ATOM)
    if isinstance(expr, Pow):
        text = format_expr(expr.base, _ATOM) + "^" + str(expr.exponent)
        return f"({text})" if level > _FACTOR else text
    raise TypeError(f"not an expression node: {expr!r}")


def format_germ(germ: MapGerm) -> str:
    lines = ["vars " + " ".join(germ.variables)]
    lines.append(";\n".join(format_expr(c) for c in germ.components))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation


def validate(germ: MapGerm, rank_tol: float = 1e-10, seed: int = 0) -> list[ParseDiagnostic]:
    """Heuristic warnings about the germ conventions; never raises."""
    out: list[ParseDiagnostic] = []

    def warn(msg):
        out.append(ParseDiagnostic(msg, "warning"))

    n, k = germ.n, germ.k
    if n < 2:
        warn(f"source dimension n = {n} < 2")
    if k < 2:
        warn(f"target dimension k = {k} < 2")
    if k > n:
        warn(f"k = {k} > n = {n}; the map cannot be a submersion anywhere")
    zero = np.zeros(n)
    f0 = evaluate(germ, zero)
    if np.any(f0 != 0.0):
        warn(f"f(0) = {f0.tolist()} != 0; not a germ at the origin")
    for i, comp in enumerate(germ.components):
        if not variables_used(comp):
            warn(f"component {i + 1} is constant ({format_expr(comp)})")
    J0 = jacobian(germ, zero)
    r0 = factorize(J0, rank_tol).rank
    if r0 == k:
        warn(f"rank(Df(0)) = {r0} = k; origin is a regular point")
    # Generic rank below k means the components are functionally dependent.
    rng = np.random.default_rng(seed)
    generic = max(factorize(jacobian(germ, rng.uniform(-1, 1, n)), rank_tol).rank
                  for _ in range(5))
    if generic < k:
        warn(f"components not independent: Jacobian rank {generic} < k = {k} "
             "at generic points (map is not locally surjective)")
    return out
