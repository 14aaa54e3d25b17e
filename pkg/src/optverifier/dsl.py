"""Formulation language for constraints and objectives.

The grammar is published as :data:`GRAMMAR`.

Index sets are parameter symbols whose value is a list of non-negative
integers (used directly as positions) or a scalar integer ``N`` meaning
``0..N-1``.  Strict inequalities are rejected, as is any product containing
two decision-variable references.

Whether a reference is a parameter or a decision variable is decided by the
``variables`` collection passed to the parse functions; without it every
reference parses as a :class:`ParamRef` and linearity cannot be checked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Collection, Iterator, Union

from .errors import DslError

GRAMMAR = """\
constraint := expr relop expr quant*
            | ref "in" ("Integers" | "Binary") quant*
quant      := "forall" ident "in" ident guard?
guard      := "if" ident ("!=" | "<" | "<=" | ">" | ">=") ident
expr       := term (("+" | "-") term)*
term       := "-" term | atom ("*" atom)*
atom       := number | ref | "sum(" binders "," expr ")" | "(" expr ")"
binders    := ident "in" ident ("," ident "in" ident)* guard?
ref        := ident ("[" index ("," index)* "]")?
index      := ident | integer
relop      := "<=" | ">=" | "==" | "="
"""

RELOPS = ("<=", ">=", "==")
GUARD_OPS = ("!=", "<", "<=", ">", ">=")
DOMAINS = ("Integers", "Binary")
KEYWORDS = {"sum", "forall", "in", "if"}

Pos = tuple  # (line, column), both 1-based


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: int | float
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ParamRef:
    symbol: str
    indices: tuple = ()
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class VarRef:
    symbol: str
    indices: tuple = ()
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ScalarMul:
    left: "Expr"
    right: "Expr"
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binder:
    index: str
    index_set: str


@dataclass(frozen=True)
class Guard:
    left: str
    op: str
    right: str


@dataclass(frozen=True)
class Sum:
    binders: tuple[Binder, ...]
    guard: Guard | None
    body: "Expr"
    pos: Pos | None = field(default=None, compare=False, repr=False)


Expr = Union[Num, ParamRef, VarRef, Neg, Add, Sub, ScalarMul, Sum]


@dataclass(frozen=True)
class Quantifier:
    index: str
    index_set: str
    guard: Guard | None = None


@dataclass(frozen=True)
class ConstraintAst:
    lhs: Expr
    relop: str
    rhs: Expr
    quantifiers: tuple[Quantifier, ...] = ()
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DomainDecl:
    """``x[i] in Integers forall i in Items``; lowered to a variable type when grounding."""

    target: VarRef | ParamRef
    domain: str
    quantifiers: tuple[Quantifier, ...] = ()
    pos: Pos | None = field(default=None, compare=False, repr=False)


Statement = Union[ConstraintAst, DomainDecl]


# ----------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[<>=+\-*(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | op | eof
    text: str
    line: int
    column: int


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = _line_col(text, pos)
            ch = text[pos]
            hint = ""
            if ch == "\\":
                hint = " (LaTeX commands are not part of the formulation language)"
            elif ch == "/":
                hint = " (division is not supported)"
            raise DslError(f"unexpected character {ch!r}{hint}", "SYNTAX_ERROR", line, col)
        kind = m.lastgroup
        if kind != "ws":
            line, col = _line_col(text, pos)
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    line, col = _line_col(text, len(text))
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str, variables: Collection[str] | None):
        if not text or not text.strip():
            raise DslError("empty formulation", "SYNTAX_ERROR", 1, 1)
        self.tokens = tokenize(text)
        self.i = 0
        self.variables = variables

    # token helpers
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind in ("op", "ident") and tok.text == text

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok: Token | None = None) -> DslError:
        tok = tok or self.peek()
        return DslError(message, "SYNTAX_ERROR", tok.line, tok.column)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.peek().text or "end of input"
            raise self.fail(f"expected {text!r}, found {found!r}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.fail(f"expected {what}, found {tok.text or 'end of input'!r}")
        return self.advance()

    def expect_eof(self) -> None:
        if self.peek().kind != "eof":
            tok = self.peek()
            if tok.text in ("<", ">"):
                raise _strict_error(tok)
            raise self.fail(f"unexpected {tok.text!r}")

    # grammar
    def constraint(self) -> Statement:
        start = self.peek()
        lhs = self.expr()
        if self.at("in"):
            self.advance()
            dom = self.ident("domain name")
            if dom.text not in DOMAINS:
                raise self.fail(f"unknown domain {dom.text!r}; expected one of {DOMAINS}", dom)
            if not isinstance(lhs, (VarRef, ParamRef)):
                raise self.fail("domain declarations apply to a single reference", start)
            quants = self.quantifiers()
            self.expect_eof()
            return DomainDecl(lhs, dom.text, quants, pos=(start.line, start.column))
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("<", ">"):
            raise _strict_error(tok)
        if tok.kind == "op" and tok.text in ("<=", ">=", "==", "="):
            self.advance()
            relop = "==" if tok.text == "=" else tok.text
        else:
            raise self.fail(f"expected a relational operator, found {tok.text or 'end of input'!r}")
        rhs = self.expr()
        quants = self.quantifiers()
        self.expect_eof()
        return ConstraintAst(lhs, relop, rhs, quants, pos=(start.line, start.column))

    def quantifiers(self) -> tuple[Quantifier, ...]:
        quants = []
        while self.at("forall"):
            self.advance()
            idx = self.ident("index name").text
            self.expect("in")
            iset = self.ident("index set").text
            guard = self.guard() if self.at("if") else None
            quants.append(Quantifier(idx, iset, guard))
        return tuple(quants)

    def guard(self) -> Guard:
        self.expect("if")
        left = self.ident("index name").text
        tok = self.peek()
        if tok.kind != "op" or tok.text not in GUARD_OPS:
            raise self.fail(f"expected a comparison in guard, found {tok.text!r}")
        self.advance()
        right = self.ident("index name").text
        return Guard(left, tok.text, right)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            tok = self.advance()
            right = self.term()
            cls = Add if tok.text == "+" else Sub
            node = cls(node, right, pos=(tok.line, tok.column))
        return node

    def term(self) -> Expr:
        if self.at("-"):
            tok = self.advance()
            return Neg(self.term(), pos=(tok.line, tok.column))
        node = self.atom()
        while self.at("*"):
            tok = self.advance()
            right = self.atom()
            node = ScalarMul(node, right, pos=(tok.line, tok.column))
        return node

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            text = tok.text
            value = int(text) if re.fullmatch(r"\d+", text) else float(text)
            return Num(value, pos=(tok.line, tok.column))
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident" and tok.text == "sum" and self.at("(", 1):
            return self.sum()
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            return self.ref()
        raise self.fail(f"expected a number, reference, sum(...) or '(', found {tok.text or 'end of input'!r}")

    def sum(self) -> Sum:
        start = self.advance()
        self.expect("(")
        binders = [self.binder()]
        while self.at(",") and self.peek(1).kind == "ident" and self.at("in", 2):
            self.advance()
            binders.append(self.binder())
        guard = self.guard() if self.at("if") else None
        self.expect(",")
        body = self.expr()
        self.expect(")")
        return Sum(tuple(binders), guard, body, pos=(start.line, start.column))

    def binder(self) -> Binder:
        idx = self.ident("index name").text
        self.expect("in")
        iset = self.ident("index set").text
        return Binder(idx, iset)

    def ref(self) -> Expr:
        tok = self.advance()
        indices = []
        if self.at("["):
            self.advance()
            while True:
                t = self.peek()
                if t.kind == "number" and t.text.isdigit():
                    indices.append(int(self.advance().text))
                else:
                    indices.append(self.ident("index").text)
                if self.at(","):
                    self.advance()
                    continue
                self.expect("]")
                break
        pos = (tok.line, tok.column)
        if self.variables is not None and tok.text in self.variables:
            return VarRef(tok.text, tuple(indices), pos=pos)
        return ParamRef(tok.text, tuple(indices), pos=pos)


def _strict_error(tok: Token) -> DslError:
    return DslError(
        f"strict inequality {tok.text!r} is not allowed; always use non-strict inequalities (<= or >=)",
        "NONSTRICT_REQUIRED",
        tok.line,
        tok.column,
    )


# ------------------------------------------------------------------- checking


def degree(node: Expr) -> int:
    """Polynomial degree in the decision variables; raises NONLINEAR above 1."""
    if isinstance(node, (Num, ParamRef)):
        return 0
    if isinstance(node, VarRef):
        return 1
    if isinstance(node, Neg):
        return degree(node.operand)
    if isinstance(node, (Add, Sub)):
        return max(degree(node.left), degree(node.right))
    if isinstance(node, ScalarMul):
        d = degree(node.left) + degree(node.right)
        if d > 1:
            line, col = node.pos or (None, None)
            raise DslError("product of decision variables is not linear", "NONLINEAR", line, col)
        return d
    if isinstance(node, Sum):
        return degree(node.body)
    raise TypeError(f"not an expression node: {node!r}")


def _check_bound(node: Expr, scope: frozenset[str]) -> None:
    if isinstance(node, (ParamRef, VarRef)):
        for idx in node.indices:
            if isinstance(idx, str) and idx not in scope:
                line, col = node.pos or (None, None)
                raise DslError(f"index {idx!r} in {node.symbol} is not bound", "UNBOUND_INDEX", line, col)
    elif isinstance(node, Neg):
        _check_bound(node.operand, scope)
    elif isinstance(node, (Add, Sub, ScalarMul)):
        _check_bound(node.left, scope)
        _check_bound(node.right, scope)
    elif isinstance(node, Sum):
        inner = scope | {b.index for b in node.binders}
        if node.guard is not None:
            _check_guard(node.guard, inner, node.pos)
        _check_bound(node.body, inner)


def _check_guard(guard: Guard, scope: frozenset[str], pos) -> None:
    for name in (guard.left, guard.right):
        if name not in scope:
            line, col = pos or (None, None)
            raise DslError(f"guard index {name!r} is not bound", "UNBOUND_INDEX", line, col)


def _check_statement(stmt: Statement) -> None:
    scope = frozenset(q.index for q in stmt.quantifiers)
    for q in stmt.quantifiers:
        if q.guard is not None:
            _check_guard(q.guard, scope, stmt.pos)
    if isinstance(stmt, DomainDecl):
        _check_bound(stmt.target, scope)
        return
    degree(stmt.lhs)
    degree(stmt.rhs)
    _check_bound(stmt.lhs, scope)
    _check_bound(stmt.rhs, scope)


# ------------------------------------------------------------------ public API


def parse_constraint(text: str, variables: Collection[str] | None = None) -> Statement:
    """Parse one constraint (or domain declaration) and check linearity and index binding."""
    stmt = _Parser(text, variables).constraint()
    _check_statement(stmt)
    return stmt


def parse_expression(text: str, variables: Collection[str] | None = None) -> Expr:
    parser = _Parser(text, variables)
    node = parser.expr()
    parser.expect_eof()
    degree(node)
    _check_bound(node, frozenset())
    return node


def _fmt_number(value: int | float) -> str:
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        return str(value)
    text = repr(float(value))
    return text


def _paren(node: Expr, wrap: tuple) -> str:
    text = print_canonical(node)
    return f"({text})" if isinstance(node, wrap) else text


def _print_guard(guard: Guard | None) -> str:
    return "" if guard is None else f" if {guard.left} {guard.op} {guard.right}"


def _print_quants(quants) -> str:
    return "".join(f" forall {q.index} in {q.index_set}{_print_guard(q.guard)}" for q in quants)


def print_canonical(node) -> str:
    """Deterministic text form; ``parse(print_canonical(ast)) == ast``."""
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, (ParamRef, VarRef)):
        if not node.indices:
            return node.symbol
        return f"{node.symbol}[{','.join(str(i) for i in node.indices)}]"
    if isinstance(node, Neg):
        return "-" + _paren(node.operand, (Add, Sub, Neg))
    if isinstance(node, Add):
        return f"{print_canonical(node.left)} + {_paren(node.right, (Add, Sub))}"
    if isinstance(node, Sub):
        return f"{print_canonical(node.left)} - {_paren(node.right, (Add, Sub))}"
    if isinstance(node, ScalarMul):
        left = _paren(node.left, (Add, Sub, Neg))
        right = _paren(node.right, (Add, Sub, Neg, ScalarMul))
        return f"{left} * {right}"
    if isinstance(node, Sum):
        binders = ", ".join(f"{b.index} in {b.index_set}" for b in node.binders)
        return f"sum({binders}{_print_guard(node.guard)}, {print_canonical(node.body)})"
    if isinstance(node, ConstraintAst):
        lhs = print_canonical(node.lhs)
        rhs = print_canonical(node.rhs)
        return f"{lhs} {node.relop} {rhs}{_print_quants(node.quantifiers)}"
    if isinstance(node, DomainDecl):
        return f"{print_canonical(node.target)} in {node.domain}{_print_quants(node.quantifiers)}"
    raise TypeError(f"cannot print {node!r}")


def walk(node) -> Iterator:
    """Pre-order traversal over expression and statement nodes."""
    yield node
    if isinstance(node, Neg):
        yield from walk(node.operand)
    elif isinstance(node, (Add, Sub, ScalarMul)):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Sum):
        yield from walk(node.body)
    elif isinstance(node, ConstraintAst):
        yield from walk(node.lhs)
        yield from walk(node.rhs)
    elif isinstance(node, DomainDecl):
        yield from walk(node.target)


def referenced_symbols(node) -> set[str]:
    """Parameter/variable symbols and index-set symbols referenced by ``node``."""
    out: set[str] = set()
    for n in walk(node):
        if isinstance(n, (ParamRef, VarRef)):
            out.add(n.symbol)
        elif isinstance(n, Sum):
            out.update(b.index_set for b in n.binders)
    if isinstance(node, (ConstraintAst, DomainDecl)):
        out.update(q.index_set for q in node.quantifiers)
    return out
