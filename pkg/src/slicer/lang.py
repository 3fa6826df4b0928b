"""Mini imperative language: tokenizer, recursive-descent parser, printer, lowering to a CFA."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .cfa import Cfa, Edge
from .formula import FALSE, TRUE, Formula, LinExpr, Var, compare, conj, disj, eq, neg

# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError("line and column are 1-based")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def _span() -> SourceSpan | None:
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cmp:
    lhs: LinExpr
    op: str
    rhs: LinExpr
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class BNot:
    arg: "BExpr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class BAnd:
    lhs: "BExpr"
    rhs: "BExpr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class BOr:
    lhs: "BExpr"
    rhs: "BExpr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class BNondet:
    span: SourceSpan | None = _span()


BExpr = Union[Cmp, BNot, BAnd, BOr, BNondet]


@dataclass(frozen=True)
class Decl:
    names: tuple[str, ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Assign:
    target: str
    expr: LinExpr
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Havoc:
    target: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Assume:
    cond: BExpr
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Assert:
    cond: BExpr
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class If:
    cond: BExpr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] | None = None
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class While:
    cond: BExpr
    body: tuple["Stmt", ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Skip:
    span: SourceSpan | None = _span()


Stmt = Union[Decl, Assign, Havoc, Assume, Assert, If, While, Skip]


@dataclass(frozen=True)
class Program:
    statements: tuple[Stmt, ...]
    variables: tuple[str, ...]


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan | None = None):
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}" if span else message)


# --------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*<>=!(){};,])
""", re.VERBOSE)

KEYWORDS = {"int", "nondet", "assume", "assert", "if", "else", "while", "skip"}


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    span: SourceSpan


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        span = SourceSpan(line, pos - line_start + 1, 1)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind, tok = m.lastgroup, m.group()
        if kind == "ws":
            for i, ch in enumerate(tok):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            if kind == "ident" and tok in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, tok, SourceSpan(span.line, span.column, len(tok))))
        pos = m.end()
    out.append(Token("eof", "", SourceSpan(line, pos - line_start + 1, 0)))
    return out


# --------------------------------------------------------------------------
# parser

_CMP = {"==", "!=", "<", "<=", ">", ">="}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0
        self.declared: set[str] = set()
        self.order: list[str] = []

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.span)
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise ParseError(f"expected identifier, found {found!r}", self.tok.span)
        t = self.advance()
        if t.text.startswith("__"):
            raise ParseError(f"identifier {t.text!r} uses the reserved '__' prefix", t.span)
        return t

    def declare(self, name: str) -> None:
        if name not in self.declared:
            self.declared.add(name)
            self.order.append(name)

    # program structure

    def program(self) -> Program:
        items = []
        while self.tok.kind != "eof":
            items.append(self.decl() if self.at("int") else self.stmt())
        return Program(tuple(items), tuple(self.order))

    def decl(self) -> Decl:
        start = self.expect("int").span
        names = [self.ident().text]
        while self.at(","):
            self.advance()
            names.append(self.ident().text)
        self.expect(";")
        for n in names:
            self.declare(n)
        return Decl(tuple(names), start)

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise ParseError("unterminated block", self.tok.span)
            body.append(self.stmt())
        self.advance()
        return tuple(body)

    def stmt(self) -> Stmt:
        t = self.tok
        if t.kind == "ident":
            name = self.ident().text
            self.expect("=")
            if self.at("nondet") and self.peek().text == "(":
                self.advance()
                self.expect("(")
                self.expect(")")
                self.expect(";")
                self.declare(name)
                return Havoc(name, t.span)
            e = self.expr()
            self.expect(";")
            self.declare(name)
            return Assign(name, e, t.span)
        if self.at("assume") or self.at("assert"):
            kw = self.advance().text
            self.expect("(")
            c = self.bexpr()
            self.expect(")")
            self.expect(";")
            return (Assume if kw == "assume" else Assert)(c, t.span)
        if self.at("if"):
            self.advance()
            self.expect("(")
            c = self.bexpr()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.at("else"):
                self.advance()
                orelse = self.block()
            return If(c, then, orelse, t.span)
        if self.at("while"):
            self.advance()
            self.expect("(")
            c = self.bexpr()
            self.expect(")")
            return While(c, self.block(), t.span)
        if self.at("skip"):
            self.advance()
            self.expect(";")
            return Skip(t.span)
        if self.at("int"):
            raise ParseError("declarations are only allowed at top level", t.span)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.span)

    # arithmetic

    def expr(self) -> LinExpr:
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> LinExpr:
        start = self.tok.span
        e = self.unary()
        while self.at("*"):
            self.advance()
            rhs = self.unary()
            if e.coeffs and rhs.coeffs:
                raise ParseError("non-linear product of two variable terms", start)
            e = e * rhs
        return e

    def unary(self) -> LinExpr:
        if self.at("-"):
            self.advance()
            return self.unary() * -1
        if self.at("+"):
            self.advance()
            return self.unary()
        t = self.tok
        if t.kind == "int":
            self.advance()
            return LinExpr.of(int(t.text))
        if t.kind == "ident":
            self.ident()
            if t.text not in self.declared:
                raise ParseError(f"use of undeclared identifier {t.text!r}", t.span)
            return LinExpr.of(Var(t.text))
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"expected expression, found {t.text or 'end of input'!r}", t.span)

    # boolean conditions

    def bexpr(self) -> BExpr:
        e = self.bconj()
        while self.at("||"):
            span = self.advance().span
            e = BOr(e, self.bconj(), span)
        return e

    def bconj(self) -> BExpr:
        e = self.bunary()
        while self.at("&&"):
            span = self.advance().span
            e = BAnd(e, self.bunary(), span)
        return e

    def bunary(self) -> BExpr:
        t = self.tok
        if self.at("!"):
            self.advance()
            return BNot(self.bunary(), t.span)
        if self.at("nondet"):
            self.advance()
            self.expect("(")
            self.expect(")")
            return BNondet(t.span)
        save = self.pos
        try:
            lhs = self.expr()
            if self.tok.text not in _CMP or self.tok.kind != "op":
                raise ParseError(f"expected comparison, found {self.tok.text or 'end of input'!r}",
                                 self.tok.span)
            op = self.advance().text
            return Cmp(lhs, op, self.expr(), t.span)
        except ParseError as err:
            if not self.toks[save].text == "(":
                raise
            first = err
        self.pos = save
        self.advance()
        try:
            e = self.bexpr()
            self.expect(")")
        except ParseError as err:
            # report whichever attempt got further
            raise max(first, err, key=lambda x: (x.span.line, x.span.column) if x.span else (0, 0))
        return e


def parse_program(text: str) -> Program:
    return _Parser(text).program()


# --------------------------------------------------------------------------
# pretty printer


def format_bexpr(b: BExpr) -> str:
    if isinstance(b, Cmp):
        return f"{b.lhs} {b.op} {b.rhs}"
    if isinstance(b, BNondet):
        return "nondet()"
    if isinstance(b, BNot):
        return f"!({format_bexpr(b.arg)})"
    sym = "&&" if isinstance(b, BAnd) else "||"
    return f"({format_bexpr(b.lhs)}) {sym} ({format_bexpr(b.rhs)})"


def _format_block(stmts, indent: int) -> Iterator[str]:
    pad = "    " * indent
    for s in stmts:
        if isinstance(s, Decl):
            yield f"{pad}int {', '.join(s.names)};"
        elif isinstance(s, Assign):
            yield f"{pad}{s.target} = {s.expr};"
        elif isinstance(s, Havoc):
            yield f"{pad}{s.target} = nondet();"
        elif isinstance(s, Assume):
            yield f"{pad}assume({format_bexpr(s.cond)});"
        elif isinstance(s, Assert):
            yield f"{pad}assert({format_bexpr(s.cond)});"
        elif isinstance(s, Skip):
            yield f"{pad}skip;"
        elif isinstance(s, If):
            yield f"{pad}if ({format_bexpr(s.cond)}) {{"
            yield from _format_block(s.then, indent + 1)
            if s.orelse is not None:
                yield f"{pad}}} else {{"
                yield from _format_block(s.orelse, indent + 1)
            yield f"{pad}}}"
        elif isinstance(s, While):
            yield f"{pad}while ({format_bexpr(s.cond)}) {{"
            yield from _format_block(s.body, indent + 1)
            yield f"{pad}}}"
        else:  # pragma: no cover
            raise TypeError(s)


def format_program(p: Program) -> str:
    return "\n".join(_format_block(p.statements, 0)) + "\n"


# --------------------------------------------------------------------------
# lowering


def _cmp_formula(c: Cmp) -> Formula:
    op = {"==": "=", "!=": "!="}.get(c.op, c.op)
    return compare(c.lhs, op, c.rhs)


def condition(b: BExpr, value: bool = True) -> Formula:
    """States from which ``b`` may evaluate to ``value``.

    Each ``nondet()`` occurrence is an independent coin, so the projection
    distributes over the boolean structure exactly.
    """
    if isinstance(b, BNondet):
        return TRUE
    if isinstance(b, Cmp):
        f = _cmp_formula(b)
        return f if value else neg(f)
    if isinstance(b, BNot):
        return condition(b.arg, not value)
    both = (condition(b.lhs, value), condition(b.rhs, value))
    if isinstance(b, BAnd) == value:
        return conj(*both)
    return disj(*both)


class _Lowering:
    def __init__(self, variables: tuple[str, ...]):
        self.vars = tuple(sorted(Var(n) for n in variables))
        self.labels: dict[int, str] = {}
        self.edges: list[Edge] = []
        self.error: int | None = None

    def node(self, label: str) -> int:
        n = len(self.labels)
        self.labels[n] = label
        return n

    def frame(self, assigned=()) -> Formula:
        return conj([eq(v.prime(), v) for v in self.vars if v not in assigned])

    def edge(self, src: int, dst: int, f: Formula) -> None:
        if f != FALSE:
            self.edges.append(Edge(src, dst, f, len(self.edges)))

    def error_node(self) -> int:
        if self.error is None:
            self.error = self.node("error")
        return self.error

    def block(self, stmts, cur: int) -> int:
        for s in stmts:
            cur = self.stmt(s, cur)
        return cur

    def stmt(self, s: Stmt, cur: int) -> int:
        where = f"L{s.span.line}" if s.span else f"S{len(self.labels)}"
        if isinstance(s, (Decl, Skip)):
            return cur
        if isinstance(s, Assign):
            v = Var(s.target)
            nxt = self.node(f"{where}:assign")
            self.edge(cur, nxt, conj(eq(v.prime(), s.expr), self.frame({v})))
            return nxt
        if isinstance(s, Havoc):
            nxt = self.node(f"{where}:havoc")
            self.edge(cur, nxt, self.frame({Var(s.target)}))
            return nxt
        if isinstance(s, Assume):
            nxt = self.node(f"{where}:assume")
            self.edge(cur, nxt, conj(condition(s.cond, True), self.frame()))
            return nxt
        if isinstance(s, Assert):
            nxt = self.node(f"{where}:assert")
            self.edge(cur, self.error_node(), conj(condition(s.cond, False), self.frame()))
            self.edge(cur, nxt, conj(condition(s.cond, True), self.frame()))
            return nxt
        if isinstance(s, If):
            then_start = self.node(f"{where}:then")
            else_start = self.node(f"{where}:else")
            self.edge(cur, then_start, conj(condition(s.cond, True), self.frame()))
            self.edge(cur, else_start, conj(condition(s.cond, False), self.frame()))
            then_end = self.block(s.then, then_start)
            else_end = self.block(s.orelse or (), else_start)
            join = self.node(f"{where}:endif")
            self.edge(then_end, join, self.frame())
            self.edge(else_end, join, self.frame())
            return join
        if isinstance(s, While):
            head = self.node(f"{where}:while")
            self.edge(cur, head, self.frame())
            body = self.node(f"{where}:body")
            self.edge(head, body, conj(condition(s.cond, True), self.frame()))
            self.edge(self.block(s.body, body), head, self.frame())
            out = self.node(f"{where}:endwhile")
            self.edge(head, out, conj(condition(s.cond, False), self.frame()))
            return out
        raise TypeError(s)  # pragma: no cover


def lower_to_cfa(p: Program) -> Cfa:
    """Lower to a CFA with explicit frames and a single shared error node."""
    lw = _Lowering(p.variables)
    n0 = lw.node("start")
    end = lw.block(p.statements, n0)
    lw.labels[end] = "exit" if end != n0 else "start"
    return Cfa(frozenset(lw.labels), tuple(lw.edges), n0, lw.vars, lw.error, dict(lw.labels))


def load_program(text: str) -> Cfa:
    return lower_to_cfa(parse_program(text))


__all__ = [
    "Program", "SourceSpan", "ParseError", "Decl", "Assign", "Havoc", "Assume", "Assert",
    "If", "While", "Skip", "Cmp", "BNot", "BAnd", "BOr", "BNondet",
    "parse_program", "format_program", "lower_to_cfa", "load_program", "condition", "tokenize",
]
