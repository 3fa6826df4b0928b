"""Formula AST over linear integer arithmetic with boolean connectives.

Atoms are kept in a canonical form ``sum(a_i * v_i) OP bound`` with
``OP`` one of ``<=``, ``=``, ``!=``, sorted variables and gcd-reduced
coefficients, so that syntactic equality of lemmas is meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Union

Value = Union[int, bool]


@dataclass(frozen=True, order=True)
class Var:
    """A solver variable: program variable, its primed copy, or an intermediate."""

    base: str
    primed: bool = False
    mid: int = -1

    def __str__(self) -> str:
        if self.mid >= 0:
            return f"__mid{self.mid}_{self.base}"
        return self.base + ("'" if self.primed else "")

    def __repr__(self) -> str:
        return f"Var({str(self)!r})"

    @property
    def is_program(self) -> bool:
        return not self.primed and self.mid < 0

    def prime(self) -> "Var":
        return Var(self.base, True)

    def unprime(self) -> "Var":
        return Var(self.base)


def var(name: str) -> Var:
    """Parse the textual rendering back into a Var (``x``, ``x'``, ``__mid3_x``)."""
    if name.endswith("'"):
        return Var(name[:-1], True)
    if name.startswith("__mid"):
        k, _, base = name[5:].partition("_")
        if k.isdigit() and base:
            return Var(base, mid=int(k))
    return Var(name)


# --------------------------------------------------------------------------
# linear expressions


@dataclass(frozen=True)
class LinExpr:
    """Linear integer expression ``const + sum(coef * var)``."""

    coeffs: tuple[tuple[Var, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(x: "LinExpr | Var | int") -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, Var):
            return LinExpr(((x, 1),), 0)
        return LinExpr((), int(x))

    @staticmethod
    def from_dict(d: Mapping[Var, int], const: int = 0) -> "LinExpr":
        return LinExpr(tuple(sorted((v, c) for v, c in d.items() if c)), const)

    def as_dict(self) -> dict[Var, int]:
        return dict(self.coeffs)

    def __add__(self, other) -> "LinExpr":
        other = LinExpr.of(other)
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinExpr.from_dict(d, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return LinExpr(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other) -> "LinExpr":
        return self + (-LinExpr.of(other))

    def __rsub__(self, other) -> "LinExpr":
        return LinExpr.of(other) - self

    def scale(self, k: int) -> "LinExpr":
        if k == 0:
            return LinExpr()
        return LinExpr(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def __mul__(self, other) -> "LinExpr":
        other = LinExpr.of(other)
        if other.is_constant:
            return self.scale(other.const)
        if self.is_constant:
            return other.scale(self.const)
        raise ValueError("non-linear product")

    __rmul__ = __mul__

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def vars(self) -> frozenset[Var]:
        return frozenset(v for v, _ in self.coeffs)

    def evaluate(self, env: Mapping[Var, Value]) -> int:
        return self.const + sum(c * int(env[v]) for v, c in self.coeffs)

    def substitute(self, v: Var, e: "LinExpr") -> "LinExpr":
        d = self.as_dict()
        c = d.pop(v, 0)
        if not c:
            return self
        return LinExpr.from_dict(d, self.const) + e.scale(c)

    def rename(self, mapping: Mapping[Var, Var]) -> "LinExpr":
        d: dict[Var, int] = {}
        for v, c in self.coeffs:
            w = mapping.get(v, v)
            d[w] = d.get(w, 0) + c
        return LinExpr.from_dict(d, self.const)

    def __str__(self) -> str:
        parts: list[str] = []
        for v, c in self.coeffs:
            mag = abs(c)
            term = str(v) if mag == 1 else f"{mag}*{v}"
            if not parts:
                parts.append(term if c > 0 else f"-{term}")
            else:
                parts.append(("+ " if c > 0 else "- ") + term)
        if self.const or not parts:
            if not parts:
                parts.append(str(self.const))
            else:
                parts.append(("+ " if self.const > 0 else "- ") + str(abs(self.const)))
        return " ".join(parts)


# --------------------------------------------------------------------------
# formulas


class Formula:
    """Base class; subclasses are frozen dataclasses."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return conj(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return disj(self, other)

    def __invert__(self) -> "Formula":
        return neg(self)

    @cached_property
    def key(self) -> str:
        """Total-order key used to sort operands; the canonical SMT text."""
        return to_smt(self)

    @cached_property
    def free_vars(self) -> frozenset[Var]:
        return _free_vars(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Formula):
    value: bool

    def __repr__(self) -> str:
        return "TRUE" if self.value else "FALSE"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, eq=True)
class Lin(Formula):
    """Canonical linear atom ``sum(coeffs) op bound`` with op in <=, =, !=."""

    coeffs: tuple[tuple[Var, int], ...]
    op: str
    bound: int

    def __repr__(self) -> str:
        return f"Lin({to_text(self)!r})"

    def lhs(self) -> LinExpr:
        return LinExpr(self.coeffs, 0)


@dataclass(frozen=True, eq=True)
class BoolVar(Formula):
    var: Var

    def __repr__(self) -> str:
        return f"BoolVar({str(self.var)!r})"


@dataclass(frozen=True, eq=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, eq=True)
class And(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True, eq=True)
class Or(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True, eq=True)
class Exists(Formula):
    bound: tuple[Var, ...]
    body: Formula



def compare(lhs, op: str, rhs) -> Formula:
    """Build the canonical atom for ``lhs op rhs`` (op: < <= > >= == = !=)."""
    e = LinExpr.of(lhs) - LinExpr.of(rhs)
    d = e.as_dict()
    c = -e.const  # sum(d) op c
    if op == "<":
        op, c = "<=", c - 1
    elif op == ">":
        d, c, op = {v: -k for v, k in d.items()}, -c - 1, "<="
    elif op == ">=":
        d, c, op = {v: -k for v, k in d.items()}, -c, "<="
    elif op == "==":
        op = "="
    if op not in ("<=", "=", "!="):
        raise ValueError(f"unknown comparison {op!r}")
    d = {v: k for v, k in d.items() if k}
    if not d:
        holds = {"<=": 0 <= c, "=": 0 == c, "!=": 0 != c}[op]
        return TRUE if holds else FALSE
    g = 0
    for k in d.values():
        g = math.gcd(g, abs(k))
    if op == "<=":
        c //= g
    else:
        if c % g:
            return FALSE if op == "=" else TRUE
        c //= g
        first = min(d)
        if d[first] < 0:
            d, c = {v: -k for v, k in d.items()}, -c
    coeffs = tuple(sorted((v, k // g) for v, k in d.items()))
    return Lin(coeffs, op, c)


def le(a, b) -> Formula:
    return compare(a, "<=", b)


def lt(a, b) -> Formula:
    return compare(a, "<", b)


def ge(a, b) -> Formula:
    return compare(a, ">=", b)


def gt(a, b) -> Formula:
    return compare(a, ">", b)


def eq(a, b) -> Formula:
    return compare(a, "=", b)


def ne(a, b) -> Formula:
    return compare(a, "!=", b)


def _negate_atom(f: Lin) -> Lin:
    if f.op == "<=":
        return Lin(tuple((v, -k) for v, k in f.coeffs), "<=", -f.bound - 1)
    return Lin(f.coeffs, "!=" if f.op == "=" else "=", f.bound)


def _flatten(cls, args: Iterable[Formula]) -> list[Formula]:
    out: list[Formula] = []
    for a in args:
        if isinstance(a, cls):
            out.extend(a.args)
        else:
            out.append(a)
    return out


def conj(*args: Formula) -> Formula:
    """Flattening, deduplicating, sorting conjunction."""
    if len(args) == 1 and not isinstance(args[0], Formula):
        args = tuple(args[0])
    seen: dict[Formula, None] = {}
    for a in _flatten(And, args):
        if a == FALSE:
            return FALSE
        if a != TRUE:
            seen[a] = None
    if not seen:
        return TRUE
    if len(seen) == 1:
        return next(iter(seen))
    return And(tuple(sorted(seen, key=lambda f: f.key)))


def disj(*args: Formula) -> Formula:
    """Flattening, deduplicating, sorting disjunction."""
    if len(args) == 1 and not isinstance(args[0], Formula):
        args = tuple(args[0])
    seen: dict[Formula, None] = {}
    for a in _flatten(Or, args):
        if a == TRUE:
            return TRUE
        if a != FALSE:
            seen[a] = None
    if not seen:
        return FALSE
    if len(seen) == 1:
        return next(iter(seen))
    return Or(tuple(sorted(seen, key=lambda f: f.key)))


def neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Lin):
        return _negate_atom(f)
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def exists(bound: Iterable[Var], body: Formula) -> Formula:
    bound = tuple(sorted(set(bound) & body.free_vars))
    if not bound:
        return body
    return Exists(bound, body)


def to_nnf(f: Formula) -> Formula:
    """Push negations down to atoms; negated comparisons become positive ones."""
    return _nnf(f, False)


def _nnf(f: Formula, negated: bool) -> Formula:
    if isinstance(f, Not):
        return _nnf(f.arg, not negated)
    if isinstance(f, (Const, Lin)):
        return neg(f) if negated else f
    if isinstance(f, BoolVar):
        return Not(f) if negated else f
    if isinstance(f, And):
        parts = [_nnf(a, negated) for a in f.args]
        return disj(parts) if negated else conj(parts)
    if isinstance(f, Or):
        parts = [_nnf(a, negated) for a in f.args]
        return conj(parts) if negated else disj(parts)
    if isinstance(f, Exists):
        if negated:
            raise ValueError("negation of an existential is not quantifier-free")
        return Exists(f.bound, _nnf(f.body, False))
    raise TypeError(f)


def is_literal(f: Formula) -> bool:
    return isinstance(f, (Const, Lin, BoolVar)) or (isinstance(f, Not) and isinstance(f.arg, BoolVar))


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, Exists):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(is_quantifier_free(a) for a in f.args)
    return True


def node_count(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + node_count(f.arg)
    if isinstance(f, (And, Or)):
        return 1 + sum(node_count(a) for a in f.args)
    if isinstance(f, Exists):
        return 1 + node_count(f.body)
    return 1


def _free_vars(f: Formula) -> frozenset[Var]:
    if isinstance(f, Lin):
        return frozenset(v for v, _ in f.coeffs)
    if isinstance(f, BoolVar):
        return frozenset((f.var,))
    if isinstance(f, Not):
        return f.arg.free_vars
    if isinstance(f, (And, Or)):
        out: frozenset[Var] = frozenset()
        for a in f.args:
            out |= a.free_vars
        return out
    if isinstance(f, Exists):
        return f.body.free_vars - frozenset(f.bound)
    return frozenset()


def bool_vars(f: Formula) -> frozenset[Var]:
    """Free variables used with boolean sort."""
    if isinstance(f, BoolVar):
        return frozenset((f.var,))
    if isinstance(f, Not):
        return bool_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: frozenset[Var] = frozenset()
        for a in f.args:
            out |= bool_vars(a)
        return out
    if isinstance(f, Exists):
        return bool_vars(f.body) - frozenset(f.bound)
    return frozenset()


# --------------------------------------------------------------------------
# renaming and substitution


class RenameError(ValueError):
    pass


def rename(f: Formula, mapping: Mapping[Var, Var]) -> Formula:
    """Capture-free renaming of free variables."""
    if not mapping:
        return f
    if isinstance(f, Lin):
        if not any(v in mapping for v, _ in f.coeffs):
            return f
        return compare(f.lhs().rename(mapping), f.op, f.bound)
    if isinstance(f, BoolVar):
        return BoolVar(mapping.get(f.var, f.var))
    if isinstance(f, Const):
        return f
    if isinstance(f, Not):
        return neg(rename(f.arg, mapping))
    if isinstance(f, And):
        return conj([rename(a, mapping) for a in f.args])
    if isinstance(f, Or):
        return disj([rename(a, mapping) for a in f.args])
    if isinstance(f, Exists):
        bound = set(f.bound)
        inner = {k: v for k, v in mapping.items() if k not in bound and k in f.body.free_vars}
        if bound & set(inner.values()):
            raise RenameError("renaming target collides with a bound variable")
        return Exists(f.bound, rename(f.body, inner))
    raise TypeError(f)


def prime(f: Formula) -> Formula:
    """Rename every unprimed program variable ``x`` to ``x'``."""
    return rename(f, {v: v.prime() for v in f.free_vars if v.is_program and not is_reserved(v)})


def unprime(f: Formula) -> Formula:
    return rename(f, {v: v.unprime() for v in f.free_vars if v.primed})


def is_reserved(v: Var) -> bool:
    return v.base.startswith("__")


def substitute(f: Formula, v: Var, e: LinExpr) -> Formula:
    """Replace integer variable ``v`` by the linear expression ``e``."""
    if v not in f.free_vars:
        return f
    if isinstance(f, Lin):
        return compare(f.lhs().substitute(v, e), f.op, f.bound)
    if isinstance(f, Not):
        return neg(substitute(f.arg, v, e))
    if isinstance(f, And):
        return conj([substitute(a, v, e) for a in f.args])
    if isinstance(f, Or):
        return disj([substitute(a, v, e) for a in f.args])
    if isinstance(f, Exists):
        if e.vars() & set(f.bound):
            raise RenameError("substitution would capture a bound variable")
        return Exists(f.bound, substitute(f.body, v, e))
    return f


# --------------------------------------------------------------------------
# evaluation


class MissingValue(KeyError):
    """Raised when a formula mentions a variable the assignment does not cover."""


def evaluate(f: Formula, env: Mapping[Var, Value]) -> bool:
    r = evaluate3(f, env)
    if r is None:
        missing = sorted(str(v) for v in f.free_vars if v not in env)
        raise MissingValue(", ".join(missing))
    return r


def evaluate3(f: Formula, env: Mapping[Var, Value]) -> bool | None:
    """Kleene three-valued evaluation; None when undetermined by ``env``."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Lin):
        total = 0
        for v, c in f.coeffs:
            if v not in env:
                return None
            total += c * int(env[v])
        if f.op == "<=":
            return total <= f.bound
        if f.op == "=":
            return total == f.bound
        return total != f.bound
    if isinstance(f, BoolVar):
        x = env.get(f.var)
        return None if x is None else bool(x)
    if isinstance(f, Not):
        r = evaluate3(f.arg, env)
        return None if r is None else not r
    if isinstance(f, And):
        out: bool | None = True
        for a in f.args:
            r = evaluate3(a, env)
            if r is False:
                return False
            if r is None:
                out = None
        return out
    if isinstance(f, Or):
        out = False
        for a in f.args:
            r = evaluate3(a, env)
            if r is True:
                return True
            if r is None:
                out = None
        return out
    raise ValueError("cannot evaluate a quantified formula")


# --------------------------------------------------------------------------
# rendering


def smt_symbol(v: Var) -> str:
    s = str(v)
    if all(ch.isalnum() or ch in "_.$@~!%^&*+-=<>?/" for ch in s) and not s[0].isdigit():
        return s
    return f"|{s}|"


def _smt_int(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def _smt_linexpr(coeffs) -> str:
    terms = []
    for v, c in coeffs:
        s = smt_symbol(v)
        terms.append(s if c == 1 else f"(* {_smt_int(c)} {s})")
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def to_smt(f: Formula) -> str:
    """Render in SMT-LIB s-expression syntax."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Lin):
        lhs, rhs = _smt_linexpr(f.coeffs), _smt_int(f.bound)
        if f.op == "!=":
            return f"(not (= {lhs} {rhs}))"
        return f"({f.op} {lhs} {rhs})"
    if isinstance(f, BoolVar):
        return smt_symbol(f.var)
    if isinstance(f, Not):
        return f"(not {to_smt(f.arg)})"
    if isinstance(f, And):
        return "(and " + " ".join(to_smt(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(to_smt(a) for a in f.args) + ")"
    if isinstance(f, Exists):
        bound = " ".join(f"({smt_symbol(v)} Int)" for v in f.bound)
        return f"(exists ({bound}) {to_smt(f.body)})"
    raise TypeError(f)


_TEXT_OP = {"<=": "<=", "=": "==", "!=": "!="}


def to_text(f: Formula) -> str:
    """C-like rendering (also valid program syntax for unprimed formulas)."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Lin):
        lhs = LinExpr(f.coeffs)
        if f.op == "<=" and all(c < 0 for _, c in f.coeffs):
            return f"{-lhs} >= {-f.bound}"
        return f"{lhs} {_TEXT_OP[f.op]} {f.bound}"
    if isinstance(f, BoolVar):
        return str(f.var)
    if isinstance(f, Not):
        return f"!({to_text(f.arg)})" if not isinstance(f.arg, BoolVar) else f"!{f.arg.var}"
    if isinstance(f, (And, Or)):
        sep = " && " if isinstance(f, And) else " || "
        return sep.join(_text_paren(a) for a in f.args)
    if isinstance(f, Exists):
        return "exists " + ", ".join(map(str, f.bound)) + ". (" + to_text(f.body) + ")"
    raise TypeError(f)


def _text_paren(f: Formula) -> str:
    s = to_text(f)
    return f"({s})" if isinstance(f, (And, Or, Exists)) else s

