"""Brute-force ground truth on finite domains, plus seeded random generators.

Everything here is deliberately naive: states and transition pairs are
enumerated explicitly and formulas are evaluated with numpy.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .cfa import Cfa
from .formula import (
    FALSE, TRUE, And, BoolVar, Const, Formula, Lin, LinExpr, Not, Or, Var,
    compare, conj, disj, eq, evaluate, neg, prime, to_nnf,
)
from .lang import (
    Assert, Assign, Assume, BAnd, BNondet, BNot, BOr, Cmp, Decl, Havoc, If, Program,
    Skip, While, format_program, lower_to_cfa, parse_program,
)
from .rcnf import Rcnf


class BudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class FiniteDomain:
    lo: int = -2
    hi: int = 2

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty domain")

    @property
    def values(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def grid(self, k: int) -> np.ndarray:
        """All ``size**k`` assignments as rows, first column most significant."""
        if k == 0:
            return np.zeros((1, 0), dtype=np.int64)
        axes = np.meshgrid(*[np.arange(self.lo, self.hi + 1)] * k, indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1).astype(np.int64)

    def range_constraint(self, variables: Iterable[Var]) -> Formula:
        return conj([conj(compare(v, ">=", self.lo), compare(v, "<=", self.hi)) for v in variables])


DEFAULT_BUDGET = 4_000_000


# --------------------------------------------------------------------------
# vectorised evaluation


def compile_formula(f: Formula, index: Mapping[Var, int]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a quantifier-free formula to a row-wise evaluator over an int matrix."""
    if isinstance(f, Const):
        val = f.value
        return lambda a: np.full(a.shape[0], val, dtype=bool)
    if isinstance(f, Lin):
        cols = [index[v] for v, _ in f.coeffs]
        coef = np.array([c for _, c in f.coeffs], dtype=np.int64)
        bound, op = f.bound, f.op

        def lin(a):
            s = a[:, cols] @ coef if cols else np.zeros(a.shape[0], dtype=np.int64)
            if op == "<=":
                return s <= bound
            if op == "=":
                return s == bound
            return s != bound
        return lin
    if isinstance(f, BoolVar):
        i = index[f.var]
        return lambda a: a[:, i] != 0
    if isinstance(f, Not):
        g = compile_formula(f.arg, index)
        return lambda a: ~g(a)
    if isinstance(f, (And, Or)):
        parts = [compile_formula(x, index) for x in f.args]
        red = np.logical_and if isinstance(f, And) else np.logical_or

        def nary(a):
            out = parts[0](a)
            for p in parts[1:]:
                out = red(out, p(a))
            return out
        return nary
    raise TypeError(f"cannot compile {type(f).__name__}")


def _pair_index(variables: Sequence[Var]) -> dict[Var, int]:
    k = len(variables)
    idx = {v: i for i, v in enumerate(variables)}
    idx.update({v.prime(): k + i for i, v in enumerate(variables)})
    return idx


def _check_budget(n: int, budget: int) -> None:
    if n > budget:
        raise BudgetError(f"{n} evaluations exceed the budget of {budget}")


# --------------------------------------------------------------------------
# reachability


def transition_matrix(tau: Formula, variables: Sequence[Var], dom: FiniteDomain,
                      budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Boolean (S, S) matrix: entry [i, j] iff state i steps to state j under ``tau``."""
    states = dom.grid(len(variables))
    s = len(states)
    _check_budget(s * s, budget)
    pairs = np.concatenate([np.repeat(states, s, axis=0), np.tile(states, (s, 1))], axis=1)
    return compile_formula(tau, _pair_index(variables))(pairs).reshape(s, s)


def enumerate_reachable(c: Cfa, dom: FiniteDomain = FiniteDomain(),
                        budget: int = DEFAULT_BUDGET) -> dict[int, frozenset[tuple[int, ...]]]:
    """Exact forward closure of the CFA restricted to ``dom``.

    States are tuples ordered like ``c.variables``; every assignment is
    initial at ``n0``.  Nodes never reached are absent from the result.
    """
    if c.is_empty:
        return {}
    variables = tuple(c.variables)
    states = dom.grid(len(variables))
    mats = [(e, transition_matrix(e.formula, variables, dom, budget)) for e in c.edges]
    reach = {n: np.zeros(len(states), dtype=bool) for n in c.nodes}
    reach[c.n0][:] = True
    changed = True
    while changed:
        changed = False
        for e, m in mats:
            src = reach[e.src]
            if not src.any():
                continue
            new = m[src].any(axis=0) | reach[e.dst]
            if (new != reach[e.dst]).any():
                reach[e.dst] = new
                changed = True
    return {n: frozenset(map(tuple, states[r].tolist())) for n, r in reach.items() if r.any()}


def states_satisfying(f: Formula, states: Iterable[tuple[int, ...]],
                      variables: Sequence[Var]) -> np.ndarray:
    arr = np.array(sorted(states), dtype=np.int64).reshape(-1, len(variables))
    return compile_formula(f, {v: i for i, v in enumerate(variables)})(arr)


def invariant_violations(inv: Mapping[int, Formula], reach: Mapping[int, frozenset],
                         variables: Sequence[Var]) -> list[tuple[int, tuple[int, ...]]]:
    """(node, state) pairs reachable but outside the invariant at that node."""
    bad = []
    for n, states in reach.items():
        if n not in inv or not states:
            continue
        ordered = sorted(states)
        ok = states_satisfying(inv[n], ordered, variables)
        bad.extend((n, s) for s, good in zip(ordered, ok) if not good)
    return bad


# --------------------------------------------------------------------------
# strongest weakening


def _support(phi: Rcnf, tau: Formula) -> tuple[Var, ...]:
    vs = {v.unprime() for v in tau.free_vars} | set(phi.free_vars())
    return tuple(sorted(vs))


def strongest_weakening_bruteforce(phi: Rcnf, tau: Formula, dom: FiniteDomain = FiniteDomain(),
                                   budget: int = DEFAULT_BUDGET) -> Rcnf:
    """Union of all subsets ``S`` of ``phi`` with ``S and tau -> S'`` over ``dom``.

    Every subset is tried; the union is checked to be inductive itself.
    """
    if phi.bottom:
        return phi
    lemmas = list(phi.lemmas)
    variables = _support(phi, tau)
    k = len(variables)
    states = dom.grid(k)
    s = len(states)
    _check_budget(s * s, budget)
    pairs = np.concatenate([np.repeat(states, s, axis=0), np.tile(states, (s, 1))], axis=1)
    idx = _pair_index(variables)
    pairs = pairs[compile_formula(tau, idx)(pairs)]
    pre = np.array([compile_formula(l, idx)(pairs) for l in lemmas]).reshape(len(lemmas), -1)
    post = np.array([compile_formula(prime(l), idx)(pairs) for l in lemmas]).reshape(len(lemmas), -1)

    def inductive(mask: Sequence[bool]) -> bool:
        sel = np.array(mask, dtype=bool)
        if not sel.any() or pairs.shape[0] == 0:
            return True
        holds_pre = pre[sel].all(axis=0)
        holds_post = post[sel].all(axis=0)
        return not (holds_pre & ~holds_post).any()

    union = [False] * len(lemmas)
    for mask in itertools.product([False, True], repeat=len(lemmas)):
        if inductive(mask):
            union = [u or m for u, m in zip(union, mask)]
    if not inductive(union):  # pragma: no cover - closure under union is a theorem
        raise AssertionError("union of inductive subsets is not inductive")
    return Rcnf(tuple(l for l, keep in zip(lemmas, union) if keep))


def is_inductive_enum(f: Formula, tau: Formula, variables: Sequence[Var],
                      dom: FiniteDomain) -> bool:
    m = transition_matrix(tau, variables, dom)
    states = dom.grid(len(variables))
    holds = compile_formula(f, {v: i for i, v in enumerate(variables)})(states)
    return not (m[holds][:, ~holds]).any()


# --------------------------------------------------------------------------
# literal weakenings (negative fixture)


def literal_positions(f: Formula) -> list[tuple[int, ...]]:
    """Paths to every literal occurrence of an NNF formula."""
    if isinstance(f, (And, Or)):
        return [(i, *p) for i, a in enumerate(f.args) for p in literal_positions(a)]
    return [()]


def weaken_literals(f: Formula, positions: Iterable[tuple[int, ...]]) -> Formula:
    """Replace the literal occurrences at ``positions`` with true."""
    positions = set(positions)
    if () in positions:
        return TRUE
    if isinstance(f, (And, Or)):
        args = [weaken_literals(a, [p[1:] for p in positions if p and p[0] == i])
                for i, a in enumerate(f.args)]
        return conj(args) if isinstance(f, And) else disj(args)
    return f


def _truth_table(f: Formula, variables: Sequence[Var], dom: FiniteDomain) -> tuple[bool, ...]:
    states = dom.grid(len(variables))
    return tuple(compile_formula(f, {v: i for i, v in enumerate(variables)})(states).tolist())


def literal_weakenings(f: Formula, variables: Sequence[Var], dom: FiniteDomain) -> dict:
    """Truth table -> one literal weakening with that table, over all position subsets."""
    out = {}
    pos = literal_positions(f)
    for r in range(len(pos) + 1):
        for chosen in itertools.combinations(pos, r):
            w = weaken_literals(f, chosen)
            out.setdefault(_truth_table(w, variables, dom), w)
    return out


@dataclass(frozen=True)
class NoStrongestFixture:
    variables: tuple[Var, ...]
    tau: Formula
    phi: Formula
    drop_a: Formula
    drop_c: Formula
    dom: FiniteDomain = FiniteDomain(0, 1)


def no_strongest_weakening_fixture() -> NoStrongestFixture:
    """Four booleans with a single transition; two incomparable inductive literal weakenings."""
    a, b, c, d = (Var(n) for n in "abcd")
    bit = lambda v, val=1: eq(v, val)  # noqa: E731
    tau = conj(bit(a), bit(b), bit(c), bit(d),
               bit(a.prime(), 0), bit(b.prime()), bit(c.prime(), 0), bit(d.prime()))
    phi = disj(conj(bit(a), bit(b)), conj(bit(c), bit(d)))
    return NoStrongestFixture(
        (a, b, c, d), tau, phi,
        drop_a=disj(bit(b), conj(bit(c), bit(d))),
        drop_c=disj(conj(bit(a), bit(b)), bit(d)),
    )


# --------------------------------------------------------------------------
# counter program


@dataclass(frozen=True)
class BoolSpec:
    """``exists x_0..x_{m-1}. forall y_0..y_{n-1}. G`` with bits as 0/1 integers."""

    m: int
    n: int
    G: Formula

    def __post_init__(self):
        if self.m < 1 or self.n < 0:
            raise ValueError("need m >= 1 and n >= 0")
        allowed = set(self.xs) | set(self.ys)
        if not self.G.free_vars <= allowed:
            raise ValueError(f"G mentions undeclared bits {sorted(map(str, self.G.free_vars - allowed))}")

    @property
    def xs(self) -> tuple[Var, ...]:
        return tuple(Var(f"x{i}") for i in range(self.m))

    @property
    def ys(self) -> tuple[Var, ...]:
        return tuple(Var(f"y{j}") for j in range(self.n))


def bit(v: Var) -> Formula:
    return eq(v, 1)


def psi_witnesses(spec: BoolSpec) -> list[tuple[int, ...]]:
    """All x with ``forall y. G(x, y)``, by enumeration (bit 0 first)."""
    out = []
    for xv in itertools.product((0, 1), repeat=spec.m):
        env = dict(zip(spec.xs, xv))
        if all(evaluate(spec.G, {**env, **dict(zip(spec.ys, yv))})
               for yv in itertools.product((0, 1), repeat=spec.n)):
            out.append(xv)
    return out


def psi_satisfiable(spec: BoolSpec) -> bool:
    return bool(psi_witnesses(spec))


def _subst_bits(f: Formula, env: Mapping[Var, int]) -> Formula:
    """Partially evaluate ``f`` on the bits in ``env``."""
    if isinstance(f, Lin):
        known = {v for v, _ in f.coeffs if v in env}
        if not known:
            return f
        rest = LinExpr.from_dict({v: c for v, c in f.coeffs if v not in env})
        shift = sum(c * env[v] for v, c in f.coeffs if v in env)
        return compare(rest + shift, f.op, LinExpr.of(f.bound))
    if isinstance(f, Not):
        return neg(_subst_bits(f.arg, env))
    if isinstance(f, And):
        return conj([_subst_bits(a, env) for a in f.args])
    if isinstance(f, Or):
        return disj([_subst_bits(a, env) for a in f.args])
    return f


def can_step_guard(spec: BoolSpec) -> Formula:
    """``exists y. not G(x, y)`` expanded over all 2^n values of y."""
    g = to_nnf(neg(spec.G))
    return disj([_subst_bits(g, dict(zip(spec.ys, yv)))
                 for yv in itertools.product((0, 1), repeat=spec.n)])


def _formula_text(f: Formula) -> str:
    """Render a formula in the input language's condition syntax."""
    if f == TRUE:
        return "0 == 0"
    if f == FALSE:
        return "0 == 1"
    if isinstance(f, Lin):
        op = {"<=": "<=", "=": "==", "!=": "!="}[f.op]
        return f"{LinExpr(f.coeffs)} {op} {f.bound}"
    if isinstance(f, Not):
        return f"!({_formula_text(f.arg)})"
    sym = " && " if isinstance(f, And) else " || "
    return sym.join(f"({_formula_text(a)})" for a in f.args)


def counter_program_source(spec: BoolSpec, with_assert: bool = True) -> str:
    xs = [str(x) for x in spec.xs]
    lines = [f"int {', '.join(xs)}, o;"]
    lines += [f"{x} = 0;" for x in xs] + ["o = 0;", "while (nondet()) {"]
    lines.append(f"    if ({_formula_text(can_step_guard(spec))}) {{")
    top = " && ".join(f"{x} == 1" for x in xs)
    lines.append(f"        if ({top}) {{")
    lines.append("            o = 1;")
    for x in xs:
        lines.append(f"            {x} = nondet();")
        lines.append(f"            assume({x} >= 0 && {x} <= 1);")
    lines.append("        } else {")

    def ripple(i: int, pad: str) -> list[str]:
        x = xs[i]
        body = [f"{pad}if ({x} == 0) {{", f"{pad}    {x} = 1;", f"{pad}}} else {{", f"{pad}    {x} = 0;"]
        if i + 1 < len(xs):
            body += ripple(i + 1, pad + "    ")
        return body + [f"{pad}}}"]
    lines += ripple(0, "            ")
    lines += ["        }", "    }", "}"]
    if with_assert:
        lines.append("assert(o == 0);")
    return "\n".join(lines) + "\n"


def gen_counter_program(spec: BoolSpec, with_assert: bool = False) -> Cfa:
    return lower_to_cfa(parse_program(counter_program_source(spec, with_assert)))


def counter_loop_head(c: Cfa) -> int:
    return next(n for n, l in c.labels.items() if l.endswith(":while"))


def counter_grid() -> list[BoolSpec]:
    """A fixed family of sixteen specs with m, n <= 3."""
    x = [Var(f"x{i}") for i in range(3)]
    y = [Var(f"y{j}") for j in range(3)]
    B = bit
    nb = lambda v: eq(v, 0)  # noqa: E731
    return [
        BoolSpec(1, 1, B(x[0])),
        BoolSpec(1, 1, B(y[0])),
        BoolSpec(1, 1, disj(B(x[0]), B(y[0]))),
        BoolSpec(1, 1, conj(B(x[0]), B(y[0]))),
        BoolSpec(2, 1, B(x[1])),
        BoolSpec(2, 1, conj(B(x[0]), B(x[1]))),
        BoolSpec(2, 2, disj(B(x[0]), conj(B(y[0]), B(y[1])))),
        BoolSpec(2, 2, disj(conj(B(x[0]), B(y[0])), conj(nb(x[0]), nb(y[0])))),
        BoolSpec(2, 2, disj(nb(x[0]), B(y[1]))),
        BoolSpec(3, 1, B(x[2])),
        BoolSpec(3, 2, disj(conj(B(x[0]), B(x[1]), B(x[2])), B(y[0]))),
        BoolSpec(3, 3, disj(B(y[0]), B(y[1]), B(y[2]))),
        BoolSpec(3, 3, disj(B(x[1]), conj(B(y[0]), nb(y[0])))),
        BoolSpec(1, 3, disj(nb(y[0]), B(y[0]))),
        BoolSpec(2, 3, disj(conj(B(x[0]), nb(x[1])), B(y[2]))),
        BoolSpec(3, 3, conj(disj(B(x[0]), B(y[0])), disj(B(x[1]), nb(y[0])))),
    ]


# --------------------------------------------------------------------------
# random generators


def random_linexpr(rng: random.Random, variables: Sequence[Var], max_terms: int = 2,
                   coef: int = 2, const: int = 2) -> LinExpr:
    e = LinExpr.of(rng.randint(-const, const))
    for v in rng.sample(list(variables), rng.randint(0, min(max_terms, len(variables)))):
        e = e + LinExpr.of(v) * rng.choice([c for c in range(-coef, coef + 1) if c])
    return e


def random_atom(rng: random.Random, variables: Sequence[Var]) -> Formula:
    for _ in range(100):
        lhs = random_linexpr(rng, variables)
        if lhs.coeffs:
            break
    f = compare(lhs, rng.choice(["<=", "<", ">=", ">", "=", "!="]), LinExpr.of(rng.randint(-2, 2)))
    return f


def random_nnf(rng: random.Random, variables: Sequence[Var], max_nodes: int = 20) -> Formula:
    """Random NNF formula with at most ``max_nodes`` nodes (atoms count one)."""
    budget = [max_nodes]

    def gen(depth: int) -> Formula:
        budget[0] -= 1
        if depth >= 4 or budget[0] < 3 or rng.random() < 0.3:
            return random_atom(rng, variables)
        k = rng.randint(2, 3)
        args = []
        for _ in range(k):
            if budget[0] <= 0:
                break
            args.append(gen(depth + 1))
        if len(args) < 2:
            return args[0] if args else random_atom(rng, variables)
        return conj(args) if rng.random() < 0.5 else disj(args)
    return gen(0)


def random_lemma(rng: random.Random, variables: Sequence[Var]) -> Formula:
    r = rng.random()
    if r < 0.6:
        return random_atom(rng, variables)
    if r < 0.9:
        return disj(random_atom(rng, variables), random_atom(rng, variables))
    return disj(conj(random_atom(rng, variables), random_atom(rng, variables)),
                random_atom(rng, variables))


def random_transition(rng: random.Random, variables: Sequence[Var]) -> Formula:
    """A guarded update with frames for untouched variables; no range constraints."""
    parts = []
    if rng.random() < 0.5:
        parts.append(random_atom(rng, variables))
    for v in variables:
        r = rng.random()
        if r < 0.35:
            parts.append(eq(v.prime(), v))
        elif r < 0.8:
            parts.append(eq(v.prime(), random_linexpr(rng, variables, coef=1, const=1)))
        elif r < 0.9:
            parts.append(random_atom(rng, [v.prime(), *variables]))
        # otherwise havoc
    if rng.random() < 0.25:
        other = conj(eq(variables[0].prime(), variables[0]), *(eq(v.prime(), v) for v in variables[1:]))
        return disj(conj(parts), other)
    return conj(parts)


@dataclass(frozen=True)
class WeakeningInstance:
    phi: Rcnf
    tau: Formula  # includes range constraints on X and X'
    variables: tuple[Var, ...]


def random_weakening_instance(rng: random.Random, dom: FiniteDomain = FiniteDomain(),
                              max_lemmas: int = 8, max_vars: int = 4) -> WeakeningInstance:
    k = rng.randint(1, max_vars)
    variables = tuple(Var(n) for n in ["a", "b", "c", "d"][:k])
    lemmas: list[Formula] = []
    target = rng.randint(1, max_lemmas)
    while len(lemmas) < target:
        l = random_lemma(rng, variables)
        if l not in (TRUE, FALSE) and l not in lemmas:
            lemmas.append(l)
    tau = conj(random_transition(rng, variables), dom.range_constraint(variables),
               dom.range_constraint([v.prime() for v in variables]))
    return WeakeningInstance(Rcnf(tuple(lemmas)), tau, variables)


def _random_cmp(rng: random.Random, names: Sequence[str]) -> Cmp:
    vs = [Var(n) for n in names]
    return Cmp(random_linexpr(rng, vs, coef=1), rng.choice(["<", "<=", "==", "!=", ">=", ">"]),
               LinExpr.of(rng.randint(-2, 2)))


def _random_bexpr(rng: random.Random, names: Sequence[str], depth: int = 0):
    r = rng.random()
    if depth < 1 and r < 0.2:
        return (BAnd if rng.random() < 0.5 else BOr)(
            _random_bexpr(rng, names, depth + 1), _random_bexpr(rng, names, depth + 1))
    if depth < 1 and r < 0.27:
        return BNot(_random_bexpr(rng, names, depth + 1))
    return _random_cmp(rng, names)


def _random_block(rng: random.Random, names: Sequence[str], loops_left: int, size: int) -> tuple:
    out = []
    for _ in range(size):
        r = rng.random()
        target = rng.choice(names)
        if r < 0.35:
            out.append(Assign(target, random_linexpr(rng, [Var(n) for n in names], coef=1, const=1)))
        elif r < 0.42:
            out.append(Havoc(target))
        elif r < 0.55:
            out.append(Assume(_random_bexpr(rng, names)))
        elif r < 0.67:
            out.append(Assert(_random_bexpr(rng, names)))
        elif r < 0.82:
            orelse = _random_block(rng, names, 0, rng.randint(0, 2)) if rng.random() < 0.6 else None
            out.append(If(_random_bexpr(rng, names), _random_block(rng, names, 0, rng.randint(1, 2)), orelse))
        elif loops_left > 0:
            cond = BNondet() if rng.random() < 0.5 else _random_bexpr(rng, names)
            out.append(While(cond, _random_block(rng, names, loops_left - 1, rng.randint(1, 3))))
        else:
            out.append(Skip())
    return tuple(out)


def random_program(rng: random.Random, max_vars: int = 3, max_depth: int = 2) -> Program:
    """Random program text-equivalent AST with at least one assert and loop nesting <= max_depth."""
    names = ["x", "y", "z"][:rng.randint(1, max_vars)]
    init = tuple(Assign(n, LinExpr.of(rng.randint(-1, 1))) for n in names if rng.random() < 0.6)
    body = _random_block(rng, names, max_depth, rng.randint(2, 4))
    tail = (Assert(_random_bexpr(rng, names)),)
    stmts = (Decl(tuple(names)),) + init + body + tail
    return parse_program(format_program(Program(stmts, tuple(names))))


__all__ = [
    "FiniteDomain", "BudgetError", "compile_formula", "transition_matrix", "enumerate_reachable",
    "invariant_violations", "strongest_weakening_bruteforce", "is_inductive_enum",
    "literal_weakenings", "weaken_literals", "no_strongest_weakening_fixture",
    "BoolSpec", "psi_satisfiable", "psi_witnesses", "counter_program_source",
    "gen_counter_program", "counter_grid", "can_step_guard", "counter_loop_head", "random_nnf", "random_atom",
    "random_weakening_instance", "random_program", "WeakeningInstance",
]
