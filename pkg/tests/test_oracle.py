import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicer.cfa import empty_like
from slicer.formula import LinExpr, Var, conj, disj, eq, evaluate, ge, lt, ne, prime
from slicer.lang import load_program
from slicer.oracle import (
    BoolSpec, BudgetError, FiniteDomain, bit, compile_formula, counter_grid, counter_loop_head,
    enumerate_reachable, gen_counter_program, is_inductive_enum, literal_weakenings,
    no_strongest_weakening_fixture, psi_satisfiable, psi_witnesses, random_nnf,
    strongest_weakening_bruteforce, transition_matrix,
)
from slicer.rcnf import Rcnf

x, y, i, n, p = (Var(s) for s in ("x", "y", "i", "n", "p"))


def head_of(c):
    return next(k for k, l in c.labels.items() if l.endswith(":while"))


def test_loop_head_states():
    c = load_program("int x; x = 0; while (nondet()) { assume(x < 2); x = x + 1; }")
    reach = enumerate_reachable(c, FiniteDomain(0, 3))
    assert reach[head_of(c)] == {(0,), (1,), (2,)}


def test_empty_cfa():
    c = load_program("int x; x = 0; assert(x == 0);")
    assert enumerate_reachable(empty_like(c)) == {}


def test_nested_scaled_down():
    src = """
    int p, c, s, x, y;
    s = nondet(); assume(s >= 0 && s <= 1);
    x = 0; y = 0;
    if (s != 0) { p = 1; } else { p = 2; }
    while (nondet()) {
        assume(x < 2);
        x = x + 1;
        c = 2;
        while (nondet()) {
            if (p != 1 && p != 2) { c = 0; }
            assume(y < 2);
            y = y + 1;
        }
    }
    """
    c = load_program(src)
    reach = enumerate_reachable(c, FiniteDomain(0, 2))
    inner = sorted(k for k, l in c.labels.items() if l.endswith(":while"))[1]
    order = [str(v) for v in c.variables]
    for state in reach[inner]:
        env = dict(zip(order, state))
        assert env["c"] == 2 and env["p"] in (1, 2)


def test_transition_matrix_budget():
    with pytest.raises(BudgetError):
        transition_matrix(eq(x.prime(), x), (x, y, i, n), FiniteDomain(-5, 5), budget=1000)


def test_bruteforce_examples():
    inc = eq(x.prime(), LinExpr.of(x) + 1)
    assert strongest_weakening_bruteforce(Rcnf((eq(x, 0),)), inc) == Rcnf()
    phi = Rcnf((ge(x, 0),))
    dom = FiniteDomain()
    assert strongest_weakening_bruteforce(phi, conj(inc, dom.range_constraint([x.prime()])), dom) == phi


def test_bruteforce_sign_scaled():
    dom = FiniteDomain()
    sign_pos, sign_neg = disj(eq(p, 0), ge(x, 0)), disj(ne(p, 0), lt(x, 0))
    tau = conj(lt(i, n), eq(i.prime(), LinExpr.of(i) + 1), eq(x.prime(), LinExpr.of(x) * 2),
               eq(p.prime(), p), eq(n.prime(), n),
               dom.range_constraint([x.prime(), i.prime()]))
    kept = strongest_weakening_bruteforce(Rcnf((eq(i, 0), sign_pos, sign_neg)), tau, dom)
    assert kept == Rcnf((sign_pos, sign_neg))


def test_is_inductive_enum():
    dom = FiniteDomain()
    tau = conj(eq(x.prime(), LinExpr.of(x) + 1), dom.range_constraint([x.prime()]))
    assert is_inductive_enum(ge(x, 0), tau, (x,), dom)
    assert not is_inductive_enum(eq(x, 0), tau, (x,), dom)


def test_no_strongest_literal_weakening():
    fx = no_strongest_weakening_fixture()
    vs, dom = fx.variables, fx.dom
    assert is_inductive_enum(fx.drop_a, fx.tau, vs, dom)
    assert is_inductive_enum(fx.drop_c, fx.tau, vs, dom)
    assert not is_inductive_enum(fx.phi, fx.tau, vs, dom)
    tables = literal_weakenings(fx.phi, vs, dom)
    combined = conj(fx.drop_a, fx.drop_c)
    grid = dom.grid(len(vs))
    table = tuple(compile_formula(combined, {v: k for k, v in enumerate(vs)})(grid).tolist())
    assert table not in tables


def test_counter_psi_true_gives_nontrivial_invariant():
    spec = BoolSpec(1, 1, bit(Var("x0")))
    assert psi_witnesses(spec) == [(1,)]
    c = gen_counter_program(spec)
    reach = enumerate_reachable(c, FiniteDomain(0, 1))
    order = [str(v) for v in c.variables]
    os_ = {dict(zip(order, st))["o"] for st in reach[counter_loop_head(c)]}
    assert os_ == {0}


def test_counter_psi_false_reaches_everything():
    spec = BoolSpec(1, 1, bit(Var("y0")))
    assert not psi_satisfiable(spec)
    c = gen_counter_program(spec)
    reach = enumerate_reachable(c, FiniteDomain(0, 1))
    assert len(reach[counter_loop_head(c)]) == 4


def test_counter_rejects_m_zero():
    with pytest.raises(ValueError):
        BoolSpec(0, 1, bit(Var("y0")))


def test_counter_grid_shape():
    grid = counter_grid()
    assert len(grid) == 16
    assert all(1 <= s.m <= 3 and s.n <= 3 for s in grid)
    assert {psi_satisfiable(s) for s in grid} == {True, False}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compiled_formulas_match_evaluate(seed):
    vs = [x, y]
    f = random_nnf(random.Random(seed), vs, max_nodes=15)
    grid = FiniteDomain().grid(2)
    got = compile_formula(f, {x: 0, y: 1})(grid)
    want = np.array([evaluate(f, {x: int(a), y: int(b)}) for a, b in grid])
    assert (got == want).all()
