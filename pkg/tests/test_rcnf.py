import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from slicer.formula import (
    FALSE, TRUE, BoolVar, Exists, LinExpr, Var, conj, disj, eq, evaluate, ge, gt, le, lt, neg,
    to_nnf,
)
from slicer.oracle import random_nnf
from slicer.rcnf import Rcnf, eliminate_quantifiers_best_effort, post_image, to_rcnf

a, b, c, d = (ge(Var(n), 1) for n in "abcd")
x, y, t = Var("x"), Var("y"), Var("t")


def test_nnf_examples():
    p = BoolVar(Var("p"))
    assert to_nnf(neg(conj(a, b))) == disj(neg(a), neg(b))
    assert to_nnf(neg(neg(le(x, y)))) == le(x, y)
    assert to_nnf(neg(disj(lt(x, y), p))) == conj(ge(x, y), neg(p))


@pytest.mark.parametrize("f,expected", [
    (conj(a, conj(b, c)), {a, b, c}),
    (disj(conj(a, b), conj(b, c)), {b, disj(a, c)}),
    (disj(conj(a, b), conj(c, d)), {disj(a, c), disj(a, d), disj(b, c), disj(b, d)}),
    (a, {a}),
])
def test_to_rcnf_examples(f, expected):
    assert set(to_rcnf(f).lemmas) == expected


def test_expansion_limit_keeps_the_disjunction():
    f = disj(conj(a, b), conj(c, d))
    assert to_rcnf(f, expansion_limit=3).lemmas == (f,)


def test_rcnf_set_semantics():
    assert Rcnf((a, b)) == Rcnf((b, a))
    assert Rcnf((a,)).issubset(Rcnf((a, b)))
    assert Rcnf.bot().issubset(Rcnf())
    assert Rcnf((a, b)).without([a]) == Rcnf((b,))
    assert Rcnf().formula() == TRUE
    assert Rcnf.bot().formula() == FALSE


def test_qe_definitional_equality():
    f = Exists((t,), conj(eq(x.prime(), LinExpr.of(t) + 3), eq(t, LinExpr.of(x) + 2)))
    assert eliminate_quantifiers_best_effort(f).lemmas == (eq(x.prime(), LinExpr.of(x) + 5),)


def test_qe_drops_undefined_binders():
    f = Exists((t,), conj(gt(x.prime(), t), gt(t, y)))
    assert eliminate_quantifiers_best_effort(f) == Rcnf()


def test_qe_without_binders_is_to_rcnf():
    f = disj(conj(a, b), conj(b, c))
    assert eliminate_quantifiers_best_effort(f) == to_rcnf(f)


def test_post_image_symbolic_execution():
    tau = conj(eq(x.prime(), LinExpr.of(x) + 1), eq(y.prime(), y))
    post = post_image(Rcnf((eq(x, 0), ge(y, 2))), tau, [x, y])
    assert post == Rcnf((eq(x, 1), ge(y, 2)))
    assert post_image(Rcnf.bot(), tau, [x, y]).bottom


GRID_VARS = [Var(n) for n in "abcd"]


def _agree_on_grid(f, g, variables):
    for vals in itertools.product(range(-2, 3), repeat=len(variables)):
        env = dict(zip(variables, vals))
        if evaluate(f, env) != evaluate(g, env):
            return False
    return True


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_to_rcnf_is_equivalent(seed, k):
    variables = GRID_VARS[:k]
    f = random_nnf(random.Random(seed), variables)
    assert _agree_on_grid(to_rcnf(f).formula(), f, variables)
