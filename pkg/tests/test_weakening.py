import random

import pytest

from slicer.formula import TRUE, BoolVar, FALSE, LinExpr, Var, conj, disj, eq, ge, gt, le, lt, ne
from slicer.oracle import FiniteDomain, random_weakening_instance, strongest_weakening_bruteforce
from slicer.rcnf import Rcnf
from slicer.smt import Status
from slicer.weakening import (
    abstract_postcondition, annotate, check_inductive, counterexample_weakening,
    syntactic_weakening,
)

x, y, i, n, p = (Var(s) for s in ("x", "y", "i", "n", "p"))


def frame(*vs):
    return conj([eq(v.prime(), v) for v in vs])


FIG1_TAU = conj(lt(i, n), eq(i.prime(), LinExpr.of(i) + 1), eq(x.prime(), LinExpr.of(x) * 2),
                frame(p, n))
SIGN_POS = disj(eq(p, 0), ge(x, 0))
SIGN_NEG = disj(ne(p, 0), lt(x, 0))


def test_annotate():
    sel, f = annotate(Rcnf((eq(x, 0),)))
    ((s, lemma),) = sel
    assert lemma == eq(x, 0) and f == disj(BoolVar(s), eq(x, 0))
    sel, f = annotate(Rcnf())
    assert len(sel) == 0 and f == TRUE
    sel, f = annotate(Rcnf((eq(x, 0), eq(y, 0))))
    assert len(sel) == 2


def test_sign_loop_body(session):
    out = counterexample_weakening(Rcnf((eq(i, 0), SIGN_POS, SIGN_NEG)), FIG1_TAU, session)
    assert out.kept == Rcnf((SIGN_POS, SIGN_NEG))
    assert out.removed == (eq(i, 0),)
    assert out.unsat_on_exit and out.sat_query_count == 2


def test_inductive_phi_costs_one_query(session):
    phi = Rcnf((SIGN_POS, SIGN_NEG))
    out = counterexample_weakening(phi, FIG1_TAU, session)
    assert out.kept == phi and out.sat_query_count == 1


def test_counter_lemma_is_dropped(session):
    out = counterexample_weakening(Rcnf((eq(x, 0),)), eq(x.prime(), LinExpr.of(x) + 1), session)
    assert out.kept == Rcnf()


def test_postcondition_false_keeps_everything(session):
    phi = Rcnf((eq(x, 0), ge(y, 1)))
    out = abstract_postcondition(FALSE, frame(x, y), phi, session)
    assert out.kept == phi


def test_postcondition_identity_keeps_phi(session):
    phi = Rcnf((eq(x, 0), ge(y, 1)))
    out = abstract_postcondition(phi.formula(), frame(x, y), phi, session)
    assert out.kept == phi


def test_postcondition_drops_what_psi_does_not_imply(session):
    phi = Rcnf((eq(x, 0), eq(y, 0), ge(x, 0)))
    psi = conj(eq(x, 1), eq(y, 0))
    out = abstract_postcondition(psi, frame(x, y), phi, session)
    assert out.kept == Rcnf((eq(y, 0), ge(x, 0)))


@pytest.mark.parametrize("tau,kept", [
    (conj(ge(x, 1), eq(y.prime(), LinExpr.of(y) + 1), eq(x.prime(), x)), True),
    (conj(eq(x.prime(), LinExpr.of(x) + 1), eq(y.prime(), y)), False),
])
def test_syntactic_weakening(tau, kept):
    phi = Rcnf((gt(x, 0),))
    assert syntactic_weakening(phi, tau) == (phi if kept else Rcnf())


def test_syntactic_empty():
    assert syntactic_weakening(Rcnf(), eq(x.prime(), 0)) == Rcnf()


def test_check_inductive(session):
    step = conj(eq(x.prime(), LinExpr.of(x) + 1))
    assert check_inductive(Rcnf(), step, session)
    assert check_inductive(Rcnf((ge(x, 0),)), step, session)
    assert not check_inductive(Rcnf((eq(x, 0),)), step, session)


class _UnknownSession:
    """Delegates to a real session but answers every check with UNKNOWN."""

    def __init__(self, inner):
        self.inner = inner

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def check_with_assumptions(self, assumptions=()):
        return Status.UNKNOWN, None


def test_unknown_drops_everything(session):
    out = counterexample_weakening(Rcnf((ge(x, 0), eq(y, 0))), frame(x, y), _UnknownSession(session))
    assert out.kept == Rcnf() and not out.unsat_on_exit


@pytest.mark.parametrize("seed", range(30))
def test_matches_bruteforce(session, seed):
    inst = random_weakening_instance(random.Random(seed))
    out = counterexample_weakening(inst.phi, inst.tau, session)
    assert out.kept == strongest_weakening_bruteforce(inst.phi, inst.tau, FiniteDomain())
    assert out.sat_query_count <= len(inst.phi) + 1


@pytest.mark.parametrize("seed", range(15))
def test_syntactic_is_contained_in_cex(session, seed):
    inst = random_weakening_instance(random.Random(500 + seed))
    kept = counterexample_weakening(inst.phi, inst.tau, session).kept
    assert syntactic_weakening(inst.phi, inst.tau, inst.variables).issubset(kept)
