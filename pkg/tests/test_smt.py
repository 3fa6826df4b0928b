import sys
import textwrap

import pytest

from slicer.formula import TRUE, BoolVar, LinExpr, Var, conj, disj, eq, ge, gt, le, lt, neg, prime
from slicer.smt import (
    MissingValue, Model, SolverError, SolverSession, Status, evaluate, evaluate_partial,
    parse_sexprs, start_session,
)

x, y, i, n, p = (Var(s) for s in ("x", "y", "i", "n", "p"))


def test_contradiction_is_unsat(session):
    session.push()
    session.assert_formula(ge(x, 0))
    session.assert_formula(lt(x, 0))
    assert session.check() is Status.UNSAT
    session.pop()
    assert session.check() is Status.SAT


def test_true_is_sat_and_empty_assumptions(session):
    assert session.is_sat(TRUE) is Status.SAT
    status, model = session.check_with_assumptions([])
    assert status is Status.SAT and model is not None


def test_model_values_satisfy_the_query(session):
    f = conj(eq(LinExpr.of(x) + y, 7), ge(x, 5), le(y, 1))
    session.push()
    session.assert_formula(f)
    status, model = session.check_with_assumptions()
    session.pop()
    assert status is Status.SAT
    assert evaluate(model, f)


def test_assumptions_switch_selectors(session):
    s = Var("__sel_test")
    session.push()
    session.assert_formula(disj(BoolVar(s), eq(x, 1)))
    session.assert_formula(eq(x, 2))
    assert session.check_with_assumptions([(s, False)])[0] is Status.UNSAT
    assert session.check_with_assumptions([(s, True)])[0] is Status.SAT
    session.pop()


def test_sign_cti_falsifies_counter_lemma(session):
    tau = conj(lt(i, n), eq(i.prime(), LinExpr.of(i) + 1), eq(x.prime(), LinExpr.of(x) * 2),
               eq(p.prime(), p), eq(n.prime(), n))
    phi = conj(eq(i, 0), disj(eq(p, 0), ge(x, 0)), disj(neg(eq(p, 0)), lt(x, 0)))
    session.push()
    session.assert_formula(conj(phi, tau, neg(prime(phi))))
    status, model = session.check_with_assumptions()
    session.pop()
    assert status is Status.SAT
    assert model[i] == 0 and model[i.prime()] == 1
    assert evaluate(model, prime(eq(i, 0))) is False


def test_model_evaluation_and_missing_values():
    m = Model({x: 3})
    assert evaluate(m, gt(x, 0)) is True
    assert evaluate(m, eq(x, 0)) is False
    with pytest.raises(MissingValue):
        evaluate(m, gt(y, 0))
    assert evaluate_partial(m, gt(y, 0)) is None


def test_stats_add_up(session):
    before = session.stats.checks
    session.is_sat(ge(x, 0))
    session.is_sat(conj(ge(x, 1), le(x, 0)))
    st = session.stats
    assert st.checks == before + 2
    assert st.sat + st.unsat + st.unknown == st.checks


def test_parse_sexprs():
    assert parse_sexprs("(a (b 1) |x'|)") == [["a", ["b", "1"], "|x'|"]]


def test_nonexistent_binary():
    with pytest.raises(SolverError, match="cannot start"):
        start_session(["/nonexistent/solver-binary", "-in"])


def test_garbage_solver_fails_handshake():
    with pytest.raises(SolverError, match="handshake"):
        SolverSession(["/bin/cat"], timeout_ms=1000)


def test_timeout_reports_unknown(tmp_path):
    fake = tmp_path / "slow_solver.py"
    fake.write_text(textwrap.dedent("""
        import sys, time
        for line in sys.stdin:
            if line.startswith("(check-sat"):
                time.sleep(30)
            print("success", flush=True)
    """))
    s = SolverSession([sys.executable, str(fake)], timeout_ms=300)
    try:
        assert s.is_sat(ge(x, 0)) is Status.UNKNOWN
        assert s.stats.unknown == 1
    finally:
        s.close()


def test_smtlib_log(tmp_path):
    s = SolverSession(log_dir=tmp_path)
    s.is_sat(ge(x, 0))
    s.close()
    text = "".join(f.read_text() for f in tmp_path.glob("*.smt2"))
    assert "(check-sat" in text and "(set-logic QF_LIA)" in text
