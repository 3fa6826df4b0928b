import pytest

from slicer.cfa import live_variables
from slicer.engine import (
    Art, ArtNode, SlicerConfig, TransferContext, VerdictStatus, check_safety, extract_invariant,
    find_sibling, prepare_cfa, run_fixpoint, transfer_relation, validate_invariant, verify_cfa,
)
from slicer.formula import FALSE, TRUE, Var, disj, eq, ne
from slicer.lang import load_program
from slicer.rcnf import Rcnf

x, y, c_, p, s = (Var(n) for n in ("x", "y", "c", "p", "s"))
P12 = disj(eq(p, 1), eq(p, 2))
S_IMPLIES_P1 = disj(eq(p, 1), eq(s, 0))
NOT_S_IMPLIES_P2 = disj(eq(p, 2), ne(s, 0))


@pytest.fixture(scope="module")
def nested(program_text):
    return prepare_cfa(load_program(program_text("nested_flag.prog")))


def heads(c):
    return sorted(n for n in c.nodes if c.label(n).endswith(":while"))


def edge(c, src, dst):
    return next(e for e in c.edges if e.src == src and e.dst == dst)


def ctx_for(c, session):
    return TransferContext(c, SlicerConfig(), session, live_variables(c))


def test_find_sibling():
    art = Art()
    art.add(ArtNode(0, 10, Rcnf()))
    art.add(ArtNode(1, 11, Rcnf(), 0))
    art.add(ArtNode(2, 12, Rcnf(), 1))
    t = art.nodes[2]
    assert find_sibling(t, 11, art).id == 1
    assert find_sibling(t, 99, art) is None
    assert find_sibling(t, 12, art) is t


def test_nested_seed_and_self_loop(nested, session):
    a, b = heads(nested)
    ctx = ctx_for(nested, session)
    art = Art()
    root = art.add(ArtNode(0, nested.n0, Rcnf()))
    at_a = art.add(transfer_relation(edge(nested, nested.n0, a), root, art, ctx))
    assert at_a.element == Rcnf((eq(x, 0), eq(y, 0), P12, S_IMPLIES_P1, NOT_S_IMPLIES_P2))
    at_b = art.add(transfer_relation(edge(nested, a, b), at_a, art, ctx))
    after = transfer_relation(edge(nested, b, b), at_b, art, ctx)
    assert after.element == Rcnf((eq(c_, 100), eq(x, 1), P12, S_IMPLIES_P1, NOT_S_IMPLIES_P2))
    assert [e.removed for e in ctx.stats.weakenings] == [(eq(y, 0),)]


def test_inductive_self_loop_is_unchanged_and_cached(nested, session):
    _, b = heads(nested)
    ctx = ctx_for(nested, session)
    art = Art()
    elem = Rcnf((eq(c_, 100), P12))
    t = art.add(ArtNode(0, b, elem))
    loop = edge(nested, b, b)
    assert transfer_relation(loop, t, art, ctx).element == elem
    assert transfer_relation(loop, t, art, ctx).element == elem
    assert ctx.stats.cache_hits == 1


def test_nested_fixpoint(nested, session):
    a, b = heads(nested)
    art, verdict = run_fixpoint(nested, SlicerConfig(), session)
    assert verdict.safe
    inv = verdict.invariant
    assert session.implies(inv[b], eq(c_, 100)) and session.implies(inv[b], P12)
    assert session.implies(inv[a], S_IMPLIES_P1)
    assert inv[nested.error] == FALSE
    dropped = [set(e.removed) for e in verdict.stats.weakenings if e.removed]
    assert dropped == [{eq(y, 0)}, {eq(x, 0), eq(y, 0)}, {eq(x, 1)}]
    assert all(n in art.expanded or n in art.covered for n in art.nodes)


def test_loop_free_is_symbolic_execution(session):
    c = prepare_cfa(load_program("int x, y; x = nondet(); assume(x > 0); y = x + 1; assert(y > 1);"))
    art, verdict = run_fixpoint(c, SlicerConfig(), session)
    assert verdict.safe
    assert verdict.stats.weakenings == []


@pytest.mark.parametrize("name", ["sign_doubling.prog", "flag.prog", "swap_branches.prog"])
def test_corpus_programs_proven(program_text, name):
    _, _, verdict = verify_cfa(load_program(program_text(name)))
    assert verdict.safe


def test_extract_invariant_joins_uncovered_nodes():
    art = Art()
    art.add(ArtNode(0, 0, Rcnf()))
    art.add(ArtNode(1, 5, Rcnf((eq(x, 0),)), 0))
    art.add(ArtNode(2, 5, Rcnf((eq(x, 1),)), 0))
    art.add(ArtNode(3, 5, Rcnf((eq(x, 2),)), 0))
    art.covered[3] = 1
    inv = extract_invariant(art)
    assert inv[5] == disj(eq(x, 0), eq(x, 1))
    assert inv[0] == TRUE


def test_validate_invariant(nested, session):
    a, b = heads(nested)
    top = {n: TRUE for n in nested.nodes}
    assert validate_invariant(nested, top, session)
    _, verdict = run_fixpoint(nested, SlicerConfig(), session)
    assert validate_invariant(nested, verdict.invariant, session)
    bad = dict(verdict.invariant)
    bad[b] = eq(y, 0)
    assert not validate_invariant(nested, bad, session)


def test_pruned_error_is_safe():
    c = load_program("int x; x = 0; while (x < 3) { x = x + 1; }")
    _, art, verdict = verify_cfa(c)
    assert verdict.safe and art is None


def test_leaping_counterexample_witness(program_text, session):
    c = prepare_cfa(load_program(program_text("leap.prog")))
    art, verdict = run_fixpoint(c, SlicerConfig(), session)
    assert verdict.status is VerdictStatus.UNKNOWN
    path = verdict.witness_path
    assert path[0] == art.root.id
    assert art.nodes[path[-1]].cfa_node == c.error


def test_budget_exhaustion_is_unknown(nested, session):
    _, verdict = run_fixpoint(nested, SlicerConfig(node_budget=3), session)
    assert verdict.status is VerdictStatus.UNKNOWN
    assert "budget" in verdict.reason


def test_check_safety_without_error():
    c = load_program("int x; x = 0;")
    assert check_safety({}, c).safe
