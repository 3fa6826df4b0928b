"""Inductive weakening of lemma sets: counterexample-driven, postcondition, syntactic."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .cfa import modified_vars
from .formula import TRUE, BoolVar, Formula, Var, conj, disj, is_reserved, neg, prime
from .rcnf import Rcnf
from .smt import SolverSession, Status, evaluate_partial

_selector_ids: Iterator[int] = itertools.count()


def fresh_selector() -> Var:
    return Var(f"__sel{next(_selector_ids)}")


@dataclass(frozen=True)
class SelectorMap:
    """Fresh boolean selector -> the lemma it switches off."""

    entries: dict[Var, Formula] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.items())


@dataclass(frozen=True)
class WeakeningOutcome:
    kept: Rcnf
    removed: tuple[Formula, ...]
    sat_query_count: int
    unsat_on_exit: bool

    @property
    def query_count(self) -> int:
        return self.sat_query_count


def annotate(phi: Rcnf) -> tuple[SelectorMap, Formula]:
    """``AND_i (s_i or l_i)`` with fresh selectors ``s_i``."""
    if phi.bottom:
        raise ValueError("cannot annotate the bottom element")
    entries = {fresh_selector(): l for l in phi.lemmas}
    return SelectorMap(entries), conj([disj(BoolVar(s), l) for s, l in entries.items()])


def _primed_annotation(sel: SelectorMap) -> Formula:
    return conj([disj(BoolVar(s), prime(l)) for s, l in sel.entries.items()])


def _weaken_loop(lhs: Formula, tau: Formula, phi: Rcnf, sel: SelectorMap,
                 session: SolverSession) -> WeakeningOutcome:
    """Query ``lhs and tau and not phi'_annotated``, switching off falsified lemmas."""
    session.push()
    try:
        session.assert_formula(conj(lhs, tau, neg(_primed_annotation(sel))))
        dropped: set[Var] = set()
        queries = 0
        while True:
            assumptions = [(s, s in dropped) for s in sel.entries]
            status, model = session.check_with_assumptions(assumptions)
            queries += 1
            if status is Status.UNSAT:
                unsat = True
                break
            if status is Status.UNKNOWN:
                dropped = set(sel.entries)
                unsat = False
                break
            newly = {s for s, l in sel.entries.items()
                     if s not in dropped and evaluate_partial(model, prime(l)) is not True}
            if not newly:
                raise RuntimeError("model does not falsify any active lemma")
            dropped |= newly
    finally:
        session.pop()
    removed = tuple(sel.entries[s] for s in sel.entries if s in dropped)
    return WeakeningOutcome(phi.without(removed), removed, queries, unsat)


def counterexample_weakening(phi: Rcnf, tau: Formula, session: SolverSession) -> WeakeningOutcome:
    """Largest subset ``S`` of ``phi`` with ``S and tau -> S'``.

    Each satisfiable check yields a counterexample to induction; every lemma
    it falsifies (or leaves undetermined) is dropped for good.
    """
    if phi.bottom or not phi.lemmas:
        return WeakeningOutcome(phi, (), 0, True)
    sel, ann = annotate(phi)
    return _weaken_loop(ann, tau, phi, sel, session)


def abstract_postcondition(psi: Formula, tau: Formula, phi: Rcnf,
                           session: SolverSession) -> WeakeningOutcome:
    """Largest subset ``S`` of ``phi`` with ``psi and tau -> S'``."""
    if phi.bottom:
        raise ValueError("phi must not be bottom")
    if not phi.lemmas:
        return WeakeningOutcome(phi, (), 0, True)
    sel, _ = annotate(phi)
    return _weaken_loop(psi, tau, phi, sel, session)


def syntactic_weakening(phi: Rcnf, tau: Formula, variables: Iterable[Var] | None = None) -> Rcnf:
    """Keep the lemmas none of whose variables ``tau`` modifies.

    ``variables`` defaults to the unprimed variables of ``phi`` and ``tau``.
    """
    if phi.bottom:
        return phi
    if variables is None:
        variables = {v.unprime() for v in tau.free_vars if not is_reserved(v)}
        variables |= phi.free_vars()
    touched = modified_vars(tau, variables)
    return Rcnf(tuple(l for l in phi.lemmas if not (l.free_vars & touched)))


def check_inductive(phi: Rcnf, tau: Formula, session: SolverSession) -> bool:
    if phi.bottom:
        return True
    f = phi.formula()
    if f == TRUE:
        return True
    return session.is_sat(conj(f, tau, neg(prime(f)))) is Status.UNSAT


__all__ = [
    "SelectorMap", "WeakeningOutcome", "annotate", "counterexample_weakening",
    "abstract_postcondition", "syntactic_weakening", "check_inductive", "fresh_selector",
]
