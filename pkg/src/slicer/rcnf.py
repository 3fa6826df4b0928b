"""Relaxed CNF: lemma sets, conversion into them, and cheap quantifier elimination."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

from .formula import (
    FALSE, TRUE, And, Const, Exists, Formula, Lin, LinExpr, Or, Var,
    conj, disj, neg, substitute, to_nnf, unprime,
)

DEFAULT_EXPANSION_LIMIT = 16


@dataclass(frozen=True)
class Rcnf:
    """A finite set of quantifier-free lemmas, or the bottom element.

    Lemma order is insertion order (kept for deterministic selector
    numbering); equality is set equality.
    """

    lemmas: tuple[Formula, ...] = ()
    bottom: bool = False

    @staticmethod
    def of(lemmas: Iterable[Formula]) -> "Rcnf":
        return Rcnf(tuple(dict.fromkeys(l for l in lemmas if l != TRUE)))

    @staticmethod
    def bot() -> "Rcnf":
        return Rcnf((), True)

    def __iter__(self) -> Iterator[Formula]:
        return iter(self.lemmas)

    def __len__(self) -> int:
        return len(self.lemmas)

    def __contains__(self, item) -> bool:
        return item in self.lemmas

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rcnf):
            return NotImplemented
        return self.bottom == other.bottom and set(self.lemmas) == set(other.lemmas)

    def __hash__(self) -> int:
        return hash((self.bottom, frozenset(self.lemmas)))

    def issubset(self, other: "Rcnf") -> bool:
        if self.bottom:
            return True
        if other.bottom:
            return False
        return set(self.lemmas) <= set(other.lemmas)

    def without(self, removed: Iterable[Formula]) -> "Rcnf":
        gone = set(removed)
        return Rcnf(tuple(l for l in self.lemmas if l not in gone), self.bottom)

    def formula(self) -> Formula:
        """Concretization: conjunction of lemmas, ``false`` for bottom."""
        if self.bottom:
            return FALSE
        return conj(self.lemmas)

    def free_vars(self) -> frozenset[Var]:
        out: frozenset[Var] = frozenset()
        for l in self.lemmas:
            out |= l.free_vars
        return out

    def __repr__(self) -> str:
        if self.bottom:
            return "Rcnf(bottom)"
        return "Rcnf{" + ", ".join(str(l) for l in self.lemmas) + "}"


def _is_tautology(clause: Formula) -> bool:
    """A disjunction containing a literal and its complement."""
    if not isinstance(clause, Or):
        return False
    args = set(clause.args)
    return any(neg(a) in args for a in clause.args if not isinstance(a, (And, Or)))


def _conjuncts(f: Formula) -> list[Formula]:
    """Flatten + factorize (no expansion); returns the list of conjuncts."""
    if isinstance(f, And):
        out: list[Formula] = []
        for a in f.args:
            out.extend(_conjuncts(a))
        return list(dict.fromkeys(out))
    if isinstance(f, Or):
        parts = [_conjuncts(d) for d in f.args]
        if any(not p for p in parts):
            return []
        common = [c for c in parts[0] if all(c in p for p in parts[1:])]
        rests = [[c for c in p if c not in common] for p in parts]
        if any(not r for r in rests):
            # one disjunct is exactly the common part, so it absorbs the rest
            return common
        rest = disj([conj(r) for r in rests])
        if rest == TRUE or _is_tautology(rest):
            return common
        return common + [rest]
    if f == TRUE:
        return []
    return [f]


def _expansion(lemma: Formula) -> list[Formula] | None:
    """Cross-product clauses of a disjunction of conjunctions, or None."""
    if not isinstance(lemma, Or):
        return None
    choices = [_conjuncts(d) if isinstance(d, And) else [d] for d in lemma.args]
    if all(len(c) == 1 for c in choices):
        return None
    out = []
    for pick in itertools.product(*choices):
        clause = disj(pick)
        if clause != TRUE and not _is_tautology(clause):
            out.append(clause)
    return list(dict.fromkeys(out))


def to_rcnf(f: Formula, expansion_limit: int = DEFAULT_EXPANSION_LIMIT) -> Rcnf:
    """Convert a quantifier-free formula to an equivalent lemma set.

    Flattening and factorization run to fixpoint; a top-level disjunction of
    conjunctions is cross-product expanded (depth one) only while the total
    lemma count stays within ``expansion_limit``.
    """
    f = to_nnf(f)
    lemmas = _conjuncts(f)
    if FALSE in lemmas:
        return Rcnf((FALSE,))
    total = len(lemmas)
    out: list[Formula] = []
    for i, lemma in enumerate(lemmas):
        expanded = _expansion(lemma)
        if expanded is not None and total - 1 + len(expanded) <= expansion_limit:
            total += len(expanded) - 1
            out.extend(expanded)
        else:
            out.append(lemma)
    return Rcnf.of(out)


def _definition(lemma: Formula, bound: set[Var]) -> tuple[Var, LinExpr] | None:
    """Match ``b = t`` with ``b`` bound, unit coefficient and ``b`` not in ``t``."""
    if not isinstance(lemma, Lin) or lemma.op != "=":
        return None
    for v, c in lemma.coeffs:
        if v in bound and abs(c) == 1:
            rest = LinExpr.from_dict({w: k for w, k in lemma.coeffs if w != v}, -lemma.bound)
            # c*v + rest = 0  =>  v = -rest / c
            return v, rest.scale(-1 if c == 1 else 1)
    return None


def eliminate_definitions(f: Formula) -> tuple[list[Formula], frozenset[Var]]:
    """Substitute away top-level definitional equalities on bound variables.

    Returns the remaining conjuncts and the bound variables that had no
    definition.
    """
    if isinstance(f, Exists):
        bound, body = set(f.bound), f.body
    else:
        bound, body = set(), f
    lemmas = _conjuncts(to_nnf(body))
    while bound and FALSE not in lemmas:
        found = None
        for lemma in lemmas:
            found = _definition(lemma, bound)
            if found:
                break
        if found is None:
            break
        b, t = found
        bound.discard(b)
        lemmas = _conjuncts(conj([substitute(l, b, t) for l in lemmas]))
    return lemmas, frozenset(bound)


def eliminate_quantifiers_best_effort(
    f: Formula, expansion_limit: int = DEFAULT_EXPANSION_LIMIT
) -> Rcnf:
    """Over-approximate ``exists B. g`` by a quantifier-free lemma set.

    Definitional equalities on bound variables that appear as top-level
    conjuncts are substituted away; lemmas still mentioning a bound variable
    are then dropped.
    """
    lemmas, bound = eliminate_definitions(f)
    if FALSE in lemmas:
        return Rcnf((FALSE,))
    kept = [l for l in lemmas if not (l.free_vars & bound)]
    return to_rcnf(conj(kept), expansion_limit)


def post_image(d: Rcnf, tau: Formula, program_vars: Iterable[Var],
               expansion_limit: int = DEFAULT_EXPANSION_LIMIT) -> Rcnf:
    """``(exists X. d and tau)`` unprimed, via best-effort elimination."""
    if d.bottom:
        return Rcnf.bot()
    xs = tuple(sorted(set(program_vars)))
    body = conj(d.formula(), tau)
    res = eliminate_quantifiers_best_effort(Exists(xs, body) if xs else body, expansion_limit)
    return Rcnf.of(unprime(l) for l in res.lemmas)


