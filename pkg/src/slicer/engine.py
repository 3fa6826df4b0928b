"""The slicing fixpoint over an abstract reachability tree (ART)."""

from __future__ import annotations

import enum
import heapq
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .cfa import (
    Cfa, Edge, compact, live_variables, modified_vars, reduce_to_error, weak_topological_order,
)
from .formula import FALSE, TRUE, Formula, conj, disj, neg, prime
from .rcnf import DEFAULT_EXPANSION_LIMIT, Rcnf, post_image
from .smt import SolverSession, Status
from .weakening import abstract_postcondition, counterexample_weakening, syntactic_weakening

log = logging.getLogger(__name__)


class WeakeningMode(str, enum.Enum):
    CEX = "cex"
    SYNTACTIC = "syntactic"


@dataclass(frozen=True)
class SlicerConfig:
    weakening: WeakeningMode = WeakeningMode.CEX
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT
    node_budget: int = 10_000
    time_budget_s: float | None = None
    live_filter: bool = True
    prune_infeasible: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weakening", WeakeningMode(self.weakening))
        if self.expansion_limit < 1 or self.node_budget < 1:
            raise ValueError("budgets must be positive")


# --------------------------------------------------------------------------
# ART


@dataclass(frozen=True)
class ArtNode:
    id: int
    cfa_node: int
    element: Rcnf
    backpointer: int | None = None
    edge: int | None = None  # CFA edge id that produced this node


@dataclass
class Art:
    nodes: dict[int, ArtNode] = field(default_factory=dict)
    expanded: set[int] = field(default_factory=set)
    covered: dict[int, int | None] = field(default_factory=dict)  # node -> coverer

    @property
    def root(self) -> ArtNode:
        return self.nodes[0]

    def add(self, node: ArtNode) -> ArtNode:
        self.nodes[node.id] = node
        return node

    def next_id(self) -> int:
        return len(self.nodes)

    def chain(self, t: ArtNode) -> Iterable[ArtNode]:
        cur: ArtNode | None = t
        while cur is not None:
            yield cur
            cur = self.nodes[cur.backpointer] if cur.backpointer is not None else None

    def uncovered_at(self, loc: int) -> list[ArtNode]:
        return [n for n in self.nodes.values() if n.cfa_node == loc and n.id not in self.covered]

    def path_to(self, t: ArtNode) -> tuple[int, ...]:
        return tuple(reversed([n.id for n in self.chain(t)]))

    def dump(self) -> str:
        lines = []
        for n in self.nodes.values():
            flags = ("E" if n.id in self.expanded else "") + ("C" if n.id in self.covered else "")
            src = "-" if n.backpointer is None else str(n.backpointer)
            lines.append(f"{src} -> {n.id} @{n.cfa_node} [{flags}] : {n.element!r}")
        return "\n".join(lines) + "\n"


def find_sibling(t: ArtNode, target: int, art: Art) -> ArtNode | None:
    """First node on ``t``'s backpointer chain (``t`` included) located at ``target``."""
    for n in art.chain(t):
        if n.cfa_node == target:
            return n
    return None


# --------------------------------------------------------------------------
# statistics and events


@dataclass(frozen=True)
class WeakeningEvent:
    node: int
    parent: int
    edge: int
    kind: str  # "cex", "postcondition", "syntactic"
    phi: Rcnf  # the lemma set being weakened
    kept: Rcnf
    queries: int
    psi: Rcnf | None = None  # left-hand side when it differs from phi

    @property
    def removed(self) -> tuple[Formula, ...]:
        return tuple(l for l in self.phi.lemmas if l not in self.kept)

    @property
    def size(self) -> int:
        return len(self.phi)


@dataclass
class EngineStats:
    weakenings: list[WeakeningEvent] = field(default_factory=list)
    art_size: int = 0
    coverage_checks: int = 0
    cache_hits: int = 0
    wall_time: float = 0.0

    def histogram(self) -> list[tuple[int, int]]:
        """(query count, number of weakenings with that count), sorted."""
        return sorted(Counter(e.queries for e in self.weakenings).items())


@dataclass
class TransferContext:
    cfa: Cfa
    config: SlicerConfig
    session: SolverSession
    live: Mapping[int, frozenset] = field(default_factory=dict)
    inductive_cache: set = field(default_factory=set)
    stats: EngineStats = field(default_factory=EngineStats)


def _seed(t: ArtNode, edge: Edge, ctx: TransferContext) -> Rcnf:
    d = post_image(t.element, edge.formula, ctx.cfa.variables, ctx.config.expansion_limit)
    if FALSE in d:
        return Rcnf.bot()
    if edge.dst == ctx.cfa.error:
        return d
    if ctx.config.live_filter:
        live = ctx.live.get(edge.dst, frozenset())
        d = Rcnf(tuple(l for l in d.lemmas if l.free_vars & live))
    return d


def transfer_relation(edge: Edge, t: ArtNode, art: Art, ctx: TransferContext) -> ArtNode:
    """Successor of ``t`` along ``edge``; the node is not yet added to ``art``."""
    def make(element: Rcnf) -> ArtNode:
        return ArtNode(art.next_id(), edge.dst, element, t.id, edge.id)

    tau = edge.formula
    if t.element.bottom:
        return make(Rcnf.bot())
    psi = t.element.formula()
    if ctx.config.prune_infeasible or edge.dst == ctx.cfa.error:
        if ctx.session.is_sat(conj(psi, tau)) is Status.UNSAT:
            return make(Rcnf.bot())
    sib = find_sibling(t, edge.dst, art)
    if sib is None or sib.element.bottom or edge.dst == ctx.cfa.error:
        return make(_seed(t, edge, ctx))

    syntactic = ctx.config.weakening is WeakeningMode.SYNTACTIC
    variables = ctx.cfa.variables
    if sib is t:
        # self-loop: two-sided weakening of the current element
        if syntactic:
            kept = syntactic_weakening(t.element, tau, variables)
            _record(ctx, t, edge, "syntactic", t.element, kept, 0)
            return make(kept)
        key = (frozenset(t.element.lemmas), edge.id)
        if key in ctx.inductive_cache:
            ctx.stats.cache_hits += 1
            return make(t.element)
        out = counterexample_weakening(t.element, tau, ctx.session)
        if out.unsat_on_exit:
            ctx.inductive_cache.add((frozenset(out.kept.lemmas), edge.id))
        _record(ctx, t, edge, "cex", t.element, out.kept, out.sat_query_count)
        return make(out.kept)

    if syntactic:
        touched = modified_vars(tau, variables)
        mine = set(t.element.lemmas)
        kept = Rcnf(tuple(l for l in sib.element.lemmas
                          if l in mine and not (l.free_vars & touched)))
        _record(ctx, t, edge, "syntactic", sib.element, kept, 0, t.element)
        return make(kept)
    out = abstract_postcondition(psi, tau, sib.element, ctx.session)
    _record(ctx, t, edge, "postcondition", sib.element, out.kept, out.sat_query_count, t.element)
    return make(out.kept)


def _record(ctx: TransferContext, t: ArtNode, edge: Edge, kind: str,
            phi: Rcnf, kept: Rcnf, queries: int, psi: Rcnf | None = None) -> None:
    ctx.stats.weakenings.append(WeakeningEvent(-1, t.id, edge.id, kind, phi, kept, queries, psi))


# --------------------------------------------------------------------------
# fixpoint


class VerdictStatus(str, enum.Enum):
    SAFE = "safe"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    invariant: Mapping[int, Formula]
    witness_path: tuple[int, ...] | None = None
    stats: EngineStats = field(default_factory=EngineStats)
    reason: str = ""

    @property
    def safe(self) -> bool:
        return self.status is VerdictStatus.SAFE


class BudgetExceeded(RuntimeError):
    pass


def _implies(a: ArtNode, b: ArtNode, ctx: TransferContext) -> bool:
    """Does ``[[a]]`` imply ``[[b]]``?  Syntactic subset first, then the solver."""
    if a.element.bottom:
        return True
    if b.element.bottom:
        return False
    if set(b.element.lemmas) <= set(a.element.lemmas):
        return True
    ctx.stats.coverage_checks += 1
    return ctx.session.implies(a.element.formula(), b.element.formula())


def _coverage(new: ArtNode, art: Art, ctx: TransferContext) -> None:
    if new.element.bottom:
        art.covered[new.id] = None
        return
    others = [n for n in art.uncovered_at(new.cfa_node) if n.id != new.id]
    for other in others:
        if _implies(new, other, ctx):
            art.covered[new.id] = other.id
            return
    for other in others:
        if other.id != art.root.id and _implies(other, new, ctx):
            art.covered[other.id] = new.id


def run_fixpoint(c: Cfa, config: SlicerConfig, session: SolverSession) -> tuple[Art, Verdict]:
    """Expand the ART until every node is expanded or covered."""
    start = time.monotonic()
    wto = weak_topological_order(c)
    pos = wto.position
    ctx = TransferContext(c, config, session, live_variables(c))
    art = Art()
    art.add(ArtNode(0, c.n0, Rcnf()))

    def loc_key(n: int) -> tuple[int, int]:
        return (-wto.depth.get(n, 0), pos.get(n, len(pos)))

    out_edges: dict[int, list[Edge]] = {n: [] for n in c.nodes}
    for e in c.edges:
        out_edges[e.src].append(e)
    for n, es in out_edges.items():
        es.sort(key=lambda e: (e.dst != e.src, *loc_key(e.dst), e.id))

    work: list[tuple[tuple[int, int, int], int]] = [((*loc_key(c.n0), 0), 0)]
    reason = ""
    try:
        while work:
            _, tid = heapq.heappop(work)
            if tid in art.covered or tid in art.expanded:
                continue
            t = art.nodes[tid]
            for e in out_edges[t.cfa_node]:
                if len(art.nodes) >= config.node_budget:
                    raise BudgetExceeded(f"ART node budget {config.node_budget} exhausted")
                if config.time_budget_s is not None and time.monotonic() - start > config.time_budget_s:
                    raise BudgetExceeded("time budget exhausted")
                child = art.add(transfer_relation(e, t, art, ctx))
                _tag_last_event(ctx, child)
                _coverage(child, art, ctx)
                if child.id not in art.covered and out_edges[child.cfa_node]:
                    heapq.heappush(work, ((*loc_key(child.cfa_node), child.id), child.id))
                if t.id in art.covered:
                    break
            art.expanded.add(t.id)
    except BudgetExceeded as e:
        reason = str(e)
    ctx.stats.art_size = len(art.nodes)
    ctx.stats.wall_time = time.monotonic() - start
    if reason:
        return art, Verdict(VerdictStatus.UNKNOWN, {}, None, ctx.stats, reason)
    inv = extract_invariant(art, c)
    return art, check_safety(inv, c, art, session, ctx.stats)


def _tag_last_event(ctx: TransferContext, child: ArtNode) -> None:
    ws = ctx.stats.weakenings
    if ws and ws[-1].node == -1:
        e = ws[-1]
        ws[-1] = replace(e, node=child.id)


def extract_invariant(art: Art, c: Cfa | None = None) -> dict[int, Formula]:
    """Per location, the disjunction of its uncovered nodes; unvisited locations map to false."""
    groups: dict[int, list[Formula]] = {n: [] for n in (c.nodes if c else ())}
    for n in art.nodes.values():
        groups.setdefault(n.cfa_node, [])
        if n.id not in art.covered:
            groups[n.cfa_node].append(n.element.formula())
    inv = {loc: disj(fs) if fs else FALSE for loc, fs in groups.items()}
    if art.nodes:
        inv[art.root.cfa_node] = TRUE
    return inv


def validate_invariant(c: Cfa, inv: Mapping[int, Formula], session: SolverSession) -> bool:
    """Initiation and per-edge consecution, checked from scratch."""
    if c.is_empty:
        return True
    if inv.get(c.n0, FALSE) != TRUE:
        if session.is_sat(neg(inv.get(c.n0, FALSE))) is not Status.UNSAT:
            return False
    for e in c.edges:
        pre = inv.get(e.src, FALSE)
        if pre == FALSE:
            continue
        post = prime(inv.get(e.dst, FALSE))
        if session.is_sat(conj(pre, e.formula, neg(post))) is not Status.UNSAT:
            return False
    return True


def check_safety(inv: Mapping[int, Formula], c: Cfa, art: Art | None = None,
                 session: SolverSession | None = None,
                 stats: EngineStats | None = None) -> Verdict:
    stats = stats or EngineStats()
    if c.is_empty or c.error is None or c.error not in c.nodes:
        return Verdict(VerdictStatus.SAFE, dict(inv), None, stats, "error location unreachable")
    err = inv.get(c.error, FALSE)
    if err == FALSE or (session is not None and session.is_sat(err) is Status.UNSAT):
        return Verdict(VerdictStatus.SAFE, dict(inv), None, stats, "invariant excludes the error location")
    witness = None
    if art is not None:
        for n in art.nodes.values():
            if n.cfa_node == c.error and n.id not in art.covered and not n.element.bottom:
                witness = art.path_to(n)
                break
    return Verdict(VerdictStatus.UNKNOWN, dict(inv), witness, stats,
                   "invariant does not exclude the error location")


# --------------------------------------------------------------------------
# pipeline


def prepare_cfa(c: Cfa, protected: Iterable[int] = ()) -> Cfa:
    """Reduce to error-relevant nodes, compact, and reduce again."""
    return reduce_to_error(compact(reduce_to_error(c), protected))


def verify_cfa(c: Cfa, config: SlicerConfig = SlicerConfig(),
               session: SolverSession | None = None,
               validation_session: SolverSession | None = None,
               prepared: bool = False) -> tuple[Cfa, Art | None, Verdict]:
    """Run the whole analysis; a safe verdict is re-validated in a separate session."""
    own = session is None
    session = session or SolverSession()
    try:
        pc = c if prepared else prepare_cfa(c)
        if pc.is_empty:
            return pc, None, Verdict(VerdictStatus.SAFE, {}, None, EngineStats(),
                                     "error location unreachable")
        art, verdict = run_fixpoint(pc, config, session)
    finally:
        if own:
            session.close()
    if verdict.safe:
        own_v = validation_session is None
        vs = validation_session or SolverSession(session.command, session.timeout_ms)
        try:
            ok = validate_invariant(pc, verdict.invariant, vs)
        finally:
            if own_v:
                vs.close()
        if not ok:
            verdict = Verdict(VerdictStatus.UNKNOWN, verdict.invariant, None, verdict.stats,
                              "invariant failed independent validation")
    return pc, art, verdict


__all__ = [
    "Art", "ArtNode", "SlicerConfig", "WeakeningMode", "Verdict", "VerdictStatus",
    "EngineStats", "WeakeningEvent", "TransferContext", "find_sibling", "transfer_relation",
    "run_fixpoint", "extract_invariant", "validate_invariant", "check_safety",
    "prepare_cfa", "verify_cfa",
]
