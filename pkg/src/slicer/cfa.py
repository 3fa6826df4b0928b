"""Control-flow automata and the structural passes run before slicing."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .formula import FALSE, Exists, Formula, Var, conj, disj, eq, rename, to_smt
from .rcnf import _conjuncts, eliminate_definitions


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    formula: Formula
    id: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.src} -> {self.dst} : {to_smt(self.formula)}"


@dataclass(frozen=True)
class Cfa:
    """Nodes are ints; ``error`` is the single error node, if any."""

    nodes: frozenset[int]
    edges: tuple[Edge, ...]
    n0: int
    variables: tuple[Var, ...]
    error: int | None = None
    labels: Mapping[int, str] = field(default_factory=dict, compare=False)

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def out_edges(self, n: int) -> list[Edge]:
        return [e for e in self.edges if e.src == n]

    def in_edges(self, n: int) -> list[Edge]:
        return [e for e in self.edges if e.dst == n]

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {n: [] for n in sorted(self.nodes)}
        for e in self.edges:
            if e.dst not in succ[e.src]:
                succ[e.src].append(e.dst)
        return succ

    def label(self, n: int) -> str:
        return self.labels.get(n, f"n{n}")

    def node_by_label(self, label: str) -> int:
        for n, l in self.labels.items():
            if l == label and n in self.nodes:
                return n
        raise KeyError(label)

    def dump(self) -> str:
        """Text digraph: one ``src -> dst : formula`` line per edge."""
        lines = [f"# n0={self.label(self.n0)} error={self.label(self.error) if self.error is not None else '-'}"]
        for e in sorted(self.edges, key=lambda e: (e.src, e.dst, e.id)):
            lines.append(f"{self.label(e.src)} -> {self.label(e.dst)} : {to_smt(e.formula)}")
        return "\n".join(lines) + "\n"


def empty_like(c: Cfa) -> Cfa:
    return Cfa(frozenset(), (), c.n0, c.variables, None, c.labels)


# --------------------------------------------------------------------------
# frame conditions


def frame_vars(tau: Formula, variables: Iterable[Var]) -> frozenset[Var]:
    """Program variables ``v`` whose frame equality ``v' = v`` is a top-level conjunct."""
    top = set(_conjuncts(tau))
    return frozenset(v for v in variables if _frame_atom(v) in top)


def _frame_atom(v: Var) -> Formula:
    return eq(v.prime(), v)


def modified_vars(tau: Formula, variables: Iterable[Var]) -> frozenset[Var]:
    variables = tuple(variables)
    return frozenset(variables) - frame_vars(tau, variables)


def read_vars(tau: Formula, variables: Iterable[Var]) -> frozenset[Var]:
    """Variables whose pre-state value the transition inspects.

    Frame copies ``v' = v`` are not reads; any other occurrence of ``v`` (or of
    ``v'`` when ``v`` is framed) is.
    """
    variables = tuple(variables)
    framed = frame_vars(tau, variables)
    frames = {_frame_atom(v) for v in framed}
    reads: set[Var] = set()
    for c in _conjuncts(tau):
        if c in frames:
            continue
        for v in c.free_vars:
            if v.is_program:
                reads.add(v)
            elif v.primed and v.unprime() in framed:
                reads.add(v.unprime())
    return frozenset(reads) & frozenset(variables)


# --------------------------------------------------------------------------
# loop heads and weak topological order


def loop_heads(c: Cfa) -> frozenset[int]:
    """Targets of back edges in a depth-first search from ``n0``."""
    if c.is_empty:
        return frozenset()
    succ = c.successors()
    heads: set[int] = set()
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack = [(c.n0, iter(succ[c.n0]))]
    state[c.n0] = 1
    while stack:
        n, it = stack[-1]
        for m in it:
            s = state.get(m)
            if s == 1:
                heads.add(m)
            elif s is None:
                state[m] = 1
                stack.append((m, iter(succ[m])))
                break
        else:
            state[n] = 2
            stack.pop()
    return frozenset(heads)


@dataclass(frozen=True)
class Wto:
    """Bourdoncle weak topological order.

    ``structure`` is a nested list: ints are plain vertices, lists are
    components whose first element is the head.
    """

    structure: list
    order: tuple[int, ...]
    depth: Mapping[int, int]
    heads: frozenset[int]

    @property
    def position(self) -> dict[int, int]:
        return {n: i for i, n in enumerate(self.order)}

    def __str__(self) -> str:
        def fmt(items):
            return " ".join(f"({fmt(x)})" if isinstance(x, list) else str(x) for x in items)
        return fmt(self.structure)


def weak_topological_order(c: Cfa) -> Wto:
    if c.is_empty:
        return Wto([], (), {}, frozenset())
    succ = c.successors()
    dfn: dict[int, float] = {n: 0 for n in succ}
    stack: list[int] = []
    counter = itertools.count(1)

    def visit(v: int, partition: list) -> float:
        stack.append(v)
        dfn[v] = head = next(counter)
        loop = False
        for w in succ[v]:
            m = visit(w, partition) if dfn[w] == 0 else dfn[w]
            if m <= head:
                head, loop = m, True
        if head == dfn[v]:
            dfn[v] = float("inf")
            elem = stack.pop()
            if loop:
                while elem != v:
                    dfn[elem] = 0
                    elem = stack.pop()
                partition.insert(0, component(v))
            else:
                partition.insert(0, v)
        return head

    def component(v: int) -> list:
        part: list = []
        for w in succ[v]:
            if dfn[w] == 0:
                visit(w, part)
        return [v] + part

    structure: list = []
    visit(c.n0, structure)
    # nodes unreachable from n0 go last, in id order
    for n in sorted(succ):
        if dfn[n] == 0:
            visit(n, rest := [])
            structure.extend(rest)

    order: list[int] = []
    depth: dict[int, int] = {}
    heads: set[int] = set()

    def walk(items, d):
        for i, x in enumerate(items):
            if isinstance(x, list):
                heads.add(x[0])
                order.append(x[0])
                depth[x[0]] = d + 1
                walk(x[1:], d + 1)
            else:
                order.append(x)
                depth[x] = d
    walk(structure, 0)
    return Wto(structure, tuple(order), depth, frozenset(heads))


# --------------------------------------------------------------------------
# large-block compaction


def sequential_compose(s1: Formula, s2: Formula, variables: Iterable[Var], k: int) -> Formula | None:
    """``exists M. s1[X'/M] and s2[X/M]`` with M eliminated, or None.

    Only definitional equalities are used, so the result is exact; when some
    intermediate cannot be eliminated that way the composition is refused.
    """
    variables = tuple(variables)
    mids = {v: Var(v.base, mid=k) for v in variables}
    a = rename(s1, {v.prime(): mids[v] for v in variables})
    b = rename(s2, {v: mids[v] for v in variables})
    body = conj(a, b)
    bound = tuple(sorted(set(mids.values()) & body.free_vars))
    lemmas, rest = eliminate_definitions(Exists(bound, body) if bound else body)
    if FALSE in lemmas:
        return FALSE
    if any(l.free_vars & rest for l in lemmas):
        return None
    return conj(lemmas)


def compact(c: Cfa, protected: Iterable[int] = (), strict: bool = False) -> Cfa:
    """Large-block encoding: merge parallel then sequential edges to fixpoint.

    Loop heads, ``n0`` and the error node are always protected, and so is any
    node whose bypass would need an intermediate that has no defining
    equality (the result stays path-equivalent).  With
    ``strict`` a node is bypassed only if it has exactly one in- and one
    out-edge; otherwise a node with one in-edge and several out-edges is also
    bypassed, composing the in-edge into each out-edge.
    """
    if c.is_empty:
        return c
    keep = set(protected) | {c.n0} | loop_heads(c)
    if c.error is not None:
        keep.add(c.error)
    edges = [(e.src, e.dst, e.formula) for e in c.edges]
    mid_counter = itertools.count()
    while True:
        changed = False
        groups: dict[tuple[int, int], list[Formula]] = defaultdict(list)
        for s, d, f in edges:
            groups[(s, d)].append(f)
        if any(len(fs) > 1 for fs in groups.values()):
            changed = True
            edges = [(s, d, disj(fs) if len(fs) > 1 else fs[0]) for (s, d), fs in groups.items()]
        ins: dict[int, list[int]] = defaultdict(list)
        outs: dict[int, list[int]] = defaultdict(list)
        for i, (s, d, _) in enumerate(edges):
            ins[d].append(i)
            outs[s].append(i)
        for b in sorted(set(ins) | set(outs)):
            if b in keep or len(ins[b]) != 1 or not outs[b]:
                continue
            if strict and len(outs[b]) != 1:
                continue
            (i_in,) = ins[b]
            a, _, s1 = edges[i_in]
            if a == b or any(edges[j][1] == b for j in outs[b]):
                continue
            new = [(a, edges[j][1], sequential_compose(s1, edges[j][2], c.variables, next(mid_counter)))
                   for j in outs[b]]
            if any(f is None for _, _, f in new):
                keep.add(b)
                continue
            drop = {i_in, *outs[b]}
            edges = [e for i, e in enumerate(edges) if i not in drop] + new
            changed = True
            break
        if not changed:
            break
    edges = [(s, d, f) for s, d, f in edges if f != FALSE]
    nodes = {c.n0} | ({c.error} if c.error is not None else set())
    for s, d, _ in edges:
        nodes.update((s, d))
    nodes &= set(c.nodes)
    out = tuple(Edge(s, d, f, i) for i, (s, d, f) in
                enumerate(sorted(edges, key=lambda e: (e[0], e[1]))))
    return Cfa(frozenset(nodes), out, c.n0, c.variables, c.error, c.labels)


# --------------------------------------------------------------------------
# reduction and liveness


def reduce_to_error(c: Cfa) -> Cfa:
    """Drop every node from which the error node cannot be reached."""
    if c.is_empty or c.error is None or c.error not in c.nodes:
        return empty_like(c)
    pred: dict[int, set[int]] = defaultdict(set)
    for e in c.edges:
        pred[e.dst].add(e.src)
    alive = {c.error}
    work = [c.error]
    while work:
        n = work.pop()
        for p in pred[n]:
            if p not in alive:
                alive.add(p)
                work.append(p)
    if c.n0 not in alive:
        return empty_like(c)
    edges = tuple(e for e in c.edges if e.src in alive and e.dst in alive)
    return replace(c, nodes=frozenset(alive & set(c.nodes)), edges=edges)


def live_variables(c: Cfa) -> dict[int, frozenset[Var]]:
    """Backward may-liveness: live(n) = U_e reads(e) | (live(dst) - kills(e))."""
    if c.is_empty:
        return {}
    info = []
    for e in c.edges:
        framed = frame_vars(e.formula, c.variables)
        info.append((e, read_vars(e.formula, c.variables), frozenset(c.variables) - framed))
    live: dict[int, frozenset[Var]] = {n: frozenset() for n in c.nodes}
    changed = True
    while changed:
        changed = False
        for e, reads, kills in info:
            new = live[e.src] | reads | (live[e.dst] - kills)
            if new != live[e.src]:
                live[e.src] = new
                changed = True
    return live


def edge_map(c: Cfa) -> dict[int, Edge]:
    return {e.id: e for e in c.edges}


__all__ = [
    "Cfa", "Edge", "Wto", "compact", "reduce_to_error", "live_variables",
    "weak_topological_order", "loop_heads", "frame_vars", "modified_vars",
    "read_vars", "sequential_compose", "empty_like",
]
