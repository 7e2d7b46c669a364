"""Sequenced association graphs (SAGs) and their CN-set structure.

A SAG is a mixed graph: directed edges carry causal influence from past to
future, undirected edges join contemporaneous (entangled) systems. Node ids
are strings; every query that needs an order uses sorted node ids.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import networkx as nx

from .errors import DimensionError, InvalidSagError


@dataclass(frozen=True, eq=False)
class Sag:
    """Mixed graph over nodes carrying Hilbert-space dimensions.

    Construction enforces the structural invariants (unique ids, known
    endpoints, no self-loops, no pair joined by both edge kinds). Validity as
    a SAG is checked separately by :func:`validate_sag`.
    """

    nodes: tuple
    directed_edges: frozenset = frozenset()
    undirected_edges: frozenset = frozenset()

    def __post_init__(self):
        nodes = tuple((str(n), int(d)) for n, d in self.nodes)
        ids = [n for n, _ in nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node id")
        for n, d in nodes:
            if d < 1:
                raise DimensionError(f"node {n!r} has non-positive dimension {d}")
        known = set(ids)
        directed = frozenset((str(a), str(b)) for a, b in self.directed_edges)
        undirected = frozenset(frozenset((str(a), str(b))) for a, b in
                               (tuple(e) if len(e) == 2 else (next(iter(e)),) * 2
                                for e in self.undirected_edges))
        for a, b in directed:
            if a not in known or b not in known:
                raise ValueError(f"edge {a} -> {b} references an unknown node")
            if a == b:
                raise ValueError(f"self-loop at node {a!r}")
        for e in undirected:
            if len(e) != 2:
                raise ValueError(f"self-loop at node {next(iter(e))!r}")
            for x in e:
                if x not in known:
                    raise ValueError(f"edge {'--'.join(sorted(e))} references an unknown node")
        for a, b in directed:
            if frozenset((a, b)) in undirected:
                raise ValueError(f"nodes {a!r} and {b!r} carry both a directed and an undirected edge")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed_edges", directed)
        object.__setattr__(self, "undirected_edges", undirected)

    @cached_property
    def ids(self) -> tuple:
        return tuple(sorted(n for n, _ in self.nodes))

    @cached_property
    def dims(self) -> dict:
        return dict(self.nodes)

    @cached_property
    def _digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.ids)
        g.add_edges_from(self.directed_edges)
        return g

    @cached_property
    def _ugraph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.ids)
        g.add_edges_from(tuple(e) for e in self.undirected_edges)
        return g

    @cached_property
    def _component(self) -> dict:
        comp = {}
        for c in nx.connected_components(self._ugraph):
            key = tuple(sorted(c))
            for n in c:
                comp[n] = key
        return comp

    def neighbors(self, node: str) -> tuple:
        """Undirected-edge neighbors."""
        self._check(node)
        return tuple(sorted(self._ugraph.neighbors(node)))

    def parents(self, node: str) -> tuple:
        self._check(node)
        return tuple(sorted(self._digraph.predecessors(node)))

    def children(self, node: str) -> tuple:
        self._check(node)
        return tuple(sorted(self._digraph.successors(node)))

    def _check(self, *nodes):
        for n in nodes:
            if n not in self.dims:
                raise KeyError(f"unknown node {n!r}")

    def without_edges(self, directed: Iterable = (), undirected: Iterable = ()) -> "Sag":
        drop_d = {tuple(e) for e in directed}
        drop_u = {frozenset(e) for e in undirected}
        return Sag(self.nodes,
                   frozenset(e for e in self.directed_edges if e not in drop_d),
                   frozenset(e for e in self.undirected_edges if e not in drop_u))

    def with_undirected(self, edges: Iterable) -> "Sag":
        und = set(self.undirected_edges) | {frozenset(e) for e in edges}
        return Sag(self.nodes, self.directed_edges, frozenset(und))

    def edge_lists(self) -> tuple[list, list]:
        """Sorted directed and undirected edge lists, for reporting."""
        d = sorted(self.directed_edges)
        u = sorted(tuple(sorted(e)) for e in self.undirected_edges)
        return d, u


@dataclass(frozen=True)
class Violation:
    """A pair breaking SAG validity: ``a`` precedes ``b`` and ``b`` precedes
    or is contemporaneous with ``a``."""

    a: str
    b: str
    clause: str  # "precedes" or "contemporaneous"

    def message(self) -> str:
        rel = "precedes" if self.clause == "precedes" else "is contemporaneous with"
        return f"{self.a} precedes {self.b} and {self.b} {rel} {self.a}"


@dataclass(frozen=True)
class CnSet:
    members: tuple
    kind: str
    influencing_parents: tuple = ()
    noninfluencing_parents: tuple = ()

    @property
    def parents(self) -> tuple:
        """Influencing and non-influencing parents in node-id order."""
        return tuple(sorted(self.influencing_parents + self.noninfluencing_parents))

    @property
    def label(self) -> str:
        return "{" + ",".join(self.members) + "}"

    @property
    def is_root(self) -> bool:
        return self.kind == "root"


@dataclass(frozen=True)
class CnOrder:
    """A linear extension of CN-set precedence plus its longest-path layering."""

    order: tuple
    layers: tuple


def contemporaneous(g: Sag, a: str, b: str) -> bool:
    g._check(a, b)
    return g._component[a] == g._component[b]


def precedes(g: Sag, a: str, b: str) -> bool:
    g._check(a, b)
    return b in nx.descendants(g._digraph, a)


def validate_sag(g: Sag) -> Violation | None:
    """First pair (in sorted node order) violating SAG validity, or None."""
    desc = {n: nx.descendants(g._digraph, n) for n in g.ids}
    for a in g.ids:
        for b in g.ids:
            if b not in desc[a]:
                continue
            if a in desc[b]:
                return Violation(a, b, "precedes")
            if g._component[a] == g._component[b]:
                return Violation(a, b, "contemporaneous")
    return None


def _require_valid(g: Sag) -> None:
    v = validate_sag(g)
    if v is not None:
        raise InvalidSagError(f"not a sequenced association graph: {v.message()}", v)


def cn_partition(g: Sag) -> list[CnSet]:
    """CN-sets ordered by smallest member id."""
    _require_valid(g)
    groups = sorted(set(g._component.values()))
    out = []
    for members in groups:
        mset = set(members)
        infl = sorted({p for m in members for p in g._digraph.predecessors(m)} - mset)
        non = sorted({q for p in infl for q in g._component[p]} - set(infl) - mset)
        kind = "child" if infl else "root"
        out.append(CnSet(members, kind, tuple(infl), tuple(non)))
    return out


def cn_of(g: Sag, node: str) -> CnSet:
    g._check(node)
    for c in cn_partition(g):
        if node in c.members:
            return c
    raise KeyError(node)  # unreachable


def cn_graph(g: Sag) -> nx.DiGraph:
    """Directed graph whose nodes are CN-set member tuples."""
    sets = cn_partition(g)
    q = nx.DiGraph()
    q.add_nodes_from(c.members for c in sets)
    for a, b in g.directed_edges:
        q.add_edge(g._component[a], g._component[b])
    return q


def cn_topological_order(g: Sag) -> CnOrder:
    """Deterministic topological order of CN-sets.

    Among the CN-sets that are ready at each step the one with the smallest
    member id goes first. ``layers`` groups CN-sets by longest directed path
    from a root; sets sharing a layer are mutually unordered.
    """
    sets = {c.members: c for c in cn_partition(g)}
    q = cn_graph(g)
    if any(a == b for a, b in q.edges) or not nx.is_directed_acyclic_graph(q):
        raise InvalidSagError("CN-sets are cyclically ordered by the directed edges")
    indeg = {k: q.in_degree(k) for k in q.nodes}
    heap = [(k[0], k) for k, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, k = heapq.heappop(heap)
        order.append(k)
        for s in q.successors(k):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, (s[0], s))
    depth = {}
    for k in order:
        depth[k] = max((depth[p] + 1 for p in q.predecessors(k)), default=0)
    layers = []
    for k in order:
        while len(layers) <= depth[k]:
            layers.append([])
        layers[depth[k]].append(sets[k])
    layers = tuple(tuple(sorted(l, key=lambda c: c.members[0])) for l in layers)
    return CnOrder(tuple(sets[k] for k in order), layers)
