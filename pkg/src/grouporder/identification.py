"""Identification diagnostics for an ordered group structure on a comparability graph.

A candidate type map ``tau`` (agent -> integer type, 1 = lowest) is checked
against a comparability graph: same-type comparable agents are contracted,
monotone paths are searched in the contracted graph, and the set of agents
whose type is pinned down by those paths is grown to a fixed point.

Monotone paths here always step the type by exactly one per edge. A strictly
monotone path of length ``K0 - 1`` over types ``1..K0`` must do so, and the
extension rounds only admit paths whose end-type gap equals their length,
which forces the same unit steps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping


@dataclass(frozen=True)
class ComparabilityGraph:
    """Undirected simple graph whose edges mark testable agent pairs."""

    vertices: tuple[str, ...]
    edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        pos = {v: k for k, v in enumerate(self.vertices)}
        canon = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if a not in pos or b not in pos:
                raise ValueError(f"edge ({a!r}, {b!r}) has an unknown endpoint")
            canon.add((a, b) if pos[a] < pos[b] else (b, a))
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_edges(cls, vertices: Iterable[str], edges: Iterable[tuple[str, str]]):
        return cls(tuple(vertices), frozenset(tuple(e) for e in edges))

    @classmethod
    def complete(cls, vertices: Iterable[str]):
        vertices = tuple(vertices)
        return cls(vertices, frozenset(itertools.combinations(vertices, 2)))

    def adjacency(self) -> dict[str, set[str]]:
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def has_edge(self, a, b) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def is_complete(self) -> bool:
        n = len(self.vertices)
        return len(self.edges) == n * (n - 1) // 2

    def sorted_edges(self) -> list[tuple[str, str]]:
        pos = {v: k for k, v in enumerate(self.vertices)}
        return sorted(self.edges, key=lambda e: (pos[e[0]], pos[e[1]]))


@dataclass(frozen=True)
class TypedVertex:
    id: str
    members: frozenset[str]
    type: int


@dataclass(frozen=True)
class TypedGraph:
    """Collapsed graph: each vertex is a set of same-type agents."""

    vertices: tuple[TypedVertex, ...]
    edges: frozenset[tuple[str, str]]

    def vertex(self, vid) -> TypedVertex:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise KeyError(vid)

    @property
    def types(self) -> dict[str, int]:
        return {v.id: v.type for v in self.vertices}

    def adjacency(self) -> dict[str, set[str]]:
        adj = {v.id: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def agents_of(self, vids: Iterable[str]) -> frozenset[str]:
        lookup = {v.id: v.members for v in self.vertices}
        out = set()
        for vid in vids:
            out |= lookup[vid]
        return frozenset(out)


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def tau_collapse(graph, tau: Mapping[str, int] | None = None) -> TypedGraph:
    """Contract every comparable same-type pair into one vertex.

    ``graph`` may be a ``ComparabilityGraph`` (``tau`` required) or an
    already collapsed ``TypedGraph``, in which case its own vertex types are
    used and the result is unchanged (collapsing is idempotent).
    """
    if isinstance(graph, TypedGraph):
        members = {v.id: v.members for v in graph.vertices}
        types = graph.types
        order = [v.id for v in graph.vertices]
        edges = graph.edges
    else:
        if tau is None:
            raise ValueError("tau is required to collapse a comparability graph")
        missing = [v for v in graph.vertices if v not in tau]
        if missing:
            raise ValueError(f"tau undefined for {missing}")
        members = {v: frozenset([v]) for v in graph.vertices}
        types = {v: int(tau[v]) for v in graph.vertices}
        order = list(graph.vertices)
        edges = graph.edges

    parent = {v: v for v in order}
    pos = {v: k for k, v in enumerate(order)}
    for a, b in edges:
        if types[a] == types[b]:
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                # keep the earliest vertex as representative so ids are stable
                if pos[rb] < pos[ra]:
                    ra, rb = rb, ra
                parent[rb] = ra

    groups: dict[str, list[str]] = {}
    for v in order:
        groups.setdefault(_find(parent, v), []).append(v)

    vertices = []
    rep_id = {}
    for root, vs in groups.items():
        if len(vs) == 1:
            vid = vs[0]
        else:
            vid = "+".join(vs)
        for v in vs:
            rep_id[v] = vid
        mem = frozenset().union(*(members[v] for v in vs))
        vertices.append(TypedVertex(vid, mem, types[root]))

    new_edges = set()
    vpos = {v.id: k for k, v in enumerate(vertices)}
    for a, b in edges:
        ra, rb = rep_id[a], rep_id[b]
        if ra == rb:
            continue
        new_edges.add((ra, rb) if vpos[ra] < vpos[rb] else (rb, ra))
    return TypedGraph(tuple(vertices), frozenset(new_edges))


def _step_neighbors(tg: TypedGraph):
    """Directed unit-step edges: u -> v whenever type(v) == type(u) + 1."""
    types = tg.types
    up = {v.id: [] for v in tg.vertices}
    down = {v.id: [] for v in tg.vertices}
    for a, b in tg.edges:
        if types[b] == types[a] + 1:
            up[a].append(b)
            down[b].append(a)
        elif types[a] == types[b] + 1:
            up[b].append(a)
            down[a].append(b)
    return up, down


def _reach(starts, nbrs) -> set[str]:
    seen = set(starts)
    stack = list(starts)
    while stack:
        u = stack.pop()
        for w in nbrs[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _full_path_vertices(tg: TypedGraph, K0: int) -> set[str]:
    types = tg.types
    up, down = _step_neighbors(tg)
    bottoms = [v for v, t in types.items() if t == 1]
    tops = [v for v, t in types.items() if t == K0]
    return _reach(bottoms, up) & _reach(tops, down)


def has_full_monotone_path(tg: TypedGraph, K0: int) -> bool:
    """True iff the collapsed graph holds a monotone path through types 1..K0."""
    if K0 < 1:
        raise ValueError("K0 must be >= 1")
    return bool(_full_path_vertices(tg, K0))


def longest_monotone_path(tg: TypedGraph) -> int:
    """Number of edges in the longest strictly monotone path."""
    types = tg.types
    adj = tg.adjacency()
    # longest increasing path ending at each vertex; types strictly increase, so
    # processing in type order is a valid topological order
    best = {}
    for v in sorted(types, key=lambda x: types[x]):
        best[v] = max((best[u] + 1 for u in adj[v] if types[u] < types[v]), default=0)
    return max(best.values(), default=0)


def identified_set(tg: TypedGraph, K0: int) -> frozenset[str]:
    """Agents whose types are pinned down by monotone paths (the fixed point N*)."""
    if K0 < 1:
        raise ValueError("K0 must be >= 1")
    ident = _full_path_vertices(tg, K0)
    if not ident:
        return frozenset()
    up, down = _step_neighbors(tg)
    types = tg.types
    while True:
        grown = set(ident)
        for low in ident:
            fwd = _reach([low], up)
            highs = [h for h in ident if h in fwd and types[h] > types[low]]
            if highs:
                grown |= fwd & _reach(highs, down)
        if grown == ident:
            break
        ident = grown
    return tg.agents_of(ident)


@dataclass(frozen=True)
class IdentificationReport:
    identified: bool
    has_path: bool
    n_star: frozenset[str]
    K0: int
    longest_path: int
    collapsed: TypedGraph

    def to_dict(self, order=None) -> dict:
        order = list(order) if order is not None else sorted(self.n_star)
        pos = {a: k for k, a in enumerate(order)}
        return {
            "identified": self.identified,
            "has_path": self.has_path,
            "N_star": sorted(self.n_star, key=lambda a: pos.get(a, len(pos))),
            "K0": self.K0,
            "K0_from_longest_path": self.longest_path + 1,
            "collapsed_vertices": [
                {"id": v.id, "type": v.type,
                 "members": sorted(v.members, key=lambda a: pos.get(a, len(pos)))}
                for v in self.collapsed.vertices
            ],
            "collapsed_edges": sorted([list(e) for e in self.collapsed.edges]),
        }


def check_identified(graph: ComparabilityGraph, tau: Mapping[str, int],
                     K0: int | None = None) -> IdentificationReport:
    tg = tau_collapse(graph, tau)
    longest = longest_monotone_path(tg)
    if K0 is None:
        K0 = longest + 1
    has_path = has_full_monotone_path(tg, K0)
    n_star = identified_set(tg, K0)
    identified = has_path and n_star == frozenset(graph.vertices)
    return IdentificationReport(identified, has_path, n_star, K0, longest, tg)


def pairwise_signs(graph: ComparabilityGraph, tau: Mapping[str, int]) -> dict[tuple[str, str], int]:
    """Sign of tau(a) - tau(b) on every edge: what pairwise indexes reveal."""
    out = {}
    for a, b in graph.sorted_edges():
        d = tau[a] - tau[b]
        out[(a, b)] = (d > 0) - (d < 0)
    return out


def observationally_equivalent(graph, tau1, tau2) -> bool:
    """Two type maps that no pairwise comparison on ``graph`` can tell apart."""
    return pairwise_signs(graph, tau1) == pairwise_signs(graph, tau2)
