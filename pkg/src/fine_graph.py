"""
Fine Graph Module
Features:
- Graph with edge-reversal involution (vertices, edges, src, tgt, rev)
- FineGraph: bipartite actual/virtual graph, half edges as valency-1 virtual vertices
- GroupAction by explicit permutation tables, closure from generators
- Barycentric subdivision, fine quotient, quotient weights, reduction
- Small-graph isomorphism with a witness map (networkx VF2)
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
from networkx.algorithms import isomorphism

from errors import GraphError, GroupActionError, QuotientError
from settings import CONFIG, safe_get

logger = logging.getLogger(__name__)

ACTUAL = "actual"
VIRTUAL = "virtual"

WeightMap = Dict[Tuple[int, int], Fraction]


# --------------------------- Graph ---------------------------

@dataclass(frozen=True, eq=False)
class Graph:
    vertices: FrozenSet[int]
    edges: FrozenSet[int]
    src: Mapping[int, int]
    tgt: Mapping[int, int]
    rev: Mapping[int, int]
    labels: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "vertices", frozenset(self.vertices))
        object.__setattr__(self, "edges", frozenset(self.edges))
        out: Dict[int, List[int]] = {v: [] for v in self.vertices}
        for a in self.edges:
            if a not in self.src or a not in self.tgt or a not in self.rev:
                raise GraphError(f"edge {a} lacks src/tgt/rev")
            r = self.rev[a]
            if r == a or r not in self.edges or self.rev[r] != a:
                raise GraphError(f"rev is not a fixed-point-free involution at edge {a}")
            if self.src[r] != self.tgt[a]:
                raise GraphError(f"src(rev({a})) != tgt({a})")
            if self.src[a] not in out or self.tgt[a] not in out:
                raise GraphError(f"edge {a} has an endpoint outside the vertex set")
            out[self.src[a]].append(a)
        for v in out:
            out[v].sort()
        object.__setattr__(self, "_out", out)

    @classmethod
    def from_pairs(cls, vertices: Iterable[int], pairs: Sequence[Tuple[int, int]],
                   labels: Optional[Mapping[int, str]] = None) -> "Graph":
        """Undirected edge i between (u, v) becomes directed edges 2i: u->v and 2i+1: v->u."""
        src, tgt, rev = {}, {}, {}
        for i, (u, v) in enumerate(pairs):
            a, b = 2 * i, 2 * i + 1
            src[a], tgt[a], rev[a] = u, v, b
            src[b], tgt[b], rev[b] = v, u, a
        return cls(frozenset(vertices), frozenset(src), src, tgt, rev, dict(labels or {}))

    def out_edges(self, v: int) -> List[int]:
        return self._out[v]

    def neighbors(self, v: int) -> List[int]:
        """Targets of edges leaving v, with multiplicity (a loop appears twice)."""
        return [self.tgt[a] for a in self._out[v]]

    def valency(self, v: int) -> int:
        return len(self._out[v])

    def edge_pairs(self) -> List[Tuple[int, int]]:
        """One (a, rev a) per undirected edge, a < rev a."""
        return sorted((a, self.rev[a]) for a in self.edges if a < self.rev[a])

    def induced(self, keep: Iterable[int]) -> "Graph":
        keep = frozenset(keep)
        edges = [a for a in self.edges if self.src[a] in keep and self.tgt[a] in keep]
        return Graph(keep, frozenset(edges),
                     {a: self.src[a] for a in edges}, {a: self.tgt[a] for a in edges},
                     {a: self.rev[a] for a in edges},
                     {v: s for v, s in self.labels.items() if v in keep})


@dataclass(frozen=True, eq=False)
class FineGraph:
    graph: Graph
    kind: Mapping[int, str]

    def __post_init__(self):
        g = self.graph
        for v in g.vertices:
            if self.kind.get(v) not in (ACTUAL, VIRTUAL):
                raise GraphError(f"vertex {v} has no actual/virtual kind")
        for a in g.edges:
            if self.kind[g.src[a]] == self.kind[g.tgt[a]]:
                raise GraphError(f"edge {a} joins two {self.kind[g.src[a]]} vertices")
        for v in g.vertices:
            if self.kind[v] == VIRTUAL and g.valency(v) not in (1, 2):
                raise GraphError(f"virtual vertex {v} has valency {g.valency(v)}")

    def actual_vertices(self) -> List[int]:
        return sorted(v for v in self.graph.vertices if self.kind[v] == ACTUAL)

    def virtual_vertices(self) -> List[int]:
        return sorted(v for v in self.graph.vertices if self.kind[v] == VIRTUAL)

    def half_edges(self) -> Dict[int, int]:
        """virtual vertex -> its actual anchor, for valency-1 virtual vertices."""
        return {h: self.graph.neighbors(h)[0] for h in self.virtual_vertices()
                if self.graph.valency(h) == 1}

    def actual_edges(self) -> Dict[int, Tuple[int, int]]:
        """virtual vertex -> (actual, actual) for valency-2 virtual vertices; loops give (v, v)."""
        return {h: tuple(sorted(self.graph.neighbors(h))) for h in self.virtual_vertices()
                if self.graph.valency(h) == 2}

    def actual_neighbors(self, v: int) -> List[int]:
        out = []
        for h in self.graph.neighbors(v):
            ends = self.graph.neighbors(h)
            if len(ends) == 2:
                out.append(ends[1] if ends[0] == v else ends[0])
        return out

    def induced(self, keep: Iterable[int]) -> "FineGraph":
        """Keep the given actual vertices and every virtual vertex whose neighbors all survive."""
        keep = set(keep)
        for h in self.virtual_vertices():
            if all(x in keep for x in self.graph.neighbors(h)):
                keep.add(h)
        g = self.graph.induced(keep)
        return FineGraph(g, {v: self.kind[v] for v in g.vertices})


# --------------------------- Group actions ---------------------------

def _compose(p: Mapping[int, int], r: Mapping[int, int]) -> Dict[int, int]:
    """(p o r)(x) = p(r(x))."""
    return {x: p[y] for x, y in r.items()}


@dataclass(frozen=True, eq=False)
class GroupAction:
    """Finite group acting on a Graph; table[i][j] is the index of g_i g_j (g_j applied first)."""
    graph: Graph
    vertex_perms: Tuple[Dict[int, int], ...]
    edge_perms: Tuple[Dict[int, int], ...]
    table: Tuple[Tuple[int, ...], ...]
    identity: int = 0
    checked: bool = False

    def __post_init__(self):
        g = self.graph
        n = len(self.vertex_perms)
        if n == 0 or len(self.edge_perms) != n or len(self.table) != n:
            raise GroupActionError("group tables have inconsistent sizes")
        for vp, ep in zip(self.vertex_perms, self.edge_perms):
            if set(vp) != set(g.vertices) or set(vp.values()) != set(g.vertices):
                raise GroupActionError("vertex map is not a permutation of the vertex set")
            if set(ep) != set(g.edges) or set(ep.values()) != set(g.edges):
                raise GroupActionError("edge map is not a permutation of the edge set")
            for a in g.edges:
                if vp[g.src[a]] != g.src[ep[a]] or vp[g.tgt[a]] != g.tgt[ep[a]] or ep[g.rev[a]] != g.rev[ep[a]]:
                    raise GroupActionError(f"permutation does not preserve src/tgt/rev at edge {a}")

    def __len__(self):
        return len(self.vertex_perms)

    def elements(self) -> range:
        return range(len(self))

    def check_group_axioms(self):
        """Identity, closure, inverses, associativity, and agreement of the table with the maps."""
        n = len(self)
        e = self.identity
        for i in range(n):
            if self.table[e][i] != i or self.table[i][e] != i:
                raise GroupActionError(f"element {e} is not an identity")
            if not any(self.table[i][j] == e for j in range(n)):
                raise GroupActionError(f"element {i} has no inverse")
            for j in range(n):
                k = self.table[i][j]
                if not 0 <= k < n:
                    raise GroupActionError("table is not closed")
                if _compose(self.vertex_perms[i], self.vertex_perms[j]) != self.vertex_perms[k]:
                    raise GroupActionError(f"table entry ({i},{j}) disagrees with the vertex maps")
        for i in range(n):
            for j in range(n):
                ij = self.table[i][j]
                for k in range(n):
                    if self.table[ij][k] != self.table[i][self.table[j][k]]:
                        raise GroupActionError("table is not associative")

    def ensure_group(self):
        """Run check_group_axioms once for actions built without closure."""
        if not self.checked:
            self.check_group_axioms()
            object.__setattr__(self, "checked", True)

    @classmethod
    def from_table(cls, graph: Graph, vertex_perms, edge_perms, table, identity: int = 0) -> "GroupAction":
        act = cls(graph, tuple(dict(p) for p in vertex_perms), tuple(dict(p) for p in edge_perms),
                  tuple(tuple(r) for r in table), identity)
        act.check_group_axioms()
        object.__setattr__(act, "checked", True)
        return act

    @classmethod
    def from_generators(cls, graph: Graph, generators: Sequence[Tuple[Mapping[int, int], Mapping[int, int]]],
                        max_order: int = 10000) -> "GroupAction":
        """Close the generating permutations under composition."""
        vs, es = sorted(graph.vertices), sorted(graph.edges)

        def key(vp, ep):
            return tuple(vp[v] for v in vs) + (None,) + tuple(ep[a] for a in es)

        ident = ({v: v for v in vs}, {a: a for a in es})
        elements = [ident]
        index = {key(*ident): 0}
        gens = [(dict(vp), dict(ep)) for vp, ep in generators]
        frontier = [ident]
        while frontier:
            new = []
            for gv, ge in gens:
                for hv, he in frontier:
                    cv, ce = _compose(gv, hv), _compose(ge, he)
                    k = key(cv, ce)
                    if k not in index:
                        index[k] = len(elements)
                        elements.append((cv, ce))
                        new.append((cv, ce))
                        if len(elements) > max_order:
                            raise GroupActionError(f"generated group exceeds {max_order} elements")
            frontier = new
        table = [[index[key(_compose(a[0], b[0]), _compose(a[1], b[1]))] for b in elements] for a in elements]
        logger.debug(f"Group closure: {len(elements)} elements from {len(gens)} generators")
        return cls(graph, tuple(e[0] for e in elements), tuple(e[1] for e in elements),
                   tuple(tuple(r) for r in table), 0, checked=True)

    @classmethod
    def trivial(cls, graph: Graph) -> "GroupAction":
        return cls.from_generators(graph, [])


# --------------------------- Subdivision ---------------------------

def _subdivide(g: Graph):
    """Returns (FineGraph, virtual id per directed edge, new edge id per (i, a))."""
    base = max(g.vertices, default=-1) + 1
    virtual: Dict[int, int] = {}
    for idx, (a, b) in enumerate(g.edge_pairs()):
        virtual[a] = virtual[b] = base + idx
    edge_index = {a: i for i, a in enumerate(sorted(g.edges))}
    new_id = {(i, a): 2 * edge_index[a] + i for a in g.edges for i in (0, 1)}
    src, tgt, rev = {}, {}, {}
    for a in g.edges:
        e0, e1 = new_id[(0, a)], new_id[(1, a)]
        src[e0], tgt[e0] = g.src[a], virtual[a]
        src[e1], tgt[e1] = virtual[a], g.tgt[a]
        rev[e0] = new_id[(1, g.rev[a])]
        rev[e1] = new_id[(0, g.rev[a])]
    vertices = set(g.vertices) | set(virtual.values())
    kind = {v: ACTUAL for v in g.vertices}
    kind.update({m: VIRTUAL for m in virtual.values()})
    sub = Graph(frozenset(vertices), frozenset(src), src, tgt, rev, dict(g.labels))
    return FineGraph(sub, kind), virtual, new_id


def barycentric_subdivision(g: Graph) -> FineGraph:
    return _subdivide(g)[0]


def _induced_perms(g: Graph, act: GroupAction, virtual, new_id):
    vperms, eperms = [], []
    for vp, ep in zip(act.vertex_perms, act.edge_perms):
        nv = dict(vp)
        nv.update({virtual[a]: virtual[ep[a]] for a in g.edges})
        ne = {new_id[(i, a)]: new_id[(i, ep[a])] for a in g.edges for i in (0, 1)}
        vperms.append(nv)
        eperms.append(ne)
    return vperms, eperms


def _orbit_map(items: Iterable[int], perms: Sequence[Mapping[int, int]]) -> Dict[int, int]:
    """item -> smallest item of its orbit."""
    rep: Dict[int, int] = {}
    for x in sorted(items):
        if x in rep:
            continue
        orbit = {p[x] for p in perms}
        for y in orbit:
            rep[y] = x
    return rep


def fine_quotient(g: Graph, act: GroupAction) -> FineGraph:
    """Quotient of the barycentric subdivision by the induced inversion-free action."""
    if act.graph is not g:
        raise GroupActionError("action belongs to a different graph")
    act.ensure_group()
    sub, virtual, new_id = _subdivide(g)
    vperms, eperms = _induced_perms(g, act, virtual, new_id)
    vrep = _orbit_map(sub.graph.vertices, vperms)
    erep = _orbit_map(sub.graph.edges, eperms)
    sg = sub.graph
    edges = sorted(set(erep.values()))
    src = {e: vrep[sg.src[e]] for e in edges}
    tgt = {e: vrep[sg.tgt[e]] for e in edges}
    rev = {e: erep[sg.rev[e]] for e in edges}
    vertices = set(vrep.values())
    kind = {v: sub.kind[v] for v in vertices}
    labels = {v: g.labels[v] for v in vertices if v in g.labels}
    quotient = FineGraph(Graph(frozenset(vertices), frozenset(edges), src, tgt, rev, labels), kind)
    half = len(quotient.half_edges())
    logger.debug(f"Fine quotient: {len(quotient.actual_vertices())} actual vertices, {half} half edges")
    return quotient


def plain_quotient(g: Graph, act: GroupAction) -> Tuple[Graph, Dict[int, int], Dict[int, int]]:
    """Quotient graph of an inversion-free action, with vertex and edge projections."""
    act.ensure_group()
    for ep in act.edge_perms:
        for a in g.edges:
            if ep[a] == g.rev[a]:
                raise GroupActionError(f"action inverts edge {a}; use fine_quotient")
    vrep = _orbit_map(g.vertices, act.vertex_perms)
    erep = _orbit_map(g.edges, act.edge_perms)
    edges = sorted(set(erep.values()))
    q = Graph(frozenset(vrep.values()), frozenset(edges),
              {e: vrep[g.src[e]] for e in edges}, {e: vrep[g.tgt[e]] for e in edges},
              {e: erep[g.rev[e]] for e in edges},
              {v: g.labels[v] for v in set(vrep.values()) if v in g.labels})
    return q, vrep, erep


def quotient_weights(g: Graph, act: GroupAction,
                     base: Optional[Mapping[Tuple[int, int], Fraction]] = None) -> WeightMap:
    """
    m[v, w] = number of neighbors of a preimage of v lying over w, keyed by the
    smallest vertex of each orbit (the ids fine_quotient uses). With base weights
    the neighbor counts of g are replaced by base[x, y].
    """
    vrep = _orbit_map(g.vertices, act.vertex_perms)
    by_src: Dict[int, List[Tuple[int, Fraction]]] = {}
    for (x, y), m in (base or {}).items():
        if m != 0 and y in vrep:
            by_src.setdefault(x, []).append((y, Fraction(m)))
    per_vertex: Dict[int, Dict[int, Fraction]] = {}
    for v in g.vertices:
        counts: Dict[int, Fraction] = {}
        targets = [(w, Fraction(1)) for w in g.neighbors(v)] if base is None else by_src.get(v, [])
        for w, m in targets:
            counts[vrep[w]] = counts.get(vrep[w], Fraction(0)) + m
        per_vertex[v] = counts
    weights: WeightMap = {}
    for v in sorted(g.vertices):
        r = vrep[v]
        if r == v:
            for w, m in per_vertex[v].items():
                weights[(r, w)] = m
        elif per_vertex[v] != per_vertex[r]:
            raise QuotientError(f"preimages {r} and {v} of the same orbit have different neighbor counts")
    return weights


def reduction(fg: FineGraph, weights: WeightMap, q_param: Optional[int] = None):
    """Merge parallel actual edges; half edges and weights are kept as they are."""
    from cf_structures import WCFG

    seen: Dict[Tuple[int, int], int] = {}
    drop = set()
    for h, ends in sorted(fg.actual_edges().items()):
        if ends in seen:
            drop.add(h)
        else:
            seen[ends] = h
    kept = fg.graph.induced(v for v in fg.graph.vertices if v not in drop)
    core = FineGraph(kept, {v: fg.kind[v] for v in kept.vertices})
    if drop:
        logger.debug(f"Reduction merged {len(drop)} parallel edges")
    return WCFG(core=core, cusps=(), weights=dict(weights), q_param=q_param)


# --------------------------- Isomorphism ---------------------------

def to_networkx(g) -> nx.MultiGraph:
    """Undirected multigraph, one edge per rev pair; FineGraph kinds become node attributes."""
    graph = g.graph if isinstance(g, FineGraph) else g
    G = nx.MultiGraph()
    for v in sorted(graph.vertices):
        G.add_node(v, kind=g.kind[v] if isinstance(g, FineGraph) else ACTUAL)
    for a, _ in graph.edge_pairs():
        G.add_edge(graph.src[a], graph.tgt[a])
    return G


def is_isomorphic(g1, g2) -> Tuple[bool, Optional[Dict]]:
    """Exact isomorphism test with a vertex bijection witness (Graph, FineGraph or networkx graph)."""
    limit = safe_get(CONFIG, "fine_graph", "max_isomorphism_vertices", default=64)
    G1 = g1 if isinstance(g1, nx.Graph) else to_networkx(g1)
    G2 = g2 if isinstance(g2, nx.Graph) else to_networkx(g2)
    if max(G1.number_of_nodes(), G2.number_of_nodes()) > limit:
        raise GraphError(f"isomorphism limited to {limit} vertices")
    if G1.number_of_nodes() != G2.number_of_nodes() or G1.number_of_edges() != G2.number_of_edges():
        return False, None
    G1, G2 = nx.MultiGraph(G1), nx.MultiGraph(G2)
    matcher = isomorphism.MultiGraphMatcher(
        G1, G2, node_match=lambda a, b: a.get("kind", ACTUAL) == b.get("kind", ACTUAL))
    if matcher.is_isomorphic():
        return True, dict(matcher.mapping)
    return False, None
