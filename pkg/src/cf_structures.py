"""
CF Structures Module
Features:
- CuspDescriptor, WCFG (weighted CF graph), CFMatrix, Charge
- to_matrix / from_matrix, normalize, apply_operator with lazy cusp tails
- materialize: cusp tails unrolled to a finite block with a boundary
- detect_cusps: terminal chains with constant weights
- canonical_form / equivalent: comparison up to where the cusp boundary is drawn

Matrix convention: columns index the source vertex, M[w][v] = m[v, w].
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple

import networkx as nx
import sympy
from networkx.algorithms import isomorphism

from errors import CuspPatternError, NonGraphicError, NormalizationError, WrfqError
from fine_graph import ACTUAL, VIRTUAL, FineGraph, Graph
from settings import CONFIG, safe_get

logger = logging.getLogger(__name__)

Key = Hashable


class CuspVertex(NamedTuple):
    """Vertex at the given depth (>= 1) of cusp number `cusp`."""
    cusp: int
    depth: int


# --------------------------- Cusps and WCFGs ---------------------------

@dataclass(frozen=True)
class CuspDescriptor:
    attach: Key
    tail_index: int
    inward: Fraction
    outward: Fraction
    attach_weight: Optional[Fraction] = None
    label_prefix: Optional[str] = None
    label_offset: int = 1
    label_step: int = 1

    def __post_init__(self):
        object.__setattr__(self, "inward", Fraction(self.inward))
        object.__setattr__(self, "outward", Fraction(self.outward))
        aw = self.outward if self.attach_weight is None else Fraction(self.attach_weight)
        object.__setattr__(self, "attach_weight", aw)
        if self.inward <= 0 or self.outward <= 0 or aw <= 0:
            raise CuspPatternError(f"cusp {self.tail_index} has a non-positive weight "
                                   f"(inward {self.inward}, outward {self.outward}, attach {aw})")

    def label(self, depth: int) -> str:
        if self.label_prefix is None:
            return f"c{self.tail_index}.{depth}"
        return f"{self.label_prefix}{self.label_offset + (depth - 1) * self.label_step}"

    def is_quotient_pattern(self, q: int) -> bool:
        return self.outward == 1 and self.inward == q


@dataclass(frozen=True, eq=False)
class WCFG:
    core: FineGraph
    cusps: Tuple[CuspDescriptor, ...]
    weights: Mapping[Tuple[int, int], Fraction]
    q_param: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "cusps", tuple(self.cusps))
        weights = {k: Fraction(v) for k, v in self.weights.items() if v != 0}
        object.__setattr__(self, "weights", weights)
        actual = set(self.core.actual_vertices())
        for (v, w), m in weights.items():
            if v not in actual or w not in actual:
                raise WrfqError(f"weight ({v}, {w}) refers to a non-actual vertex")
            if weights.get((w, v), 0) == 0:
                raise NonGraphicError((v, w))
        for c in self.cusps:
            if c.attach not in actual:
                raise CuspPatternError(f"cusp {c.tail_index} attached at unknown vertex {c.attach}")

    @property
    def order(self) -> Tuple[int, ...]:
        return tuple(self.core.actual_vertices())

    @property
    def labels(self) -> Mapping[int, str]:
        return self.core.graph.labels

    def label(self, v) -> str:
        if isinstance(v, CuspVertex):
            return self.cusps[v.cusp].label(v.depth)
        return self.labels.get(v, str(v))

    def vertex(self, label: str) -> int:
        for v, s in self.labels.items():
            if s == label:
                return v
        raise KeyError(label)

    def weight(self, v, w) -> Fraction:
        return self.weights.get((v, w), Fraction(0))

    def cusps_at(self, v) -> List[CuspDescriptor]:
        return [c for c in self.cusps if c.attach == v]

    def column_sum(self, v) -> Fraction:
        """Total weight leaving v, cusps included."""
        own = sum((m for (x, _), m in self.weights.items() if x == v), Fraction(0))
        return own + sum((c.attach_weight for c in self.cusps_at(v)), Fraction(0))

    def is_regular(self) -> bool:
        return all(m > 0 for m in self.weights.values())

    def is_quotient_like(self) -> bool:
        """Every column sums to q+1 and every cusp has the (outward 1, inward q) pattern."""
        if self.q_param is None:
            return False
        q = self.q_param
        return (all(self.column_sum(v) == q + 1 for v in self.order)
                and all(c.is_quotient_pattern(q) for c in self.cusps))

    def half_edge_anchors(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for _, v in self.core.half_edges().items():
            out[v] = out.get(v, 0) + 1
        return out

    def loop_vertices(self) -> Set[int]:
        return {a for a, b in self.core.actual_edges().values() if a == b}


def build_wcfg(names: Sequence[str], weights: Mapping[Tuple[str, str], Any],
               cusps: Sequence[Mapping[str, Any]] = (), q_param: Optional[int] = None,
               loops: Iterable[str] = ()) -> WCFG:
    """
    Build a WCFG from labelled data. Diagonal weights become a half edge unless
    the vertex is listed in `loops`. Cusp entries: attach, inward, outward and
    optionally attach_weight, label_prefix, label_offset, label_step.
    """
    ids = {name: i for i, name in enumerate(names)}
    loops = set(loops)
    pairs, edge_ends = [], set()
    for (a, b), m in weights.items():
        if m == 0:
            continue
        if a == b:
            if a not in loops:
                pairs.append(("half", ids[a]))
            elif (ids[a], ids[a]) not in edge_ends:
                edge_ends.add((ids[a], ids[a]))
                pairs.append(("edge", (ids[a], ids[a])))
        else:
            ends = tuple(sorted((ids[a], ids[b])))
            if ends not in edge_ends:
                edge_ends.add(ends)
                pairs.append(("edge", ends))
    core = _fine_graph(list(ids.values()), pairs, {i: n for n, i in ids.items()})
    descriptors = tuple(
        CuspDescriptor(attach=ids[c["attach"]], tail_index=i, inward=Fraction(c["inward"]),
                       outward=Fraction(c["outward"]), attach_weight=c.get("attach_weight"),
                       label_prefix=c.get("label_prefix"), label_offset=c.get("label_offset", 1),
                       label_step=c.get("label_step", 1))
        for i, c in enumerate(cusps))
    w = {(ids[a], ids[b]): Fraction(m) for (a, b), m in weights.items() if m != 0}
    return WCFG(core=core, cusps=descriptors, weights=w, q_param=q_param)


def _fine_graph(actual: Sequence[int], items: Sequence[Tuple[str, Any]], labels: Mapping[int, str]) -> FineGraph:
    """items: ("edge", (v, w)) or ("half", v); virtual ids follow the actual ones."""
    next_id = max(actual, default=-1) + 1
    vertices = list(actual)
    kind = {v: ACTUAL for v in actual}
    pairs = []
    for what, data in items:
        h = next_id
        next_id += 1
        vertices.append(h)
        kind[h] = VIRTUAL
        if what == "half":
            pairs.append((data, h))
        else:
            pairs.append((data[0], h))
            pairs.append((h, data[1]))
    return FineGraph(Graph.from_pairs(vertices, pairs, labels), kind)


# --------------------------- CFMatrix ---------------------------

@dataclass(frozen=True, eq=False)
class CFMatrix:
    order: Tuple[Key, ...]
    entries: Mapping[Tuple[Key, Key], Fraction]
    cusp_tails: Tuple[CuspDescriptor, ...] = ()
    labels: Mapping[Key, str] = field(default_factory=dict)
    q_param: Optional[int] = None
    check_graphic: bool = True

    def __post_init__(self):
        entries = {k: Fraction(v) for k, v in self.entries.items() if v != 0}
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "order", tuple(self.order))
        object.__setattr__(self, "cusp_tails", tuple(self.cusp_tails))
        columns: Dict[Key, Dict[Key, Fraction]] = {k: {} for k in self.order}
        for (w, v), m in entries.items():
            if self.check_graphic and entries.get((v, w), 0) == 0:
                raise NonGraphicError((v, w))
            columns.setdefault(v, {})[w] = m
        object.__setattr__(self, "_columns", columns)

    def entry(self, w, v) -> Fraction:
        """M[w][v] = m[v, w]."""
        return self.entries.get((w, v), Fraction(0))

    def column(self, v) -> Dict[Key, Fraction]:
        """Column v including cusp tails, materialized on demand."""
        col = dict(self._columns.get(v, {}))
        if isinstance(v, CuspVertex) and v not in self._columns:
            c = self.cusp_tails[v.cusp]
            prev = c.attach if v.depth == 1 else CuspVertex(v.cusp, v.depth - 1)
            col[prev] = col.get(prev, Fraction(0)) + c.inward
            col[CuspVertex(v.cusp, v.depth + 1)] = c.outward
            return col
        for c in self.cusp_tails:
            if c.attach == v:
                col[CuspVertex(c.tail_index, 1)] = c.attach_weight
        return col

    def column_sum(self, v) -> Fraction:
        return sum(self.column(v).values(), Fraction(0))

    def label(self, v) -> str:
        if v in self.labels:
            return self.labels[v]
        if isinstance(v, CuspVertex) and v.cusp < len(self.cusp_tails):
            return self.cusp_tails[v.cusp].label(v.depth)
        return str(v)

    def to_sympy(self, order: Optional[Sequence[Key]] = None) -> sympy.Matrix:
        order = list(order or self.order)
        return sympy.Matrix(len(order), len(order),
                            lambda i, j: sympy.Rational(self.entry(order[i], order[j])))

    def neighbors(self, v) -> Set[Key]:
        out = {w for w in self.column(v) if w != v}
        out |= {x for (w, x) in self.entries if w == v and x != v}
        return out


def to_matrix(w: WCFG) -> CFMatrix:
    return CFMatrix(order=w.order, entries={(b, a): m for (a, b), m in w.weights.items()},
                    cusp_tails=w.cusps, labels=dict(w.labels), q_param=w.q_param)


def from_matrix(m: CFMatrix, loops: Iterable[Key] = ()) -> WCFG:
    """Inverse of to_matrix. Non-integer keys (materialized cusp vertices) get fresh ids."""
    ids: Dict[Key, int] = {}
    next_id = max((k for k in m.order if isinstance(k, int)), default=-1) + 1
    for k in m.order:
        if isinstance(k, int) and not isinstance(k, bool):
            ids[k] = k
        else:
            ids[k] = next_id
            next_id += 1
    names = [ids[k] for k in m.order]
    loops = {ids[k] for k in loops}
    items, seen = [], set()
    for (w, v), x in sorted(m.entries.items(), key=lambda kv: (str(kv[0][1]), str(kv[0][0]))):
        a, b = ids[v], ids[w]
        if a == b:
            if a in loops:
                if (a, a) not in seen:
                    seen.add((a, a))
                    items.append(("edge", (a, a)))
            else:
                items.append(("half", a))
        else:
            ends = tuple(sorted((a, b)))
            if ends not in seen:
                seen.add(ends)
                items.append(("edge", ends))
    core = _fine_graph(names, items, {ids[k]: m.label(k) for k in m.order})
    cusps = tuple(CuspDescriptor(ids[c.attach], i, c.inward, c.outward, c.attach_weight,
                                 c.label_prefix, c.label_offset, c.label_step) for i, c in enumerate(m.cusp_tails))
    weights = {(ids[v], ids[w]): x for (w, v), x in m.entries.items()}
    return WCFG(core=core, cusps=cusps, weights=weights, q_param=m.q_param)


def normalize(m: CFMatrix) -> CFMatrix:
    """Divide every column by its sum (cusp columns included)."""
    sums = {}
    for v in m.order:
        col = m.column(v)
        if any(x < 0 for x in col.values()):
            raise NormalizationError(f"column {m.label(v)} has negative entries")
        s = sum(col.values(), Fraction(0))
        if s == 0:
            raise NormalizationError(f"column {m.label(v)} is zero")
        sums[v] = s
    entries = {(w, v): x / sums[v] for (w, v), x in m.entries.items()}
    tails = []
    for c in m.cusp_tails:
        total = c.inward + c.outward
        tails.append(CuspDescriptor(c.attach, c.tail_index, c.inward / total, c.outward / total,
                                    c.attach_weight / sums[c.attach], c.label_prefix, c.label_offset,
                                    c.label_step))
    return CFMatrix(m.order, entries, tuple(tails), dict(m.labels), m.q_param)


# --------------------------- Charges ---------------------------

@dataclass(frozen=True, eq=False)
class Charge:
    support: Mapping[Key, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "support", {k: Fraction(v) for k, v in self.support.items() if v != 0})

    @classmethod
    def delta(cls, v) -> "Charge":
        return cls({v: Fraction(1)})

    def __getitem__(self, v) -> Fraction:
        return self.support.get(v, Fraction(0))

    def __add__(self, other: "Charge") -> "Charge":
        out = dict(self.support)
        for k, x in other.support.items():
            out[k] = out.get(k, Fraction(0)) + x
        return Charge(out)

    def scale(self, c) -> "Charge":
        return Charge({k: x * Fraction(c) for k, x in self.support.items()})

    def __eq__(self, other):
        return isinstance(other, Charge) and self.support == other.support

    def is_zero(self) -> bool:
        return not self.support

    def total(self) -> Fraction:
        return sum(self.support.values(), Fraction(0))

    def __repr__(self):
        return "Charge(" + ", ".join(f"{k}: {v}" for k, v in self.support.items()) + ")"


def apply_operator(m: CFMatrix, mu: Charge) -> Charge:
    """(T mu)(y) = sum_x m[x, y] mu(x)."""
    out: Dict[Key, Fraction] = {}
    for x, c in mu.support.items():
        for y, weight in m.column(x).items():
            out[y] = out.get(y, Fraction(0)) + weight * c
    return Charge(out)


# --------------------------- Materialization and cusp detection ---------------------------

def materialize(m, depth: int) -> Tuple[CFMatrix, Set[Key]]:
    """Unroll every cusp tail to `depth` vertices; returns finite data and its boundary."""
    if isinstance(m, WCFG):
        m = to_matrix(m)
    entries = dict(m.entries)
    order = list(m.order)
    labels = dict(m.labels)
    boundary = set()
    for c in m.cusp_tails:
        i = c.tail_index
        prev = c.attach
        for k in range(1, depth + 1):
            v = CuspVertex(i, k)
            order.append(v)
            labels[v] = c.label(k)
            entries[(v, prev)] = c.attach_weight if k == 1 else c.outward
            entries[(prev, v)] = c.inward
            prev = v
        boundary.add(prev)
    return CFMatrix(tuple(order), entries, (), labels, m.q_param), boundary


@dataclass
class CuspDetection:
    cusps: List[CuspDescriptor]
    core: List[Key]
    chains: Dict[int, List[Key]]
    non_canonical: List[List[Key]]


def _support_neighbors(m: CFMatrix) -> Dict[Key, Set[Key]]:
    nbrs: Dict[Key, Set[Key]] = {k: set() for k in m.order}
    for (w, v), _ in m.entries.items():
        if w != v:
            nbrs.setdefault(v, set()).add(w)
            nbrs.setdefault(w, set()).add(v)
    return nbrs


def detect_cusps(m: CFMatrix, boundary: Optional[Iterable[Key]] = None,
                 min_chain: Optional[int] = None) -> CuspDetection:
    """
    Walk inward from each boundary vertex through vertices with exactly two
    support neighbors and no diagonal entry. The longest stretch with constant
    (inward, outward) weights becomes a cusp; the first vertex past it is the
    attach vertex. Without a boundary, valency-1 vertices whose column sum is
    below the largest column sum are taken as truncation ends.
    """
    min_chain = min_chain or safe_get(CONFIG, "cf_structures", "min_cusp_chain", default=2)
    nbrs = _support_neighbors(m)
    if boundary is None:
        top = max((m.column_sum(v) for v in m.order), default=Fraction(0))
        boundary = [v for v in m.order if len(nbrs[v]) == 1 and m.entry(v, v) == 0 and m.column_sum(v) < top]
    ends = set(boundary)
    boundary = [v for v in m.order if v in ends]
    claimed: Set[Key] = set()
    cusps: List[CuspDescriptor] = []
    chains: Dict[int, List[Key]] = {}
    non_canonical: List[List[Key]] = []
    for b in boundary:
        if b in claimed or len(nbrs[b]) != 1 or m.entry(b, b) != 0:
            continue
        path = [b]
        prev, cur = None, b
        while True:
            nxt = [x for x in nbrs[cur] if x != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            path.append(cur)
            if cur in claimed or cur in ends or len(nbrs[cur]) != 2 or m.entry(cur, cur) != 0:
                break
        # path[-1] is the stop vertex; tail candidates are path[:-1]
        if len(path) < 3:
            non_canonical.append(path)
            continue
        inward, outward = m.entry(path[2], path[1]), m.entry(path[0], path[1])
        if m.entry(path[1], path[0]) != inward or inward <= 0 or outward <= 0:
            non_canonical.append(path)
            logger.warning(f"Non-canonical chain from {m.label(b)}: boundary weight differs from tail pattern")
            continue
        k = 1
        while k + 1 < len(path) - 1 and (m.entry(path[k + 2], path[k + 1]), m.entry(path[k], path[k + 1])) == (inward, outward):
            k += 1
        tail = path[:k + 1]
        if len(tail) < min_chain:
            non_canonical.append(path)
            continue
        attach = path[k + 1]
        idx = len(cusps)
        cusps.append(CuspDescriptor(attach=attach, tail_index=idx, inward=inward, outward=outward,
                                    attach_weight=m.entry(path[k], attach)))
        chains[idx] = list(reversed(tail))
        claimed.update(tail)
        claimed.add(attach)
    in_tail = {v for chain in chains.values() for v in chain}
    core = [v for v in m.order if v not in in_tail]
    logger.debug(f"detect_cusps: {len(cusps)} cusps, {len(core)} core vertices, {len(non_canonical)} non-canonical")
    return CuspDetection(cusps, core, chains, non_canonical)


def wcfg_from_detection(m: CFMatrix, det: CuspDetection, loops: Iterable[Key] = (),
                        half_edges: Optional[Mapping[Key, int]] = None) -> WCFG:
    """
    Core vertices of a detection become the WCFG core (integer keys kept, others
    renumbered). `half_edges` gives the number of half edges per vertex; diagonal
    weights of other vertices are drawn as one half edge unless listed in `loops`.
    """
    ids: Dict[Key, int] = {}
    next_id = max((k for k in det.core if isinstance(k, int)), default=-1) + 1
    for k in det.core:
        if isinstance(k, int):
            ids[k] = k
        else:
            ids[k] = next_id
            next_id += 1
    loops = set(loops)
    half_edges = dict(half_edges or {})
    items, seen = [], set()
    core_set = set(det.core)
    for (w, v), x in m.entries.items():
        if v not in core_set or w not in core_set:
            continue
        a, b = ids[v], ids[w]
        if a == b:
            if v in loops:
                if (a, a) not in seen:
                    seen.add((a, a))
                    items.append(("edge", (a, a)))
            elif (a, "half") not in seen:
                seen.add((a, "half"))
                items.extend([("half", a)] * max(1, half_edges.get(v, 1)))
        else:
            ends = tuple(sorted((a, b)))
            if ends not in seen:
                seen.add(ends)
                items.append(("edge", ends))
    items.sort(key=lambda it: (it[0], str(it[1])))
    core = _fine_graph([ids[k] for k in det.core], items, {ids[k]: m.label(k) for k in det.core})
    weights = {(ids[v], ids[w]): x for (w, v), x in m.entries.items() if v in core_set and w in core_set}
    cusps = tuple(CuspDescriptor(ids[c.attach], c.tail_index, c.inward, c.outward, c.attach_weight)
                  for c in det.cusps)
    return WCFG(core=core, cusps=cusps, weights=weights, q_param=m.q_param)


def canonical_form(w: WCFG, depth: Optional[int] = None) -> WCFG:
    """Re-detect cusps as long as the weights allow; vertices following the cusp pattern join the tail."""
    depth = depth or safe_get(CONFIG, "cf_structures", "canonical_depth", default=6)
    m, boundary = materialize(w, depth)
    det = detect_cusps(m, boundary)
    return wcfg_from_detection(m, det, loops=w.loop_vertices(), half_edges=w.half_edge_anchors())


def _signature_graph(w: WCFG) -> nx.DiGraph:
    G = nx.DiGraph()
    halves = w.half_edge_anchors()
    for v in w.order:
        sig = tuple(sorted((c.inward, c.outward, c.attach_weight) for c in w.cusps_at(v)))
        G.add_node(v, diag=w.weight(v, v), halves=halves.get(v, 0), cusps=sig)
    for (a, b), x in w.weights.items():
        if a != b:
            G.add_edge(a, b, weight=x)
    return G


def equivalent(w1: WCFG, w2: WCFG, half_edges: bool = True) -> bool:
    """Same weighted graph after both are brought to canonical form; half_edges=False compares weights only."""
    G1, G2 = _signature_graph(canonical_form(w1)), _signature_graph(canonical_form(w2))
    if not half_edges:
        for G in (G1, G2):
            for v in G.nodes:
                G.nodes[v]["halves"] = 0
    if G1.number_of_nodes() != G2.number_of_nodes() or G1.number_of_edges() != G2.number_of_edges():
        return False
    matcher = isomorphism.DiGraphMatcher(
        G1, G2,
        node_match=lambda a, b: (a["diag"], a["halves"], a["cusps"]) == (b["diag"], b["halves"], b["cusps"]),
        edge_match=lambda a, b: a["weight"] == b["weight"])
    return matcher.is_isomorphic()
