"""
Bruhat-Tits Tree Module - the tree of F_q((1/t)) and its congruence quotients
Features:
- BallVertex (closed ball B_a^[r]) and LatticeVertex models, q+1 neighbors per vertex
- Moebius action through lattice arithmetic, reduction to the standard ray B_0^[-n]
- FiniteMatrixGroup: closure in GL2(F_q[t]/(f)) carrying lifts to GL2(F_q[t])
- Vertex stabilizer images and coset layers of Gamma(f)\\tree
- Quotients by overgroups (Gamma_0(f), Atkin-Lehner normalizers) reduced to WCFGs
- o-graph of the type-0/1 layer, cycle order of (t 1; 1 0), order conjugation check
"""

import functools
import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from cf_structures import WCFG, CFMatrix, detect_cusps, wcfg_from_detection
from errors import GroupActionError, QuotientError, UnsupportedParametersError, WrfqError
from fine_graph import FineGraph, Graph, GroupAction, WeightMap, barycentric_subdivision, fine_quotient, \
    plain_quotient, quotient_weights
from finite_field import SUPPORTED_FIELDS, Mat2, Poly, RationalFunction, get_field
from settings import CONFIG, safe_get

logger = logging.getLogger(__name__)


# --------------------------- Balls and lattices ---------------------------

@dataclass(frozen=True)
class BallVertex:
    """Closed ball B_a^[r] of radius |t^-r|; center keeps only the terms c t^k with k > -r."""
    q: int
    r: int
    center: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        terms = tuple(sorted((k, c) for k, c in dict(self.center).items() if c and k > -self.r))
        object.__setattr__(self, "center", terms)

    @classmethod
    def make(cls, q: int, terms: Dict[int, int], r: int) -> "BallVertex":
        return cls(q, r, tuple(terms.items()))

    @classmethod
    def from_rational(cls, x: RationalFunction, r: int) -> "BallVertex":
        return cls.make(x.q, x.truncate_at_infinity(r), r)

    @classmethod
    def ray(cls, q: int, n: int) -> "BallVertex":
        """B_0^[-n], the n-th vertex of the standard ray."""
        return cls(q, -n)

    @property
    def terms(self) -> Dict[int, int]:
        return dict(self.center)

    def center_function(self) -> RationalFunction:
        return RationalFunction.from_terms(self.q, self.terms)

    def polynomial_part(self) -> Poly:
        out = Poly(self.q)
        for k, c in self.center:
            if k >= 0:
                out = out + Poly.monomial(self.q, c, k)
        return out

    def __str__(self):
        return f"B[{self.center_function()}]^[{self.r}]"


def neighbors(v: BallVertex) -> List[BallVertex]:
    """The q maximal proper sub-balls, then the super-ball."""
    out = []
    for c in get_field(v.q).elements():
        terms = v.terms
        terms[-v.r] = c
        out.append(BallVertex.make(v.q, terms, v.r + 1))
    out.append(BallVertex(v.q, v.r - 1, v.center))
    return out


@dataclass(frozen=True)
class LatticeVertex:
    """Lattice class spanned by the columns of basis (a 2x2 matrix over F_q(t))."""
    basis: Mat2

    @classmethod
    def from_ball(cls, v: BallVertex) -> "LatticeVertex":
        one = RationalFunction.make(Poly.constant(v.q, 1))
        zero = RationalFunction.make(Poly(v.q))
        return cls(Mat2(v.center_function(), RationalFunction.t_power(v.q, -v.r), one, zero))

    def to_ball(self) -> BallVertex:
        b = self.basis
        u, w = (b.a, b.c), (b.b, b.d)
        if u[1].valuation() <= w[1].valuation():
            pivot, other = u, w
        else:
            pivot, other = w, u
        if pivot[1].is_zero():
            raise GroupActionError("lattice basis is singular")
        s = other[0] - (other[1] / pivot[1]) * pivot[0] if not other[1].is_zero() else other[0]
        if s.is_zero():
            raise GroupActionError("lattice basis is singular")
        r = int(s.valuation() - pivot[1].valuation())
        return BallVertex.from_rational(pivot[0] / pivot[1], r)

    def act(self, g: Mat2) -> "LatticeVertex":
        return LatticeVertex(g.to_rational() @ self.basis)


def moebius_act(g: Mat2, v: BallVertex) -> BallVertex:
    """Left action of an invertible 2x2 matrix over F_q(t) on tree vertices."""
    gr = g.to_rational()
    if gr.det().is_zero():
        raise GroupActionError(f"singular matrix {g}")
    return LatticeVertex.from_ball(v).act(gr).to_ball()


def _translation(q: int, p: Poly) -> Mat2:
    return Mat2(Poly.constant(q, 1), p, Poly(q), Poly.constant(q, 1))


def _eta(q: int) -> Mat2:
    return Mat2.of(q, 0, 1, 1, 0)


def reduce_to_ray(v: BallVertex) -> Tuple[Mat2, int]:
    """gamma in GL2(F_q[t]) and n >= 0 with gamma . v = B_0^[-n] (translations and z -> 1/z)."""
    q = v.q
    gamma = Mat2.identity(q)
    cur = v
    limit = 4 * (len(v.center) + abs(v.r)) + 8
    for _ in range(limit):
        p = cur.polynomial_part()
        if not p.is_zero():
            tau = _translation(q, -p)
            cur = moebius_act(tau, cur)
            gamma = tau @ gamma
        if cur.r <= 0:
            return gamma, -cur.r
        eta = _eta(q)
        cur = moebius_act(eta, cur)
        gamma = eta @ gamma
    raise WrfqError(f"reduce_to_ray did not terminate on {v}")


def random_ball(q: int, depth: int, rng: np.random.Generator) -> BallVertex:
    r = int(rng.integers(-depth, depth + 1))
    terms = {k: int(rng.integers(0, q)) for k in range(-r + 1, depth + 1)}
    return BallVertex.make(q, terms, r)


def gl2_generators(q: int, max_degree: int = 1) -> List[Mat2]:
    """Constant invertible matrices plus elementary translations (1 c t^k; 0 1), k <= max_degree."""
    F = get_field(q)
    g = F.generator
    gens = [Mat2.of(q, g, 0, 0, 1), Mat2.of(q, 1, 0, 0, g), _eta(q)]
    for k in range(max_degree + 1):
        for c in F.units():
            gens.append(_translation(q, Poly.monomial(q, c, k)))
    return [x for x in gens if x != Mat2.identity(q)]


def random_word(q: int, length: int, rng: np.random.Generator, max_degree: int = 1) -> Mat2:
    gens = gl2_generators(q, max_degree)
    out = Mat2.identity(q)
    for _ in range(length):
        out = out @ gens[int(rng.integers(0, len(gens)))]
    return out


# --------------------------- Finite matrix groups ---------------------------

@dataclass
class FiniteMatrixGroup:
    """Subgroup of GL2(F_q[t]/(f)); lifts[g] is a matrix over F_q[t] reducing to g, when known."""
    q: int
    f: Poly
    elements: Tuple[Mat2, ...]
    lifts: Dict[Mat2, Mat2] = field(default_factory=dict)

    def __post_init__(self):
        self.elements = tuple(sorted(self.elements, key=Mat2.sort_key))
        self._index = {g: i for i, g in enumerate(self.elements)}

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g: Mat2) -> bool:
        return g in self._index

    @property
    def identity(self) -> Mat2:
        return Mat2.identity(self.q).mod(self.f)

    def mul(self, a: Mat2, b: Mat2) -> Mat2:
        return (a @ b).mod(self.f)

    def reduce(self, g: Mat2) -> Mat2:
        return g.to_poly().mod(self.f)

    def element_order(self, g: Mat2) -> int:
        one = self.identity
        x, k = g, 1
        while x != one:
            x = self.mul(x, g)
            k += 1
            if k > len(self) + 1:
                raise GroupActionError(f"{g} has no finite order in the group")
        return k

    @classmethod
    def closure(cls, generators: Sequence[Mat2], f: Poly, max_order: int = 2000) -> "FiniteMatrixGroup":
        """Close the reductions of the generators; every element remembers a lift."""
        q = f.q
        one = Mat2.identity(q)
        lifts = {one.mod(f): one}
        gens = [(g.to_poly().mod(f), g.to_poly()) for g in generators]
        frontier = [one.mod(f)]
        while frontier:
            new = []
            for h in frontier:
                for s, s_lift in gens:
                    x = (s @ h).mod(f)
                    if x not in lifts:
                        lifts[x] = s_lift @ lifts[h]
                        new.append(x)
                        if len(lifts) > max_order:
                            raise GroupActionError(f"group closure exceeds {max_order} elements")
            frontier = new
        return cls(q, f, tuple(lifts), lifts)

    def subgroup(self, predicate) -> "FiniteMatrixGroup":
        return FiniteMatrixGroup(self.q, self.f, tuple(g for g in self.elements if predicate(g)),
                                 {g: self.lifts[g] for g in self.elements if predicate(g) and g in self.lifts})

    def left_cosets(self, sub: "FiniteMatrixGroup") -> Tuple[List[Mat2], Dict[Mat2, int]]:
        """Representatives (smallest element) of the cosets g.sub, and element -> coset index."""
        reps: List[Mat2] = []
        index: Dict[Mat2, int] = {}
        for g in self.elements:
            if g in index:
                continue
            for s in sub.elements:
                index[self.mul(g, s)] = len(reps)
            reps.append(g)
        return reps, index


def _check_parameters(q: int, f: Poly, depth: Optional[int] = None):
    d = f.degree
    if q not in SUPPORTED_FIELDS:
        raise UnsupportedParametersError(f"q={q} not supported")
    if d < 1 or d > 2 or (d == 2 and q != 2):
        raise UnsupportedParametersError(f"(q={q}, deg f={d}) outside the supported envelope "
                                         f"(deg f = 1 with q <= 5, or deg f = 2 with q = 2)")
    if depth is not None:
        max_depth = safe_get(CONFIG, "btree", "max_depth", default=12)
        if depth < d + 1 or depth > max_depth:
            raise UnsupportedParametersError(f"depth {depth} outside [{d + 1}, {max_depth}]")


@functools.lru_cache(maxsize=None)
def image_group(q: int, f: Poly) -> FiniteMatrixGroup:
    """Image of GL2(F_q[t]) in GL2(F_q[t]/(f)), from constant matrices and translations of degree < deg f."""
    group = FiniteMatrixGroup.closure(gl2_generators(q, max(0, f.degree - 1)), f)
    logger.debug(f"Image group mod {f} over F_{q}: order {len(group)}")
    return group


def stabilizer_generators(n: int, q: int) -> List[Mat2]:
    """Generators of the stabilizer of B_0^[-n] in GL2(F_q[t])."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return gl2_generators(q, 0)
    F = get_field(q)
    g = F.generator
    gens = [Mat2.of(q, g, 0, 0, 1), Mat2.of(q, 1, 0, 0, g)]
    for k in range(n + 1):
        for c in F.units():
            gens.append(_translation(q, Poly.monomial(q, c, k)))
    return [x for x in gens if x != Mat2.identity(q)]


def stabilizer_contains(n: int, g: Mat2) -> bool:
    """Membership in the stabilizer of B_0^[-n]: constants for n = 0, (a b; 0 d) with deg b <= n otherwise."""
    if not g.is_polynomial():
        return False
    p = g.to_poly()
    det = p.det()
    if det.is_zero() or not det.is_constant():
        return False
    if n == 0:
        return all(x.is_constant() for x in p.entries())
    return p.c.is_zero() and p.a.is_constant() and p.d.is_constant() and p.b.degree <= n


def stabilizer_image(n: int, f: Poly) -> FiniteMatrixGroup:
    """Reduction mod f of the stabilizer of B_0^[-n]."""
    return FiniteMatrixGroup.closure(stabilizer_generators(n, f.q), f)


def edge_stabilizer_image(n: int, f: Poly) -> FiniteMatrixGroup:
    """Stabilizer of the ray edge (B_0^[-n], B_0^[-n-1]): constant Borel for n = 0, the vertex stabilizer otherwise."""
    if n == 0:
        q = f.q
        F = get_field(q)
        gens = [Mat2.of(q, F.generator, 0, 0, 1), Mat2.of(q, 1, 0, 0, F.generator)]
        gens += [_translation(q, Poly.constant(q, c)) for c in F.units()]
        return FiniteMatrixGroup.closure([x for x in gens if x != Mat2.identity(q)], f)
    return stabilizer_image(n, f)


def transversal(n: int, q: int) -> List[Mat2]:
    """s with s . B_0^[-n+1] (or s . B_0^[-1] for n = 0) running over the neighbors of B_0^[-n] off the outward ray."""
    F = get_field(q)
    if n == 0:
        return [Mat2.identity(q)] + [Mat2.of(q, c, 1, 1, 0) for c in F.elements()]
    return [_translation(q, Poly.monomial(q, c, n)) for c in F.elements()]


# --------------------------- Congruence quotients ---------------------------

@dataclass
class CongruenceQuotient:
    """Gamma(f)\\tree up to type `depth`: type-n vertices are cosets G/S_n, edges cosets G/E_n."""
    q: int
    f: Poly
    depth: int
    group: FiniteMatrixGroup
    vertex_cosets: List[Dict[Mat2, int]]      # per type: element -> vertex id
    edge_cosets: List[Dict[Mat2, int]]        # per type: element -> forward edge id
    vertex_type: Dict[int, int]
    vertex_rep: Dict[int, Mat2]
    edge_rep: Dict[int, Tuple[int, Mat2]]     # forward edge id -> (type, representative)
    graph: Graph
    weights: WeightMap

    @property
    def fine_graph(self) -> FineGraph:
        return barycentric_subdivision(self.graph)

    def layer(self, n: int) -> List[int]:
        return sorted(v for v, k in self.vertex_type.items() if k == n)

    def layer_counts(self) -> List[int]:
        return [len(self.layer(n)) for n in range(self.depth + 1)]

    def check_layer_counts(self) -> bool:
        """(q+1) M_0 = q M_1 (deg f > 1) or M_1 = (q+1) M_0 (deg f = 1); M_{k-1} = q M_k below deg f; constant after."""
        m, q, d = self.layer_counts(), self.q, self.f.degree
        ok = (q + 1) * m[0] == q * m[1] if d > 1 else m[1] == (q + 1) * m[0]
        ok = ok and all(m[k - 1] == q * m[k] for k in range(2, d))
        start = max(1, d - 1)
        return ok and all(m[k] == m[start] for k in range(start, self.depth + 1))


def _build_quotient(q: int, f: Poly, depth: int) -> CongruenceQuotient:
    f = f.monic()
    group = image_group(q, f)
    vertex_cosets, edge_cosets = [], []
    vertex_type, vertex_rep, labels = {}, {}, {}
    next_id = 0
    for n in range(depth + 1):
        reps, index = group.left_cosets(stabilizer_image(n, f))
        ids = {}
        for i, g in enumerate(reps):
            ids[i] = next_id
            vertex_type[next_id] = n
            vertex_rep[next_id] = g
            labels[next_id] = f"v{n}.{i}"
            next_id += 1
        vertex_cosets.append({g: ids[i] for g, i in index.items()})
    pairs, edge_rep = [], {}
    for n in range(depth):
        reps, index = group.left_cosets(edge_stabilizer_image(n, f))
        ids = {}
        for i, g in enumerate(reps):
            ids[i] = 2 * len(pairs)
            edge_rep[ids[i]] = (n, g)
            pairs.append((vertex_cosets[n][g], vertex_cosets[n + 1][g]))
        edge_cosets.append({g: ids[i] for g, i in index.items()})
    graph = Graph.from_pairs(range(next_id), pairs, labels)

    weights: WeightMap = {}
    trans = {n: [group.reduce(s) for s in transversal(n, q)] for n in range(depth + 1)}
    for v, n in vertex_type.items():
        g = vertex_rep[v]
        targets = []
        if n == 0:
            targets = [vertex_cosets[1][group.mul(g, s)] for s in trans[0]]
        else:
            if n < depth:
                targets.append(vertex_cosets[n + 1][g])
            targets += [vertex_cosets[n - 1][group.mul(g, s)] for s in trans[n]]
        for w in targets:
            weights[(v, w)] = weights.get((v, w), Fraction(0)) + 1
    return CongruenceQuotient(q, f, depth, group, vertex_cosets, edge_cosets, vertex_type,
                              vertex_rep, edge_rep, graph, weights)


def congruence_quotient(q: int, f: Poly, depth: Optional[int] = None) -> CongruenceQuotient:
    depth = depth if depth is not None else max(safe_get(CONFIG, "btree", "default_depth", default=4),
                                                f.degree + 1)
    _check_parameters(q, f, depth)
    cq = _build_quotient(q, f, depth)
    logger.info(f"Gamma({f}) quotient over F_{q}: group order {len(cq.group)}, layers {cq.layer_counts()}")
    if not cq.check_layer_counts():
        logger.warning(f"Layer counts {cq.layer_counts()} break the expected relations")
    return cq


# --------------------------- Overgroups ---------------------------

def _is_unimodular(g: Mat2) -> bool:
    if not g.is_polynomial():
        return False
    det = g.to_poly().det()
    return det.is_constant() and not det.is_zero()


def gamma0_generators(q: int, f: Poly) -> List[Mat2]:
    """Lifts of the image of Gamma_0(f): elements of the image group with lower-left entry 0 mod f."""
    group = image_group(q, f.monic())
    return [group.lifts[g] for g in group.elements if g.c.is_zero()]


def atkin_lehner(f: Poly) -> Mat2:
    q = f.q
    return Mat2(Poly(q), -Poly.constant(q, 1), f, Poly(q))


def normalizer_generators(q: int, f: Poly) -> List[Mat2]:
    """Gamma_0(f) generators plus (0 -1; f 0), and (t 1; t(t+1) t) when f = t(t+1)."""
    f = f.monic()
    gens = gamma0_generators(q, f) + [atkin_lehner(f)]
    t = Poly.t(q)
    if f == t * (t + 1):
        gens.append(Mat2(t, Poly.constant(q, 1), f, t))
    return gens


class _NeedsDeeper(Exception):
    pass


class _OvergroupAction:
    """Action of non-unimodular normalizing matrices on Gamma_0-type vertices of a built quotient."""

    def __init__(self, cq: CongruenceQuotient, q0: Graph, vrep: Dict[int, int], erep: Dict[int, int]):
        self.cq = cq
        self.q0 = q0
        self.vrep, self.erep = vrep, erep
        self.vfibers: Dict[int, List[int]] = {}
        for v, r in vrep.items():
            self.vfibers.setdefault(r, []).append(v)
        self.efibers: Dict[int, List[int]] = {}
        for e, r in erep.items():
            self.efibers.setdefault(r, []).append(e)
        q = cq.q
        self.rays = [BallVertex.ray(q, n) for n in range(cq.depth + 2)]
        self.ray_nbrs = {n: [(s, moebius_act(s, self.rays[n - 1] if n else self.rays[1]))
                             for s in transversal(n, q)] for n in range(cq.depth + 1)}

    def _locate(self, z: BallVertex) -> Tuple[Mat2, int, Mat2]:
        gamma, m = reduce_to_ray(z)
        if m > self.cq.depth:
            raise _NeedsDeeper()
        return gamma, m, self.cq.group.reduce(gamma.inverse_unimodular())

    def vertex_image(self, A: Mat2, x: int) -> int:
        cq = self.cq
        n = cq.vertex_type[x]
        z = moebius_act(A, moebius_act(cq.group.lifts[cq.vertex_rep[x]], self.rays[n]))
        _, m, ginv = self._locate(z)
        return cq.vertex_cosets[m][ginv]

    def edge_image(self, A: Mat2, e: int) -> int:
        """Image of a directed edge id of the Gamma(f) graph."""
        cq = self.cq
        forward = e - (e % 2)
        n, g = cq.edge_rep[forward]
        lift = cq.group.lifts[g]
        z1 = moebius_act(A, moebius_act(lift, self.rays[n]))
        z2 = moebius_act(A, moebius_act(lift, self.rays[n + 1]))
        gamma, m, ginv = self._locate(z1)
        y = moebius_act(gamma, z2)
        image = None
        if y == self.rays[m + 1]:
            if m >= cq.depth:
                raise _NeedsDeeper()
            image = cq.edge_cosets[m][ginv]
        else:
            for s, ball in self.ray_nbrs[m]:
                if ball == y:
                    h = cq.group.mul(ginv, cq.group.reduce(s))
                    image = cq.edge_cosets[0][h] if m == 0 else cq.edge_cosets[m - 1][h] + 1
                    break
        if image is None:
            raise QuotientError(f"image of edge {e} is not adjacent to its source")
        return image if e == forward else image ^ 1

    def orbit_vertex_image(self, A: Mat2, X: int) -> int:
        images = {self.vrep[self.vertex_image(A, x)] for x in self.vfibers[X]}
        if len(images) != 1:
            raise QuotientError(f"generator {A} does not normalize: vertex orbit {X} splits into {sorted(images)}")
        return images.pop()

    def orbit_edge_image(self, A: Mat2, E: int) -> int:
        images = {self.erep[self.edge_image(A, e)] for e in self.efibers[E]}
        if len(images) != 1:
            raise QuotientError(f"generator {A} does not normalize: edge orbit {E} splits into {sorted(images)}")
        return images.pop()


def _stage_a(cq: CongruenceQuotient, unimodular: Sequence[Mat2]):
    """Quotient of Gamma(f)\\tree by left multiplication with the reductions of unimodular generators."""
    group = cq.group
    gens = []
    for g in unimodular:
        h = group.reduce(g)
        if h not in group:
            raise QuotientError(f"{g} does not reduce into the image group")
        vp = {v: cq.vertex_cosets[cq.vertex_type[v]][group.mul(h, cq.vertex_rep[v])] for v in cq.graph.vertices}
        ep = {}
        for e, (n, rep) in cq.edge_rep.items():
            img = cq.edge_cosets[n][group.mul(h, rep)]
            ep[e], ep[e + 1] = img, img + 1
        gens.append((vp, ep))
    act = GroupAction.from_generators(cq.graph, gens)
    q0, vrep, erep = plain_quotient(cq.graph, act)
    base = quotient_weights(cq.graph, act, cq.weights)
    return q0, vrep, erep, base


def _to_wcfg(fq: FineGraph, weights: WeightMap, boundary: Set[int], q: int) -> WCFG:
    order = fq.actual_vertices()
    labels = {v: fq.graph.labels.get(v, str(v)) for v in order}
    m = CFMatrix(tuple(order), {(w, v): x for (v, w), x in weights.items()}, (), labels, q)
    det = detect_cusps(m, boundary)
    halves: Dict[int, int] = {}
    for _, v in fq.half_edges().items():
        halves[v] = halves.get(v, 0) + 1
    loops = {a for a, b in fq.actual_edges().values() if a == b}
    return wcfg_from_detection(m, det, loops=loops, half_edges=halves)


def _overgroup_pass(cq: CongruenceQuotient, depth: int, unimodular, others) -> WCFG:
    q0, vrep, erep, base = _stage_a(cq, unimodular)
    types = {X: cq.vertex_type[X] for X in q0.vertices}
    star = {X for X in q0.vertices if types[X] <= depth}
    perms_v: List[Dict[int, int]] = [dict() for _ in others]
    if others:
        action = _OvergroupAction(cq, q0, vrep, erep)
        frontier = deque(star)
        while frontier:
            X = frontier.popleft()
            for i, A in enumerate(others):
                Y = action.orbit_vertex_image(A, X)
                perms_v[i][X] = Y
                if Y not in star:
                    star.add(Y)
                    frontier.append(Y)
    sub = q0.induced(star)
    gens = []
    for i, A in enumerate(others):
        ep = {e: action.orbit_edge_image(A, e) for e in sub.edges}
        gens.append((perms_v[i], ep))
    act = GroupAction.from_generators(sub, gens)
    fq = fine_quotient(sub, act)
    weights = quotient_weights(sub, act, base)
    rep = {X: min(p[X] for p in act.vertex_perms) for X in sub.vertices}
    boundary = set()
    for (X, Y), _ in base.items():
        if X in star and (Y not in star or types[X] == cq.depth):
            boundary.add(rep[X])
    boundary |= {rep[X] for X in star if types[X] == cq.depth}
    return _to_wcfg(fq, weights, boundary, cq.q)


def quotient_by_overgroup(cq: CongruenceQuotient, generators: Sequence[Mat2]) -> WCFG:
    """
    WCFG of H\\tree for the group H generated by Gamma(f) and the given matrices.
    Unimodular generators act on the coset layers by left multiplication; the
    others are lifted, moved with moebius_act and re-identified with reduce_to_ray.
    """
    unimodular = [g for g in generators if _is_unimodular(g)]
    others = [g for g in generators if not _is_unimodular(g)]
    for g in others:
        if g.to_rational().det().is_zero():
            raise GroupActionError(f"singular generator {g}")
    if not others:
        w = _overgroup_pass(cq, cq.depth, unimodular, others)
        logger.info(f"Quotient by {len(unimodular)} unimodular generators: {len(w.order)} core vertices, "
                    f"{len(w.cusps)} cusps")
        return w
    step = cq.f.degree + 1
    build = _build_quotient(cq.q, cq.f, cq.depth + 2 * step)
    limit = cq.depth + 6 * step
    while True:
        try:
            w = _overgroup_pass(build, cq.depth, unimodular, others)
            break
        except _NeedsDeeper:
            if build.depth + step > limit:
                raise QuotientError("generator images leave every tested truncation depth")
            logger.debug(f"Rebuilding at depth {build.depth + step}")
            build = _build_quotient(cq.q, cq.f, build.depth + step)
    logger.info(f"Quotient by {len(generators)} generators: {len(w.order)} core vertices, {len(w.cusps)} cusps")
    return w


# --------------------------- Cross-checks ---------------------------

def o_graph(cq: CongruenceQuotient) -> nx.MultiGraph:
    """Type-0 vertices, joined through each type-1 vertex that has exactly two type-0 neighbor slots."""
    G = nx.MultiGraph()
    G.add_nodes_from(cq.layer(0))
    for y in cq.layer(1):
        ends = []
        for (v, w), m in cq.weights.items():
            if v == y and cq.vertex_type[w] == 0:
                ends += [w] * int(m)
        if len(ends) != 2:
            raise UnsupportedParametersError(f"type-1 vertex {y} has {len(ends)} type-0 slots; o-graph needs 2")
        G.add_edge(*ends)
    return G


def cycle_order(f: Poly, q: int) -> int:
    """Order of (t 1; 1 0) in the image group mod f."""
    group = image_group(q, f.monic())
    a = group.reduce(Mat2(Poly.t(q), Poly.constant(q, 1), Poly.constant(q, 1), Poly(q)))
    return group.element_order(a)


def _inverse(g: Mat2) -> Mat2:
    gr = g.to_rational()
    det = gr.det()
    return Mat2(gr.d / det, -gr.b / det, -gr.c / det, gr.a / det)


OrderExponents = Tuple[Tuple[int, int], Tuple[int, int]]


def _contained(g: Mat2, f: Poly, src: OrderExponents, dst: OrderExponents) -> bool:
    q = f.q
    fr = RationalFunction.make(f)
    one = RationalFunction.make(Poly.constant(q, 1))
    zero = RationalFunction.make(Poly(q))
    gr, ginv = g.to_rational(), _inverse(g)

    def power(k):
        x = one
        for _ in range(abs(k)):
            x = x * fr if k > 0 else x / fr
        return x

    for i in range(2):
        for j in range(2):
            cells = [zero] * 4
            cells[2 * i + j] = power(src[i][j])
            image = gr @ Mat2(*cells) @ ginv
            for k, x in enumerate(image.entries()):
                if not (x / power(dst[k // 2][k % 2])).is_polynomial():
                    return False
    return True


def conjugates_order(g: Mat2, f: Poly, src: OrderExponents, dst: OrderExponents) -> bool:
    """
    g src g^-1 = dst for orders written as f-exponent patterns over A = F_q[t]:
    ((0, 0), (0, 0)) is M2(A), ((0, -1), (1, 0)) is <A f^-1 A; f A A>.
    """
    return _contained(g, f, src, dst) and _contained(_inverse(g), f, dst, src)
