"""
Obstruction Module
Features:
- Tree-with-at-most-one-leaf criterion (t3_criterion)
- Candidate shells (vertices off every cusp and generalized cusp), greedy minimal shells
- Exact obstruction space: finite-shell maps commuting with T, solved with sympy
- Coarse family {F : F A = A F = 0} on the projected block, for comparison
- Bad set and bad pairs, projected characteristic polynomial
- Symmetry differences T_sigma - Id and the parametric condition of the three-branch family
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Set, Tuple

import networkx as nx
import sympy

from cf_structures import WCFG, CFMatrix, to_matrix
from errors import ShellError, WrfqError
from settings import CONFIG, safe_get

logger = logging.getLogger(__name__)

X = sympy.Symbol("x")


@dataclass(frozen=True)
class Shell:
    vertices: Tuple[int, ...]

    def __contains__(self, v):
        return v in self.vertices

    def __len__(self):
        return len(self.vertices)

    def without(self, v) -> "Shell":
        return Shell(tuple(x for x in self.vertices if x != v))


@dataclass
class ObstructionBasis:
    shell: Shell
    basis: List[Dict[Tuple[int, int], Fraction]]
    column_sums_zero: bool = True
    window: Tuple = field(default_factory=tuple)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def support(self) -> List[int]:
        """Shell vertices carrying a nonzero row or column entry of some basis element."""
        touched = set()
        for F in self.basis:
            for (y, x), val in F.items():
                if val != 0:
                    touched.update((x, y))
        return [v for v in self.shell.vertices if v in touched]


# --------------------------- Geometry ---------------------------

def t3_criterion(w: WCFG) -> bool:
    """Each component, half edges removed, is a tree with at most one leaf (cusps are not leaves)."""
    G = nx.MultiGraph()
    G.add_nodes_from(w.order)
    for a, b in w.core.actual_edges().values():
        G.add_edge(a, b)
    for comp in nx.connected_components(G):
        sub = G.subgraph(comp)
        if not nx.is_forest(sub):
            return False
        leaves = [v for v in comp if sub.degree(v) + len(w.cusps_at(v)) == 1]
        if len(leaves) > 1:
            return False
    return True


def _slots(w: WCFG, v) -> List:
    """Geometric neighbors of v ignoring half edges: distinct actual neighbors plus one slot per cusp."""
    nbrs = sorted({x for x in w.core.actual_neighbors(v) if x != v})
    return nbrs + [("cusp", c.tail_index) for c in w.cusps_at(v)]


def cusp_vertices(w: WCFG) -> Set[int]:
    """Actual vertices on a maximal (generalized) cusp, the vertex where it ends included."""
    loops = w.loop_vertices()
    covered: Set[int] = set()
    for c in w.cusps:
        prev, cur = ("cusp", c.tail_index), c.attach
        while True:
            covered.add(cur)
            slots = _slots(w, cur)
            if len(slots) != 2 or cur in loops:
                break
            nxt = slots[0] if slots[1] == prev else slots[1]
            if isinstance(nxt, tuple) or nxt in covered:
                break
            prev, cur = cur, nxt
    return covered


def candidate_shell(w: WCFG) -> Shell:
    off = cusp_vertices(w)
    return Shell(tuple(v for v in w.order if v not in off))


# --------------------------- Linear systems ---------------------------

def _window(m: CFMatrix, shell: Shell, radius: int) -> List:
    seen = {v: 0 for v in shell.vertices}
    queue = deque(shell.vertices)
    while queue:
        v = queue.popleft()
        if seen[v] >= radius:
            continue
        for u in m.neighbors(v):
            if u not in seen:
                seen[u] = seen[v] + 1
                queue.append(u)
    return list(seen)


def _shell_diameter(m: CFMatrix, shell: Shell) -> int:
    members = set(shell.vertices)
    best = 0
    for s in shell.vertices:
        dist = {s: 0}
        queue = deque([s])
        while queue:
            v = queue.popleft()
            if dist[v] > len(m.order) + 2:
                continue
            for u in m.neighbors(v):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        best = max([best] + [d for u, d in dist.items() if u in members])
    return best


def _nullspace(rows: List[Dict[int, Fraction]], n: int) -> List[List[Fraction]]:
    if n == 0:
        return []
    if not rows:
        return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    A = sympy.Matrix(len(rows), n, lambda i, j: sympy.Rational(rows[i].get(j, 0)))
    out = []
    for vec in A.nullspace():
        out.append([Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in vec])
    return out


def _solve(w: WCFG, shell: Shell, radius: int, column_sums_zero: bool):
    m = to_matrix(w)
    W = list(shell.vertices)
    members = set(W)
    index = {(y, x): i for i, (y, x) in enumerate((y, x) for y in W for x in W)}
    window = _window(m, shell, radius)
    columns = {v: m.column(v) for v in set(window) | members}
    rows: List[Dict[int, Fraction]] = []
    for v in window:
        # (F T - T F)[y][v] for every y reachable from the column
        eq: Dict[Tuple, Dict[int, Fraction]] = {}
        for u, t_uv in columns[v].items():          # (F T)[y][v] = sum_u F[y][u] M[u][v]
            if u in members:
                for y in W:
                    row = eq.setdefault(y, {})
                    row[index[(y, u)]] = row.get(index[(y, u)], Fraction(0)) + t_uv
        if v in members:
            for u in W:                               # (T F)[y][v] = sum_u M[y][u] F[u][v]
                for y, t_yu in columns[u].items():
                    row = eq.setdefault(y, {})
                    row[index[(u, v)]] = row.get(index[(u, v)], Fraction(0)) - t_yu
        for row in eq.values():
            row = {k: c for k, c in row.items() if c != 0}
            if row:
                rows.append(row)
    if column_sums_zero:
        for x in W:
            rows.append({index[(y, x)]: Fraction(1) for y in W})
    vectors = _nullspace(rows, len(index))
    basis = [{pos: vec[i] for pos, i in index.items() if vec[i] != 0} for vec in vectors]
    return basis, tuple(window)


def obstruction_space(w: WCFG, shell: Optional[Shell] = None,
                      column_sums_zero: Optional[bool] = None, guard: Optional[int] = None) -> ObstructionBasis:
    """
    Finite-shell maps F (zero off the shell, image in the shell) with F T = T F
    on a window `guard` steps around the shell (default: shell diameter + 2).
    """
    shell = shell if shell is not None else candidate_shell(w)
    if column_sums_zero is None:
        column_sums_zero = safe_get(CONFIG, "obstruction", "column_sums_zero", default=True)
    bad = cusp_vertices(w) & set(shell.vertices)
    if bad:
        raise ShellError(f"shell meets a cusp at {sorted(w.label(v) for v in bad)}")
    if not shell.vertices:
        return ObstructionBasis(shell, [], column_sums_zero)
    m = to_matrix(w)
    radius = guard if guard is not None else _shell_diameter(m, shell) + 2
    if radius < 1:
        raise ShellError(f"guard window {radius} does not reach past the shell")
    basis, window = _solve(w, shell, radius, column_sums_zero)
    extra = safe_get(CONFIG, "obstruction", "stability_extra", default=4)
    wider, _ = _solve(w, shell, radius + extra, column_sums_zero)
    if len(wider) != len(basis):
        raise WrfqError(f"obstruction dimension unstable: {len(basis)} vs {len(wider)} with a wider window")
    logger.info(f"Obstruction space on {len(shell)} shell vertices: dimension {len(basis)}")
    return ObstructionBasis(shell, basis, column_sums_zero, window)


def projected_block(w: WCFG, shell: Shell) -> sympy.Matrix:
    """P_W T restricted to C_W, column convention."""
    m = to_matrix(w)
    return m.to_sympy(shell.vertices)


def coarse_obstruction_space(w: WCFG, shell: Optional[Shell] = None) -> ObstructionBasis:
    """F on C_W with F A = A F = 0 for A the projected block, columns summing to 0."""
    shell = shell if shell is not None else candidate_shell(w)
    W = list(shell.vertices)
    A = projected_block(w, shell)
    n = len(W)
    index = {(y, x): i for i, (y, x) in enumerate((y, x) for y in W for x in W)}
    rows: List[Dict[int, Fraction]] = []
    for i in range(n):
        for j in range(n):
            fa, af = {}, {}
            for k in range(n):
                if A[k, j] != 0:      # (F A)[i][j] = sum_k F[i][k] A[k][j]
                    fa[index[(W[i], W[k])]] = Fraction(str(A[k, j]))
                if A[i, k] != 0:      # (A F)[i][j] = sum_k A[i][k] F[k][j]
                    af[index[(W[k], W[j])]] = Fraction(str(A[i, k]))
            for row in (fa, af):
                if row:
                    rows.append(row)
    for x in W:
        rows.append({index[(y, x)]: Fraction(1) for y in W})
    vectors = _nullspace(rows, len(index))
    basis = [{pos: vec[i] for pos, i in index.items() if vec[i] != 0} for vec in vectors]
    return ObstructionBasis(shell, basis, True)


def minimal_shell(w: WCFG) -> Shell:
    """Greedy trimming of the candidate shell keeping the obstruction dimension."""
    shell = candidate_shell(w)
    target = obstruction_space(w, shell).dimension
    for v in list(shell.vertices):
        trial = shell.without(v)
        if obstruction_space(w, trial).dimension == target:
            shell = trial
    logger.debug(f"Minimal shell: {[w.label(v) for v in shell.vertices]}")
    return shell


def bad_set(w: WCFG, basis: Optional[ObstructionBasis] = None) -> List[int]:
    basis = basis or obstruction_space(w)
    return basis.support()


def bad_pairs(w: WCFG, basis: Optional[ObstructionBasis] = None) -> Set[Tuple[int, int]]:
    T = bad_set(w, basis)
    return {(x, y) for x in T for y in T}


def projected_char_poly(w: WCFG, shell: Shell) -> sympy.Poly:
    if not shell.vertices:
        return sympy.Poly(1, X)
    return sympy.Poly(projected_block(w, shell).charpoly(X).as_expr(), X)


# --------------------------- Symmetries ---------------------------

def symmetry_difference(w: WCFG, perm: Mapping[int, int]) -> Dict[Tuple[int, int], Fraction]:
    """T_sigma - Id for a weight-preserving permutation of the core fixing every cusp attach vertex."""
    full = {v: perm.get(v, v) for v in w.order}
    for (a, b), m in w.weights.items():
        if w.weight(full[a], full[b]) != m:
            raise WrfqError(f"permutation does not preserve the weight ({w.label(a)}, {w.label(b)})")
    for c in w.cusps:
        if full[c.attach] != c.attach:
            raise WrfqError("permutation moves a cusp")
    F: Dict[Tuple[int, int], Fraction] = {}
    for x, y in full.items():
        if x != y:
            F[(y, x)] = F.get((y, x), Fraction(0)) + 1
            F[(x, x)] = F.get((x, x), Fraction(0)) - 1
    return F


def contains(basis: ObstructionBasis, F: Mapping[Tuple[int, int], Fraction]) -> bool:
    """True when F is a linear combination of the basis elements."""
    positions = sorted({p for G in basis.basis for p in G} | set(F), key=str)
    if any(p[0] not in basis.shell or p[1] not in basis.shell for p in F if F[p] != 0):
        return False
    B = sympy.Matrix([[sympy.Rational(G.get(p, 0)) for p in positions] for G in basis.basis]
                     or [[0] * len(positions)])
    extended = B.col_join(sympy.Matrix([[sympy.Rational(F.get(p, 0)) for p in positions]]))
    return extended.rank() == B.rank()


def family_condition() -> sympy.Eq:
    """
    Three-branch family (t - v - w - z - u with a cusp at w): the shell block has
    characteristic polynomial (x^2 - c)(x^2 - b), and a nonzero obstruction needs
    a common eigenvalue, i.e. the resultant in x vanishes.
    """
    b, c = sympy.symbols("b c", positive=True)
    block = sympy.Matrix([[0, c, 0, 0],
                          [1, 0, 0, 0],
                          [0, 0, 0, b],
                          [0, 0, 1, 0]])
    poly = sympy.factor(block.charpoly(X).as_expr())
    res = sympy.resultant(X ** 2 - c, X ** 2 - b, X)
    solutions = sympy.solve(sympy.Eq(res, 0), b)
    logger.debug(f"Family block char poly {poly}, resultant {res}")
    return sympy.Eq(b, solutions[0])
