"""
Transfer Module
Features:
- f_n family (f1 = x, f2 = x^2 - 2q, f_{n+2} = x f_{n+1} - q f_n) with a symbolic Laurent check
- Exact evaluation of f_n(N) on a region, cusp tails expanded lazily
- Walk-enumeration oracle (promenade_counts) for cross-checking entries
- Predicted cusps at Q, candidate assembly with bad pairs and negative entries
- Resolution of ambiguous entries by enumerating the obstruction affine set
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple

import sympy

from cf_structures import WCFG, CFMatrix, Charge, CuspDescriptor, CuspVertex, apply_operator, materialize, to_matrix
from errors import CuspPatternError, EnumerationLimitError, TransferError
from obstruction import ObstructionBasis, bad_set, obstruction_space
from settings import CONFIG, safe_get

logger = logging.getLogger(__name__)

Key = Hashable
Pair = Tuple[Key, Key]   # (row, column), i.e. (w, v) for the entry M[w][v]


# --------------------------- Polynomials ---------------------------

@dataclass(frozen=True)
class TransferPolynomial:
    n: int
    q: int
    coefficients: Tuple[int, ...]   # constant term first

    def as_expr(self, x: Optional[sympy.Symbol] = None) -> sympy.Expr:
        x = x if x is not None else sympy.Symbol("x")
        return sum((c * x ** k for k, c in enumerate(self.coefficients)), sympy.Integer(0))

    def __str__(self):
        return str(sympy.expand(self.as_expr()))


def _recurrence(n: int, q: int) -> List[int]:
    prev, cur = [0, 1], [-2 * q, 0, 1]
    if n == 1:
        return prev
    for _ in range(n - 2):
        nxt = [0] + cur
        for k, c in enumerate(prev):
            nxt[k] -= q * c
        prev, cur = cur, nxt
    return cur


def build_fn(n: int, q: int) -> TransferPolynomial:
    if n < 1:
        raise TransferError(f"transfer degree must be >= 1, got {n}")
    if q < 2:
        raise TransferError(f"q must be >= 2, got {q}")
    p = TransferPolynomial(n, q, tuple(_recurrence(n, q)))
    x = sympy.Symbol("x")
    lhs = sympy.expand(p.as_expr(x).subs(x, x + sympy.Integer(q) / x) * x ** n)
    if sympy.simplify(lhs - (x ** (2 * n) + q ** n)) != 0:
        raise TransferError(f"Laurent identity fails for f_{n} at q={q}")
    logger.debug(f"f_{n} at q={q}: {p}")
    return p


# --------------------------- Evaluation ---------------------------

def apply_poly(p: TransferPolynomial, m: CFMatrix, mu: Charge) -> Charge:
    """p(M) applied to a charge; cusp tails are followed as far as needed."""
    total = Charge()
    for c in p.coefficients:
        if c:
            total = total + mu.scale(c)
        mu = apply_operator(m, mu)
    return total


def _poly_columns(p: TransferPolynomial, m: CFMatrix, vertices: Sequence[Key]) -> Dict[Key, Charge]:
    return {v: apply_poly(p, m, Charge.delta(v)) for v in vertices}


def evaluate_poly(p: TransferPolynomial, m: CFMatrix, region: Sequence[Key]) -> CFMatrix:
    """Entries of p(M) restricted to region x region."""
    missing = [v for v in m.order if v not in set(region)]
    if missing:
        raise TransferError(f"region misses core vertices {[m.label(v) for v in missing]}")
    columns = _poly_columns(p, m, region)
    inside = set(region)
    entries = {(w, v): x for v, col in columns.items() for w, x in col.support.items() if w in inside}
    labels = {v: m.label(v) for v in region}
    return CFMatrix(tuple(region), entries, (), labels, m.q_param, check_graphic=False)


def promenade_counts(m: CFMatrix, v: Key, w: Key, k: int) -> Fraction:
    """Weighted number of walks of length k from v to w, by plain enumeration."""
    if k == 0:
        return Fraction(int(v == w))
    total = Fraction(0)
    for x, weight in m.column(v).items():
        total += weight * promenade_counts(m, x, w, k - 1)
    return total


def oracle_entry(p: TransferPolynomial, m: CFMatrix, v: Key, w: Key) -> Fraction:
    """p(M)[w][v] as a signed combination of promenade counts."""
    return sum((c * promenade_counts(m, v, w, k) for k, c in enumerate(p.coefficients) if c), Fraction(0))


def _check_truncation(p: TransferPolynomial, wp: WCFG, region: Sequence[Key], columns: Dict[Key, Charge]):
    """Columns on finite truncations 2n + guard_band and 2n + recheck_guard deep must match the lazy ones."""
    for key, default in (("guard_band", 2), ("recheck_guard", 4)):
        depth = 2 * p.n + safe_get(CONFIG, "transfer", key, default=default)
        finite, _ = materialize(wp, depth)
        for v in region:
            if apply_poly(p, finite, Charge.delta(v)) != columns[v]:
                raise TransferError(f"column {wp.label(v)} changes when cusps are cut at depth {depth}")


# --------------------------- Cusps at Q ---------------------------

def predict_cusps_at_Q(cusps_P: Sequence[CuspDescriptor], n: int, q: int) -> List[CuspDescriptor]:
    """
    Each P-cusp (outward 1, inward q) with vertices d_1, d_2, ... splits into n
    Q-cusps; the i-th is attached at d_i and runs d_{i+n}, d_{i+2n}, ...
    with outward 1 and inward q^n.
    """
    out = []
    for c in cusps_P:
        if not c.is_quotient_pattern(q):
            raise CuspPatternError(f"cusp {c.tail_index} has pattern ({c.outward}, {c.inward}), expected (1, {q})")
        for i in range(1, n + 1):
            attach = c.attach if n == 1 else CuspVertex(c.tail_index, i)
            if n == 1:
                prefix, offset = c.label_prefix, c.label_offset
            elif c.label_prefix is None:
                prefix, offset = f"c{c.tail_index}.", i + n
            else:
                prefix, offset = c.label_prefix, c.label_offset + i + n - 1
            out.append(CuspDescriptor(attach=attach, tail_index=len(out), inward=Fraction(q) ** n,
                                      outward=Fraction(1),
                                      attach_weight=c.attach_weight if n == 1 else Fraction(1),
                                      label_prefix=prefix, label_offset=offset, label_step=n))
    return out


# --------------------------- Candidate ---------------------------

@dataclass
class TransferReport:
    n: int
    q: int
    candidate: CFMatrix
    region_keys: Dict[int, Key]
    bad_pairs: Set[Pair]
    negative_entries: List[Tuple[Pair, Fraction]]
    column_sums: Dict[int, Fraction]
    target_sum: int
    resolution: Optional[CFMatrix] = None
    status: str = "pending"
    notes: List[str] = field(default_factory=list)
    completions: List[Dict[Pair, Fraction]] = field(default_factory=list)

    def label_pair(self, pair: Pair) -> Tuple[str, str]:
        return self.candidate.label(pair[0]), self.candidate.label(pair[1])

    def summary(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "status": self.status,
            "order": [self.candidate.label(v) for v in self.candidate.order],
            "bad_pairs": sorted(self.label_pair(p) for p in self.bad_pairs),
            "negative_entries": [[*self.label_pair(p), str(x)] for p, x in self.negative_entries],
            "completions": len(self.completions),
            "notes": list(self.notes),
        }

    def column(self, label: str, resolved: bool = False) -> Dict[str, Fraction]:
        """Nonzero entries of one column by label, cusp tails included."""
        m = self.resolution if resolved and self.resolution is not None else self.candidate
        for v in m.order:
            if m.label(v) == label:
                return {m.label(w): x for w, x in m.column(v).items() if x != 0}
        raise KeyError(label)

    def to_dict(self) -> dict:
        m = self.resolution if self.resolution is not None else self.candidate
        out = self.summary()
        out["columns"] = {m.label(v): {k: str(x) for k, x in sorted(self.column(m.label(v), True).items())}
                          for v in m.order}
        out["cusps"] = [{"attach": m.label(c.attach), "first": c.label(1), "attach_weight": str(c.attach_weight),
                         "inward": str(c.inward), "outward": str(c.outward)} for c in m.cusp_tails]
        return out


def assemble_candidate(wp: WCFG, n: int, basis: Optional[ObstructionBasis] = None) -> TransferReport:
    """f_n(N_P) on the core plus n steps of every cusp, with the predicted Q-cusps spliced in."""
    if wp.q_param is None:
        raise TransferError("transfer needs q_param on the input")
    if not wp.is_regular():
        raise TransferError("transfer needs nonnegative weights")
    q = wp.q_param
    p = build_fn(n, q)
    m = to_matrix(wp)
    region: List[Key] = list(wp.order) + [CuspVertex(c.tail_index, i) for c in wp.cusps for i in range(1, n + 1)]
    columns = _poly_columns(p, m, region)
    _check_truncation(p, wp, region, columns)

    ids: Dict[Key, int] = {v: v for v in wp.order}
    next_id = max(wp.order, default=-1) + 1
    for v in region[len(wp.order):]:
        ids[v] = next_id
        next_id += 1
    inside = set(region)

    q_cusps = predict_cusps_at_Q(wp.cusps, n, q)
    notes: List[str] = []
    spliced = []
    for c in q_cusps:
        attach = c.attach
        first = CuspVertex(attach.cusp, attach.depth + n) if isinstance(attach, CuspVertex) \
            else CuspVertex(c.tail_index, 1)
        weight = columns[attach][first] if isinstance(attach, CuspVertex) else c.attach_weight
        if weight != c.attach_weight:
            notes.append(f"cusp at {wp.label(attach)}: expected attach weight {c.attach_weight}, got {weight}")
        spliced.append(replace(c, attach=ids[attach], attach_weight=weight or c.attach_weight))

    expected_out = {CuspVertex(a.cusp, a.depth + n) for a in (c.attach for c in q_cusps) if isinstance(a, CuspVertex)}
    entries: Dict[Pair, Fraction] = {}
    for v, col in columns.items():
        for w, x in col.support.items():
            if w in inside:
                entries[(ids[w], ids[v])] = x
            elif w not in expected_out and n > 1:
                notes.append(f"entry ({wp.label(w)}, {wp.label(v)}) = {x} falls outside the region")
    labels = {ids[v]: wp.label(v) for v in region}
    if n == 1:
        spliced = list(wp.cusps)
    candidate = CFMatrix(tuple(ids[v] for v in region), entries, tuple(spliced), labels, q ** n,
                         check_graphic=False)

    basis = basis if basis is not None else obstruction_space(wp)
    T = bad_set(wp, basis)
    pairs = {(y, x) for x in T for y in T}
    negative = [((w, v), x) for (w, v), x in sorted(candidate.entries.items(), key=str) if x < 0]
    for pair, x in negative:
        if pair not in pairs:
            notes.append(f"negative entry {x} at {candidate.label(pair[0])}, {candidate.label(pair[1])} "
                         f"outside the bad pairs")
    target = q ** n + 1
    sums = {v: candidate.column_sum(v) for v in candidate.order}
    for v, s in sums.items():
        if s != target and v not in T:
            notes.append(f"column {candidate.label(v)} sums to {s}, expected {target}")

    report = TransferReport(n=n, q=q, candidate=candidate, region_keys={ids[v]: v for v in region},
                            bad_pairs=pairs, negative_entries=negative, column_sums=sums,
                            target_sum=target, notes=notes)
    if not pairs:
        report.resolution = candidate
        report.status = "unique"
    logger.info(f"Transfer candidate n={n}, q={q}: {len(candidate.order)} vertices, "
                f"{len(pairs)} bad pairs, {len(negative)} negative entries")
    return report


# --------------------------- Resolution ---------------------------

def _frac(x) -> Fraction:
    num, den = sympy.fraction(sympy.nsimplify(x))
    return Fraction(int(num), int(den))


def _reduced(vectors: List[List[Fraction]]) -> Tuple[List[List[Fraction]], List[int]]:
    """Nonzero rows of the rref and their pivot columns."""
    if not vectors or not vectors[0]:
        return [], []
    R, pivots = sympy.Matrix([[sympy.Rational(x) for x in row] for row in vectors]).rref()
    rows = [[_frac(R[i, j]) for j in range(R.cols)] for i in range(len(pivots))]
    return rows, list(pivots)


def _step(candidate: CFMatrix) -> Fraction:
    if all(x.denominator == 1 for x in candidate.entries.values()):
        return Fraction(1)
    return Fraction(1, safe_get(CONFIG, "transfer", "max_denominator", default=2))


def _grid(lo: Fraction, hi: Fraction, step: Fraction) -> List[Fraction]:
    start, stop = math.ceil(lo / step), math.floor(hi / step)
    return [k * step for k in range(start, stop + 1)]


def _enumerate(rows, pivots, ranges, limit: int):
    size = 1
    for r in ranges:
        size *= len(r)
    if size > limit:
        raise EnumerationLimitError(f"{size} pivot assignments exceed max_enumeration={limit}")
    width = len(rows[0]) if rows else 0
    for values in itertools.product(*ranges):
        vec = [Fraction(0)] * width
        for val, row in zip(values, rows):
            if val:
                for j, x in enumerate(row):
                    if x:
                        vec[j] += val * x
        yield vec


def _graphic(values: Dict[Pair, Fraction], T: Sequence[Key]) -> bool:
    return all((values[(y, x)] == 0) == (values[(x, y)] == 0) for x in T for y in T if x != y)


def resolve_ambiguity(report: TransferReport, basis: ObstructionBasis) -> TransferReport:
    """
    Corrections candidate + sum c_i F_i with every entry nonnegative (integral for
    integer data) and, when configured, graphic support. Column sums are preserved
    because every basis element has zero column sums.
    """
    if not report.bad_pairs:
        return replace(report, resolution=report.candidate, status="unique", completions=[{}])
    cand = report.candidate
    T = basis.support()
    positions = [(y, x) for x in T for y in T]
    rows, pivots = _reduced([[F.get(pos, Fraction(0)) for pos in positions] for F in basis.basis])
    step = _step(cand)
    S = report.target_sum
    ranges = [_grid(-cand.entry(*positions[j]), S - cand.entry(*positions[j]), step) for j in pivots]
    limit = safe_get(CONFIG, "transfer", "max_enumeration", default=250000)
    require_graphic = safe_get(CONFIG, "transfer", "require_graphic", default=True)

    completions = []
    for vec in _enumerate(rows, pivots, ranges, limit):
        values = {pos: cand.entry(*pos) + vec[k] for k, pos in enumerate(positions)}
        if any(v < 0 for v in values.values()):
            continue
        if step == 1 and any(v.denominator != 1 for v in values.values()):
            continue
        if require_graphic and not _graphic(values, T):
            continue
        completions.append({pos: vec[k] for k, pos in enumerate(positions) if vec[k] != 0})

    status = {0: "infeasible"}.get(len(completions), "unique" if len(completions) == 1 else "ambiguous")
    resolution = None
    if status == "unique":
        entries = dict(cand.entries)
        for pos, delta in completions[0].items():
            entries[pos] = entries.get(pos, Fraction(0)) + delta
        resolution = CFMatrix(cand.order, entries, cand.cusp_tails, dict(cand.labels), cand.q_param,
                              check_graphic=require_graphic)
    notes = list(report.notes)
    notes.append(f"{len(completions)} completions over {len(pivots)} free entries")
    logger.info(f"resolve_ambiguity: status {status}, {len(completions)} completions")
    return replace(report, resolution=resolution, status=status, completions=completions, notes=notes)


def column_options(report: TransferReport, basis: ObstructionBasis) -> Dict[Key, List[Dict[Key, Fraction]]]:
    """Per bad column x, the nonnegative completions of column x alone, as corrections {row: delta}."""
    cand = report.candidate
    T = basis.support()
    step = _step(cand)
    S = report.target_sum
    limit = safe_get(CONFIG, "transfer", "max_enumeration", default=250000)
    out: Dict[Key, List[Dict[Key, Fraction]]] = {}
    for x in T:
        rows, pivots = _reduced([[F.get((y, x), Fraction(0)) for y in T] for F in basis.basis])
        if not rows:
            out[x] = [{}]
            continue
        ranges = [_grid(-cand.entry(T[j], x), S - cand.entry(T[j], x), step) for j in pivots]
        options = []
        for vec in _enumerate(rows, pivots, ranges, limit):
            values = [cand.entry(y, x) + vec[k] for k, y in enumerate(T)]
            if any(v < 0 for v in values):
                continue
            if step == 1 and any(v.denominator != 1 for v in values):
                continue
            options.append({y: vec[k] for k, y in enumerate(T) if vec[k] != 0})
        out[x] = options
        logger.debug(f"column {cand.label(x)}: {len(options)} options")
    return out
