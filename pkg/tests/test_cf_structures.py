from fractions import Fraction

import pytest

import fixtures
from cf_structures import (WCFG, CFMatrix, Charge, CuspVertex, apply_operator, build_wcfg, canonical_form,
                           detect_cusps, equivalent, from_matrix, materialize, normalize, to_matrix)
from errors import CuspPatternError, NonGraphicError, NormalizationError
from fine_graph import ACTUAL, VIRTUAL, FineGraph, Graph
from transfer import assemble_candidate


def test_non_graphic_weights_rejected():
    with pytest.raises(NonGraphicError):
        build_wcfg(["a", "b"], {("a", "b"): 1})


def test_cusp_weights_must_be_positive():
    with pytest.raises(CuspPatternError):
        build_wcfg(["a"], {}, [{"attach": "a", "inward": 0, "outward": 1}])


def test_quotient_like_rows():
    for name in ("normalizer_tt1", "normalizer_t2", "normalizer_t2t1", "gamma0_t2"):
        assert fixtures.load_graph(name).is_quotient_like(), name
    assert fixtures.load_graph("normalizer_t", 5).is_quotient_like()
    assert fixtures.gamma_t(3).column_sum(0) == 4


def test_cusp_labels():
    w = fixtures.load_graph("normalizer_t2")
    m = to_matrix(w)
    d = w.cusps_at(w.vertex("d2"))[0]
    assert [d.label(k) for k in (1, 2, 3)] == ["d3", "d4", "d5"]
    assert m.label(CuspVertex(d.tail_index, 2)) == "d4"


def test_lazy_cusp_columns():
    w = fixtures.load_graph("normalizer_t", 3)
    m = to_matrix(w)
    d1 = w.vertex("d1")
    assert m.column(d1) == {d1: 3, CuspVertex(0, 1): 1}
    assert m.column(CuspVertex(0, 1)) == {d1: 3, CuspVertex(0, 2): 1}
    assert m.column(CuspVertex(0, 4)) == {CuspVertex(0, 3): 3, CuspVertex(0, 5): 1}


def test_operator_preserves_mass_on_quotient_graphs():
    w = fixtures.load_graph("normalizer_t2")
    m = to_matrix(w)
    mu = Charge.delta(w.vertex("c"))
    for _ in range(4):
        mu = apply_operator(m, mu)
    assert mu.total() == 3 ** 4


def test_normalize_makes_stochastic_columns():
    m = normalize(to_matrix(fixtures.load_graph("elliptic")))
    for v in m.order:
        assert m.column_sum(v) == 1
    assert m.cusp_tails[0].inward == Fraction(2, 3)


def test_normalize_rejects_negative_columns():
    m = CFMatrix((0, 1), {(1, 0): -1, (0, 1): 1}, check_graphic=False)
    with pytest.raises(NormalizationError):
        normalize(m)


def test_matrix_round_trip():
    w = fixtures.load_graph("gamma0_tt1")
    back = from_matrix(to_matrix(w))
    assert back.weights == w.weights
    assert len(back.cusps) == 4
    assert equivalent(w, back)


def test_materialize_and_detect():
    w = fixtures.load_graph("normalizer_t2")
    m, boundary = materialize(w, 5)
    assert len(m.order) == 5 + 2 * 5
    det = detect_cusps(m, boundary)
    # d2, d1 and c follow the (outward 1, inward 2) pattern and are absorbed by the first cusp
    assert det.core == [w.vertex("u1")]
    assert all((c.inward, c.outward) == (2, 1) for c in det.cusps)
    assert sorted(c.attach_weight for c in det.cusps) == [1, 2]


def test_canonical_form_absorbs_pattern_vertices():
    # a core vertex that already follows the cusp pattern joins the tail
    long = build_wcfg(["a", "b"], {("a", "a"): 1, ("a", "b"): 2, ("b", "a"): 2},
                      [{"attach": "b", "inward": 2, "outward": 1}], q_param=2)
    short = build_wcfg(["a"], {("a", "a"): 1}, [{"attach": "a", "inward": 2, "outward": 1, "attach_weight": 2}],
                       q_param=2)
    assert len(canonical_form(long).order) == 1
    assert equivalent(long, short)
    assert not equivalent(long, fixtures.load_graph("normalizer_t2t1"))


def test_finite_cycle_has_no_cusps():
    entries = {}
    for i in range(4):
        entries[((i + 1) % 4, i)] = 1
        entries[(i, (i + 1) % 4)] = 1
    det = detect_cusps(CFMatrix((0, 1, 2, 3), entries))
    assert det.cusps == []
    assert det.core == [0, 1, 2, 3]


def test_alternating_path_is_one_cusp():
    # m[k, k+1] = 1 away from vertex 0, m[k+1, k] = 2 back towards it
    entries = {(0, 0): 2}
    for k in range(5):
        entries[(k + 1, k)] = 1
        entries[(k, k + 1)] = 2
    det = detect_cusps(CFMatrix(tuple(range(6)), entries))
    assert len(det.cusps) == 1
    c = det.cusps[0]
    assert (c.inward, c.outward, c.attach, c.attach_weight) == (2, 1, 0, 1)
    assert det.core == [0]


def test_transferred_graph_has_six_cusps():
    report = assemble_candidate(fixtures.load_graph("normalizer_t2"), 3)
    m, boundary = materialize(report.candidate, 4)
    det = detect_cusps(m, boundary)
    assert len(det.cusps) == 6
    assert all((c.inward, c.outward) == (8, 1) for c in det.cusps)


def test_normalize_is_idempotent():
    once = normalize(to_matrix(fixtures.load_graph("elliptic")))
    twice = normalize(once)
    assert twice.entries == once.entries
    assert twice.cusp_tails == once.cusp_tails


def test_third_power_of_a_delta():
    w = fixtures.load_graph("normalizer_t2")
    m = to_matrix(w)
    mu = Charge.delta(w.vertex("c"))
    for _ in range(3):
        mu = apply_operator(m, mu)
    assert {m.label(v): x for v, x in mu.support.items()} == {"d1": 8, "u1": 16, "d3": 1, "u3": 2}


def test_charge_on_a_cusp_moves_outward():
    m = to_matrix(fixtures.load_graph("normalizer_t2"))
    mu = Charge.delta(CuspVertex(0, 1))
    for k in range(1, 8):
        mu = apply_operator(m, mu)
        deepest = max(v.depth for v in mu.support if isinstance(v, CuspVertex) and v.cusp == 0)
        assert deepest == 1 + k


def single_vertex(weight, loop):
    if loop:
        g = Graph.from_pairs([0, 1], [(0, 1), (1, 0)])
    else:
        g = Graph.from_pairs([0, 1], [(0, 1)])
    core = FineGraph(g, {0: ACTUAL, 1: VIRTUAL})
    return WCFG(core=core, cusps=(), weights={(0, 0): Fraction(weight)})


def test_weights_only_comparison_still_checks_the_diagonal():
    loop, half = single_vertex(2, loop=True), single_vertex(2, loop=False)
    assert loop.loop_vertices() == {0} and half.half_edge_anchors() == {0: 1}
    assert equivalent(loop, half, half_edges=False)
    assert not equivalent(loop, half)
    assert not equivalent(loop, single_vertex(1, loop=True), half_edges=False)
    assert not equivalent(half, single_vertex(3, loop=False), half_edges=False)
