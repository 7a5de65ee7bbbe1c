from fractions import Fraction

import networkx as nx
import pytest

from errors import GraphError, GroupActionError, QuotientError
from fine_graph import (ACTUAL, VIRTUAL, FineGraph, Graph, GroupAction, barycentric_subdivision, fine_quotient,
                        is_isomorphic, plain_quotient, quotient_weights, reduction)


def triangle():
    return Graph.from_pairs([0, 1, 2], [(0, 1), (1, 2), (2, 0)], {0: "a", 1: "b", 2: "c"})


def rotation(g):
    return GroupAction.from_generators(g, [({0: 1, 1: 2, 2: 0}, {0: 2, 1: 3, 2: 4, 3: 5, 4: 0, 5: 1})])


def test_from_pairs_reversal():
    g = triangle()
    assert g.rev[0] == 1 and g.src[1] == 1 and g.tgt[1] == 0
    assert g.valency(0) == 2
    assert sorted(g.neighbors(0)) == [1, 2]


def test_bad_reversal_rejected():
    with pytest.raises(GraphError):
        Graph(frozenset([0, 1]), frozenset([0, 1]), {0: 0, 1: 1}, {0: 1, 1: 0}, {0: 0, 1: 1})


def test_fine_graph_kinds():
    g = Graph.from_pairs([0, 1], [(0, 1)])
    with pytest.raises(GraphError):
        FineGraph(g, {0: ACTUAL, 1: ACTUAL})


def test_rotation_group():
    g = triangle()
    act = rotation(g)
    assert len(act) == 3
    act.check_group_axioms()


def test_bad_generator_rejected():
    g = triangle()
    with pytest.raises(GroupActionError):
        GroupAction.from_generators(g, [({0: 1, 1: 0, 2: 2}, {a: a for a in g.edges})])


def test_triangle_rotation_quotient_is_a_loop():
    g = triangle()
    act = rotation(g)
    fq = fine_quotient(g, act)
    assert fq.actual_vertices() == [0]
    assert len(fq.virtual_vertices()) == 1
    assert list(fq.actual_edges().values()) == [(0, 0)]
    assert quotient_weights(g, act) == {(0, 0): Fraction(2)}


def test_reflection_gives_half_edge():
    # the swap of the two ends inverts the edge
    g = Graph.from_pairs([0, 1], [(0, 1)])
    act = GroupAction.from_generators(g, [({0: 1, 1: 0}, {0: 1, 1: 0})])
    fq = fine_quotient(g, act)
    assert fq.actual_vertices() == [0]
    assert list(fq.half_edges().values()) == [0]
    assert quotient_weights(g, act) == {(0, 0): Fraction(1)}
    with pytest.raises(GroupActionError):
        plain_quotient(g, act)
    w = reduction(fq, quotient_weights(g, act))
    assert w.weight(0, 0) == 1
    assert w.half_edge_anchors() == {0: 1}


def test_subdivision_counts():
    fg = barycentric_subdivision(triangle())
    assert len(fg.actual_vertices()) == 3
    assert len(fg.virtual_vertices()) == 3
    assert all(fg.kind[v] == VIRTUAL for v in fg.virtual_vertices())


def test_action_of_other_graph_rejected():
    act = rotation(triangle())
    with pytest.raises(GroupActionError):
        fine_quotient(triangle(), act)


def test_inconsistent_base_weights():
    g = triangle()
    act = rotation(g)
    base = {(0, 1): 1, (1, 2): 2, (2, 0): 1}
    with pytest.raises(QuotientError):
        quotient_weights(g, act, base)


def test_isomorphism_with_witness():
    ok, mapping = is_isomorphic(nx.petersen_graph(), nx.petersen_graph())
    assert ok and len(mapping) == 10
    ok, _ = is_isomorphic(nx.petersen_graph(), nx.circular_ladder_graph(5))
    assert not ok


def induced_edges(g, vp):
    """Vertex permutation of a simple graph plus the edge permutation it forces."""
    lookup = {(g.src[a], g.tgt[a]): a for a in g.edges}
    return vp, {a: lookup[(vp[g.src[a]], vp[g.tgt[a]])] for a in g.edges}


def k33():
    return Graph.from_pairs(range(6), [(i, 3 + j) for i in range(3) for j in range(3)])


def hexagon():
    return Graph.from_pairs(range(6), [(i, (i + 1) % 6) for i in range(6)])


def identity_perms(g):
    return {v: v for v in g.vertices}, {a: a for a in g.edges}


def test_non_associative_table_rejected():
    g = triangle()
    vp, ep = identity_perms(g)
    table = [[0, 1, 2], [1, 0, 1], [2, 2, 0]]
    with pytest.raises(GroupActionError):
        GroupAction.from_table(g, [vp] * 3, [ep] * 3, table)
    act = GroupAction(g, (vp,) * 3, (ep,) * 3, tuple(tuple(r) for r in table))
    with pytest.raises(GroupActionError):
        fine_quotient(g, act)


def test_table_disagreeing_with_vertex_maps_rejected():
    g = triangle()
    ident = identity_perms(g)
    rot = ({0: 1, 1: 2, 2: 0}, {0: 2, 1: 3, 2: 4, 3: 5, 4: 0, 5: 1})
    cyclic = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    act = GroupAction(g, (ident[0], rot[0], rot[0]), (ident[1], rot[1], rot[1]), cyclic)
    with pytest.raises(GroupActionError):
        fine_quotient(g, act)
    with pytest.raises(GroupActionError):
        plain_quotient(g, act)


def test_valid_table_accepted():
    g = triangle()
    ident = identity_perms(g)
    rot = ({0: 1, 1: 2, 2: 0}, {0: 2, 1: 3, 2: 4, 3: 5, 4: 0, 5: 1})
    rot2 = ({0: 2, 1: 0, 2: 1}, {0: 4, 1: 5, 2: 0, 3: 1, 4: 2, 5: 3})
    act = GroupAction.from_table(g, [ident[0], rot[0], rot2[0]], [ident[1], rot[1], rot2[1]],
                                 [[0, 1, 2], [1, 2, 0], [2, 0, 1]])
    assert fine_quotient(g, act).actual_vertices() == [0]


def test_k33_two_reflections():
    # side swap i <-> i+3 and the swap of 1, 2 (and 4, 5)
    g = k33()
    act = GroupAction.from_generators(g, [induced_edges(g, {0: 3, 3: 0, 1: 4, 4: 1, 2: 5, 5: 2}),
                                          induced_edges(g, {0: 0, 3: 3, 1: 2, 2: 1, 4: 5, 5: 4})])
    assert len(act) == 4
    fq = fine_quotient(g, act)
    assert fq.actual_vertices() == [0, 1]
    assert list(fq.actual_edges().values()) == [(0, 1)]
    weights = quotient_weights(g, act)
    assert weights == {(0, 0): Fraction(1), (0, 1): Fraction(2), (1, 0): Fraction(1), (1, 1): Fraction(2)}
    assert reduction(fq, weights).half_edge_anchors() == {0: 1, 1: 2}


@pytest.mark.parametrize("build", ["triangle", "k33", "hexagon"])
def test_quotient_conserves_valency(build):
    g = {"triangle": triangle, "k33": k33, "hexagon": hexagon}[build]()
    if build == "triangle":
        act = rotation(g)
    elif build == "k33":
        act = GroupAction.from_generators(g, [induced_edges(g, {0: 3, 3: 0, 1: 4, 4: 1, 2: 5, 5: 2})])
    else:
        act = GroupAction.from_generators(g, [induced_edges(g, {i: (i + 2) % 6 for i in range(6)})])
    fq = fine_quotient(g, act)
    weights = quotient_weights(g, act)
    for v in fq.actual_vertices():
        assert sum(m for (a, _), m in weights.items() if a == v) == g.valency(v)


def test_inversion_free_quotient_is_subdivided_plain_quotient():
    g = hexagon()
    act = GroupAction.from_generators(g, [induced_edges(g, {i: (i + 2) % 6 for i in range(6)})])
    plain, _, _ = plain_quotient(g, act)
    assert len(plain.vertices) == 2 and len(plain.edge_pairs()) == 2
    ok, _ = is_isomorphic(fine_quotient(g, act), barycentric_subdivision(plain))
    assert ok


def test_trivial_action_gives_the_subdivision():
    g = triangle()
    ok, _ = is_isomorphic(fine_quotient(g, GroupAction.trivial(g)), barycentric_subdivision(g))
    assert ok


def test_reduction_merges_a_double_edge():
    g = Graph.from_pairs([0, 1, 2, 3], [(0, 2), (2, 1), (0, 3), (3, 1)])
    fg = FineGraph(g, {0: ACTUAL, 1: ACTUAL, 2: VIRTUAL, 3: VIRTUAL})
    assert len(fg.actual_edges()) == 2
    w = reduction(fg, {(0, 1): Fraction(2), (1, 0): Fraction(1)})
    assert list(w.core.actual_edges().values()) == [(0, 1)]
    assert w.weight(0, 1) == 2 and w.weight(1, 0) == 1


def test_isomorphism_size_limit():
    with pytest.raises(GraphError):
        is_isomorphic(nx.path_graph(65), nx.path_graph(65))
