import networkx as nx
import numpy as np
import pytest

import fixtures
from btree_arith import (BallVertex, LatticeVertex, atkin_lehner, congruence_quotient, conjugates_order,
                         cycle_order, gamma0_generators, image_group, moebius_act, neighbors, o_graph,
                         quotient_by_overgroup, random_ball, random_word, reduce_to_ray, stabilizer_contains,
                         stabilizer_generators, stabilizer_image)
from cf_structures import equivalent
from errors import GroupActionError, UnsupportedParametersError
from fine_graph import is_isomorphic
from finite_field import Mat2, Poly

M2A = ((0, 0), (0, 0))
EICHLER = ((0, -1), (1, 0))


def test_tree_is_regular():
    for q in (2, 3, 4):
        v = BallVertex.make(q, {0: 1, 2: 1}, -1)
        nbrs = neighbors(v)
        assert len(set(nbrs)) == q + 1
        assert all(v in neighbors(w) for w in nbrs)


def test_ball_lattice_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = random_ball(3, 5, rng)
        assert LatticeVertex.from_ball(v).to_ball() == v


def test_moebius_composition():
    rng = np.random.default_rng(11)
    for _ in range(100):
        g, h = random_word(2, 4, rng), random_word(2, 4, rng)
        v = random_ball(2, 6, rng)
        assert moebius_act(g @ h, v) == moebius_act(g, moebius_act(h, v))


def test_singular_matrix_rejected():
    with pytest.raises(GroupActionError):
        moebius_act(Mat2.of(2, 1, 1, 1, 1), BallVertex.ray(2, 0))


def test_reduce_to_ray():
    rng = np.random.default_rng(5)
    for _ in range(100):
        v = random_ball(2, 6, rng)
        gamma, n = reduce_to_ray(v)
        assert n >= 0
        assert moebius_act(gamma, v) == BallVertex.ray(2, n)


def test_stabilizer_generators_fix_the_ray_vertex():
    for n in range(4):
        v = BallVertex.ray(3, n)
        for g in stabilizer_generators(n, 3):
            assert stabilizer_contains(n, g)
            assert moebius_act(g, v) == v


@pytest.mark.parametrize("level,order", [("t(t+1)", 36), ("t^2", 48), ("t^2+t+1", 60)])
def test_image_group_orders(level, order):
    assert len(image_group(2, Poly.parse(2, level))) == order


@pytest.mark.parametrize("level,cycle", [("t(t+1)", 6), ("t^2", 4), ("t^2+t+1", 5)])
def test_cycle_orders(level, cycle):
    assert cycle_order(Poly.parse(2, level), 2) == cycle


@pytest.mark.parametrize("level,m0,m1", [("t(t+1)", 6, 9), ("t^2", 8, 12), ("t^2+t+1", 10, 15)])
def test_layer_counts(level, m0, m1):
    cq = congruence_quotient(2, Poly.parse(2, level))
    counts = cq.layer_counts()
    assert counts[:2] == [m0, m1]
    assert cq.check_layer_counts()


def test_linear_level_layers():
    cq = congruence_quotient(3, Poly.t(3))
    counts = cq.layer_counts()
    assert counts[1] == 4 * counts[0]
    assert cq.check_layer_counts()


@pytest.mark.parametrize("level,graph", [("t(t+1)", nx.complete_bipartite_graph(3, 3)),
                                         ("t^2", nx.hypercube_graph(3)),
                                         ("t^2+t+1", nx.petersen_graph())])
def test_o_graphs(level, graph):
    G = o_graph(congruence_quotient(2, Poly.parse(2, level)))
    assert is_isomorphic(G, nx.MultiGraph(graph))[0]


def test_petersen_is_not_the_prism():
    G = o_graph(congruence_quotient(2, Poly.parse(2, "t^2+t+1")))
    assert not is_isomorphic(G, nx.MultiGraph(nx.circular_ladder_graph(5)))[0]


def test_unsupported_parameters():
    with pytest.raises(UnsupportedParametersError):
        congruence_quotient(3, Poly.parse(3, "t^2"))
    with pytest.raises(UnsupportedParametersError):
        congruence_quotient(2, Poly.t(2), depth=40)


def test_gamma0_t_is_the_real_line():
    q = 2
    cq = congruence_quotient(q, Poly.t(q))
    w = quotient_by_overgroup(cq, gamma0_generators(q, Poly.t(q)))
    assert len(w.cusps) == 2
    assert equivalent(w, fixtures.load_graph("gamma0_t", q), half_edges=False)


def test_atkin_lehner_swaps_the_orders():
    f = Poly.parse(2, "t^2")
    w = atkin_lehner(f)
    assert conjugates_order(w, f, M2A, EICHLER)
    assert not conjugates_order(Mat2.identity(2), f, M2A, EICHLER)


@pytest.mark.parametrize("q,level,order", [(2, "t", 6), (3, "t", 48), (2, "t(t+1)", 6)])
def test_constant_stabilizer_image(q, level, order):
    assert len(stabilizer_image(0, Poly.parse(q, level))) == order
