from fractions import Fraction

import pytest
import sympy

import fixtures
from errors import ShellError
from obstruction import (X, Shell, bad_pairs, bad_set, candidate_shell, coarse_obstruction_space, contains,
                         family_condition, minimal_shell, obstruction_space, projected_char_poly, symmetry_difference,
                         t3_criterion)


@pytest.fixture
def elliptic():
    return fixtures.load_graph("elliptic")


def labels(w, vertices):
    return sorted(w.label(v) for v in vertices)


def test_candidate_shell_avoids_the_cusp(elliptic):
    assert labels(elliptic, candidate_shell(elliptic).vertices) == ["d0", "m1", "m2", "n1", "n2"]


def test_projected_char_poly(elliptic):
    shell = candidate_shell(elliptic)
    assert projected_char_poly(elliptic, shell) == sympy.Poly(X ** 3 * (X ** 2 - 8), X)
    drawn = fixtures.load_graph("elliptic_as_drawn")
    assert projected_char_poly(drawn, candidate_shell(drawn)) == sympy.Poly(X ** 3 * (X ** 2 - 7), X)


def test_obstruction_dimensions(elliptic):
    shell = candidate_shell(elliptic)
    basis = obstruction_space(elliptic, shell)
    assert basis.dimension == 4
    assert coarse_obstruction_space(elliptic, shell).dimension == 6
    assert labels(elliptic, bad_set(elliptic, basis)) == ["d0", "m2", "n1", "n2"]
    assert len(bad_pairs(elliptic, basis)) == 16


def test_basis_columns_sum_to_zero(elliptic):
    basis = obstruction_space(elliptic)
    for F in basis.basis:
        for x in basis.shell.vertices:
            assert sum((val for (y, col), val in F.items() if col == x), Fraction(0)) == 0


def test_shell_meeting_a_cusp(elliptic):
    with pytest.raises(ShellError):
        obstruction_space(elliptic, Shell((elliptic.vertex("d1"),)))


def test_quotient_rows_have_empty_shells():
    for name in ("normalizer_tt1", "normalizer_t2", "normalizer_t2t1"):
        w = fixtures.load_graph(name)
        assert candidate_shell(w).vertices == ()
        assert obstruction_space(w).dimension == 0


def test_tree_criterion(elliptic):
    for name in ("normalizer_tt1", "normalizer_t2", "normalizer_t2t1"):
        assert t3_criterion(fixtures.load_graph(name))
    assert t3_criterion(fixtures.load_graph("normalizer_t", 4))
    assert not t3_criterion(elliptic)


@pytest.mark.parametrize("a,b", [(Fraction(1, 4), Fraction(1, 3)), (Fraction(1, 5), Fraction(1, 2))])
def test_two_leaf_family_char_poly(a, b):
    w = fixtures.family_a(a, b)
    s = a + b
    expected = sympy.Poly(X * (X ** 2 - sympy.Rational(s.numerator, s.denominator)), X)
    assert projected_char_poly(w, Shell(tuple(w.order))) == expected


def test_two_leaf_family_symmetry():
    w = fixtures.family_a(Fraction(1, 3), Fraction(1, 3))
    z, v = w.vertex("z"), w.vertex("v")
    basis = obstruction_space(w, Shell((z, v)))
    assert basis.dimension == 1
    F = symmetry_difference(w, {z: v, v: z})
    assert F == {(v, z): 1, (z, z): -1, (z, v): 1, (v, v): -1}
    assert contains(basis, F)


def test_family_condition():
    b, c = sympy.symbols("b c", positive=True)
    assert family_condition() == sympy.Eq(b, c)


def test_minimal_shell_keeps_the_dimension(elliptic):
    shell = minimal_shell(elliptic)
    assert labels(elliptic, shell.vertices) == ["d0", "m2", "n1", "n2"]
    assert obstruction_space(elliptic, shell).dimension == 4


def test_wider_guard_window_keeps_the_basis(elliptic):
    shell = candidate_shell(elliptic)
    basis = obstruction_space(elliptic, shell).basis
    assert obstruction_space(elliptic, shell, guard=3).basis == basis
    assert obstruction_space(elliptic, shell, guard=6).basis == basis


def test_guard_must_leave_the_shell(elliptic):
    with pytest.raises(ShellError):
        obstruction_space(elliptic, guard=0)
