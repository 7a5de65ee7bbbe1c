from fractions import Fraction

import pytest
import sympy

import fixtures
from cf_structures import to_matrix
from errors import CuspPatternError, TransferError
from obstruction import obstruction_space
from transfer import (assemble_candidate, build_fn, column_options, evaluate_poly, oracle_entry,
                      predict_cusps_at_Q, resolve_ambiguity)


def test_transfer_polynomials():
    assert build_fn(1, 2).coefficients == (0, 1)
    assert build_fn(2, 2).coefficients == (-4, 0, 1)
    assert build_fn(3, 2).coefficients == (0, -6, 0, 1)
    assert build_fn(4, 3).coefficients == (18, 0, -12, 0, 1)


def test_laurent_identity_small_grid():
    x = sympy.Symbol("x")
    for n in range(1, 6):
        for q in (2, 3, 5):
            p = build_fn(n, q)
            lhs = sympy.expand(p.as_expr(x).subs(x, x + sympy.Integer(q) / x) * x ** n)
            assert sympy.expand(lhs - x ** (2 * n) - q ** n) == 0


def test_bad_degree():
    with pytest.raises(TransferError):
        build_fn(0, 2)


def test_predicted_cusps():
    w = fixtures.load_graph("normalizer_t", 2)
    cusps = predict_cusps_at_Q(w.cusps, 3, 2)
    assert len(cusps) == 3
    assert all((c.inward, c.outward, c.attach_weight) == (8, 1, 1) for c in cusps)
    assert [c.label(1) for c in cusps] == ["d5", "d6", "d7"]
    assert cusps[0].label(2) == "d8"


def test_predicted_cusps_need_quotient_pattern():
    w = fixtures.family_a(Fraction(1, 4), Fraction(1, 4))
    with pytest.raises(CuspPatternError):
        predict_cusps_at_Q(w.cusps, 2, 2)


def test_transfer_needs_q():
    with pytest.raises(TransferError):
        assemble_candidate(fixtures.family_a(Fraction(1, 4), Fraction(1, 4)), 2)


@pytest.mark.parametrize("name", ["normalizer_t2_n3", "normalizer_tt1_n3", "normalizer_t2t1_n3"])
def test_transferred_normalizer_rows(name):
    case = fixtures.transfer_case(name)
    report = assemble_candidate(fixtures.load_graph(case["graph"]), case["n"])
    assert report.status == "unique"
    for col, expected in fixtures.golden_columns(name, 2).items():
        assert report.column(col) == expected, col
    count, inward, outward = fixtures.golden_cusps(name, 2)
    assert len(report.candidate.cusp_tails) == count
    assert all((c.inward, c.outward) == (inward, outward) for c in report.candidate.cusp_tails)


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_transferred_linear_level(q):
    report = assemble_candidate(fixtures.load_graph("normalizer_t", q), 3)
    for col, expected in fixtures.golden_columns("normalizer_t_n3", q).items():
        assert report.column(col) == expected, col
    assert all(s == q ** 3 + 1 for s in report.column_sums.values())


def test_oracle_matches_evaluation():
    w = fixtures.load_graph("elliptic")
    m = to_matrix(w)
    p = build_fn(2, 2)
    block = evaluate_poly(p, m, m.order)
    for v in m.order:
        for u in m.order:
            assert block.entry(u, v) == oracle_entry(p, m, v, u)


def test_elliptic_degree_three_resolves_uniquely():
    w = fixtures.load_graph("elliptic")
    basis = obstruction_space(w)
    report = resolve_ambiguity(assemble_candidate(w, 3, basis), basis)
    assert report.status == "unique"
    assert report.completions == [{}]
    for col, expected in fixtures.golden_columns("elliptic_n3", 2).items():
        assert report.column(col, resolved=True) == expected, col
    assert all(report.resolution.column_sum(v) == 9 for v in report.resolution.order)


def test_elliptic_degree_two_candidate():
    w = fixtures.load_graph("elliptic")
    basis = obstruction_space(w)
    report = assemble_candidate(w, 2, basis)
    for col, expected in fixtures.golden_columns("elliptic_n2", 2).items():
        assert report.column(col) == expected, col
    negative = {report.label_pair(p) for p, _ in report.negative_entries}
    assert negative == {("n1", "n1"), ("n2", "n2"), ("m2", "m2"), ("d0", "d0")}

    n1, n2 = w.vertex("n1"), w.vertex("n2")
    options = column_options(report, basis)[n1]
    pairs = {(o.get(n1, Fraction(0)) / 2, o.get(n2, Fraction(0)) / 2) for o in options}
    assert pairs == fixtures.column_pairs("elliptic_n2")
    assert len(resolve_ambiguity(report, basis).completions) == 6
