import pytest

from errors import UnsupportedParametersError
from finite_field import Mat2, Poly, RationalFunction, get_field


def test_f4_multiplication_table():
    F = get_field(4)
    # 2 stands for the class of x in F_2[x]/(x^2+x+1)
    assert F.mul(2, 2) == 3
    assert F.mul(2, 3) == 1
    assert F.add(2, 3) == 1
    assert all(F.mul(a, F.inv(a)) == 1 for a in F.units())


def test_unsupported_field():
    with pytest.raises(UnsupportedParametersError):
        get_field(7)


def test_poly_parse_and_arithmetic():
    t = Poly.t(2)
    f = Poly.parse(2, "t(t+1)")
    assert f == t * (t + 1)
    assert f.degree == 2
    assert str(Poly.parse(2, "t^2+t+1")) == str(t * t + t + 1)
    q, r = divmod(t ** 3 + 1, t + 1)
    assert r.is_zero()
    assert q == t * t + t + 1


def test_poly_gcd_over_f3():
    t = Poly.t(3)
    a = (t + 1) * (t + 2)
    b = (t + 1) * t
    assert a.gcd(b) == t + 1


def test_rational_valuation():
    t = Poly.t(2)
    x = RationalFunction.make(t + 1, t ** 3)
    assert x.valuation() == 2
    assert RationalFunction.make(t ** 2).valuation() == -2
    assert not x.is_polynomial()


def test_mat2_product_and_det():
    g = Mat2.of(3, 1, 2, 0, 1)
    h = Mat2.of(3, 1, 1, 0, 1)
    assert g @ h == Mat2.of(3, 1, 0, 0, 1)
    assert g.det() == Poly.constant(3, 1)
