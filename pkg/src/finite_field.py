"""
Finite Field Module - exact arithmetic in F_q(t)
Features:
- Fq for q in {2, 3, 4, 5}, table driven (add/mul/inv lookup tables)
- Poly: polynomials in t over F_q, immutable and hashable
- RationalFunction: reduced fractions with monic denominator
- Laurent truncation at the infinite place (exact long division)
- Mat2: 2x2 matrices over any of the rings above
"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import sympy
from sympy.parsing.sympy_parser import (
    implicit_multiplication_application,
    parse_expr,
    standard_transformations,
)

from errors import UnsupportedParametersError

logger = logging.getLogger(__name__)

# q -> (p, k, modulus digits low->high) ; elements are base-p digit encodings
SUPPORTED_FIELDS = {
    2: (2, 1, None),
    3: (3, 1, None),
    4: (2, 2, (1, 1, 1)),  # x^2 + x + 1
    5: (5, 1, None),
}


# --------------------------- Fq ---------------------------

class Fq:
    """Finite field with lookup tables. Elements are ints 0..q-1."""

    def __init__(self, q: int):
        if q not in SUPPORTED_FIELDS:
            raise UnsupportedParametersError(f"field size q={q} not supported (use 2, 3, 4 or 5)")
        self.q = q
        self.p, self.k, modulus = SUPPORTED_FIELDS[q]
        self._modulus = modulus
        self.add_table = [[self._add(a, b) for b in range(q)] for a in range(q)]
        self.mul_table = [[self._mul(a, b) for b in range(q)] for a in range(q)]
        self.neg_table = [self._find(lambda x, a=a: self.add_table[a][x] == 0) for a in range(q)]
        self.inv_table = [None] + [self._find(lambda x, a=a: self.mul_table[a][x] == 1) for a in range(1, q)]
        self.generator = next(g for g in range(1, q) if len(self._powers(g)) == q - 1)

    # digits helpers for the prime-power case
    def _digits(self, a: int) -> List[int]:
        return [(a // self.p ** i) % self.p for i in range(self.k)]

    def _from_digits(self, digits: Iterable[int]) -> int:
        return sum((d % self.p) * self.p ** i for i, d in enumerate(digits))

    def _add(self, a: int, b: int) -> int:
        return self._from_digits(x + y for x, y in zip(self._digits(a), self._digits(b)))

    def _mul(self, a: int, b: int) -> int:
        if self.k == 1:
            return (a * b) % self.p
        da, db = self._digits(a), self._digits(b)
        prod = [0] * (2 * self.k - 1)
        for i, x in enumerate(da):
            for j, y in enumerate(db):
                prod[i + j] += x * y
        mod = self._modulus
        for deg in range(len(prod) - 1, self.k - 1, -1):
            c = prod[deg] % self.p
            if c:
                for i, m in enumerate(mod):
                    prod[deg - self.k + i] -= c * m
        return self._from_digits(prod[:self.k])

    def _find(self, predicate) -> int:
        return next(x for x in range(self.q) if predicate(x))

    def _powers(self, g: int) -> set:
        seen, x = set(), 1
        while x not in seen:
            seen.add(x)
            x = self.mul_table[x][g]
        return seen

    def add(self, a: int, b: int) -> int:
        return self.add_table[a][b]

    def sub(self, a: int, b: int) -> int:
        return self.add_table[a][self.neg_table[b]]

    def neg(self, a: int) -> int:
        return self.neg_table[a]

    def mul(self, a: int, b: int) -> int:
        return self.mul_table[a][b]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in F_q")
        return self.inv_table[a]

    def from_int(self, n: int) -> int:
        """Image of an integer in the prime subfield."""
        return n % self.p

    def elements(self) -> range:
        return range(self.q)

    def units(self) -> range:
        return range(1, self.q)

    def __repr__(self):
        return f"Fq({self.q})"


@functools.lru_cache(maxsize=None)
def get_field(q: int) -> Fq:
    return Fq(q)


# --------------------------- Poly ---------------------------

def _strip(coeffs: Iterable[int]) -> Tuple[int, ...]:
    c = list(coeffs)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class Poly:
    """Polynomial in t over F_q; coeffs low -> high, no trailing zeros."""
    q: int
    coeffs: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _strip(self.coeffs))

    # ---- constructors ----
    @classmethod
    def constant(cls, q: int, c: int) -> "Poly":
        return cls(q, (c,))

    @classmethod
    def monomial(cls, q: int, c: int, k: int) -> "Poly":
        return cls(q, (0,) * k + (c,))

    @classmethod
    def t(cls, q: int) -> "Poly":
        return cls.monomial(q, 1, 1)

    @classmethod
    def parse(cls, q: int, text: str) -> "Poly":
        """Parse 't^2+t+1', 't(t+1)', 't*(t+1)' with integer coefficients mod p."""
        t = sympy.Symbol("t")
        try:
            expr = parse_expr(text.replace("^", "**"), local_dict={"t": t},
                              transformations=standard_transformations + (implicit_multiplication_application,))
            coeffs = sympy.Poly(sympy.expand(expr), t).all_coeffs()
        except (sympy.SympifyError, SyntaxError, TypeError, sympy.PolynomialError) as e:
            raise ValueError(f"cannot parse polynomial '{text}': {e}")
        field = get_field(q)
        return cls(q, tuple(field.from_int(int(c)) for c in reversed(coeffs)))

    # ---- properties ----
    @property
    def field(self) -> Fq:
        return get_field(self.q)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    @property
    def lead(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def coeff(self, k: int) -> int:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def sort_key(self) -> Tuple:
        return (len(self.coeffs), self.coeffs)

    # ---- arithmetic ----
    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        if isinstance(other, int):
            return Poly.constant(self.q, self.field.from_int(other))
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        F = self.field
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self.q, tuple(F.add(self.coeff(i), other.coeff(i)) for i in range(n)))

    __radd__ = __add__

    def __neg__(self):
        F = self.field
        return Poly(self.q, tuple(F.neg(c) for c in self.coeffs))

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return Poly(self.q)
        F = self.field
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        out[i + j] = F.add(out[i + j], F.mul(a, b))
        return Poly(self.q, tuple(out))

    __rmul__ = __mul__

    def scale(self, c: int) -> "Poly":
        F = self.field
        return Poly(self.q, tuple(F.mul(c, x) for x in self.coeffs))

    def shift(self, k: int) -> "Poly":
        """Multiply by t^k (k >= 0)."""
        return Poly(self.q, (0,) * k + self.coeffs) if self.coeffs else self

    def __divmod__(self, other: "Poly") -> Tuple["Poly", "Poly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        F = self.field
        rem = list(self.coeffs)
        quo = [0] * max(0, len(rem) - other.degree)
        inv_lead = F.inv(other.lead)
        for k in range(len(rem) - 1, other.degree - 1, -1):
            c = rem[k]
            if c == 0:
                continue
            factor = F.mul(c, inv_lead)
            quo[k - other.degree] = factor
            for i, oc in enumerate(other.coeffs):
                rem[k - other.degree + i] = F.sub(rem[k - other.degree + i], F.mul(factor, oc))
        return Poly(self.q, tuple(quo)), Poly(self.q, tuple(rem))

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def __pow__(self, e: int) -> "Poly":
        result = Poly.constant(self.q, 1)
        for _ in range(e):
            result = result * self
        return result

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        return self.scale(self.field.inv(self.lead))

    def gcd(self, other: "Poly") -> "Poly":
        a, b = self, other
        while not b.is_zero():
            a, b = b, a % b
        return a.monic()

    def __str__(self):
        if self.is_zero():
            return "0"
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("t" if k == 1 else f"t^{k}")
            if not mono:
                terms.append(str(c))
            else:
                terms.append(mono if c == 1 else f"{c}{mono}")
        return "+".join(terms)


# --------------------------- RationalFunction ---------------------------

@dataclass(frozen=True)
class RationalFunction:
    """num/den over F_q with gcd 1 and monic den."""
    num: Poly
    den: Poly

    @classmethod
    def make(cls, num: Poly, den: Optional[Poly] = None) -> "RationalFunction":
        if den is None:
            den = Poly.constant(num.q, 1)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            return cls(num, Poly.constant(num.q, 1))
        g = num.gcd(den)
        num, den = num // g, den // g
        inv = num.field.inv(den.lead)
        return cls(num.scale(inv), den.scale(inv))

    @classmethod
    def coerce(cls, x) -> "RationalFunction":
        if isinstance(x, RationalFunction):
            return x
        if isinstance(x, Poly):
            return cls.make(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to RationalFunction")

    @classmethod
    def from_terms(cls, q: int, terms: Dict[int, int]) -> "RationalFunction":
        """Laurent polynomial sum(c * t^k)."""
        if not terms:
            return cls.make(Poly(q))
        m = max(0, -min(terms))
        num = Poly(q)
        for k, c in terms.items():
            num = num + Poly.monomial(q, c, k + m)
        return cls.make(num, Poly.monomial(q, 1, m))

    @classmethod
    def t_power(cls, q: int, k: int) -> "RationalFunction":
        return cls.from_terms(q, {k: 1})

    @property
    def q(self) -> int:
        return self.num.q

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def valuation(self) -> float:
        """Valuation at infinity: deg(den) - deg(num); +inf for 0."""
        if self.is_zero():
            return math.inf
        return self.den.degree - self.num.degree

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __add__(self, other):
        other = RationalFunction.coerce(other)
        return RationalFunction.make(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self + (-RationalFunction.coerce(other))

    def __mul__(self, other):
        other = RationalFunction.coerce(other)
        return RationalFunction.make(self.num * other.num, self.den * other.den)

    def __truediv__(self, other):
        other = RationalFunction.coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction.make(self.num * other.den, self.den * other.num)

    def truncate_at_infinity(self, r: int) -> Dict[int, int]:
        """Laurent terms c_k t^k at infinity with k > -r (exact long division)."""
        if self.is_zero():
            return {}
        m = max(0, r - 1)
        quo, _ = divmod(self.num.shift(m), self.den)
        return {j - m: c for j, c in enumerate(quo.coeffs) if c and j - m > -r}

    def __str__(self):
        if self.den.degree == 0:
            return str(self.num)
        return f"({self.num})/({self.den})"


# --------------------------- Mat2 ---------------------------

@dataclass(frozen=True)
class Mat2:
    """2x2 matrix (a b; c d) over Poly, RationalFunction, or residues mod f."""
    a: object
    b: object
    c: object
    d: object

    @classmethod
    def identity(cls, q: int) -> "Mat2":
        one, zero = Poly.constant(q, 1), Poly(q)
        return cls(one, zero, zero, one)

    @classmethod
    def of(cls, q: int, a, b, c, d) -> "Mat2":
        """Build from ints (field elements) or Polys."""
        def lift(x):
            return x if isinstance(x, (Poly, RationalFunction)) else Poly.constant(q, x)
        return cls(lift(a), lift(b), lift(c), lift(d))

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(self.a * other.a + self.b * other.c,
                    self.a * other.b + self.b * other.d,
                    self.c * other.a + self.d * other.c,
                    self.c * other.b + self.d * other.d)

    def det(self):
        return self.a * self.d - self.b * self.c

    def entries(self) -> Tuple:
        return (self.a, self.b, self.c, self.d)

    def mod(self, f: Poly) -> "Mat2":
        return Mat2(*(x % f for x in self.entries()))

    def to_rational(self) -> "Mat2":
        return Mat2(*(RationalFunction.coerce(x) for x in self.entries()))

    def is_polynomial(self) -> bool:
        return all(isinstance(x, Poly) or (isinstance(x, RationalFunction) and x.is_polynomial())
                   for x in self.entries())

    def to_poly(self) -> "Mat2":
        def as_poly(x):
            if isinstance(x, Poly):
                return x
            return x.num.scale(x.num.field.inv(x.den.lead))
        return Mat2(*(as_poly(x) for x in self.entries()))

    def inverse_unimodular(self) -> "Mat2":
        """Inverse of a matrix over F_q[t] (or a residue ring) with constant unit determinant."""
        det = self.det()
        if not isinstance(det, Poly) or not det.is_constant() or det.is_zero():
            raise ValueError(f"determinant {det} is not a nonzero constant")
        inv = det.field.inv(det.lead)
        return Mat2(self.d.scale(inv), (-self.b).scale(inv), (-self.c).scale(inv), self.a.scale(inv))

    def sort_key(self) -> Tuple:
        return tuple(x.sort_key() for x in self.entries())

    def __str__(self):
        return f"({self.a} {self.b}; {self.c} {self.d})"
