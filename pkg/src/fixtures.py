"""
Fixtures Module
Features:
- Published quotient graphs (Gamma_0 and normalizer rows, the elliptic example) loaded from data/fixtures
- Golden transfer columns with their source strings
- Gamma(t) and the small parametric families used by the obstruction checks
"""

import json
import logging
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import sympy

from cf_structures import WCFG, build_wcfg
from errors import UnknownCaseError

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).parent.parent / "data/fixtures"
Q = sympy.Symbol("q")


def _read(name: str) -> Dict[str, Any]:
    with (FIXTURE_DIR / name).open("r") as f:
        return json.load(f)


def value(text: str, q: Optional[int] = None) -> Fraction:
    """Exact value of a fixture entry; entries may be polynomials in q."""
    expr = sympy.sympify(text)
    if q is not None:
        expr = expr.subs(Q, q)
    if expr.free_symbols:
        raise ValueError(f"fixture value {text!r} needs q")
    num, den = sympy.fraction(sympy.nsimplify(expr))
    return Fraction(int(num), int(den))


@lru_cache(maxsize=None)
def _quotients() -> Dict[str, Any]:
    return _read("quotients.json")["graphs"]


@lru_cache(maxsize=None)
def _transfers() -> Dict[str, Any]:
    return _read("transfers.json")["transfers"]


def graph_names() -> List[str]:
    return sorted(_quotients())


def source(name: str) -> str:
    data = _quotients().get(name) or _transfers().get(name)
    if data is None:
        raise UnknownCaseError(f"unknown fixture {name!r}")
    return data["source"]


# --------------------------- Quotient graphs ---------------------------

def load_graph(name: str, q: Optional[int] = None) -> WCFG:
    """Build a fixture graph; parametric ones (q null in the file) need q."""
    data = _quotients().get(name)
    if data is None:
        raise UnknownCaseError(f"unknown fixture graph {name!r}")
    q = data["q"] if data["q"] is not None else q
    if q is None:
        raise ValueError(f"fixture {name} is parametric in q")
    weights = {(a, b): value(x, q) for a, b, x in data["weights"]}
    cusps = []
    for c in data["cusps"]:
        c = dict(c)
        for k in ("inward", "outward", "attach_weight"):
            if k in c:
                c[k] = value(c[k], q)
        cusps.append(c)
    return build_wcfg(data["vertices"], weights, cusps, q_param=q, loops=data.get("loops", ()))


def gamma_t(q: int) -> WCFG:
    """Full level t: a single vertex carrying q+1 cusps."""
    cusps = [{"attach": "c0", "inward": q, "outward": 1, "attach_weight": 1} for _ in range(q + 1)]
    return build_wcfg(["c0"], {}, cusps, q_param=q)


# --------------------------- Parametric families ---------------------------

HALF = Fraction(1, 2)


def _family_cusp(attach: str, weight) -> Dict[str, Any]:
    return {"attach": attach, "inward": HALF, "outward": HALF, "attach_weight": weight}


def family_a(a, b) -> WCFG:
    """z and v hang off w; the cusp at w takes the rest of the column."""
    a, b = Fraction(a), Fraction(b)
    weights = {("z", "w"): 1, ("v", "w"): 1, ("w", "v"): a, ("w", "z"): b}
    return build_wcfg(["z", "v", "w"], weights, [_family_cusp("w", 1 - a - b)])


def family_b(a, b, d) -> WCFG:
    a, b, d = Fraction(a), Fraction(b), Fraction(d)
    weights = {("u", "z"): 1, ("z", "u"): b, ("z", "w"): 1 - b,
               ("w", "z"): d, ("w", "v"): a, ("v", "w"): 1}
    return build_wcfg(["u", "z", "w", "v"], weights, [_family_cusp("w", 1 - a - d)])


def family_c(a, b, c, d) -> WCFG:
    """family_b with a second leaf t hanging off v."""
    a, b, c, d = Fraction(a), Fraction(b), Fraction(c), Fraction(d)
    weights = {("u", "z"): 1, ("z", "u"): b, ("z", "w"): 1 - b,
               ("w", "z"): d, ("w", "v"): a,
               ("v", "w"): 1 - c, ("v", "t"): c, ("t", "v"): 1}
    return build_wcfg(["u", "z", "w", "v", "t"], weights, [_family_cusp("w", 1 - a - d)])


# --------------------------- Golden transfers ---------------------------

def transfer_names() -> List[str]:
    return sorted(_transfers())


def transfer_case(name: str) -> Dict[str, Any]:
    data = _transfers().get(name)
    if data is None:
        raise UnknownCaseError(f"unknown transfer fixture {name!r}")
    return data


def golden_columns(name: str, q: int) -> Dict[str, Dict[str, Fraction]]:
    data = transfer_case(name)
    return {col: {row: value(x, q) for row, x in entries.items()} for col, entries in data["columns"].items()}


def column_pairs(name: str) -> set:
    return {(Fraction(a), Fraction(b)) for a, b in transfer_case(name).get("column_n1_pairs", [])}


def golden_cusps(name: str, q: int) -> Tuple[int, Fraction, Fraction]:
    c = transfer_case(name)["cusps"]
    return c["count"], value(c["inward"], q), value(c["outward"], q)
