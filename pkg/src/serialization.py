"""
Serialization Module
Features:
- WcfgDocument: JSON parse/emit of weighted CF graphs with exact "p/q" weights
- Action documents: a graph plus generating automorphisms for the quotient command
- Deterministic DOT export (half edges as asterisk nodes, cusps as short tails)
- CSV export of a CFMatrix core block and its cusp descriptors (pandas)
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from cf_structures import WCFG, CFMatrix, CuspDescriptor
from errors import DocumentError, GraphError, GroupActionError, NonGraphicError, WrfqError
from fine_graph import ACTUAL, VIRTUAL, FineGraph, Graph, GroupAction
from settings import CONFIG, safe_get

logger = logging.getLogger(__name__)

DOCUMENT_FIELDS = {"version", "q", "vertices", "edges", "weights", "cusps"}
VERTEX_FIELDS = {"id", "kind", "label"}
EDGE_FIELDS = {"src", "tgt"}
WEIGHT_FIELDS = {"from", "to", "value"}
CUSP_FIELDS = {"attach", "inward", "outward", "attach_weight", "label_scheme"}
SCHEME_FIELDS = {"prefix", "offset", "step"}
ACTION_FIELDS = {"version", "vertices", "labels", "edges", "generators"}


# --------------------------- Helpers ---------------------------

def format_fraction(x) -> str:
    return str(Fraction(x))


def _load(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(e.msg, f"{e.lineno}:{e.colno}") from e


def _check_fields(obj: Any, allowed: set, required: set, path: str) -> Mapping[str, Any]:
    if not isinstance(obj, dict):
        raise DocumentError("expected an object", path)
    for k in obj:
        if k not in allowed:
            raise DocumentError(f"unknown field '{k}'", path)
    for k in required:
        if k not in obj:
            raise DocumentError(f"missing field '{k}'", path)
    return obj


def _int(value: Any, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DocumentError(f"expected an integer, got {value!r}", path)
    return value


def _fraction(value: Any, path: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise DocumentError(f"expected a \"p/q\" string, got {value!r}", path)
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise DocumentError(f"bad rational {value!r}", path) from e


def _list(doc: Mapping[str, Any], key: str) -> List[Any]:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise DocumentError("expected a list", key)
    return value


def _check_version(doc: Mapping[str, Any]):
    expected = safe_get(CONFIG, "serialization", "format_version", default=1)
    if _int(doc["version"], "version") != expected:
        raise DocumentError(f"unsupported version {doc['version']} (expected {expected})", "version")


# --------------------------- WcfgDocument ---------------------------

def parse_document(text: str) -> WCFG:
    """Parse WcfgDocument JSON into a validated WCFG."""
    doc = _check_fields(_load(text), DOCUMENT_FIELDS, {"version", "vertices"}, "$")
    _check_version(doc)
    q = doc.get("q")
    if q is not None:
        q = _int(q, "q")

    kind: Dict[int, str] = {}
    labels: Dict[int, str] = {}
    for i, item in enumerate(_list(doc, "vertices")):
        path = f"vertices[{i}]"
        _check_fields(item, VERTEX_FIELDS, {"id", "kind"}, path)
        v = _int(item["id"], path)
        if v in kind:
            raise DocumentError(f"duplicate vertex id {v}", path)
        if item["kind"] not in (ACTUAL, VIRTUAL):
            raise DocumentError(f"unknown kind {item['kind']!r}", path)
        kind[v] = item["kind"]
        if "label" in item:
            labels[v] = str(item["label"])

    pairs: List[Tuple[int, int]] = []
    for i, item in enumerate(_list(doc, "edges")):
        path = f"edges[{i}]"
        _check_fields(item, EDGE_FIELDS, EDGE_FIELDS, path)
        u, v = _int(item["src"], path), _int(item["tgt"], path)
        if u not in kind or v not in kind:
            raise DocumentError(f"edge ({u}, {v}) refers to an unknown vertex", path)
        pairs.append((u, v))

    weights: Dict[Tuple[int, int], Fraction] = {}
    position: Dict[Tuple[int, int], str] = {}
    for i, item in enumerate(_list(doc, "weights")):
        path = f"weights[{i}]"
        _check_fields(item, WEIGHT_FIELDS, WEIGHT_FIELDS, path)
        pair = (_int(item["from"], path), _int(item["to"], path))
        if pair in weights:
            raise DocumentError(f"duplicate weight {pair}", path)
        weights[pair] = _fraction(item["value"], path)
        position[pair] = path

    cusps = [_parse_cusp(item, i) for i, item in enumerate(_list(doc, "cusps"))]
    if not kind and cusps:
        kind, labels, cusps = _promote_pure_cusp(cusps)

    try:
        core = FineGraph(Graph.from_pairs(kind, pairs, labels), kind)
    except GraphError as e:
        raise DocumentError(str(e), "edges") from e
    descriptors = []
    for i, c in enumerate(cusps):
        try:
            descriptors.append(CuspDescriptor(tail_index=i, **c))
        except WrfqError as e:
            raise DocumentError(str(e), f"cusps[{i}]") from e
    try:
        w = WCFG(core=core, cusps=tuple(descriptors), weights=weights, q_param=q)
    except NonGraphicError as e:
        v, x = e.pair
        raise DocumentError(f"non-graphic weights: m[{v}, {x}] != 0 but m[{x}, {v}] = 0",
                            position.get((v, x))) from e
    except WrfqError as e:
        raise DocumentError(str(e), "weights") from e
    logger.debug(f"Parsed document: {len(w.order)} core vertices, {len(w.cusps)} cusps")
    return w


def _parse_cusp(item: Any, i: int) -> Dict[str, Any]:
    path = f"cusps[{i}]"
    _check_fields(item, CUSP_FIELDS, {"attach", "inward", "outward"}, path)
    attach = item["attach"]
    if attach is not None:
        attach = _int(attach, path)
    c: Dict[str, Any] = {
        "attach": attach,
        "inward": _fraction(item["inward"], path),
        "outward": _fraction(item["outward"], path),
    }
    if item.get("attach_weight") is not None:
        c["attach_weight"] = _fraction(item["attach_weight"], path)
    scheme = item.get("label_scheme")
    if scheme is not None:
        _check_fields(scheme, SCHEME_FIELDS, set(), f"{path}.label_scheme")
        c["label_prefix"] = scheme.get("prefix")
        c["label_offset"] = _int(scheme.get("offset", 1), f"{path}.label_scheme")
        c["label_step"] = _int(scheme.get("step", 1), f"{path}.label_scheme")
    return c


def _promote_pure_cusp(cusps: List[Dict[str, Any]]):
    """An empty core with a single unattached cusp: its first tail vertex becomes the core."""
    if len(cusps) != 1 or cusps[0]["attach"] is not None:
        raise DocumentError("an empty core admits exactly one unattached cusp", "cusps")
    c = dict(cusps[0])
    prefix, offset = c.get("label_prefix"), c.get("label_offset", 1)
    label = f"{prefix}{offset}" if prefix is not None else "c0.1"
    c.update(attach=0, attach_weight=c["outward"],
             label_prefix=prefix if prefix is not None else "c0.",
             label_offset=offset + c.get("label_step", 1) if prefix is not None else 2)
    return {0: ACTUAL}, {0: label}, [c]


def to_document(w: WCFG) -> Dict[str, Any]:
    """Canonical dict form: vertices by id, edges oriented actual -> virtual, sorted."""
    g = w.core.graph
    vertices = []
    for v in sorted(g.vertices):
        item: Dict[str, Any] = {"id": v, "kind": w.core.kind[v]}
        if v in g.labels:
            item["label"] = g.labels[v]
        vertices.append(item)
    edges = []
    for a, _ in g.edge_pairs():
        u, v = g.src[a], g.tgt[a]
        if w.core.kind[u] != ACTUAL:
            u, v = v, u
        edges.append((u, v))
    cusps = [{
        "attach": c.attach,
        "inward": format_fraction(c.inward),
        "outward": format_fraction(c.outward),
        "attach_weight": format_fraction(c.attach_weight),
        "label_scheme": {"prefix": c.label_prefix, "offset": c.label_offset, "step": c.label_step},
    } for c in w.cusps]
    return {
        "version": safe_get(CONFIG, "serialization", "format_version", default=1),
        "q": w.q_param,
        "vertices": vertices,
        "edges": [{"src": u, "tgt": v} for u, v in sorted(edges)],
        "weights": [{"from": v, "to": x, "value": format_fraction(m)}
                    for (v, x), m in sorted(w.weights.items())],
        "cusps": cusps,
    }


def emit_document(w: WCFG) -> str:
    return json.dumps(to_document(w), indent=2) + "\n"


def load_document(path) -> WCFG:
    return parse_document(Path(path).read_text())


def save_document(w: WCFG, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(emit_document(w))
    logger.info(f"WCFG written to {path}")


# --------------------------- Action documents ---------------------------

def parse_action_document(text: str) -> Tuple[Graph, GroupAction]:
    """
    Graph plus generators. Edge i of "edges" [[u, v], ...] is the directed pair
    2i: u->v, 2i+1: v->u. A generator maps vertex ids ("vertices") and undirected
    edges ("edges": {i: [j, flip]}), flip = 1 sending u->v of edge i to the
    reversed direction of edge j.
    """
    doc = _check_fields(_load(text), ACTION_FIELDS, {"version", "vertices", "edges"}, "$")
    _check_version(doc)
    vertices = [_int(v, f"vertices[{i}]") for i, v in enumerate(_list(doc, "vertices"))]
    pairs = []
    for i, e in enumerate(_list(doc, "edges")):
        if not isinstance(e, list) or len(e) != 2:
            raise DocumentError("edge must be a [u, v] pair", f"edges[{i}]")
        pairs.append((_int(e[0], f"edges[{i}]"), _int(e[1], f"edges[{i}]")))
    labels = {int(k): str(s) for k, s in (doc.get("labels") or {}).items()}
    try:
        graph = Graph.from_pairs(vertices, pairs, labels)
    except GraphError as e:
        raise DocumentError(str(e), "edges") from e

    generators = []
    for i, gen in enumerate(_list(doc, "generators")):
        path = f"generators[{i}]"
        _check_fields(gen, {"vertices", "edges"}, {"vertices", "edges"}, path)
        try:
            vp = {int(k): _int(x, path) for k, x in gen["vertices"].items()}
            ep = {}
            for k, (j, flip) in gen["edges"].items():
                k, j, flip = int(k), _int(j, path), _int(flip, path)
                ep[2 * k] = 2 * j + flip
                ep[2 * k + 1] = 2 * j + 1 - flip
        except (AttributeError, TypeError, ValueError) as e:
            raise DocumentError(f"malformed generator: {e}", path) from e
        generators.append((vp, ep))
    try:
        act = GroupAction.from_generators(graph, generators)
    except GroupActionError as e:
        raise DocumentError(str(e), "generators") from e
    return graph, act


# --------------------------- DOT ---------------------------

def _quote(s: str) -> str:
    return '"' + str(s).replace('"', '\\"') + '"'


def export_dot(w: WCFG, name: str = "wcfg") -> str:
    """Deterministic DOT text with per-end weight labels (taillabel = weight at the tail vertex)."""
    tail = safe_get(CONFIG, "serialization", "dot_tail_vertices", default=3)
    lines = [f"digraph {name} {{",
             "  node [shape=circle, style=filled, fillcolor=lightgray];",
             "  edge [dir=none];"]
    for v in w.order:
        lines.append(f"  v{v} [label={_quote(w.label(v))}];")

    labelled = set()
    for h, v in sorted(w.core.half_edges().items()):
        lines.append(f'  h{h} [shape=plaintext, style="", label="*"];')
        attrs = ""
        if v not in labelled:
            labelled.add(v)
            attrs = f" [taillabel={_quote(format_fraction(w.weight(v, v)))}]"
        lines.append(f"  v{v} -> h{h}{attrs};")

    drawn = set()
    for h, (a, b) in sorted(w.core.actual_edges().items()):
        if (a, b) in drawn:
            lines.append(f"  v{a} -> v{b};")
            continue
        drawn.add((a, b))
        lines.append(f"  v{a} -> v{b} [taillabel={_quote(format_fraction(w.weight(a, b)))}, "
                     f"headlabel={_quote(format_fraction(w.weight(b, a)))}];")

    for c in w.cusps:
        i = c.tail_index
        nodes = [f"v{c.attach}"] + [f"c{i}_{k}" for k in range(1, tail + 1)]
        for k in range(1, tail + 1):
            lines.append(f"  c{i}_{k} [label={_quote(c.label(k))}];")
        lines.append(f'  c{i}_more [shape=plaintext, style="", label="..."];')
        for k in range(tail):
            out = c.attach_weight if k == 0 else c.outward
            lines.append(f"  {nodes[k]} -> {nodes[k + 1]} [taillabel={_quote(format_fraction(out))}, "
                         f"headlabel={_quote(format_fraction(c.inward))}];")
        lines.append(f"  {nodes[-1]} -> c{i}_more [style=dashed, "
                     f"taillabel={_quote(format_fraction(c.outward))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------- CSV ---------------------------

def matrix_frame(m: CFMatrix, order: Optional[Sequence] = None) -> pd.DataFrame:
    """Core block as strings; rows are targets w, columns are sources v (M[w][v] = m[v, w])."""
    order = list(order or m.order)
    names = [m.label(k) for k in order]
    data = [[format_fraction(m.entry(w, v)) for v in order] for w in order]
    return pd.DataFrame(data, index=pd.Index(names, name="row"), columns=names)


def cusp_frame(m: CFMatrix) -> pd.DataFrame:
    rows = [{"cusp": c.tail_index, "attach": m.label(c.attach), "attach_weight": format_fraction(c.attach_weight),
             "inward": format_fraction(c.inward), "outward": format_fraction(c.outward),
             "first_label": c.label(1)} for c in m.cusp_tails]
    return pd.DataFrame(rows, columns=["cusp", "attach", "attach_weight", "inward", "outward", "first_label"])


def export_csv(m: CFMatrix, path) -> Tuple[Path, Path]:
    """Writes <path> (core block) and <stem>_cusps.csv next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cusp_path = path.with_name(f"{path.stem}_cusps.csv")
    matrix_frame(m).to_csv(path)
    cusp_frame(m).to_csv(cusp_path, index=False)
    logger.info(f"Matrix exported to {path} and {cusp_path}")
    return path, cusp_path
