import json
from fractions import Fraction
from pathlib import Path

import pytest

import fixtures
from cf_structures import build_wcfg, equivalent, to_matrix
from errors import DocumentError
from fine_graph import fine_quotient, quotient_weights, reduction
from serialization import (emit_document, export_csv, export_dot, load_document, matrix_frame,
                           parse_action_document, parse_document, save_document)

DOCS = Path(__file__).parent.parent / "data/fixtures/documents"


@pytest.mark.parametrize("name", ["elliptic", "normalizer_t2", "gamma0_tt1", "normalizer_tt1"])
def test_emit_is_stable(name):
    text = emit_document(fixtures.load_graph(name))
    assert emit_document(parse_document(text)) == text


def test_parametric_graph_keeps_q():
    w = parse_document(emit_document(fixtures.load_graph("normalizer_t", 3)))
    assert w.q_param == 3
    assert w.weight(0, 0) == 3
    assert w.cusps[0].label(1) == "d2"


def test_sample_document_matches_fixture():
    w = load_document(DOCS / "normalizer_t2.json")
    assert len(w.order) == 5
    assert len(w.cusps) == 2
    assert w.weight(w.vertex("c"), w.vertex("u1")) == 2
    assert w.cusps[1].label(1) == "u3"
    assert equivalent(w, fixtures.load_graph("normalizer_t2"))


def test_pure_cusp_document():
    doc = {"version": 1, "q": 2, "vertices": [],
           "cusps": [{"attach": None, "inward": "2", "outward": "1"}]}
    w = parse_document(json.dumps(doc))
    assert len(w.order) == 1
    assert w.label(0) == "c0.1"
    assert w.cusps[0].label(1) == "c0.2"


def _two_vertex_doc(weights):
    return {"version": 1, "q": 2,
            "vertices": [{"id": 0, "kind": "actual"}, {"id": 1, "kind": "actual"}, {"id": 2, "kind": "virtual"}],
            "edges": [{"src": 0, "tgt": 2}, {"src": 1, "tgt": 2}],
            "weights": weights}


def test_non_graphic_document_points_at_the_weight():
    doc = _two_vertex_doc([{"from": 0, "to": 1, "value": "1"}])
    with pytest.raises(DocumentError) as e:
        parse_document(json.dumps(doc))
    assert e.value.position == "weights[0]"


def test_unknown_field_rejected():
    doc = _two_vertex_doc([])
    doc["colour"] = "red"
    with pytest.raises(DocumentError) as e:
        parse_document(json.dumps(doc))
    assert e.value.position == "$"


def test_bad_rational_rejected():
    doc = _two_vertex_doc([{"from": 0, "to": 1, "value": "1/0"}, {"from": 1, "to": 0, "value": "1"}])
    with pytest.raises(DocumentError):
        parse_document(json.dumps(doc))


def test_syntax_error_has_line_and_column():
    with pytest.raises(DocumentError) as e:
        parse_document('{"version": 1,')
    assert e.value.position.startswith("1:")


def test_wrong_version_rejected():
    doc = _two_vertex_doc([])
    doc["version"] = 2
    with pytest.raises(DocumentError):
        parse_document(json.dumps(doc))


def test_save_and_load(tmp_path):
    w = fixtures.load_graph("elliptic")
    path = tmp_path / "out" / "elliptic.json"
    save_document(w, path)
    assert emit_document(load_document(path)) == emit_document(w)


def test_dot_export():
    w = fixtures.load_graph("normalizer_t", 2)
    dot = export_dot(w)
    assert dot.startswith("digraph wcfg {")
    assert dot.count('label="*"') == 1
    assert dot.count('label="..."') == 1
    assert 'c0_1 [label="d2"];' in dot
    assert export_dot(w) == dot


def test_dot_export_empty_graph():
    dot = export_dot(build_wcfg([], {}))
    assert dot.strip().endswith("}")
    assert "->" not in dot


def test_matrix_frame_orientation():
    frame = matrix_frame(to_matrix(fixtures.load_graph("elliptic")))
    assert frame.loc["m1", "n1"] == "3"
    assert frame.loc["n1", "m1"] == "1"
    assert frame.loc["n1", "n1"] == "0"


def test_export_csv(tmp_path):
    core, cusps = export_csv(to_matrix(fixtures.load_graph("elliptic")), tmp_path / "elliptic.csv")
    assert core.exists() and cusps.exists()
    assert cusps.name == "elliptic_cusps.csv"
    assert "d2" in cusps.read_text()


def test_action_document_quotient():
    graph, act = parse_action_document((DOCS / "triangle_rotation.json").read_text())
    assert len(act) == 3
    fq = fine_quotient(graph, act)
    w = reduction(fq, quotient_weights(graph, act), q_param=None)
    assert len(w.order) == 1
    assert w.weights == {(0, 0): Fraction(2)}


def test_action_document_bad_generator():
    doc = {"version": 1, "vertices": [0, 1], "edges": [[0, 1]],
           "generators": [{"vertices": {"0": 0, "1": 1}, "edges": {"0": [0, 1]}}]}
    with pytest.raises(DocumentError):
        parse_action_document(json.dumps(doc))
