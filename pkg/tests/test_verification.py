import json
from pathlib import Path

import pandas as pd
import pytest

import verification
from errors import UnknownCaseError
from main import EXIT_FAILED, EXIT_INPUT, EXIT_OK, main

DOCS = Path(__file__).parent.parent / "data/fixtures/documents"


def test_suite_ids():
    ids = list(verification.suite())
    assert ids == sorted(ids)
    for expected in ("transfer-normalizer_t2_n3", "transfer-elliptic_n2", "normalizer-t-q3",
                     "gamma-t-q2", "ograph-t2t1", "elliptic-obstruction", "oracle"):
        assert expected in ids
    assert all(case.source for case in verification.suite().values())


def test_unknown_case():
    with pytest.raises(UnknownCaseError):
        verification.verify(["no-such-case"])


def test_verify_selected_cases(tmp_path):
    report = verification.verify(["t3-criterion", "elliptic-as-drawn"])
    assert list(report["case"]) == ["elliptic-as-drawn", "t3-criterion"]
    assert verification.all_passed(report)
    path = verification.write_report(report, tmp_path / "reports" / "verification.csv")
    assert list(pd.read_csv(path)["status"]) == ["PASS", "PASS"]


def _broken():
    raise UnknownCaseError("x")


def test_error_becomes_a_row():
    row = verification.run_case(verification.VerificationCase("broken", "raises", "nowhere", _broken))
    assert row["status"] == "ERROR"
    assert row["detail"] == "x"


def _divide_by_zero():
    return 1 / 0


def test_unexpected_exception_becomes_a_row():
    row = verification.run_case(verification.VerificationCase("boom", "raises", "nowhere", _divide_by_zero))
    assert row["status"] == "ERROR"
    assert row["detail"].startswith("ZeroDivisionError")


def test_erroring_case_fails_the_run(tmp_path, monkeypatch):
    cases = [verification.VerificationCase("boom", "raises", "nowhere", _divide_by_zero)]
    monkeypatch.setattr(verification, "_suite", lambda: cases)
    report = tmp_path / "verification.csv"
    assert main(["verify", "--report", str(report)]) == EXIT_FAILED
    assert list(pd.read_csv(report)["status"]) == ["ERROR"]


# --------------------------- Command line ---------------------------

def test_cli_export_dot(tmp_path):
    out = tmp_path / "normalizer_t2.dot"
    assert main(["export-dot", "--input", str(DOCS / "normalizer_t2.json"), "--output", str(out)]) == EXIT_OK
    assert out.read_text().startswith("digraph wcfg {")


def test_cli_missing_input(tmp_path):
    assert main(["export-dot", "--input", str(tmp_path / "missing.json")]) == EXIT_INPUT


def test_cli_transfer(tmp_path):
    out = tmp_path / "transfer.json"
    code = main(["transfer", "--input", str(DOCS / "normalizer_t2.json"), "--n", "3", "--resolve",
                 "--output", str(out)])
    assert code == EXIT_OK
    data = json.loads(out.read_text())
    assert data["status"] == "unique"
    assert data["columns"]["d2"] == {"d5": "1", "u1": "8"}


def test_cli_quotient(tmp_path):
    out = tmp_path / "triangle.json"
    assert main(["quotient", "--input", str(DOCS / "triangle_rotation.json"), "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert [v["kind"] for v in doc["vertices"]] == ["actual", "virtual"]
    assert doc["weights"] == [{"from": 0, "to": 0, "value": "2"}]


def test_cli_verify(tmp_path):
    report = tmp_path / "verification.csv"
    assert main(["verify", "--case", "t3-criterion", "--report", str(report)]) == EXIT_OK
    assert report.exists()
    assert main(["verify", "--case", "nope"]) == EXIT_INPUT


def test_cli_obstruction_minimal_shell(tmp_path):
    out = tmp_path / "obstruction.json"
    code = main(["obstruction", "--input", str(DOCS / "elliptic.json"), "--minimal", "--output", str(out)])
    assert code == EXIT_OK
    data = json.loads(out.read_text())
    assert data["shell"] == ["n1", "n2", "m2", "d0"]
    assert data["dimension"] == 4
