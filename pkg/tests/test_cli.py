import csv
import io
import json
import re

import numpy as np
import pytest

from cloning_lab.cli import EXIT_FAILED, EXIT_IO, EXIT_OK, EXIT_SCHEMA, EXIT_USAGE, parse_range, run
from cloning_lab.estimator import build_covariant_povm, design_povm, pauli_frame, validate_povm
from cloning_lab.serialization import PovmSchemaError, dumps_povm, loads_povm, povm_load, povm_serialize


def test_parse_range():
    assert parse_range("2,3") == [2, 3]
    assert parse_range("1..3") == [1, 2, 3]
    assert parse_range("1..2,5") == [1, 2, 5]


def test_table_csv(capsys):
    assert run(["table", "--d", "2,3", "--n", "1..3", "--m", "1..5"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["d", "N", "M", "F_clone", "eta_clone", "F_est_asymptotic"]
    row = next(r for r in rows if (r["d"], r["N"], r["M"]) == ("2", "1", "2"))
    assert row["F_clone"] == "0.833333333333333"
    assert row["eta_clone"] == "0.666666666666667"
    assert row["F_est_asymptotic"] == "0.666666666666667"
    assert all(int(r["M"]) >= int(r["N"]) for r in rows)


def test_verify_theorem_report(tmp_path):
    out = tmp_path / "report.json"
    assert run(["verify-theorem", "--d", "2", "--n", "1", "--l", "1..4", "--seed", "42", "-o", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["passed"]
    slacks = [c["value"] for c in report["checks"] if c["name"].endswith("slack")]
    assert slacks and min(slacks) >= -1e-9
    gaps = [c["value"] for c in report["checks"] if c["name"] == "equality_gap"]
    assert max(gaps) <= 1e-8


def test_verify_theorem_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["verify-theorem", "--d", "2,3", "--n", "1,2", "--l", "1..4", "--seed", "42", "-o", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CLONING_LAB_OUTPUT_DIR", str(tmp_path))
    assert run(["table", "--d", "2", "--n", "1", "--m", "1..2"]) == EXIT_OK
    assert (tmp_path / "table.csv").read_text().startswith("d,N,M")


def test_verify_cloner_and_estimation(capsys):
    assert run(["verify-cloner", "--d", "2", "--n", "1,2", "--m", "1..4"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["passed"]
    assert run(["verify-estimation", "--d", "2", "--n", "1", "--samples", "5000", "--format", "csv"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows and all(r["passed"] == "true" for r in rows)


def test_usage_errors(capsys):
    assert run(["table", "--d", "x"]) == EXIT_USAGE
    assert run(["verify-theorem", "--seed", "-1"]) == EXIT_USAGE
    assert run(["verify-theorem", "--n", "5", "--l", "1..2"]) == EXIT_USAGE
    assert run(["nonsense"]) == EXIT_USAGE


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(["table", "--d", "2", "--n", "1", "--m", "1", "-o", str(blocker / "out.csv")]) == EXIT_IO


def test_povm_round_trip_byte_identical(tmp_path):
    povm = build_covariant_povm(2, 1, pauli_frame())
    path = tmp_path / "pauli.povm.json"
    povm_serialize(povm, path)
    loaded = povm_load(path)
    assert np.array_equal(loaded.weights, povm.weights)
    assert np.array_equal(loaded.candidates, povm.candidates)
    assert dumps_povm(loaded) == path.read_text()
    a, b = validate_povm(povm), validate_povm(loaded)
    assert abs(a.completeness_residual - b.completeness_residual) <= 1e-14


def test_design_povm_round_trip(tmp_path):
    povm = design_povm(3, 2)
    path = tmp_path / "d3.json"
    povm_serialize(povm, path)
    assert np.array_equal(povm_load(path).candidates, povm.candidates)


def test_wrong_weight_sum_loads_but_fails(tmp_path, capsys):
    obj = json.loads(dumps_povm(build_covariant_povm(2, 1, pauli_frame())))
    for pt in obj["points"]:
        pt["weight"] *= 1.5
    path = tmp_path / "bad.povm.json"
    path.write_text(json.dumps(obj))
    povm = povm_load(path)
    assert not validate_povm(povm).passed
    assert run(["povm-validate", str(path)]) == EXIT_FAILED
    captured = capsys.readouterr()
    assert "completeness_residual" in captured.err
    assert json.loads(captured.out)["passed"] is False


def test_truncated_file(tmp_path):
    text = dumps_povm(build_covariant_povm(2, 1, pauli_frame()))
    path = tmp_path / "cut.json"
    path.write_text(text[: len(text) // 2])
    with pytest.raises(PovmSchemaError, match="line"):
        povm_load(path)
    assert run(["povm-validate", str(path)]) == EXIT_SCHEMA


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda o: o.pop("dimension"), "dimension"),
        (lambda o: o.__setitem__("copies", 0), "copies"),
        (lambda o: o["points"][1].__setitem__("weight", "x"), "points[1].weight"),
        (lambda o: o["points"][2]["amplitudes"].pop(), "points[2].amplitudes"),
        (lambda o: o["points"][0]["amplitudes"].__setitem__(0, [1.0]), "points[0].amplitudes[0]"),
    ],
)
def test_schema_diagnostics(mutate, field):
    obj = json.loads(dumps_povm(build_covariant_povm(2, 1, pauli_frame())))
    mutate(obj)
    with pytest.raises(PovmSchemaError, match=re.escape(field)):
        loads_povm(json.dumps(obj))


def test_povm_build_and_validate(tmp_path, capsys):
    path = tmp_path / "t.json"
    assert run(["povm-build", "--d", "2", "--n", "1", "--frame", "tetrahedral", "-o", str(path)]) == EXIT_OK
    assert run(["povm-validate", str(path)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["universal"]
    haar = tmp_path / "h.json"
    assert run(["povm-build", "--d", "3", "--n", "2", "--frame", "haar", "--seed", "1", "-o", str(haar)]) == EXIT_OK
    assert run(["povm-validate", str(haar)]) == EXIT_OK


def test_povm_build_infeasible(tmp_path, capsys):
    out = tmp_path / "x.json"
    code = run(["povm-build", "--d", "3", "--n", "2", "--frame", "haar", "--size", "40", "--seed", "5", "-o", str(out)])
    assert code == EXIT_FAILED
    assert "residual" in capsys.readouterr().err
    assert not out.exists()
