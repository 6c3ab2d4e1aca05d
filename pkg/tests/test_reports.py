from __future__ import annotations

import json

import numpy as np
import pytest

from jostkit.bc import neumann
from jostkit.potential import PotentialSpec
from jostkit.reports import (
    complex_cells,
    emit_json,
    format_float,
    matrix_columns,
    plain,
    vector_columns,
    wave_solution_table,
    write_csv,
    write_summary,
)
from jostkit.solutions import physical_solution


def test_format_float_is_shortest_round_trip():
    assert format_float(0.1) == "0.1"
    assert format_float(-0.0) == "0.0"
    assert format_float(np.float64(2.5)) == "2.5"
    assert float(format_float(1 / 3)) == 1 / 3


def test_column_names_are_row_major():
    assert matrix_columns("S", 2)[:4] == ["S_11_re", "S_11_im", "S_12_re", "S_12_im"]
    assert len(matrix_columns("S", 3)) == 18
    assert vector_columns("u", 2) == ["u_1_re", "u_1_im", "u_2_re", "u_2_im"]


def test_complex_cells_flatten_matrices():
    cells = complex_cells(np.array([[1 + 2j, -0.0]]))
    assert cells == ["1.0", "2.0", "0.0", "0.0"]


def test_write_csv_is_byte_stable(tmp_path):
    header = ["k", "value"]
    rows = [[0.5, "x"], [np.float64(1.25), "y"]]
    first = write_csv(tmp_path / "a" / "table.csv", header, rows)
    second = write_csv(tmp_path / "b" / "table.csv", header, rows)

    assert first.read_bytes() == second.read_bytes()
    assert first.read_text(encoding="utf-8") == "k,value\n0.5,x\n1.25,y\n"


def test_plain_converts_numpy_and_complex():
    value = plain({"z": np.complex128(1 - 1j), "arr": np.arange(2), "flag": np.bool_(True), 3: (0.5,)})
    assert value == {"z": {"re": 1.0, "im": -1.0}, "arr": [0, 1], "flag": True, "3": [0.5]}


def test_emit_json_writes_sorted_document(tmp_path):
    path = tmp_path / "out" / "doc.json"
    document = emit_json({"b": 1.0, "a": 2j}, path)

    assert document == {"b": 1.0, "a": {"re": 0.0, "im": 2.0}}
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == document


def test_emit_json_without_path_only_converts(tmp_path):
    assert emit_json({"x": np.float64(3.0)}) == {"x": pytest.approx(3.0)}
    assert not list(tmp_path.iterdir())


def test_write_summary_joins_lines(tmp_path):
    path = write_summary(tmp_path / "summary.txt", ["jostkit smatrix", "S(k) on 3 points"])
    assert path.read_text(encoding="utf-8") == "jostkit smatrix\nS(k) on 3 points\n"


def test_wave_solution_table_for_free_neumann(tmp_path):
    xs = np.array([0.25, 0.5, 1.0])
    sample = physical_solution(PotentialSpec.zero(1), neumann(1), 2.0, xs)
    header, rows = wave_solution_table(sample)

    assert header == ["x", "psi_11_re", "psi_11_im", "dpsi_11_re", "dpsi_11_im"]
    assert [float(row[1]) for row in rows] == pytest.approx(np.cos(2.0 * xs), abs=1e-8)
    path = write_csv(tmp_path / "psi.csv", header, rows)
    assert path.read_text(encoding="utf-8").count("\n") == 4
