from __future__ import annotations

import csv
import io
import json
from contextlib import redirect_stdout

import numpy as np
import pytest

from jostkit import cli


def _write_scenario(tmp_path, **document):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def _run(argv):
    buffer = io.StringIO()
    with redirect_stdout(buffer):
        exit_code = cli.main(argv)
    return exit_code, buffer.getvalue()


def _read_csv(path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_cli_requires_config():
    with pytest.raises(SystemExit) as excinfo:
        _run(["smatrix"])
    assert excinfo.value.code == 2


def test_cli_rejects_unknown_command(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="dirichlet")
    with pytest.raises(SystemExit):
        _run(["scatter", "--config", str(path)])


def test_smatrix_free_dirichlet(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="dirichlet", k_grid={"min": 0.5, "max": 5.0, "count": 10})
    out = tmp_path / "out"
    exit_code, stdout = _run(["smatrix", "--config", str(path), "--out", str(out)])

    assert exit_code == 0
    assert "S(k) on 10 points" in stdout
    rows = _read_csv(out / "smatrix.csv")
    assert rows[0] == ["k", "S_11_re", "S_11_im", "det_re", "det_im", "unitarity_defect"]
    assert len(rows) == 11
    assert all(float(row[1]) == pytest.approx(-1.0) for row in rows[1:])
    document = json.loads((out / "smatrix.json").read_text(encoding="utf-8"))
    assert document["command"] == "smatrix"
    assert document["k_count"] == 10
    assert (out / "summary.txt").read_text(encoding="utf-8").startswith("jostkit smatrix")


def test_outputs_are_deterministic(tmp_path):
    path = _write_scenario(
        tmp_path,
        n=2,
        bc="kirchhoff(2)",
        potential={"model": "builtin", "family": "coupled_well", "params": {"depths": [3.0, 1.5], "coupling": 0.7}},
        k_grid={"min": 0.2, "max": 4.0, "count": 7},
    )
    first, second = tmp_path / "a", tmp_path / "b"
    _run(["smatrix", "--config", str(path), "--out", str(first), "-q"])
    _run(["smatrix", "--config", str(path), "--out", str(second), "-q", "--threads", "2"])
    for name in ("smatrix.csv", "smatrix.json", "summary.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_validate_bc_reports_invalid_pair(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc={"n": 1, "A": [[1.0, 0.0]], "B": [[0.0, 1.0]]})
    exit_code, stdout = _run(["validate-bc", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 2
    assert "INVALID" in stdout
    document = json.loads((tmp_path / "validate-bc.json").read_text(encoding="utf-8"))
    assert document["ok"] is False


def test_normal_form_of_star_graph(tmp_path):
    path = _write_scenario(tmp_path, n=3, bc="kirchhoff(3)")
    exit_code, _ = _run(["normal-form", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 0
    document = json.loads((tmp_path / "normal-form.json").read_text(encoding="utf-8"))
    assert (document["n_M"], document["n_D"], document["n_N"]) == (0, 2, 1)
    assert document["reconstruction_error"] < 1e-10


def test_bound_states_for_attractive_robin(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="robin(0.5)")
    exit_code, stdout = _run(["bound-states", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 0
    document = json.loads((tmp_path / "bound-states.json").read_text(encoding="utf-8"))
    assert document["count"] == 1
    assert document["states"][0]["E"] == pytest.approx(-1.0 / np.tan(0.5) ** 2, rel=1e-8)
    assert "bound states: 1 distinct" in stdout


def test_ssf_free_dirichlet_is_one_half(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="dirichlet", E_grid={"min": 0.5, "max": 20.0, "count": 5})
    exit_code, _ = _run(["ssf", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 0
    rows = _read_csv(tmp_path / "ssf.csv")
    assert rows[0] == ["E", "xi", "birman_krein"]
    assert [float(row[1]) for row in rows[1:]] == pytest.approx([0.5] * 5, abs=1e-10)


def test_levinson_free_neumann(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="neumann")
    exit_code, stdout = _run(["levinson", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 0
    document = json.loads((tmp_path / "levinson.json").read_text(encoding="utf-8"))
    assert document["mu"] == 1
    assert document["predicted"] == pytest.approx(0.0)
    assert document["defect"] < 1e-6
    assert "ξ(0+)" in stdout


def test_set_override_and_quiet(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="neumann", k_grid={"min": 0.5, "max": 5.0, "count": 10})
    exit_code, stdout = _run(
        ["smatrix", "--config", str(path), "--out", str(tmp_path), "--set", "k_grid.count=3", "--quiet"]
    )
    assert exit_code == 0
    assert stdout == ""
    assert len(_read_csv(tmp_path / "smatrix.csv")) == 4


def test_missing_grid_is_a_config_error(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="dirichlet")
    exit_code, _ = _run(["smatrix", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 2
    error = json.loads((tmp_path / "smatrix.json").read_text(encoding="utf-8"))["error"]
    assert error["type"] == "ConfigError"
    assert error["field"] == "k_grid"


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "n": 1,\n  "bc": dirichlet\n}\n', encoding="utf-8")
    exit_code, _ = _run(["smatrix", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 2
    error = json.loads((tmp_path / "smatrix.json").read_text(encoding="utf-8"))["error"]
    assert error["line"] == 3


def test_invalid_tolerance_is_rejected(tmp_path):
    path = _write_scenario(tmp_path, n=1, bc="dirichlet", tolerances={"s_tol": -1.0})
    exit_code, _ = _run(["normal-form", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 2


def test_numerical_failure_exits_with_three(tmp_path):
    theta = 0.5
    path = _write_scenario(tmp_path, n=1, bc=f"robin({theta})", z=-1.0 / np.tan(theta) ** 2)
    exit_code, _ = _run(["resolvent", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 3
    error = json.loads((tmp_path / "resolvent.json").read_text(encoding="utf-8"))["error"]
    assert error["type"] == "SpectralPointError"
    assert error["exit_code"] == 3


def test_resolvent_command_compares_both_kernels(tmp_path):
    path = _write_scenario(
        tmp_path,
        n=1,
        bc="dirichlet",
        potential={"model": "piecewise", "breakpoints": [1.0], "values": [-2.0]},
        z=[-3.0, 0.0],
        x_grid={"min": 0.1, "max": 2.0, "count": 5},
    )
    exit_code, _ = _run(["resolvent", "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 0
    document = json.loads((tmp_path / "resolvent.json").read_text(encoding="utf-8"))
    assert document["jost_form_defect"] < 1e-4
    assert document["grid_points"] == 5
    assert len(_read_csv(tmp_path / "resolvent.csv")) == 26


@pytest.mark.parametrize(
    "command, document, field",
    [
        ("bound-states", {"n": 1, "bc": "dirichlet", "discrete": {"h": "x"}}, "discrete.h"),
        ("validate-bc", {"n": "two", "bc": "dirichlet"}, "n"),
        (
            "smatrix",
            {
                "n": 1,
                "bc": "dirichlet",
                "potential": {"model": "builtin", "family": "square_well", "params": {"depth": "deep"}},
                "k_grid": {"min": 0.5, "max": 1.0, "count": 2},
            },
            "potential.params.depth",
        ),
        ("normal-form", {"n": 1, "bc": "robin(steep)"}, "bc"),
    ],
)
def test_non_numeric_entries_are_config_errors(tmp_path, command, document, field):
    path = _write_scenario(tmp_path, **document)
    exit_code, _ = _run([command, "--config", str(path), "--out", str(tmp_path)])
    assert exit_code == 2
    error = json.loads((tmp_path / f"{command}.json").read_text(encoding="utf-8"))["error"]
    assert error["type"] == "ConfigError"
    assert error["field"] == field


def test_solutions_dump_free_neumann(tmp_path):
    path = _write_scenario(
        tmp_path,
        n=1,
        bc="neumann",
        k_grid={"min": 1.0, "max": 2.0, "count": 2},
        x_grid={"min": 0.0, "max": 3.0, "count": 7},
    )
    exit_code, stdout = _run(["solutions", "--config", str(path), "--out", str(tmp_path)])

    assert exit_code == 0
    assert "ψ(k, x) for 2 k-values" in stdout
    rows = _read_csv(tmp_path / "solutions.csv")
    assert rows[0] == ["k", "x", "psi_11_re", "psi_11_im", "dpsi_11_re", "dpsi_11_im"]
    assert len(rows) == 15
    for row in rows[1:]:
        k, x = float(row[0]), float(row[1])
        assert float(row[2]) == pytest.approx(np.cos(k * x), abs=1e-8)
        assert float(row[4]) == pytest.approx(-k * np.sin(k * x), abs=1e-8)
    document = json.loads((tmp_path / "solutions.json").read_text(encoding="utf-8"))
    assert document["max_boundary_defect"] < 1e-10
