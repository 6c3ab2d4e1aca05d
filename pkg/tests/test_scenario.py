from __future__ import annotations

import json

import numpy as np
import pytest

from jostkit.errors import ConfigError, InvalidBoundaryConditionError, PotentialError
from jostkit.scenario import RangeSpec, apply_override, parse_scenario, read_scenario_document


def test_read_document_applies_overrides(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"n": 1, "bc": "dirichlet", "k_grid": {"min": 0.1, "max": 1.0}}), encoding="utf-8")

    document = read_scenario_document(path, ["k_grid.count=5", "bc=neumann", "z=[1.0, 2.0]"])

    assert document["k_grid"] == {"min": 0.1, "max": 1.0, "count": 5}
    assert document["bc"] == "neumann"
    assert document["z"] == [1.0, 2.0]


def test_apply_override_creates_nested_tables():
    document: dict = {"output": "plain"}
    apply_override(document, "output.formats=[\"csv\"]")
    apply_override(document, "tolerances.s_tol=1e-6")
    assert document == {"output": {"formats": ["csv"]}, "tolerances": {"s_tol": 1e-6}}


@pytest.mark.parametrize("item", ["no-equals", "=3", " =x"])
def test_apply_override_rejects_malformed_items(item):
    with pytest.raises(ConfigError):
        apply_override({}, item)


def test_read_document_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_scenario_document(tmp_path / "missing.json")

    path = tmp_path / "list.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_scenario_document(path)

    broken = tmp_path / "broken.json"
    broken.write_text('{\n"n": 1,\n\n"bc": }', encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        read_scenario_document(broken)
    assert excinfo.value.line == 4


def test_parse_full_scenario():
    scenario = parse_scenario(
        {
            "n": 2,
            "bc": "kirchhoff(2)",
            "potential": {"model": "builtin", "family": "coupled_well", "params": {"depths": [3.0, 1.5], "coupling": 0.7}},
            "reference_bc": "neumann",
            "k_grid": {"min": 0.1, "max": 10.0, "count": 3, "spacing": "log"},
            "kappa_range": {"min": 0.01, "max": 5.0},
            "z": {"lambda": 2.0, "side": "-"},
            "discrete": {"h": "1e-3", "x_max": 40},
            "output": {"dir": "runs/a", "formats": ["json"]},
        }
    )

    assert scenario.n == 2
    assert scenario.potential.n == 2
    assert scenario.reference_bc is not None
    assert scenario.k_grid.values() == pytest.approx([0.1, 1.0, 10.0])
    assert scenario.kappa_range == (0.01, 5.0)
    assert (scenario.z, scenario.side) == (2.0 + 0j, "-")
    assert scenario.discrete == {"h": 1e-3, "x_max": 40.0}
    assert scenario.formats == ("json",)
    assert str(scenario.output_dir) == "runs/a"


def test_parse_defaults_to_zero_potential():
    scenario = parse_scenario({"bc": "neumann"})
    assert scenario.n == 1
    assert scenario.potential.sup_norm() == 0.0
    assert scenario.k_grid is None
    assert scenario.z is None


def test_spectral_point_forms():
    assert parse_scenario({"bc": "dirichlet", "z": -4}).z == -4 + 0j
    assert parse_scenario({"bc": "dirichlet", "z": [2.0, 1.0]}).z == 2 + 1j


def test_range_spec_linear_values():
    assert np.allclose(RangeSpec(0.0, 1.0, 5).values(), [0.0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize(
    "document, field",
    [
        ({"n": 1}, "bc"),
        ({"n": 0, "bc": "dirichlet"}, "n"),
        ({"bc": "dirichlet", "potential": "zero"}, "potential"),
        ({"bc": "dirichlet", "k_grid": {"max": 1.0}}, "k_grid.min"),
        ({"bc": "dirichlet", "k_grid": {"min": 2.0, "max": 1.0}}, "k_grid"),
        ({"bc": "dirichlet", "k_grid": {"min": 0.0, "max": 1.0, "count": 0}}, "k_grid.count"),
        ({"bc": "dirichlet", "E_grid": {"min": 0.0, "max": 1.0, "spacing": "log"}}, "E_grid.min"),
        ({"bc": "dirichlet", "x_grid": {"min": 0.0, "max": 1.0, "spacing": "cubic"}}, "x_grid.spacing"),
        ({"bc": "dirichlet", "kappa_range": [2.0, 1.0]}, "kappa_range"),
        ({"bc": "dirichlet", "z": {"lambda": 1.0, "side": "up"}}, "z.side"),
        ({"bc": "dirichlet", "z": "i"}, "z"),
        ({"bc": "dirichlet", "output": {"formats": ["xml"]}}, "output.formats"),
        ({"bc": "dirichlet", "tolerances": [1]}, "tolerances"),
        ({"n": "two", "bc": "dirichlet"}, "n"),
        ({"bc": {"n": "x", "A": [[1, 0]], "B": [[0, 0]]}}, "bc.n"),
        ({"bc": "dirichlet", "discrete": {"x_max": "far"}}, "discrete.x_max"),
        ({"bc": "dirichlet", "discrete": [1e-3]}, "discrete"),
        ({"bc": "dirichlet", "test_function": {"c": None}}, "test_function.c"),
        ({"bc": "dirichlet", "test_function": {"direction": [1, 0]}}, "test_function.direction"),
        ({"bc": "dirichlet", "z": ["a", 1.0]}, "z"),
        ({"bc": "dirichlet", "z": {"lambda": "one"}}, "z.lambda"),
        ({"bc": {"n": 1, "A": [["a", 0]], "B": [[0, 0]]}}, "bc"),
        ({"bc": "dirichlet", "reference_bc": 3}, "reference_bc"),
        (
            {"n": 2, "bc": "neumann", "potential": {"model": "builtin", "family": "coupled_well", "params": {"depths": 3.0}}},
            "potential.params.depths",
        ),
        (
            {"bc": "neumann", "potential": {"model": "builtin", "family": "exp_decay", "params": {"rate": [1.0]}}},
            "potential.params.rate",
        ),
        ({"bc": "neumann", "potential": {"model": "piecewise", "breakpoints": ["a"], "values": [1.0]}}, "potential"),
    ],
)
def test_parse_rejects_invalid_documents(document, field):
    with pytest.raises(ConfigError) as excinfo:
        parse_scenario(document)
    assert excinfo.value.field == field


def test_parse_propagates_domain_errors():
    with pytest.raises(InvalidBoundaryConditionError):
        parse_scenario({"bc": {"n": 1, "A": [[1.0, 0.0]]}})
    with pytest.raises(PotentialError):
        parse_scenario({"bc": "dirichlet", "potential": {"model": "spline"}})
