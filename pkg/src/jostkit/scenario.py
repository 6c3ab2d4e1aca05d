"""
Scenario files for the command-line front end.

A scenario is a JSON object naming the boundary pair, the potential and the
grids a command runs on. `--set dotted.key=value` overrides are applied to the
raw document before it is validated.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, MutableMapping, Sequence

import numpy as np

from .bc import BoundaryPair, bc_from_spec
from .config import DEFAULT_SETTINGS, Settings
from .errors import ConfigError, InvalidParameterError
from .potential import PotentialSpec, potential_from_dict

logger = logging.getLogger(__name__)

SPACINGS = ("linear", "log")
FORMATS = ("csv", "json", "summary")


@dataclass(frozen=True)
class RangeSpec:
    min: float
    max: float
    count: int
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.count)
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    bc: BoundaryPair
    potential: PotentialSpec
    reference_bc: BoundaryPair | None = None
    k_grid: RangeSpec | None = None
    E_grid: RangeSpec | None = None
    x_grid: RangeSpec | None = None
    kappa_range: tuple[float, float] | None = None
    z: complex | None = None
    side: str | None = None
    test_function: dict[str, Any] = field(default_factory=dict)
    discrete: dict[str, float] = field(default_factory=dict)
    tolerances: dict[str, Any] = field(default_factory=dict)
    output_dir: Path | None = None
    formats: tuple[str, ...] = FORMATS


def read_scenario_document(path: str | Path, overrides: Sequence[str] = ()) -> dict[str, Any]:
    """Read the JSON scenario at `path` and apply `--set` overrides."""
    path = Path(path).expanduser()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    if not isinstance(document, dict):
        raise ConfigError("scenario must be a JSON object")
    for item in overrides:
        apply_override(document, item)
    return document


def apply_override(document: MutableMapping[str, Any], item: str) -> None:
    """Apply one `dotted.key=value` override; values parse as JSON, else as strings."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {item!r} is not of the form key=value", field=item)
    try:
        value: Any = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    target = document
    for part in parts[:-1]:
        child = target.get(part)
        if child is None or not isinstance(child, dict):
            child = {}
            target[part] = child
        target = child
    target[parts[-1]] = value


def _range(data: Any, name: str) -> RangeSpec | None:
    if data is None:
        return None
    if not isinstance(data, Mapping):
        raise ConfigError(f"{name} must be an object with min, max, count", field=name)
    try:
        spec = RangeSpec(
            min=float(data["min"]),
            max=float(data["max"]),
            count=int(data.get("count", 100)),
            spacing=str(data.get("spacing", "linear")),
        )
    except KeyError as exc:
        raise ConfigError(f"{name} is missing {exc.args[0]!r}", field=f"{name}.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} has a non-numeric bound", field=name) from exc
    if not spec.min < spec.max:
        raise ConfigError(f"{name} needs min < max", field=name)
    if spec.count < 1:
        raise ConfigError(f"{name} needs a positive count", field=f"{name}.count")
    if spec.spacing not in SPACINGS:
        raise ConfigError(f"{name}.spacing must be one of {SPACINGS}", field=f"{name}.spacing")
    if spec.spacing == "log" and spec.min <= 0.0:
        raise ConfigError(f"{name} with log spacing needs min > 0", field=f"{name}.min")
    return spec


def _number(value: Any, name: str, cast: Callable[[Any], Any] = float) -> Any:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name) from exc


def _channel_count(document: Mapping[str, Any]) -> int:
    if "n" in document:
        return _number(document["n"], "n", int)
    for key in ("potential", "bc"):
        value = document.get(key)
        if isinstance(value, Mapping) and "n" in value:
            return _number(value["n"], f"{key}.n", int)
    return 1


def _spectral_point(value: Any) -> tuple[complex | None, str | None]:
    if value is None:
        return None, None
    if isinstance(value, (int, float)):
        return complex(value), None
    if isinstance(value, Sequence) and not isinstance(value, str) and len(value) == 2:
        return complex(_number(value[0], "z"), _number(value[1], "z")), None
    if isinstance(value, Mapping) and "lambda" in value:
        side = str(value.get("side", "+"))
        if side not in {"+", "-"}:
            raise ConfigError("z.side must be '+' or '-'", field="z.side")
        return complex(_number(value["lambda"], "z.lambda")), side
    raise ConfigError("z must be a number, [re, im] or {lambda, side}", field="z")


def _boundary_pair(spec: Any, n: int, name: str) -> BoundaryPair:
    if not isinstance(spec, (str, Mapping)):
        raise ConfigError(f"{name} must be a builtin name or an object with A and B", field=name)
    try:
        return bc_from_spec(spec, n)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} holds a non-numeric matrix entry", field=name) from exc


def _potential(data: Any, n: int, settings: Settings) -> PotentialSpec:
    if not isinstance(data, Mapping):
        raise ConfigError("potential must be an object", field="potential")
    try:
        return potential_from_dict({"n": n, **data}, settings)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), field=f"potential.params.{exc.name}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"potential holds a non-numeric entry: {exc}", field="potential") from exc


def _numeric_table(data: Any, name: str, keys: Sequence[str]) -> dict[str, Any]:
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{name} must be an object", field=name)
    table = dict(data)
    for key in keys:
        if key in table:
            table[key] = _number(table[key], f"{name}.{key}")
    return table


def parse_scenario(document: Mapping[str, Any], settings: Settings = DEFAULT_SETTINGS) -> ScenarioConfig:
    n = _channel_count(document)
    if n < 1:
        raise ConfigError("n must be positive", field="n")
    if "bc" not in document:
        raise ConfigError("scenario is missing 'bc'", field="bc")
    bc = _boundary_pair(document["bc"], n, "bc")

    potential_data = document.get("potential", {"model": "zero"})
    potential = _potential(potential_data, n, settings)
    if potential.n != n:
        raise ConfigError(f"potential has n={potential.n}, scenario has n={n}", field="potential.n")

    reference = document.get("reference_bc")
    kappa = document.get("kappa_range")
    if kappa is not None:
        if isinstance(kappa, Mapping):
            kappa = (kappa.get("min"), kappa.get("max"))
        try:
            kappa = (float(kappa[0]), float(kappa[1]))
        except (TypeError, ValueError, IndexError, KeyError) as exc:
            raise ConfigError("kappa_range must be [min, max]", field="kappa_range") from exc
        if not 0.0 < kappa[0] < kappa[1]:
            raise ConfigError("kappa_range needs 0 < min < max", field="kappa_range")

    z, side = _spectral_point(document.get("z"))
    output = document.get("output", {}) or {}
    if not isinstance(output, Mapping):
        raise ConfigError("output must be an object", field="output")
    formats = tuple(output.get("formats", FORMATS))
    unknown = [fmt for fmt in formats if fmt not in FORMATS]
    if unknown:
        raise ConfigError(f"unknown output formats {unknown}", field="output.formats")

    tolerances = document.get("tolerances", {}) or {}
    if not isinstance(tolerances, Mapping):
        raise ConfigError("tolerances must be an object", field="tolerances")

    test_function = _numeric_table(document.get("test_function"), "test_function", ("center", "width", "c"))
    if "direction" in test_function:
        try:
            direction = np.asarray(test_function["direction"], dtype=complex)
        except (TypeError, ValueError) as exc:
            raise ConfigError("test_function.direction must be numeric", field="test_function.direction") from exc
        if direction.shape != (n,) or not np.any(direction):
            raise ConfigError(f"test_function.direction needs {n} entries, not all zero", field="test_function.direction")
    discrete = _numeric_table(document.get("discrete"), "discrete", ("h", "x_max"))

    scenario = ScenarioConfig(
        n=n,
        bc=bc,
        potential=potential,
        reference_bc=_boundary_pair(reference, n, "reference_bc") if reference is not None else None,
        k_grid=_range(document.get("k_grid"), "k_grid"),
        E_grid=_range(document.get("E_grid"), "E_grid"),
        x_grid=_range(document.get("x_grid"), "x_grid"),
        kappa_range=kappa,
        z=z,
        side=side,
        test_function=test_function,
        discrete=discrete,
        tolerances=dict(tolerances),
        output_dir=Path(output["dir"]) if output.get("dir") else None,
        formats=formats,
    )
    logger.debug("scenario n=%s bc=%s potential=%s", n, document["bc"], potential_data.get("model", "builtin"))
    return scenario
