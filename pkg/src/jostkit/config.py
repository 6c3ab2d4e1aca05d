"""
Settings loader merging defaults, a settings file, environment, and overrides.
"""

from __future__ import annotations

import argparse
import os
import tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, MutableMapping, Tuple

from .errors import ConfigError

DEFAULT_SETTINGS_FILENAME = "jostkit.toml"


@dataclass(frozen=True)
class Settings:
    """Numerical tolerances and runtime knobs shared by every module."""

    # boundary pairs
    herm_tol: float = 1e-10
    pd_tol: float = 1e-12
    unitary_tol: float = 1e-10
    cluster_tol: float = 1e-8
    angle_tol: float = 1e-9
    cond_max: float = 1e12
    # ODE integration
    ode_rtol: float = 1e-10
    ode_atol: float = 1e-12
    tail_mass: float = 1e-12
    # scattering
    s_tol: float = 1e-8
    jost_cond_max: float = 1e12
    branch_max_depth: int = 20
    anchor_k: float = 100.0
    # spectral
    kappa_min: float = 1e-3
    root_tol: float = 1e-8
    null_gap: float = 1e6
    kappa_points: int = 400
    eig_tol: float = 1e-3
    extrap_tol: float = 0.05
    extrap_ks: Tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)
    e_cut: float = 50.0
    max_unknowns: int = 10_000_000
    # transforms
    k_min: float = 0.05
    q_cond_max: float = 1e12
    resolvent_guard: float = 2e-3
    # runtime
    threads: int = 1
    log_format: str = "human"
    extra: dict[str, Any] = field(default_factory=dict)


DEFAULT_SETTINGS = Settings()


def load_default_settings() -> Settings:
    return DEFAULT_SETTINGS


def _parse_float_tuple(value: Any) -> Tuple[float, ...]:
    if isinstance(value, str):
        value = [item for item in value.replace(";", ",").split(",") if item.strip()]
    return tuple(float(item) for item in value)


def _parse_bool(value: Any) -> bool:
    return str(value).lower() in {"1", "true", "yes"}


CASTERS: dict[str, Callable[[Any], Any]] = {
    f.name: (
        _parse_float_tuple
        if f.name == "extrap_ks"
        else int
        if f.type in ("int", int)
        else str
        if f.type in ("str", str)
        else float
    )
    for f in fields(Settings)
    if f.name != "extra"
}


ENV_KEY_MAP: dict[str, Tuple[str, Callable[[Any], Any]]] = {
    f"JOSTKIT_{name.upper()}": (name, caster) for name, caster in CASTERS.items()
}
ENV_KEY_MAP["JOSTKIT_JSON_LOG"] = ("json_log", _parse_bool)


CLI_ATTR_MAP: dict[str, Tuple[str, Callable[[Any], Any]]] = {
    "threads": ("threads", int),
    "log_format": ("log_format", str),
    "json_log": ("json_log", bool),
}


def load_settings(
    args: argparse.Namespace | None = None,
    *,
    env: Mapping[str, str] | None = None,
    settings_file: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> Settings:
    """
    Load settings merging defaults, settings file, environment, CLI, then overrides.

    Precedence: overrides (scenario `tolerances` block and `--set tolerances.*`)
    > CLI flags > environment variables > settings file > defaults.
    """

    defaults = load_default_settings()
    data: dict[str, Any] = {key: getattr(defaults, key) for key in _known_fields()}
    extras: dict[str, Any] = {}

    resolved_path = _resolve_settings_path(args, settings_file)
    if resolved_path is not None:
        file_data, file_extras = _load_from_file(resolved_path)
        data.update(file_data)
        extras.update(file_extras)

    data.update(_load_from_env(env))
    data.update(_load_from_cli(args))

    if overrides:
        known, unknown = _partition_known(overrides)
        data.update(known)
        extras.update(unknown)

    if data.pop("json_log", False):
        data["log_format"] = "json"

    validated = _validate_settings(_cast_all(data))
    return Settings(**validated, extra=extras)


def with_overrides(base: Settings, overrides: Mapping[str, Any]) -> Settings:
    """Return a copy of `base` with the known keys of `overrides` applied."""

    known, unknown = _partition_known(overrides)
    data = {key: getattr(base, key) for key in _known_fields()}
    data.update(known)
    if data.pop("json_log", False):
        data["log_format"] = "json"
    validated = _validate_settings(_cast_all(data))
    return replace(base, **validated, extra={**base.extra, **unknown})


def _known_fields() -> set[str]:
    return {f.name for f in fields(Settings) if f.init and f.name != "extra"}


def _resolve_settings_path(
    args: argparse.Namespace | None, settings_file: str | Path | None
) -> Path | None:
    candidate: str | Path | None = None
    if args is not None and getattr(args, "settings", None):
        candidate = getattr(args, "settings")
    elif settings_file is not None:
        candidate = settings_file

    if candidate is None:
        default_path = Path(DEFAULT_SETTINGS_FILENAME)
        return default_path if default_path.exists() else None

    path = Path(candidate).expanduser()
    return path if path.exists() else None


def _load_from_file(path: Path) -> Tuple[dict[str, Any], dict[str, Any]]:
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        return {}, {}
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid settings file {path}: {exc}") from exc

    # a [tolerances] table is flattened into the top level
    flattened = {key: value for key, value in data.items() if key != "tolerances"}
    flattened.update(data.get("tolerances", {}))
    return _partition_known(flattened)


def _load_from_env(env: Mapping[str, str] | None) -> dict[str, Any]:
    source = env if env is not None else os.environ
    result: dict[str, Any] = {}
    for env_key, (config_key, caster) in ENV_KEY_MAP.items():
        if env_key in source and source[env_key] != "":
            try:
                result[config_key] = caster(source[env_key])
            except ValueError as exc:
                raise ConfigError(f"cannot parse {env_key}={source[env_key]!r}", field=env_key) from exc
    return result


def _load_from_cli(args: argparse.Namespace | None) -> dict[str, Any]:
    if args is None:
        return {}

    result: dict[str, Any] = {}
    for attr_name, (config_key, caster) in CLI_ATTR_MAP.items():
        if hasattr(args, attr_name):
            value = getattr(args, attr_name)
            if value is None:
                continue
            if isinstance(value, bool) and caster is bool:
                if value:
                    result[config_key] = value
            else:
                result[config_key] = caster(value)
    return result


def _partition_known(data: Mapping[str, Any]) -> Tuple[dict[str, Any], dict[str, Any]]:
    known: dict[str, Any] = {}
    extras: dict[str, Any] = {}
    known_keys = _known_fields() | {"json_log"}
    for key, value in data.items():
        if key in known_keys:
            known[key] = value
        else:
            extras[key] = value
    return known, extras


def _cast_all(data: MutableMapping[str, Any]) -> dict[str, Any]:
    result: dict[str, Any] = {}
    for key, value in data.items():
        caster = CASTERS.get(key)
        try:
            result[key] = caster(value) if caster is not None else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse setting {key}={value!r}", field=f"tolerances.{key}") from exc
    return result


_POSITIVE = (
    "herm_tol",
    "pd_tol",
    "unitary_tol",
    "cluster_tol",
    "angle_tol",
    "cond_max",
    "ode_rtol",
    "ode_atol",
    "tail_mass",
    "s_tol",
    "jost_cond_max",
    "anchor_k",
    "kappa_min",
    "root_tol",
    "null_gap",
    "eig_tol",
    "extrap_tol",
    "e_cut",
    "k_min",
    "q_cond_max",
    "resolvent_guard",
)


def _validate_settings(data: MutableMapping[str, Any]) -> MutableMapping[str, Any]:
    for key in _POSITIVE:
        if key in data and not float(data[key]) > 0.0:
            raise ConfigError(f"{key} must be positive", field=f"tolerances.{key}")

    if int(data.get("branch_max_depth", 1)) < 0:
        raise ConfigError("branch_max_depth must be non-negative", field="tolerances.branch_max_depth")

    if int(data.get("kappa_points", 2)) < 2:
        raise ConfigError("kappa_points must be at least 2", field="tolerances.kappa_points")

    if int(data.get("threads", 1)) < 1:
        raise ConfigError("threads must be at least 1", field="threads")

    if int(data.get("max_unknowns", 1)) < 1:
        raise ConfigError("max_unknowns must be positive", field="tolerances.max_unknowns")

    ks = data.get("extrap_ks")
    if ks is not None:
        ks = tuple(ks)
        if len(ks) != 3 or not all(k > 0 for k in ks) or not (ks[0] > ks[1] > ks[2]):
            raise ConfigError(
                "extrap_ks must be three decreasing positive wavenumbers",
                field="tolerances.extrap_ks",
            )
        if not (abs(ks[0] - 2 * ks[1]) <= 1e-12 * ks[0] and abs(ks[1] - 2 * ks[2]) <= 1e-12 * ks[1]):
            raise ConfigError("extrap_ks must halve at each step", field="tolerances.extrap_ks")

    if data.get("log_format", "human") not in {"human", "json"}:
        raise ConfigError("log_format must be 'human' or 'json'", field="log_format")

    return data
