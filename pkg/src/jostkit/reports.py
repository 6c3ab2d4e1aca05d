"""
Deterministic report writers for jostkit.

Floats are printed with the shortest representation that round-trips, so an
identical scenario always yields byte-identical CSV and JSON files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def format_float(value: float) -> str:
    return repr(float(value) + 0.0)


def matrix_columns(prefix: str, n: int) -> list[str]:
    """Row-major Re/Im column names for an n×n matrix."""
    return [f"{prefix}_{i + 1}{j + 1}_{part}" for i in range(n) for j in range(n) for part in ("re", "im")]


def vector_columns(prefix: str, n: int) -> list[str]:
    return [f"{prefix}_{j + 1}_{part}" for j in range(n) for part in ("re", "im")]


def complex_cells(values: np.ndarray) -> list[str]:
    flat = np.asarray(values, dtype=complex).ravel()
    cells: list[str] = []
    for value in flat:
        cells.extend([format_float(value.real), format_float(value.imag)])
    return cells


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(cell) if isinstance(cell, (float, np.floating)) else cell for cell in row])
    return output_path


def plain(value: Any) -> Any:
    """Convert numpy values and complex numbers into JSON-safe Python values."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return {"re": value.real + 0.0, "im": value.imag + 0.0}
    if isinstance(value, float):
        return value + 0.0
    return value


def emit_json(document: dict[str, Any], path: str | Path | None = None) -> dict[str, Any]:
    document = plain(document)
    if path is not None:
        output_path = Path(path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return document


def write_summary(path: str | Path, lines: Iterable[str]) -> Path:
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return output_path


# -- domain tables -------------------------------------------------------------


def smatrix_table(samples: Sequence[Any]) -> tuple[list[str], list[list[Any]]]:
    n = samples[0].S.shape[0] if samples else 1
    header = ["k", *matrix_columns("S", n), "det_re", "det_im", "unitarity_defect"]
    rows = []
    for sample in samples:
        det = sample.det
        rows.append(
            [
                format_float(sample.k),
                *complex_cells(sample.S),
                format_float(det.real),
                format_float(det.imag),
                format_float(sample.unitarity_defect),
            ]
        )
    return header, rows


def wave_solution_table(sample: Any, prefix: str = "psi") -> tuple[list[str], list[list[Any]]]:
    n = sample.n
    header = ["x", *matrix_columns(prefix, n), *matrix_columns(f"d{prefix}", n)]
    rows = [
        [format_float(x), *complex_cells(value), *complex_cells(deriv)]
        for x, value, deriv in zip(sample.grid, sample.values, sample.derivs)
    ]
    return header, rows


def ssf_table(samples: Sequence[Any]) -> tuple[list[str], list[list[Any]]]:
    header = ["E", "xi", "birman_krein"]
    rows = [
        [format_float(s.E), format_float(s.xi), "" if s.birman_krein is None else format_float(s.birman_krein)]
        for s in samples
    ]
    return header, rows


def bound_state_table(states: Sequence[Any]) -> tuple[list[str], list[list[Any]]]:
    header = ["E", "kappa", "m"]
    rows = [[format_float(s.E), format_float(s.kappa), str(s.m)] for s in states]
    return header, rows


def kernel_table(kernel: Any) -> tuple[list[str], list[list[Any]]]:
    n = kernel.K.shape[-1]
    header = ["x", "y", *matrix_columns("K", n)]
    rows = []
    for i, x in enumerate(kernel.x):
        for j, y in enumerate(kernel.y):
            rows.append([format_float(x), format_float(y), *complex_cells(kernel.K[i, j])])
    return header, rows


def grid_function_table(function: Any, axis: str = "x", prefix: str = "u") -> tuple[list[str], list[list[Any]]]:
    header = [axis, *vector_columns(prefix, function.n)]
    rows = [[format_float(t), *complex_cells(value)] for t, value in zip(function.grid, function.values)]
    return header, rows
