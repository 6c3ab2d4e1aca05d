"""
Command-line interface for jostkit.

Every command reads a JSON scenario (`--config`), runs one computation and
writes `<command>.csv`, `<command>.json` and `summary.txt` into the output
directory. Exit codes: 0 on success, 2 on validation errors, 3 on numerical
failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .bc import bc_to_dict, normal_form, reconstruct, validate_bc
from .config import Settings, load_settings
from .errors import ConfigError, JostkitError
from .logging_utils import event_logger_for, set_default_format
from .reports import (
    bound_state_table,
    emit_json,
    format_float,
    grid_function_table,
    kernel_table,
    smatrix_table,
    ssf_table,
    wave_solution_table,
    write_csv,
    write_summary,
)
from .scattering import high_energy_model, high_energy_slope, scattering_matrix, smatrix_sweep
from .scenario import ScenarioConfig, parse_scenario, read_scenario_document
from .solutions import physical_solution, residual
from .spectral import bound_states, discrete_hamiltonian, levinson_check, ssf, trace_formula_check
from .transforms import (
    GridFunction,
    bound_state_projections,
    cosine_transform,
    fourier_apply,
    green_kernel_jost,
    resolvent_kernel,
    scattering_operator_check,
    wave_operator_apply,
)

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "jostkit-out"


@dataclass
class CommandResult:
    document: dict[str, Any]
    summary: list[str]
    table: tuple[list[str], list[list[Any]]] | None = None
    exit_code: int = 0


def create_parser() -> argparse.ArgumentParser:
    """Create the top-level argument parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="jostkit",
        description=(
            "Scattering, spectral and transform computations for matrix Schrödinger\n"
            "operators on the half line with general self-adjoint vertex conditions."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "command",
        choices=sorted(COMMANDS),
        help="Computation to run on the scenario.",
    )
    parser.add_argument(
        "--config",
        metavar="PATH",
        required=True,
        help="Scenario file (JSON) naming the boundary pair, potential and grids.",
    )
    parser.add_argument(
        "--out",
        metavar="DIR",
        help=f"Output directory (default: scenario output.dir or ./{DEFAULT_OUTPUT_DIR}).",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a scenario entry, e.g. --set tolerances.s_tol=1e-9 (repeatable).",
    )
    parser.add_argument(
        "--settings",
        metavar="PATH",
        help="Settings file (TOML, default ./jostkit.toml when present).",
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="Worker threads for k- and κ-sweeps (default 1).",
    )
    parser.add_argument(
        "--json-log",
        action="store_true",
        help="Emit structured events as JSON lines.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"jostkit {__version__}",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase logging verbosity (repeatable).",
    )
    parser.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="Only report errors.",
    )
    return parser


def _configure_logging(verbosity: int, quiet: bool) -> None:
    """Configure root logger based on verbosity flags."""
    if quiet:
        level = logging.ERROR
    else:
        level = logging.WARNING
        if verbosity == 1:
            level = logging.INFO
        elif verbosity >= 2:
            level = logging.DEBUG

    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
    )
    logger.debug("Logging configured (level=%s)", logging.getLevelName(level))


def _require(value: Any, name: str) -> Any:
    if value is None:
        raise ConfigError(f"this command needs '{name}' in the scenario", field=name)
    return value


# -- commands ------------------------------------------------------------------


def _validate_bc(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    report = validate_bc(scenario.bc.A, scenario.bc.B, settings)
    document = {
        "ok": report.ok,
        "hermiticity_defect": report.hermiticity_defect,
        "min_eig": report.min_eig,
        "bc": bc_to_dict(scenario.bc),
    }
    header = ["ok", "hermiticity_defect", "min_eig"]
    rows = [[str(report.ok).lower(), format_float(report.hermiticity_defect), format_float(report.min_eig)]]
    status = "valid" if report.ok else "INVALID"
    summary = [
        f"boundary pair: {status}",
        f"hermiticity defect ‖A†B - B†A‖: {report.hermiticity_defect:.3e}",
        f"min eigenvalue of A†A + B†B: {report.min_eig:.6g}",
    ]
    return CommandResult(document, summary, (header, rows), exit_code=0 if report.ok else 2)


def _normal_form(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    nf = normal_form(scenario.bc, settings)
    rebuilt = reconstruct(nf)
    error = float(np.linalg.norm(rebuilt.A - scenario.bc.A, 2) + np.linalg.norm(rebuilt.B - scenario.bc.B, 2))
    categories = ["mixed"] * nf.n_M + ["dirichlet"] * nf.n_D + ["neumann"] * nf.n_N
    cot = nf.cot_hat()
    header = ["channel", "theta", "category", "gamma"]
    rows = [
        [str(j + 1), format_float(theta), kind, format_float(-cot[j]) if kind == "mixed" else ""]
        for j, (theta, kind) in enumerate(zip(nf.thetas, categories))
    ]
    document = {
        "thetas": nf.thetas,
        "n_M": nf.n_M,
        "n_D": nf.n_D,
        "n_N": nf.n_N,
        "M": nf.M,
        "T2": nf.T2,
        "reconstruction_error": error,
    }
    summary = [
        f"channels: {nf.n_M} mixed, {nf.n_D} Dirichlet, {nf.n_N} Neumann",
        "angles: " + ", ".join(f"{theta:.12g}" for theta in nf.thetas),
        f"reconstruction error: {error:.3e}",
    ]
    return CommandResult(document, summary, (header, rows))


def _smatrix(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    ks = _require(scenario.k_grid, "k_grid").values()
    samples = smatrix_sweep(scenario.potential, scenario.bc, ks, settings)
    worst = max(s.unitarity_defect for s in samples)
    document = {"n": scenario.n, "k_count": len(samples), "max_unitarity_defect": worst}
    summary = [
        f"S(k) on {len(samples)} points in [{ks[0]:.6g}, {ks[-1]:.6g}]",
        f"max ‖SS† - I‖: {worst:.3e}",
    ]
    return CommandResult(document, summary, smatrix_table(samples))


def _bound_states(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    states = bound_states(scenario.potential, scenario.bc, scenario.kappa_range, settings)
    document: dict[str, Any] = {
        "count": sum(s.m for s in states),
        "states": [{"E": s.E, "kappa": s.kappa, "m": s.m} for s in states],
    }
    summary = [f"bound states: {len(states)} distinct, {document['count']} with multiplicity"]
    summary += [f"  E = {s.E:.12g} (κ = {s.kappa:.12g}, m = {s.m})" for s in states]
    if scenario.discrete:
        oracle = discrete_hamiltonian(
            scenario.potential,
            scenario.bc,
            scenario.discrete.get("h", 1e-3),
            scenario.discrete.get("x_max", 60.0),
            settings,
        )
        discrete = oracle.eigenvalues(upper=-1e-9)
        document["discrete_eigenvalues"] = discrete
        summary.append("discrete oracle: " + ", ".join(f"{E:.10g}" for E in discrete))
    return CommandResult(document, summary, bound_state_table(states))


def _ssf(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    energies = _require(scenario.E_grid, "E_grid").values()
    samples = ssf(
        scenario.potential,
        scenario.bc,
        energies,
        reference=scenario.reference_bc,
        settings=settings,
    )
    residuals = [s.birman_krein for s in samples if s.birman_krein is not None]
    document = {
        "count": len(samples),
        "max_birman_krein": max(residuals) if residuals else 0.0,
        "reference": "neumann" if scenario.reference_bc is None else bc_to_dict(scenario.reference_bc),
    }
    summary = [
        f"ξ(E) on {len(samples)} energies in [{energies[0]:.6g}, {energies[-1]:.6g}]",
        f"max |det S - exp(-2πiξ)|: {document['max_birman_krein']:.3e}",
    ]
    return CommandResult(document, summary, ssf_table(samples))


def _levinson(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    report = levinson_check(scenario.potential, scenario.bc, settings=settings)
    document = report.as_dict()
    header = ["xi0_plus", "n", "mu", "N", "predicted", "defect"]
    rows = [
        [
            format_float(report.xi0_plus),
            str(report.n),
            str(report.mu),
            str(report.N),
            format_float(report.predicted),
            format_float(report.defect),
        ]
    ]
    summary = [
        f"ξ(0+) = {report.xi0_plus:.10g}",
        f"½(n - μ) - N = ½({report.n} - {report.mu}) - {report.N} = {report.predicted:.10g}",
        f"defect: {report.defect:.3e}",
    ]
    return CommandResult(document, summary, (header, rows))


def _resolvent(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    z = _require(scenario.z, "z")
    xs = scenario.x_grid.values() if scenario.x_grid else np.linspace(0.05, 3.0, 30)
    kernel = resolvent_kernel(scenario.potential, scenario.bc, z, xs, side=scenario.side, settings=settings)
    reference = green_kernel_jost(scenario.potential, scenario.bc, z, xs, xs, side=scenario.side, settings=settings)
    scale = max(float(np.max(np.abs(reference))), 1e-300)
    defect = float(np.max(np.abs(kernel.K - reference))) / scale
    document = {
        "z": kernel.z,
        "side": scenario.side,
        "k": kernel.k,
        "grid_points": len(xs),
        "max_abs_kernel": float(np.max(np.abs(kernel.K))),
        "jost_form_defect": defect,
    }
    summary = [
        f"R(z) kernel at z = {kernel.z} (k = {kernel.k}) on {len(xs)}×{len(xs)} points",
        f"relative distance to the Jost-form kernel: {defect:.3e}",
    ]
    return CommandResult(document, summary, kernel_table(kernel))


def _test_function(scenario: ScenarioConfig, xs: np.ndarray) -> GridFunction:
    spec = scenario.test_function
    center = float(spec.get("center", 2.0))
    width = float(spec.get("width", 0.5))
    direction = np.asarray(spec.get("direction", [1.0] + [0.0] * (scenario.n - 1)), dtype=complex)
    direction = direction / np.linalg.norm(direction)
    profile = np.exp(-0.5 * ((xs - center) / width) ** 2)
    return GridFunction(xs, profile[:, None] * direction[None, :])


def _transforms_check(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    p, bp = scenario.potential, scenario.bc
    xs = scenario.x_grid.values() if scenario.x_grid else np.linspace(0.0, 12.0, 2401)
    ks = scenario.k_grid.values() if scenario.k_grid else np.linspace(settings.k_min, 12.0, 241)
    psi = _test_function(scenario, xs)
    norm = psi.norm()

    transformed = fourier_apply(p, bp, -1, psi, ks, settings)
    projections = bound_state_projections(
        p,
        bp,
        psi,
        h=scenario.discrete.get("h", 5e-3),
        x_max=scenario.discrete.get("x_max"),
        settings=settings,
    )
    point_mass = sum(abs(item.coefficient) ** 2 for item in projections)
    parseval = abs(transformed.norm() ** 2 + point_mass - norm**2) / norm**2

    waved = wave_operator_apply(p, bp, -1, psi, ks, settings=settings)
    isometry = abs(waved.norm() - norm) / norm
    orthogonality = max((abs(waved.inner(item.function)) / norm for item in projections), default=0.0)

    free_side = cosine_transform(psi, ks)
    scattering = scattering_operator_check(p, bp, free_side, xs, settings) / max(free_side.norm(), 1e-300)

    document = {
        "parseval_defect": parseval,
        "isometry_defect": isometry,
        "orthogonality_defect": orthogonality,
        "scattering_operator_defect": scattering,
        "bound_states": [{"E": item.E, "coefficient": item.coefficient} for item in projections],
    }
    summary = [
        f"Parseval with {len(projections)} bound state(s): {parseval:.3e}",
        f"wave operator isometry: {isometry:.3e}",
        f"range ⟂ bound states: {orthogonality:.3e}",
        f"scattering operator vs S(k): {scattering:.3e}",
    ]
    return CommandResult(document, summary, grid_function_table(transformed, axis="k", prefix="Fpsi"))


def _trace_check(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    report = trace_formula_check(
        scenario.potential,
        scenario.bc,
        c=float(scenario.test_function.get("c", 1.0)),
        h=scenario.discrete.get("h", 1e-3),
        x_max=scenario.discrete.get("x_max", 200.0),
        settings=settings,
    )
    header = ["lhs", "rhs", "defect"]
    rows = [[format_float(report.lhs), format_float(report.rhs), format_float(report.defect)]]
    summary = [
        f"Tr(f(H) - f(H0)) = {report.lhs:.10g} ({report.eigenvalue_count} vs {report.reference_count} eigenvalues)",
        f"∫ ξ f' dE       = {report.rhs:.10g}",
        f"relative defect: {report.defect:.3e}",
    ]
    return CommandResult(report.as_dict(), summary, (header, rows))


def _asymptotics(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    ks = scenario.k_grid.values() if scenario.k_grid else np.geomspace(20.0, 200.0, 12)
    model = high_energy_model(scenario.potential, scenario.bc, settings)
    remainders = [
        float(np.linalg.norm(model.remainder(scattering_matrix(scenario.potential, scenario.bc, k, settings).S, k), 2))
        for k in ks
    ]
    slope = high_energy_slope(scenario.potential, scenario.bc, ks, settings)
    header = ["k", "remainder"]
    rows = [[format_float(k), format_float(r)] for k, r in zip(ks, remainders)]
    document = {"slope": slope, "S_inf": model.S_inf, "Q1": model.moment_data.Q1}
    summary = [
        f"‖S - S_inf - G/(ik)‖ over k in [{ks[0]:.6g}, {ks[-1]:.6g}]",
        f"log-log slope: {slope:.4f}",
    ]
    return CommandResult(document, summary, (header, rows))


def _solutions(scenario: ScenarioConfig, settings: Settings) -> CommandResult:
    ks = _require(scenario.k_grid, "k_grid").values()
    xs = scenario.x_grid.values() if scenario.x_grid else np.linspace(0.0, 5.0, 101)
    p, bp = scenario.potential, scenario.bc
    header: list[str] = []
    rows: list[list[Any]] = []
    checks = []
    for k in ks:
        sample = physical_solution(p, bp, k, xs, settings)
        origin = physical_solution(p, bp, k, [0.0], settings)
        psi0, dpsi0 = origin.at(0)
        boundary = float(np.linalg.norm(bp.A @ psi0 + bp.B @ dpsi0, 2))
        checks.append({"k": float(k), "residual": residual(sample, p), "boundary_defect": boundary})
        columns, table = wave_solution_table(sample)
        header = ["k", *columns]
        rows.extend([format_float(k), *row] for row in table)
    document = {
        "k_count": len(ks),
        "grid_points": len(xs),
        "max_residual": max(c["residual"] for c in checks),
        "max_boundary_defect": max(c["boundary_defect"] for c in checks),
        "samples": checks,
    }
    summary = [
        f"ψ(k, x) for {len(ks)} k-values on {len(xs)} points in [{xs[0]:.6g}, {xs[-1]:.6g}]",
        f"max ODE residual: {document['max_residual']:.3e}",
        f"max |Aψ(0) + Bψ'(0)|: {document['max_boundary_defect']:.3e}",
    ]
    return CommandResult(document, summary, (header, rows))


COMMANDS: dict[str, Callable[[ScenarioConfig, Settings], CommandResult]] = {
    "validate-bc": _validate_bc,
    "normal-form": _normal_form,
    "smatrix": _smatrix,
    "bound-states": _bound_states,
    "ssf": _ssf,
    "levinson": _levinson,
    "resolvent": _resolvent,
    "transforms-check": _transforms_check,
    "trace-check": _trace_check,
    "asymptotics": _asymptotics,
    "solutions": _solutions,
}


# -- orchestration -------------------------------------------------------------


def _output_dir(args: argparse.Namespace, scenario: ScenarioConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if scenario is not None and scenario.output_dir is not None:
        return scenario.output_dir
    return Path(DEFAULT_OUTPUT_DIR)


def _error_document(command: str, exc: JostkitError) -> dict[str, Any]:
    error: dict[str, Any] = {
        "type": type(exc).__name__,
        "module": type(exc).__module__,
        "message": str(exc),
        "exit_code": exc.code,
    }
    for name in ("field", "line"):
        value = getattr(exc, name, None)
        if value is not None:
            error[name] = value
    return {"command": command, "error": error}


def _write_outputs(command: str, result: CommandResult, out_dir: Path, formats: Sequence[str]) -> None:
    if "csv" in formats and result.table is not None:
        header, rows = result.table
        write_csv(out_dir / f"{command}.csv", header, rows)
    if "json" in formats:
        emit_json({"command": command, **result.document}, out_dir / f"{command}.json")
    if "summary" in formats:
        write_summary(out_dir / "summary.txt", [f"jostkit {command}", *result.summary])


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point invoked by `python -m jostkit` or console scripts."""
    parser = create_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    command = args.command
    scenario: ScenarioConfig | None = None

    try:
        document = read_scenario_document(args.config, args.overrides)
        settings = load_settings(args, overrides=document.get("tolerances") or {})
        set_default_format(settings.log_format)
        scenario = parse_scenario(document, settings)
        logger.debug("Loaded settings: %s", settings)
        result = COMMANDS[command](scenario, settings)
    except JostkitError as exc:
        event_logger_for(__name__).log(
            "command_failed", level="error", command=command, error=type(exc).__name__, message=str(exc)
        )
        out_dir = _output_dir(args, scenario)
        emit_json(_error_document(command, exc), out_dir / f"{command}.json")
        print(f"jostkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.code

    out_dir = _output_dir(args, scenario)
    _write_outputs(command, result, out_dir, scenario.formats)
    if not args.quiet:
        for line in result.summary:
            print(line)
    event_logger_for(__name__).log(
        "command_complete", level="info", command=command, out=str(out_dir), exit_code=result.exit_code
    )
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover - allows `python cli.py`
    raise SystemExit(main())
