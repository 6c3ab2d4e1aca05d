from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, List

import numpy as np

from jostkit.bc import dirichlet, neumann, random_bc, random_invertible, robin, transform_bc
from jostkit.potential import PotentialSpec
from jostkit.scattering import (
    free_closed_forms,
    high_energy_slope,
    jost_consistency,
    jost_matrix,
    jost_matrix_wronskian,
    scattering_matrix,
    smatrix_sweep,
)
from jostkit.spectral import bound_states, discrete_hamiltonian, free_ssf, levinson_check, ssf, trace_formula_check
from jostkit.transforms import (
    GridFunction,
    bound_state_projections,
    fourier_apply,
    green_kernel_jost,
    resolvent_kernel,
)

WELL_DEPTH = (0.6 * np.pi) ** 2


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)


def _well(n: int = 1) -> PotentialSpec:
    return PotentialSpec.builtin("square_well", n=n, depth=WELL_DEPTH, width=1.0)


def _coupled() -> PotentialSpec:
    return PotentialSpec.builtin("coupled_well", n=2, depths=(3.0, 1.5), coupling=0.7, width=1.0)


def check_unitarity() -> CheckResult:
    rng = np.random.default_rng(7)
    ks = np.linspace(0.1, 20.0, 100)
    worst = 0.0
    for n in (1, 2, 3):
        potentials = [_well(n), PotentialSpec.builtin("exp_decay", n=n, strength=2.0, rate=1.5)]
        if n == 2:
            potentials.append(_coupled())
        for p in potentials:
            for _ in range(5):
                bp = random_bc(n, rng)
                worst = max(worst, max(s.unitarity_defect for s in smatrix_sweep(p, bp, ks)))
    return CheckResult("unitarity", worst, 1e-8)


def check_free_closed_forms() -> CheckResult:
    worst = 0.0
    zero = PotentialSpec.zero(1)
    for bp in (dirichlet(1), neumann(1), robin(1, np.pi / 3)):
        for k in (0.5, 2.0, 5.0):
            free = free_closed_forms(bp, k)
            worst = max(worst, float(np.linalg.norm(jost_matrix(zero, bp, k) - free.J0)))
            worst = max(worst, float(np.linalg.norm(scattering_matrix(zero, bp, k).S - free.S0)))
    return CheckResult("free_closed_forms", worst, 1e-10)


def check_wronskian_constancy() -> CheckResult:
    p = _coupled()
    grid = np.linspace(0.0, 2.0, 50)
    worst = 0.0
    for k in (0.5, 2.0, 5.0):
        stack = jost_matrix_wronskian(p, neumann(2), k, grid)
        worst = max(worst, float(np.max(np.linalg.norm(stack - stack[0], ord=2, axis=(1, 2)))))
    return CheckResult("wronskian_constancy", worst, 1e-8)


def check_covariance() -> CheckResult:
    rng = np.random.default_rng(11)
    p = _coupled()
    worst = 0.0
    for _ in range(5):
        bp = random_bc(2, rng)
        moved = transform_bc(bp, random_invertible(2, rng))
        for k in (0.7, 3.0):
            worst = max(worst, float(np.linalg.norm(scattering_matrix(p, bp, k).S - scattering_matrix(p, moved, k).S)))
    return CheckResult("covariance", worst, 1e-9)


def check_triple_consistency() -> CheckResult:
    p = _well()
    worst = 0.0
    for k in np.linspace(0.5, 5.0, 6):
        worst = max(worst, max(jost_consistency(p, dirichlet(1), k).values()))
    return CheckResult("jost_triple_consistency", worst, 1e-8)


def check_high_energy() -> CheckResult:
    ks = np.geomspace(20.0, 200.0, 10)
    slopes = [high_energy_slope(_well(), dirichlet(1), ks), high_energy_slope(_coupled(), neumann(2), ks)]
    return CheckResult("high_energy_slope", max(abs(s + 2.0) for s in slopes), 0.3)


def check_bound_state_oracle() -> CheckResult:
    p = _well()
    states = bound_states(p, dirichlet(1))
    if len(states) != 1:
        return CheckResult("bound_state_oracle", float("inf"), 1e-4)
    lowest = discrete_hamiltonian(p, dirichlet(1), 1e-3, 60.0).eigenvalues(upper=0.0)[0]
    return CheckResult("bound_state_oracle", abs(states[0].E - lowest), 1e-4)


def check_birman_krein() -> CheckResult:
    energies = np.linspace(0.05, 40.0, 200)
    samples = ssf(_well(), dirichlet(1), energies)
    residual = max(s.birman_krein for s in samples)
    mixed = robin(1, 2.0)
    free = ssf(PotentialSpec.zero(1), mixed, energies)
    closed = free_ssf(mixed, energies)
    formula = max(abs(s.xi - x) for s, x in zip(free, closed))
    return CheckResult("birman_krein", max(residual, formula), 1e-8)


def check_levinson() -> CheckResult:
    cases = [(PotentialSpec.zero(1), dirichlet(1)), (PotentialSpec.zero(1), neumann(1)), (_well(), dirichlet(1))]
    return CheckResult("levinson", max(levinson_check(p, bp).defect for p, bp in cases), 0.02)


def check_trace_formula() -> CheckResult:
    free = trace_formula_check(PotentialSpec.zero(1), dirichlet(1), h=1e-3, x_max=200.0)
    well = trace_formula_check(_well(), dirichlet(1), h=1e-3, x_max=200.0)
    return CheckResult("trace_formula", max(free.defect / 0.02, well.defect / 0.05), 1.0)


def check_transforms() -> CheckResult:
    p, bp = _well(), dirichlet(1)
    xs = np.linspace(0.0, 10.0, 4001)
    psi = GridFunction(xs, np.exp(-0.5 * ((xs - 2.0) / 0.5) ** 2))
    ks = np.linspace(0.02, 12.0, 600)
    transformed = fourier_apply(p, bp, -1, psi, ks)
    point = sum(abs(item.coefficient) ** 2 for item in bound_state_projections(p, bp, psi, h=2e-3))
    return CheckResult("parseval", abs(transformed.norm() ** 2 + point - psi.norm() ** 2) / psi.norm() ** 2, 1e-3)


def check_resolvent() -> CheckResult:
    p, bp = _well(), dirichlet(1)
    xs = np.linspace(0.1, 3.0, 15)
    kernel = resolvent_kernel(p, bp, -4.0, xs, step=2.5e-3)
    reference = green_kernel_jost(p, bp, -4.0, xs, xs)
    return CheckResult("resolvent", float(np.max(np.abs(kernel.K - reference)) / np.max(np.abs(reference))), 1e-4)


def check_resolvent_oracle() -> CheckResult:
    h, z = 2e-3, -4.0
    oracle = discrete_hamiltonian(_well(), dirichlet(1), h, 4.0)
    window = np.flatnonzero((oracle.nodes >= 1.2) & (oracle.nodes <= 2.8))
    column = int(np.argmin(np.abs(oracle.nodes[window] - 2.0)))
    samples = np.zeros((len(oracle.nodes), 1), dtype=complex)
    samples[window, 0] = resolvent_kernel(_well(), dirichlet(1), z, oracle.nodes[window]).K[:, column, 0, 0]
    defect = (oracle.apply(samples)[:, 0] - z * samples[:, 0])[window]
    defect[column] -= 1.0 / h
    defect[column] *= h
    return CheckResult("resolvent_oracle", float(np.max(np.abs(defect[1:-1]))), 1e-5)


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "unitarity": check_unitarity,
    "free_closed_forms": check_free_closed_forms,
    "wronskian_constancy": check_wronskian_constancy,
    "covariance": check_covariance,
    "jost_triple_consistency": check_triple_consistency,
    "high_energy_slope": check_high_energy,
    "bound_state_oracle": check_bound_state_oracle,
    "birman_krein": check_birman_krein,
    "levinson": check_levinson,
    "trace_formula": check_trace_formula,
    "parseval": check_transforms,
    "resolvent": check_resolvent,
    "resolvent_oracle": check_resolvent_oracle,
}


def run_checks(names: List[str]) -> List[CheckResult]:
    results = []
    for name in names:
        start = time.perf_counter()
        result = CHECKS[name]()
        result.seconds = time.perf_counter() - start
        results.append(result)
    return results


def build_report(results: List[CheckResult], output: Path) -> dict:
    checks = [{**asdict(result), "passed": result.passed} for result in results]
    passed = sum(1 for result in results if result.passed)
    report = {
        "checks": checks,
        "summary": {
            "total": len(results),
            "passed": passed,
            "failed": len(results) - passed,
            "seconds": sum(result.seconds for result in results),
        },
    }

    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(json.dumps(report, indent=2), encoding="utf-8")
    return report


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="jostkit desk-scale acceptance sweep")
    parser.add_argument("--only", action="append", choices=sorted(CHECKS), help="Run only the named check (repeatable)")
    parser.add_argument("--output", type=Path, default=Path("acceptance_report.json"))
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    results = run_checks(args.only or list(CHECKS))
    report = build_report(results, args.output)
    for check in report["checks"]:
        status = "ok  " if check["passed"] else "FAIL"
        print(f"{status} {check['name']:<26} {check['value']:.3e} (<= {check['threshold']:.1e}, {check['seconds']:.1f}s)")
    return 0 if report["summary"]["failed"] == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
