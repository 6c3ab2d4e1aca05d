"""
Jost and scattering matrices, zero-potential closed forms, the high-energy
expansion and the continuous branch of arg det S(k).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bc import BoundaryPair, NormalForm, normal_form
from .config import DEFAULT_SETTINGS, Settings
from .errors import BranchJumpError, ScatteringError
from .logging_utils import event_logger_for
from .potential import MomentData, PotentialSpec, gauss_rule, moments
from .solutions import (
    boundary_jost,
    divide_right,
    jost_solution,
    physical_solution,
    regular_solution,
    wronskian,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SMatrixSample:
    k: float
    S: np.ndarray
    unitarity_defect: float

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.S))


@dataclass(frozen=True)
class FreeClosedForms:
    """Zero-potential quantities from the normal form, with no ODE solve."""

    k: complex
    nf: NormalForm
    J0: np.ndarray
    J0_inv: np.ndarray
    S0: np.ndarray

    def _channel_phi(self, k: complex, x: np.ndarray) -> np.ndarray:
        theta = self.nf.thetas[None, :]
        kx = k * np.asarray(x, dtype=float)[:, None]
        sin_over_k = np.asarray(x, dtype=float)[:, None] * np.sinc(kx / np.pi)
        return -np.sin(theta) * np.cos(kx) + np.cos(theta) * sin_over_k

    def phi0(self, x) -> np.ndarray:
        """φ₀(k, x) = M diag(-sin θ cos kx + cos θ sin(kx)/k) T₂ M† T₁."""
        channels = self._channel_phi(self.k, x)
        M, Mh = self.nf.M, self.nf.M.conj().T
        right = self.nf.T2 @ Mh @ self.nf.T1
        return np.einsum("ij,xj,jk->xik", M, channels, right)

    def psi0(self, x, k: complex | None = None) -> np.ndarray:
        """Physical solution ψ₀(k, x) = -ik φ₀(k, x) J₀(k)⁻¹."""
        k = self.k if k is None else complex(k)
        theta = self.nf.thetas[None, :]
        denominator = np.cos(theta) + 1j * k * np.sin(theta)
        channels = -1j * k * self._channel_phi(k, x) / denominator
        M, Mh = self.nf.M, self.nf.M.conj().T
        return np.einsum("ij,xj,jk->xik", M, channels, Mh)

    def psi0_pm(self, sign: int, x) -> np.ndarray:
        """ψ₀^±(k, x) = ψ₀(∓k, x)."""
        return self.psi0(x, -sign * self.k)


@dataclass(frozen=True)
class HighEnergyModel:
    """S(k) = S_inf + G(k)/(ik) + O(1/k²)."""

    S_inf: np.ndarray
    M: np.ndarray
    Z1: np.ndarray
    moment_data: MomentData

    def G(self, k: float) -> np.ndarray:
        Q1 = self.moment_data.Q1
        S = self.S_inf
        boundary = -2.0 * self.M @ np.diag(self.Z1) @ self.M.conj().T
        return boundary + Q1 @ S + S @ Q1 + S @ self.moment_data.Q2(k) @ S + self.moment_data.Q2(-k)

    def remainder(self, S: np.ndarray, k: float) -> np.ndarray:
        return S - self.S_inf - self.G(k) / (1j * k)


def free_closed_forms(bp: BoundaryPair, k: complex, settings: Settings = DEFAULT_SETTINGS) -> FreeClosedForms:
    k = complex(k)
    nf = normal_form(bp, settings)
    theta = nf.thetas
    denominator = np.cos(theta) + 1j * k * np.sin(theta)
    M, Mh = nf.M, nf.M.conj().T
    right = nf.T2 @ Mh @ nf.T1
    J0 = M @ np.diag(denominator) @ right
    J0_inv = np.linalg.solve(nf.T1, M @ np.linalg.solve(nf.T2, np.diag(1.0 / denominator) @ Mh))
    S0 = M @ np.diag((-np.cos(theta) + 1j * k * np.sin(theta)) / denominator) @ Mh
    return FreeClosedForms(k=k, nf=nf, J0=J0, J0_inv=J0_inv, S0=S0)


def _checked_k(k: complex) -> complex:
    k = complex(k)
    if k.imag < -1e-12 * max(1.0, abs(k)):
        raise ScatteringError(f"the Jost matrix is evaluated on the closed upper half plane, got k={k}")
    return k


def jost_matrix(p: PotentialSpec, bp: BoundaryPair, k: complex, settings: Settings | None = None) -> np.ndarray:
    """J(k) = f(-k*, 0)† B - f'(-k*, 0)† A."""
    settings = settings or p.settings
    k = _checked_k(k)
    return boundary_jost(jost_solution(p, -np.conj(k), [0.0], settings), bp)


def jost_matrix_wronskian(
    p: PotentialSpec, bp: BoundaryPair, k: complex, grid, settings: Settings | None = None
) -> np.ndarray:
    """[f(-k*, x)†; φ(k, x)] at every grid point; constant in x."""
    settings = settings or p.settings
    k = _checked_k(k)
    f = jost_solution(p, -np.conj(k), grid, settings)
    phi = regular_solution(p, bp, k, grid, settings)
    return wronskian(f, phi)


def jost_matrix_integral(p: PotentialSpec, bp: BoundaryPair, k: complex, settings: Settings | None = None) -> np.ndarray:
    """J(k) = J₀(k) + ∫ e^{ikx} V(x) φ(k, x) dx."""
    settings = settings or p.settings
    k = _checked_k(k)
    J0 = bp.B - 1j * k * bp.A
    x, w = gauss_rule(p, max_width=min(0.25, 1.0 / max(abs(k), 1.0)))
    if len(x) == 0:
        return J0
    phi = regular_solution(p, bp, k, x, settings)
    integrand = np.exp(1j * k * x)[:, None, None] * (p.evaluate(x) @ phi.values)
    return J0 + np.tensordot(w, integrand, axes=(0, 0))


def jost_consistency(
    p: PotentialSpec, bp: BoundaryPair, k: complex, grid=None, settings: Settings | None = None
) -> dict[str, float]:
    """Pairwise defects between the boundary, Wronskian and integral forms of J(k)."""
    settings = settings or p.settings
    if grid is None:
        grid = np.linspace(0.0, max(p.support_end(), 1.0), 50)
    boundary = jost_matrix(p, bp, k, settings)
    stack = jost_matrix_wronskian(p, bp, k, grid, settings)
    integral = jost_matrix_integral(p, bp, k, settings)
    return {
        "boundary_vs_wronskian": float(np.max(np.linalg.norm(stack - boundary, ord=2, axis=(1, 2)))),
        "boundary_vs_integral": float(np.linalg.norm(boundary - integral, 2)),
        "wronskian_vs_integral": float(np.max(np.linalg.norm(stack - integral, ord=2, axis=(1, 2)))),
    }


def scattering_matrix(p: PotentialSpec, bp: BoundaryPair, k: float, settings: Settings | None = None) -> SMatrixSample:
    """S(k) = -J(-k) J(k)⁻¹ for real k > 0."""
    settings = settings or p.settings
    k = float(k)
    if not k > 0.0:
        raise ScatteringError(f"scattering_matrix needs k > 0, got {k}")
    # J(k) needs f(-k, 0) and J(-k) needs f(k, 0)
    f_plus = jost_solution(p, k, [0.0], settings)
    f_minus = jost_solution(p, -k, [0.0], settings)
    J_k = boundary_jost(f_minus, bp)
    J_minus_k = boundary_jost(f_plus, bp)
    S = -divide_right(J_minus_k, J_k, k, settings)
    defect = float(np.linalg.norm(S @ S.conj().T - np.eye(p.n), 2))
    if defect > settings.s_tol:
        event_logger_for(__name__).log("unitarity_defect", level="warning", k=k, defect=defect)
    return SMatrixSample(k=k, S=S, unitarity_defect=defect)


def smatrix_sweep(
    p: PotentialSpec, bp: BoundaryPair, ks: Sequence[float], settings: Settings | None = None
) -> list[SMatrixSample]:
    """S on a k-grid; samples are independent and merged by index."""
    settings = settings or p.settings
    ks = [float(k) for k in ks]
    if settings.threads <= 1 or len(ks) < 2:
        return [scattering_matrix(p, bp, k, settings) for k in ks]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(lambda k: scattering_matrix(p, bp, k, settings), ks))


def high_energy_model(p: PotentialSpec, bp: BoundaryPair, settings: Settings | None = None) -> HighEnergyModel:
    settings = settings or p.settings
    nf = normal_form(bp, settings)
    Z0 = np.ones(nf.n)
    Z0[nf.dirichlet] = -1.0
    S_inf = nf.M @ np.diag(Z0) @ nf.M.conj().T
    return HighEnergyModel(S_inf=S_inf, M=nf.M, Z1=nf.cot_hat(), moment_data=moments(p))


def high_energy_slope(
    p: PotentialSpec, bp: BoundaryPair, ks: Sequence[float], settings: Settings | None = None
) -> float:
    """Fitted log-log slope of ‖S(k) - S_inf - G(k)/(ik)‖ over ks."""
    model = high_energy_model(p, bp, settings)
    ks = np.asarray(ks, dtype=float)
    norms = np.array(
        [np.linalg.norm(model.remainder(scattering_matrix(p, bp, k, settings).S, k), 2) for k in ks]
    )
    slope, _ = np.polyfit(np.log(ks), np.log(norms), 1)
    return float(slope)


def _wrap(angle: float) -> float:
    """Map an angle increment into (-π, π]."""
    return float(np.pi - np.mod(np.pi - angle, 2.0 * np.pi))


def _refined_increment(
    left: SMatrixSample,
    right: SMatrixSample,
    refine: Callable[[float], SMatrixSample],
    depth: int,
    max_depth: int,
) -> float:
    increment = _wrap(np.angle(right.det) - np.angle(left.det))
    if abs(increment) < 0.5 * np.pi:
        return increment
    if depth >= max_depth:
        raise BranchJumpError(k_left=left.k, k_right=right.k, increment=increment)
    middle = refine(0.5 * (left.k + right.k))
    logger.debug("branch refinement depth=%s at k=%.6g", depth + 1, middle.k)
    return _refined_increment(left, middle, refine, depth + 1, max_depth) + _refined_increment(
        middle, right, refine, depth + 1, max_depth
    )


def det_arg_branch(
    samples: Sequence[SMatrixSample],
    n_d: int,
    *,
    refine: Callable[[float], SMatrixSample] | None = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> np.ndarray:
    """Continuous branch Θ(k) of arg det S(k), anchored so Θ(k_max) is within π of -π n_D.

    Increments of π/2 or more between neighbours are bisected through `refine`
    (depth at most branch_max_depth); without `refine` they raise BranchJumpError.
    """
    if not samples:
        return np.zeros(0)
    ks = [s.k for s in samples]
    if any(b <= a for a, b in zip(ks[:-1], ks[1:])):
        raise ScatteringError("det_arg_branch needs samples ordered by increasing k")

    theta = np.empty(len(samples))
    theta[0] = np.angle(samples[0].det)
    refined = 0
    for i in range(1, len(samples)):
        increment = _wrap(np.angle(samples[i].det) - np.angle(samples[i - 1].det))
        if abs(increment) >= 0.5 * np.pi:
            if refine is None:
                raise BranchJumpError(k_left=ks[i - 1], k_right=ks[i], increment=increment)
            increment = _refined_increment(samples[i - 1], samples[i], refine, 0, settings.branch_max_depth)
            refined += 1
        theta[i] = theta[i - 1] + increment

    target = -np.pi * n_d
    shift = 2.0 * np.pi * np.round((target - theta[-1]) / (2.0 * np.pi))
    theta += shift
    if refined:
        event_logger_for(__name__).log("branch_refined", level="debug", intervals=refined, k_max=ks[-1])
    return theta


def born_identity_defect(p: PotentialSpec, bp: BoundaryPair, k: float, settings: Settings | None = None) -> float:
    """‖S(k) - S₀(k) + (2i/k) ∫ ψ₀(k, x) V(x) ψ(k, x) dx‖."""
    settings = settings or p.settings
    k = float(k)
    sample = scattering_matrix(p, bp, k, settings)
    free = free_closed_forms(bp, k, settings)
    x, w = gauss_rule(p, max_width=min(0.25, 1.0 / max(k, 1.0)))
    integral = np.zeros((p.n, p.n), dtype=complex)
    if len(x):
        psi = physical_solution(p, bp, k, x, settings).values
        integrand = free.psi0(x) @ p.evaluate(x) @ psi
        integral = np.tensordot(w, integrand, axes=(0, 0))
    return float(np.linalg.norm(sample.S - free.S0 + (2j / k) * integral, 2))
