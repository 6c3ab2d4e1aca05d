"""
Resolvent kernels, generalized Fourier maps and the stationary wave and
scattering operators.

All position- and k-side data travel as `GridFunction` samples; integrals
over a grid use trapezoid weights.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import roots_legendre

from .bc import BoundaryPair, NormalForm, normal_form
from .config import Settings
from .errors import GridMismatchError, NearSingularQError, SpectralPointError
from .potential import PotentialSpec, trapezoid_rule
from .scattering import jost_matrix, smatrix_sweep
from .solutions import divide_right, jost_solution, physical_solution, regular_solution
from .spectral import discrete_hamiltonian

logger = logging.getLogger(__name__)

SQRT_2_OVER_PI = float(np.sqrt(2.0 / np.pi))


@dataclass(frozen=True)
class GridFunction:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None]
        if grid.ndim != 1 or values.shape[0] != len(grid):
            raise GridMismatchError(f"values of shape {values.shape} do not match a grid of {len(grid)} points")
        if len(grid) > 1 and np.any(np.diff(grid) <= 0.0):
            raise GridMismatchError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def weights(self) -> np.ndarray:
        return quadrature_weights(self.grid)

    def inner(self, other: "GridFunction") -> complex:
        """⟨self, other⟩ = ∫ other(x)† self(x) dx."""
        if len(other.grid) != len(self.grid) or not np.allclose(other.grid, self.grid):
            raise GridMismatchError("inner product needs a shared grid")
        return complex(np.sum(self.weights()[:, None] * np.conj(other.values) * self.values))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights()[:, None] * np.abs(self.values) ** 2)))


@dataclass(frozen=True)
class KernelSample:
    z: complex
    k: complex
    x: np.ndarray
    y: np.ndarray
    K: np.ndarray


@dataclass(frozen=True)
class BoundStateProjection:
    E: float
    coefficient: complex
    function: GridFunction


def quadrature_weights(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 2:
        return np.zeros(len(grid))
    steps = np.diff(grid)
    weights = np.zeros(len(grid))
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    return weights


def wavenumber(z: complex, side: str | None = None) -> complex:
    """k = √z with Im k ≥ 0; on (0, ∞) the side selects λ ± i0 ↦ ±√λ."""
    z = complex(z)
    if side is not None:
        if side not in {"+", "-"}:
            raise SpectralPointError(f"side must be '+' or '-', got {side!r}")
        if z.imag != 0.0 or not z.real > 0.0:
            raise SpectralPointError(f"boundary values need real λ > 0, got {z}")
        root = float(np.sqrt(z.real))
        return complex(root if side == "+" else -root)
    if z.imag == 0.0 and z.real >= 0.0:
        raise SpectralPointError(f"z={z} lies on [0, ∞); pass side='+' or side='-'")
    k = complex(np.sqrt(z))
    return -k if k.imag < 0.0 else k


def _free_kernel(nf: NormalForm, k: complex, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """M diag(φ̃₀(x_<) e^{ik x_>} / J̃₀) M† on xs × ys, shape (len xs, len ys, n, n)."""
    theta = nf.thetas
    denominator = np.cos(theta) + 1j * k * np.sin(theta)
    if np.any(np.abs(denominator) <= 1e-12 * (1.0 + abs(k))):
        raise SpectralPointError(f"k={k} is a bound state of the free operator")
    x = np.asarray(xs, dtype=float)[:, None, None]
    y = np.asarray(ys, dtype=float)[None, :, None]
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    phi = -np.sin(theta) * np.cos(k * lo) + np.cos(theta) * lo * np.sinc(k * lo / np.pi)
    channels = phi * np.exp(1j * k * hi) / denominator
    return np.einsum("ij,xyj,kj->xyik", nf.M, channels, nf.M.conj())


def free_resolvent_kernel(
    bp: BoundaryPair,
    z: complex,
    x,
    y,
    *,
    side: str | None = None,
    settings: Settings | None = None,
) -> np.ndarray:
    """Free kernel R₀(z)(x, y); scalar x, y give an n×n matrix."""
    nf = normal_form(bp, settings) if settings is not None else normal_form(bp)
    k = wavenumber(z, side)
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    K = _free_kernel(nf, k, np.atleast_1d(x), np.atleast_1d(y))
    return K[0, 0] if scalar else K


def _factorized_potential(p: PotentialSpec, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes with V₁ = √w √|V| and V₂ = √w Û √|V| from the pointwise eigendecomposition."""
    nodes, weights, V = trapezoid_rule(p, step)
    eigenvalues, U = np.linalg.eigh(V)
    root = np.sqrt(np.abs(eigenvalues))
    Uh = np.conj(np.swapaxes(U, 1, 2))
    scale = np.sqrt(weights)[:, None, None]
    V1 = scale * np.einsum("aij,aj,ajk->aik", U, root, Uh)
    V2 = scale * np.einsum("aij,aj,ajk->aik", U, np.sign(eigenvalues) * root, Uh)
    return nodes, V1, V2


def _identity_plus_q(nf: NormalForm, k: complex, nodes: np.ndarray, V1: np.ndarray, V2: np.ndarray) -> np.ndarray:
    G = _free_kernel(nf, k, nodes, nodes)
    size = len(nodes) * nf.n
    Q = np.einsum("aij,abjk,bkl->aibl", V1, G, V2).reshape(size, size)
    return np.eye(size) + Q


def _real_det_sign(matrix: np.ndarray) -> float:
    sign, _ = np.linalg.slogdet(matrix)
    return float(np.sign(np.real(sign)))


def resolvent_kernel(
    p: PotentialSpec,
    bp: BoundaryPair,
    z: complex,
    x_grid,
    *,
    side: str | None = None,
    step: float | None = None,
    settings: Settings | None = None,
) -> KernelSample:
    """R(z) = R₀ - R₀ V₂ (I + Q)⁻¹ V₁ R₀ with Q = V₁ R₀ V₂, discretized on trapezoid nodes."""
    settings = settings or p.settings
    nf = normal_form(bp, settings)
    k = wavenumber(z, side)
    xs = np.asarray(x_grid, dtype=float)
    R0 = _free_kernel(nf, k, xs, xs)
    if not p.pieces:
        return KernelSample(z=complex(z), k=k, x=xs, y=xs, K=R0)

    step = step or min(0.01, 0.25 / max(abs(k), 1.0))
    nodes, V1, V2 = _factorized_potential(p, step)
    n, size = p.n, len(nodes) * p.n
    matrix = _identity_plus_q(nf, k, nodes, V1, V2)

    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > settings.q_cond_max:
        raise NearSingularQError(f"cond(I + Q) = {condition:.3e} at z={complex(z)}")
    z = complex(z)
    if side is None and z.imag == 0.0:
        guard = settings.resolvent_guard
        above = z.real + guard if z.real + guard < 0.0 else z.real
        signs = {
            _real_det_sign(_identity_plus_q(nf, wavenumber(energy), nodes, V1, V2))
            for energy in (z.real - guard, above)
        }
        if len(signs) > 1:
            raise NearSingularQError(f"an eigenvalue of H lies within {guard} of z={z.real}")

    to_nodes = _free_kernel(nf, k, xs, nodes)
    from_nodes = _free_kernel(nf, k, nodes, xs)
    left = np.einsum("xaij,ajk->xiak", to_nodes, V2).reshape(len(xs), n, size)
    right = np.einsum("bij,byjk->biyk", V1, from_nodes).reshape(size, len(xs) * n)
    solved = lu_solve(lu_factor(matrix), right).reshape(size, len(xs), n)
    correction = np.einsum("xim,myk->xyik", left, solved)
    logger.debug("resolvent kernel z=%s nodes=%s cond=%.3e", z, len(nodes), condition)
    return KernelSample(z=z, k=k, x=xs, y=xs, K=R0 - correction)


def green_kernel_jost(
    p: PotentialSpec,
    bp: BoundaryPair,
    z: complex,
    x,
    y,
    *,
    side: str | None = None,
    settings: Settings | None = None,
) -> np.ndarray:
    """Kernel of R(z) from the Jost and regular solutions, shape (len x, len y, n, n).

    x ≤ y: φ(x, k) J(k)⁻¹ f(-k*, y)†;  x ≥ y: f(k, x) [J(-k*)†]⁻¹ φ(y, k*)†.
    """
    settings = settings or p.settings
    k = wavenumber(z, side)
    kc = np.conj(k)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    identity = np.eye(p.n)

    J = jost_matrix(p, bp, k, settings)
    J_reflected = jost_matrix(p, bp, -kc, settings)
    lower = regular_solution(p, bp, k, xs, settings).values @ divide_right(identity, J, k, settings)
    lower_right = np.conj(np.swapaxes(jost_solution(p, -kc, ys, settings).values, 1, 2))
    upper = jost_solution(p, k, xs, settings).values @ divide_right(identity, J_reflected.conj().T, k, settings)
    upper_right = np.conj(np.swapaxes(regular_solution(p, bp, kc, ys, settings).values, 1, 2))

    below = np.einsum("xij,yjk->xyik", lower, lower_right)
    above = np.einsum("xij,yjk->xyik", upper, upper_right)
    return np.where((xs[:, None] <= ys[None, :])[:, :, None, None], below, above)


def spectral_density_check(
    p: PotentialSpec,
    bp: BoundaryPair,
    k0: float,
    k1: float,
    x: float,
    y: float,
    *,
    points: int = 64,
    settings: Settings | None = None,
) -> dict[str, float]:
    """Stone's formula over (k0², k1²) against (2/π) ∫ ψ(k, x) ψ(k, y)† dk."""
    settings = settings or p.settings
    t, w = roots_legendre(points)
    ks = 0.5 * (k1 + k0) + 0.5 * (k1 - k0) * t
    w = 0.5 * (k1 - k0) * w
    jump = np.zeros((p.n, p.n), dtype=complex)
    density = np.zeros((p.n, p.n), dtype=complex)
    for k, weight in zip(ks, w):
        plus = green_kernel_jost(p, bp, k**2, x, y, side="+", settings=settings)[0, 0]
        minus = green_kernel_jost(p, bp, k**2, x, y, side="-", settings=settings)[0, 0]
        jump += weight * 2.0 * k * (plus - minus) / (2j * np.pi)
        psi_x = physical_solution(p, bp, k, [x], settings).values[0]
        psi_y = physical_solution(p, bp, k, [y], settings).values[0]
        density += weight * (2.0 / np.pi) * psi_x @ psi_y.conj().T
    return {
        "jump": float(np.linalg.norm(jump, 2)),
        "density": float(np.linalg.norm(density, 2)),
        "defect": float(np.linalg.norm(jump - density, 2)),
    }


def _physical_stack(
    p: PotentialSpec, bp: BoundaryPair, sign: int, ks: np.ndarray, grid: np.ndarray, settings: Settings
) -> np.ndarray:
    """ψ^±(k, x) = ψ(∓k, x) for every k, shape (len ks, len grid, n, n)."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")

    def one(k: float) -> np.ndarray:
        return physical_solution(p, bp, -sign * k, grid, settings).values

    if settings.threads <= 1:
        return np.stack([one(k) for k in ks])
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return np.stack(list(pool.map(one, ks)))


def cosine_transform(psi: GridFunction, k_grid: Sequence[float] | np.ndarray) -> GridFunction:
    ks = np.asarray(k_grid, dtype=float)
    kernel = np.cos(np.outer(ks, psi.grid)) * psi.weights()[None, :]
    return GridFunction(ks, SQRT_2_OVER_PI * kernel @ psi.values)


def fourier_apply(
    p: PotentialSpec,
    bp: BoundaryPair,
    sign: int,
    psi: GridFunction,
    k_grid: Sequence[float] | np.ndarray,
    settings: Settings | None = None,
) -> GridFunction:
    """(F^± ψ)(k) = √(2/π) ∫ ψ^±(k, x)† ψ(x) dx."""
    settings = settings or p.settings
    ks = np.asarray(k_grid, dtype=float)
    stack = _physical_stack(p, bp, sign, ks, psi.grid, settings)
    values = SQRT_2_OVER_PI * np.einsum("kxji,x,xj->ki", np.conj(stack), psi.weights(), psi.values)
    return GridFunction(ks, values)


def fourier_adjoint_apply(
    p: PotentialSpec,
    bp: BoundaryPair,
    sign: int,
    phi: GridFunction,
    x_grid: Sequence[float] | np.ndarray,
    settings: Settings | None = None,
) -> GridFunction:
    """((F^±)† φ)(x) = √(2/π) ∫ ψ^±(k, x) φ(k) dk."""
    settings = settings or p.settings
    xs = np.asarray(x_grid, dtype=float)
    stack = _physical_stack(p, bp, sign, phi.grid, xs, settings)
    values = SQRT_2_OVER_PI * np.einsum("kxij,k,kj->xi", stack, phi.weights(), phi.values)
    return GridFunction(xs, values)


def wave_operator_apply(
    p: PotentialSpec,
    bp: BoundaryPair,
    sign: int,
    psi: GridFunction,
    k_grid: Sequence[float] | np.ndarray,
    x_grid: Sequence[float] | np.ndarray | None = None,
    settings: Settings | None = None,
) -> GridFunction:
    """W_± ψ = (F^±)† F₀ ψ."""
    free_side = cosine_transform(psi, k_grid)
    return fourier_adjoint_apply(p, bp, sign, free_side, psi.grid if x_grid is None else x_grid, settings)


def scattering_operator_check(
    p: PotentialSpec,
    bp: BoundaryPair,
    phi: GridFunction,
    x_grid: Sequence[float] | np.ndarray,
    settings: Settings | None = None,
) -> float:
    """‖F⁺((F⁻)† φ) - S(k) φ(k)‖ on the k-grid of φ."""
    settings = settings or p.settings
    position = fourier_adjoint_apply(p, bp, -1, phi, x_grid, settings)
    image = fourier_apply(p, bp, +1, position, phi.grid, settings)
    S = np.stack([sample.S for sample in smatrix_sweep(p, bp, phi.grid, settings)])
    expected = np.einsum("kij,kj->ki", S, phi.values)
    return GridFunction(phi.grid, image.values - expected).norm()


def bound_state_projections(
    p: PotentialSpec,
    bp: BoundaryPair,
    psi: GridFunction,
    *,
    h: float = 5e-3,
    x_max: float | None = None,
    settings: Settings | None = None,
) -> list[BoundStateProjection]:
    """⟨ψ, φ_j⟩ for the normalized negative-energy eigenfunctions of the discrete oracle."""
    settings = settings or p.settings
    if x_max is None:
        x_max = max(60.0, 2.0 * float(psi.grid[-1]), p.support_end() + 1.0)
    oracle = discrete_hamiltonian(p, bp, h, x_max, settings)
    energies, functions = oracle.eigenpairs(upper=-1e-9)
    projections = []
    for E, function in zip(energies, functions):
        sampled = np.stack(
            [
                np.interp(psi.grid, oracle.nodes, function[:, j].real)
                + 1j * np.interp(psi.grid, oracle.nodes, function[:, j].imag)
                for j in range(p.n)
            ],
            axis=1,
        )
        state = GridFunction(psi.grid, sampled)
        projections.append(BoundStateProjection(E=float(E), coefficient=psi.inner(state), function=state))
    return projections
