"""
Matrix solutions of -ψ'' + V(x)ψ = k²ψ on the half line.

Every solver integrates the first-order system Y = [ψ; ψ'] piece by piece
across the potential's knots with `scipy.integrate.solve_ivp`. Beyond the
support of V the free solutions are used in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .bc import BoundaryPair
from .config import DEFAULT_SETTINGS, Settings
from .errors import GridMismatchError, SingularJostError, SolutionError, SolveDivergedError, ZeroKError
from .potential import Piece, PotentialSpec

logger = logging.getLogger(__name__)

ODE_METHOD = "DOP853"
ZERO_K = 1e-14


@dataclass(frozen=True)
class WaveSolutionSample:
    k: complex
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def at(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[index], self.derivs[index]

    def combine(self, right: np.ndarray) -> "WaveSolutionSample":
        """Return the sample ψ(x)·C for a constant matrix C."""
        return WaveSolutionSample(self.k, self.grid, self.values @ right, self.derivs @ right)


def _as_grid(grid: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise GridMismatchError("grid points must be finite and non-negative")
    return arr


def _rhs(piece: Piece, k2: complex, n: int):
    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        Y = y.reshape(2 * n, n)
        psi, dpsi = Y[:n], Y[n:]
        return np.concatenate([dpsi, (piece.value(x) - k2 * np.eye(n)) @ psi]).ravel()

    return rhs


def _solve_segment(
    piece: Piece,
    k2: complex,
    y0: np.ndarray,
    x_from: float,
    x_to: float,
    targets: np.ndarray,
    settings: Settings,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate one piece from x_from to x_to; return (end state, states at targets)."""
    n = y0.shape[1]
    if x_from == x_to:
        return y0, np.repeat(y0[None], len(targets), axis=0)
    ascending = np.unique(np.append(targets, x_to))
    t_eval = ascending if x_to > x_from else ascending[::-1]
    result = solve_ivp(
        _rhs(piece, k2, n),
        (x_from, x_to),
        y0.ravel().astype(complex),
        method=ODE_METHOD,
        rtol=settings.ode_rtol,
        atol=settings.ode_atol,
        t_eval=t_eval,
    )
    if not result.success:
        raise SolveDivergedError(f"integration failed on [{x_from}, {x_to}]: {result.message}")
    states = result.y.T.reshape(-1, 2 * n, n)
    if x_to < x_from:
        states = states[::-1]
    return states[np.searchsorted(ascending, x_to)], states[np.searchsorted(ascending, targets)]


def _propagate(
    p: PotentialSpec,
    k: complex,
    x0: float,
    y0: np.ndarray,
    targets: np.ndarray,
    settings: Settings,
) -> np.ndarray:
    """States Y at `targets`, all on one side of x0 inside [0, support_end]."""
    k2 = k * k
    out = np.empty((len(targets), 2 * p.n, p.n), dtype=complex)
    if len(targets) == 0:
        return out
    forward = np.all(targets >= x0)
    y = y0
    pieces = p.pieces if forward else tuple(reversed(p.pieces))
    for piece in pieces:
        if forward:
            if piece.end <= x0 or piece.start >= targets.max():
                continue
            x_from, x_to = max(piece.start, x0), min(piece.end, targets.max())
            mask = (targets >= x_from) & (targets <= x_to)
        else:
            if piece.start >= x0 or piece.end <= targets.min():
                continue
            x_from, x_to = min(piece.end, x0), max(piece.start, targets.min())
            mask = (targets <= x_from) & (targets >= x_to)
        y, states = _solve_segment(piece, k2, y, x_from, x_to, targets[mask], settings)
        out[mask] = states
    return out


def _free_propagate(k: complex, x0: float, psi0: np.ndarray, dpsi0: np.ndarray, xs: np.ndarray):
    """Closed-form continuation of Cauchy data (psi0, dpsi0) at x0 with V = 0."""
    t = (xs - x0)[:, None, None]
    c = np.cos(k * t)
    # sin(kt)/k, finite at k = 0
    s = t * np.sinc(k * t / np.pi)
    ds = -k * np.sin(k * t)
    return c * psi0 + s * dpsi0, ds * psi0 + c * dpsi0


def _check_k(k: complex, *, upper: bool = True) -> complex:
    k = complex(k)
    if abs(k) < ZERO_K:
        raise ZeroKError("k = 0 is only reachable through small-k limits")
    if upper and k.imag < -1e-12 * max(1.0, abs(k)):
        raise SolutionError(f"Jost solutions need Im k >= 0, got k={k}")
    return k


def _exponential_solution(p: PotentialSpec, k: complex, grid, settings: Settings, sign: int) -> WaveSolutionSample:
    xs = _as_grid(grid)
    n = p.n
    ik = sign * 1j * k
    L = p.support_end()
    values = np.empty((len(xs), n, n), dtype=complex)
    derivs = np.empty_like(values)
    outside = xs >= L
    phase = np.exp(ik * xs[outside])[:, None, None]
    values[outside] = phase * np.eye(n)
    derivs[outside] = ik * phase * np.eye(n)
    inside = ~outside
    if np.any(inside):
        y0 = np.vstack([np.exp(ik * L) * np.eye(n), ik * np.exp(ik * L) * np.eye(n)])
        states = _propagate(p, k, L, y0, xs[inside], settings)
        values[inside] = states[:, :n]
        derivs[inside] = states[:, n:]
    return WaveSolutionSample(k, xs, values, derivs)


def jost_solution(p: PotentialSpec, k: complex, grid, settings: Settings | None = None) -> WaveSolutionSample:
    """f(k, x) = e^{ikx} I beyond the support, integrated backward to the grid."""
    settings = settings or p.settings
    return _exponential_solution(p, _check_k(k), grid, settings, +1)


def second_solution(p: PotentialSpec, k: complex, grid, settings: Settings | None = None) -> WaveSolutionSample:
    """g(k, x) = e^{-ikx} I beyond the support."""
    settings = settings or p.settings
    return _exponential_solution(p, _check_k(k), grid, settings, -1)


def regular_solution(
    p: PotentialSpec, bp: BoundaryPair, k: complex, grid, settings: Settings | None = None
) -> WaveSolutionSample:
    """φ(k, x) with φ(k, 0) = A and φ'(k, 0) = B."""
    settings = settings or p.settings
    if bp.n != p.n:
        raise GridMismatchError("boundary pair and potential have different channel counts")
    k = complex(k)
    xs = _as_grid(grid)
    n = p.n
    L = p.support_end()
    y0 = np.vstack([np.asarray(bp.A), np.asarray(bp.B)]).astype(complex)
    values = np.empty((len(xs), n, n), dtype=complex)
    derivs = np.empty_like(values)

    inside = xs <= L
    if L > 0.0:
        targets = np.append(xs[inside], L)
        states = _propagate(p, k, 0.0, y0, targets, settings)
        values[inside] = states[:-1, :n]
        derivs[inside] = states[:-1, n:]
        edge = states[-1]
    else:
        values[inside] = y0[:n]
        derivs[inside] = y0[n:]
        edge = y0
    outside = ~inside
    if np.any(outside):
        psi, dpsi = _free_propagate(k, L, edge[:n], edge[n:], xs[outside])
        values[outside] = psi
        derivs[outside] = dpsi
    return WaveSolutionSample(k, xs, values, derivs)


def wronskian(
    F: WaveSolutionSample,
    G: WaveSolutionSample,
    index: int | None = None,
    *,
    adjoint: bool = True,
) -> np.ndarray:
    """[F; G] = F G' - F' G, with F replaced by F† when `adjoint` is set.

    Returns the n×n matrix at `index`, or the stack over the whole grid.
    """
    if F.grid.shape != G.grid.shape or not np.array_equal(F.grid, G.grid):
        raise GridMismatchError("Wronskian needs both samples on the same grid")
    left, dleft = F.values, F.derivs
    if adjoint:
        left = np.conj(np.swapaxes(left, 1, 2))
        dleft = np.conj(np.swapaxes(dleft, 1, 2))
    stack = left @ G.derivs - dleft @ G.values
    return stack if index is None else stack[index]


def boundary_jost(f_sample: WaveSolutionSample, bp: BoundaryPair, index: int = 0) -> np.ndarray:
    """f(0)†B - f'(0)†A for a Jost sample at -k* evaluated at x = 0."""
    f0, df0 = f_sample.at(index)
    return f0.conj().T @ bp.B - df0.conj().T @ bp.A


def divide_right(X: np.ndarray, J: np.ndarray, k: complex, settings: Settings) -> np.ndarray:
    """X J⁻¹ by a linear solve, guarding against a singular Jost matrix."""
    condition = float(np.linalg.cond(J))
    if not np.isfinite(condition) or condition > settings.jost_cond_max:
        raise SingularJostError(k=k, condition=condition)
    return np.linalg.solve(J.T, X.T).T


def physical_solution(
    p: PotentialSpec, bp: BoundaryPair, k: float, grid, settings: Settings | None = None
) -> WaveSolutionSample:
    """ψ(k, x) = ½ f(-k, x) + ½ f(k, x) S(k) for real k ≠ 0."""
    settings = settings or p.settings
    k = float(np.real(k))
    _check_k(k)
    xs = _as_grid(grid)
    with_origin = np.concatenate([[0.0], xs])
    f_plus = jost_solution(p, k, with_origin, settings)
    f_minus = jost_solution(p, -k, with_origin, settings)
    # J(k) uses f(-k*, 0) = f(-k, 0); J(-k) uses f(k, 0)
    J_k = boundary_jost(f_minus, bp)
    J_minus_k = boundary_jost(f_plus, bp)
    S = -divide_right(J_minus_k, J_k, k, settings)
    values = 0.5 * f_minus.values[1:] + 0.5 * f_plus.values[1:] @ S
    derivs = 0.5 * f_minus.derivs[1:] + 0.5 * f_plus.derivs[1:] @ S
    return WaveSolutionSample(k, xs, values, derivs)


def physical_solution_from_regular(
    p: PotentialSpec, bp: BoundaryPair, k: float, grid, settings: Settings | None = None
) -> WaveSolutionSample:
    """ψ(k, x) = -ik φ(k, x) J(k)⁻¹, the cross-check for `physical_solution`."""
    settings = settings or p.settings
    k = float(np.real(k))
    _check_k(k)
    phi = regular_solution(p, bp, k, grid, settings)
    J_k = boundary_jost(jost_solution(p, -k, [0.0], settings), bp)
    factor = divide_right(np.eye(p.n), J_k, k, settings)
    return phi.combine(-1j * k * factor)


@dataclass(frozen=True)
class JostDecomposition:
    xi: np.ndarray
    eta: np.ndarray
    residual: float


def jost_decomposition(
    p: PotentialSpec, bp: BoundaryPair, k: complex, grid, settings: Settings | None = None
) -> JostDecomposition:
    """Least-squares coefficients of φ(k, x) = f(k, x) ξ + g(k, x) η over the grid."""
    settings = settings or p.settings
    phi = regular_solution(p, bp, k, grid, settings)
    f = jost_solution(p, k, grid, settings)
    g = second_solution(p, k, grid, settings)
    n = p.n
    basis = np.concatenate(
        [np.concatenate([f.values, g.values], axis=2), np.concatenate([f.derivs, g.derivs], axis=2)],
        axis=1,
    ).reshape(-1, 2 * n)
    target = np.concatenate([phi.values, phi.derivs], axis=1).reshape(-1, n)
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = float(np.linalg.norm(basis @ coeffs - target) / max(np.linalg.norm(target), 1e-300))
    return JostDecomposition(xi=coeffs[:n], eta=coeffs[n:], residual=residual)


def residual(sample: WaveSolutionSample, p: PotentialSpec) -> float:
    """Max relative finite-difference residual of -ψ'' + (V - k²)ψ at interior points."""
    if len(sample.grid) < 3:
        return 0.0
    second = np.gradient(sample.derivs, sample.grid, axis=0)
    V = p.evaluate(sample.grid)
    res = -second + (V - sample.k**2 * np.eye(p.n)) @ sample.values
    knots = p.breakpoints()
    interior = np.ones(len(sample.grid), dtype=bool)
    interior[[0, -1]] = False
    for knot in knots:
        interior &= np.abs(sample.grid - knot) > 1e-12
    if not np.any(interior):
        return 0.0
    scale = max(float(np.max(np.abs(sample.values))) * max(1.0, abs(sample.k) ** 2), 1e-300)
    return float(np.max(np.abs(res[interior]))) / scale
