"""
Bound states, the finite-difference oracle, the spectral shift function and
the Levinson and trace-formula checks built on it.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import simpson
from scipy.linalg import eig_banded
from scipy.optimize import brentq, minimize_scalar
from scipy.special import roots_legendre

from .bc import BoundaryPair, neumann, normal_form
from .config import Settings
from .errors import ExtrapolationUnstableError, GridTooLargeError, RootFindStallError, SpectralError
from .logging_utils import event_logger_for
from .potential import PotentialSpec
from .scattering import det_arg_branch, jost_matrix, scattering_matrix, smatrix_sweep

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundState:
    E: float
    kappa: float
    m: int
    vectors: np.ndarray


@dataclass(frozen=True)
class SsfSample:
    E: float
    xi: float
    birman_krein: float | None = None


@dataclass(frozen=True)
class LevinsonReport:
    xi0_plus: float
    n: int
    mu: int
    N: int
    defect: float
    predicted: float
    S0_eigenvalues: np.ndarray = field(repr=False)

    def as_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("S0_eigenvalues")
        return data


@dataclass(frozen=True)
class TraceReport:
    lhs: float
    rhs: float
    defect: float
    eigenvalue_count: int
    reference_count: int

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


# -- bound states --------------------------------------------------------------


def default_kappa_range(p: PotentialSpec, bp: BoundaryPair, settings: Settings | None = None) -> tuple[float, float]:
    """κ-range containing every bound state: E ≥ -(sup‖V‖ + max cot²θ over cot θ > 0)."""
    settings = settings or p.settings
    cot = normal_form(bp, settings).cot_hat()
    boundary = float(np.max(cot[cot > 0.0], initial=0.0))
    kappa_max = 1.2 * np.sqrt(p.sup_norm() + boundary**2) + 0.5
    return settings.kappa_min, float(kappa_max)


def _scan(evaluate: Callable[[float], np.ndarray], kappas: np.ndarray, threads: int) -> list[np.ndarray]:
    if threads <= 1:
        return [evaluate(kappa) for kappa in kappas]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(evaluate, kappas))


def _null_space(J: np.ndarray, scale: float, settings: Settings) -> tuple[int, np.ndarray, np.ndarray]:
    """Null-space dimension from the first singular-value gap of null_gap, with `scale` as a ceiling."""
    _, s, Vh = np.linalg.svd(J)
    ascending = np.append(s[::-1], scale)
    m = 1
    for j in range(len(ascending) - 1):
        if ascending[j + 1] >= settings.null_gap * max(ascending[j], np.finfo(float).tiny):
            m = j + 1
            break
    vectors = Vh.conj().T[:, len(s) - m :]
    return m, vectors, s


def bound_states(
    p: PotentialSpec,
    bp: BoundaryPair,
    kappa_range: tuple[float, float] | None = None,
    settings: Settings | None = None,
) -> list[BoundState]:
    """Zeros of det J(iκ) in the κ-range, each with the null space of J(iκ).

    det J(iκ) = e^{iα(κ)} r(κ) with r real. α is tracked by unwrapping twice the
    argument, which is blind to the sign of r, and r carries the sign changes.
    Odd multiplicities are bracketed by sign changes and refined with brentq;
    even multiplicities show up only as local minima of σ_min / max(σ_max, ‖A‖κ + ‖B‖).
    """
    settings = settings or p.settings
    kappa_min, kappa_max = kappa_range or default_kappa_range(p, bp, settings)
    if not 0.0 < kappa_min < kappa_max:
        raise SpectralError(f"invalid κ-range [{kappa_min}, {kappa_max}]")

    def jost_at(kappa: float) -> np.ndarray:
        return jost_matrix(p, bp, 1j * kappa, settings)

    # bounds ‖J₀(iκ)‖ = ‖B + κA‖ and never vanishes
    norm_a, norm_b = np.linalg.norm(bp.A, 2), np.linalg.norm(bp.B, 2)

    def scale(kappa: float) -> float:
        return float(norm_a * kappa + norm_b)

    kappas = np.geomspace(kappa_min, kappa_max, settings.kappa_points)
    matrices = _scan(jost_at, kappas, settings.threads)
    dets = np.array([np.linalg.det(J) for J in matrices])
    svals = [np.linalg.svd(J, compute_uv=False) for J in matrices]
    ratios = np.array([s[-1] / max(s[0], scale(kappa)) for s, kappa in zip(svals, kappas)])
    alpha = 0.5 * np.unwrap(2.0 * np.angle(dets))
    real = np.real(dets * np.exp(-1j * alpha))
    logger.debug(
        "det J(iκ) phase spread %.3e, residual %.3e",
        float(np.ptp(alpha)),
        float(np.max(np.abs(np.imag(dets * np.exp(-1j * alpha)))) / max(np.max(np.abs(dets)), 1e-300)),
    )

    def real_det(kappa: float) -> float:
        phase = np.exp(-1j * np.interp(kappa, kappas, alpha))
        return float(np.real(np.linalg.det(jost_at(kappa)) * phase))

    def ratio(kappa: float) -> float:
        s = np.linalg.svd(jost_at(kappa), compute_uv=False)
        return float(s[-1] / max(s[0], scale(kappa)))

    roots: list[float] = []
    bracketed = np.zeros(len(kappas), dtype=bool)
    for i in range(len(kappas) - 1):
        if real[i] == 0.0:
            roots.append(float(kappas[i]))
            bracketed[i] = True
        elif real[i] * real[i + 1] < 0.0:
            root, result = brentq(real_det, kappas[i], kappas[i + 1], xtol=1e-14, full_output=True, disp=False)
            if not result.converged:
                raise RootFindStallError(f"bracket [{kappas[i]:.6g}, {kappas[i + 1]:.6g}] did not converge")
            roots.append(float(root))
            bracketed[i] = bracketed[i + 1] = True

    for i in range(1, len(kappas) - 1):
        if bracketed[i - 1] or bracketed[i] or bracketed[i + 1]:
            continue
        if ratios[i] <= ratios[i - 1] and ratios[i] < ratios[i + 1]:
            result = minimize_scalar(
                ratio, bounds=(kappas[i - 1], kappas[i + 1]), method="bounded", options={"xatol": 1e-13}
            )
            if result.fun < settings.root_tol:
                roots.append(float(result.x))

    states: list[BoundState] = []
    events = event_logger_for(__name__)
    for kappa in sorted(roots):
        if states and abs(kappa - states[-1].kappa) <= 1e-9 * kappa:
            continue
        J = jost_at(kappa)
        reference = max(float(np.linalg.norm(J, 2)), scale(kappa))
        m, vectors, s = _null_space(J, reference, settings)
        if s[len(s) - m] > settings.root_tol * reference:
            raise RootFindStallError(
                f"root at κ={kappa:.12g} leaves ‖J v‖/‖J‖ = {s[len(s) - m] / reference:.3e} above root_tol"
            )
        states.append(BoundState(E=-(kappa**2), kappa=kappa, m=m, vectors=vectors))
        events.log("bound_state_found", level="debug", E=-(kappa**2), kappa=kappa, m=m)

    events.log(
        "scan_complete",
        level="debug",
        kappa_min=kappa_min,
        kappa_max=kappa_max,
        points=len(kappas),
        roots=len(states),
    )
    return states


# -- finite-difference oracle --------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    """Second-order finite differences for the form of H on [0, x_max].

    Unknowns live in the rotated frame u = M†ψ, ordered node-major
    (index i·n + j), with Dirichlet channels removed at x = 0 and u = 0 at
    x_max. The stored operator is W^{-1/2} K W^{-1/2}, with K the stiffness
    matrix of the form and W the lumped mass.
    """

    nodes: np.ndarray
    n: int
    M: np.ndarray
    matrix: sparse.csr_matrix
    sqrt_weights: np.ndarray
    kept: np.ndarray
    lower_bound: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def to_sparse(self) -> sparse.csr_matrix:
        return self.matrix

    def _band(self) -> np.ndarray:
        upper = sparse.triu(self.matrix).tocoo()
        band = np.zeros((self.n + 1, self.size), dtype=self.matrix.dtype)
        band[self.n + upper.row - upper.col, upper.col] = upper.data
        return band

    def eigenvalues(self, upper: float, lower: float | None = None) -> np.ndarray:
        """Eigenvalues in (lower, upper], ascending."""
        lower = self.lower_bound if lower is None else lower
        values = eig_banded(self._band(), lower=False, eigvals_only=True, select="v", select_range=(lower, upper))
        return np.sort(values)

    def eigenpairs(self, upper: float, lower: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues in (lower, upper] and L²-normalized eigenfunctions of shape (m, nodes, n)."""
        lower = self.lower_bound if lower is None else lower
        count = len(self.eigenvalues(upper, lower))
        if count == 0:
            return np.zeros(0), np.zeros((0, len(self.nodes), self.n), dtype=complex)
        values, vectors = eig_banded(
            self._band(), lower=False, select="v", select_range=(lower, upper), max_ev=count
        )
        functions = np.stack([self._to_physical(vectors[:, j] / self.sqrt_weights) for j in range(vectors.shape[1])])
        return values, functions

    def _to_physical(self, reduced: np.ndarray) -> np.ndarray:
        full = np.zeros(len(self.nodes) * self.n, dtype=complex)
        full[self.kept] = reduced
        return full.reshape(len(self.nodes), self.n) @ self.M.T

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply the discrete operator to samples of shape (nodes, n) in the original frame."""
        values = np.asarray(values, dtype=complex)
        if values.shape != (len(self.nodes), self.n):
            raise SpectralError(f"expected samples of shape {(len(self.nodes), self.n)}, got {values.shape}")
        rotated = (values @ self.M.conj()).reshape(-1)[self.kept]
        result = self.matrix @ (self.sqrt_weights * rotated) / self.sqrt_weights
        return self._to_physical(result)


def _cell_integrals(p: PotentialSpec, nodes: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """∫ V over the dual cells [x_i - h/2, x_i + h/2] ∩ [0, ∞) meeting the support."""
    active = np.flatnonzero(nodes - 0.5 * h < p.support_end())
    t, wt = roots_legendre(4)
    quarter = 0.25 * h
    points = []
    weights = []
    for offset in (-0.5 * h, 0.0):
        starts = nodes[active] + offset
        points.append(starts[:, None] + quarter * (t[None, :] + 1.0))
        weights.append(np.broadcast_to(quarter * wt, (len(active), len(t))).copy())
    # node 0 has only its right half-cell
    weights[0][active == 0] = 0.0
    xs = np.concatenate(points, axis=1)
    ws = np.concatenate(weights, axis=1)
    values = p.evaluate(np.clip(xs, 0.0, None).ravel()).reshape(len(active), xs.shape[1], p.n, p.n)
    return active, np.einsum("ap,apij->aij", ws, values)


def discrete_hamiltonian(
    p: PotentialSpec, bp: BoundaryPair, h: float, x_max: float, settings: Settings | None = None
) -> DiscreteHamiltonian:
    settings = settings or p.settings
    if not h > 0.0:
        raise SpectralError(f"grid step must be positive, got {h}")
    if not x_max > p.support_end():
        raise SpectralError(f"x_max={x_max} must lie beyond the potential support {p.support_end()}")
    N = int(round(x_max / h))
    n = p.n
    if N * n > settings.max_unknowns:
        raise GridTooLargeError(f"{N * n} unknowns exceed max_unknowns={settings.max_unknowns}")
    if N < 2:
        raise SpectralError("the grid needs at least two nodes")
    h = x_max / N
    nodes = h * np.arange(N)

    nf = normal_form(bp, settings)
    M, Mh = nf.M, nf.M.conj().T
    index = np.arange(N * n).reshape(N, n)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []

    diagonal = np.full((N, n), 2.0 / h)
    diagonal[0] = 1.0 / h
    diagonal[0] -= nf.cot_hat()
    rows.append(index.ravel())
    cols.append(index.ravel())
    data.append(diagonal.ravel().astype(complex))

    left, right = index[:-1].ravel(), index[1:].ravel()
    off = np.full(left.shape, -1.0 / h, dtype=complex)
    rows.extend([left, right])
    cols.extend([right, left])
    data.extend([off, off])

    active, integrals = _cell_integrals(p, nodes, h)
    if len(active):
        blocks = np.einsum("ij,ajk,kl->ail", Mh, integrals, M)
        r = np.repeat(index[active], n, axis=1)
        c = np.tile(index[active], (1, n))
        rows.append(r.ravel())
        cols.append(c.ravel())
        data.append(blocks.reshape(len(active), n * n).ravel())

    K = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(N * n, N * n)
    ).tocsr()

    kept = np.ones(N * n, dtype=bool)
    kept[index[0, nf.dirichlet]] = False
    kept = np.flatnonzero(kept)
    weights = np.full((N, n), h)
    weights[0] = 0.5 * h
    sqrt_weights = np.sqrt(weights.ravel()[kept])

    scale = sparse.diags(1.0 / sqrt_weights)
    H = (scale @ K[kept][:, kept] @ scale).tocsr()
    if np.allclose(H.data.imag, 0.0):
        H = H.real.tocsr()

    cot = nf.cot_hat()
    boundary = float(np.max(cot[cot > 0.0], initial=0.0))
    lower_bound = -2.0 * (p.sup_norm() + boundary**2 + 1.0)
    logger.debug("discrete hamiltonian N=%s n=%s h=%.3g unknowns=%s", N, n, h, len(kept))
    return DiscreteHamiltonian(
        nodes=nodes, n=n, M=M, matrix=H, sqrt_weights=sqrt_weights, kept=kept, lower_bound=lower_bound
    )


# -- spectral shift function ---------------------------------------------------


def free_ssf(bp: BoundaryPair, E_grid: Sequence[float] | np.ndarray, settings: Settings | None = None) -> np.ndarray:
    """Closed-form ξ(E; H_{0,A,B}, H_0) relative to the Neumann Laplacian."""
    nf = normal_form(bp, settings) if settings is not None else normal_form(bp)
    gammas = nf.gammas()
    E = np.atleast_1d(np.asarray(E_grid, dtype=float))
    out = np.empty(len(E))
    for i, energy in enumerate(E):
        if energy > 0.0:
            k = np.sqrt(energy)
            value = 0.5 * nf.n_D
            for gamma in gammas:
                value += (0.5 if gamma > 0.0 else -0.5) - np.arctan(k / gamma) / np.pi
            out[i] = value
        else:
            out[i] = -float(np.count_nonzero((gammas < 0.0) & (-(gammas**2) < energy)))
    return out


def _branch_grid(k_values: np.ndarray, settings: Settings, points: int = 200) -> np.ndarray:
    k_lo = float(np.min(k_values))
    k_hi = max(settings.anchor_k, float(np.max(k_values)))
    return np.unique(np.concatenate([k_values, np.geomspace(k_lo, k_hi, points)]))


def _theta(p: PotentialSpec, bp: BoundaryPair, ks: np.ndarray, n_d: int, settings: Settings):
    samples = smatrix_sweep(p, bp, ks, settings)
    theta = det_arg_branch(
        samples, n_d, refine=lambda k: scattering_matrix(p, bp, k, settings), settings=settings
    )
    return samples, theta


def ssf(
    p: PotentialSpec,
    bp: BoundaryPair,
    E_grid: Sequence[float] | np.ndarray,
    *,
    reference: BoundaryPair | None = None,
    states: list[BoundState] | None = None,
    settings: Settings | None = None,
) -> list[SsfSample]:
    """ξ(E; H_{A,B}, H_0) on E_grid; with `reference`, ξ(E; H_{A,B}, H_{0,ref}) by the chain rule.

    E ≤ 0 counts bound states strictly below E; E > 0 uses -Θ(√E)/2π.
    """
    settings = settings or p.settings
    E = np.asarray(E_grid, dtype=float)
    nf = normal_form(bp, settings)
    xi = np.zeros(len(E))
    residuals: list[float | None] = [None] * len(E)

    negative = E <= 0.0
    if np.any(negative):
        if states is None:
            states = bound_states(p, bp, settings=settings)
        energies = np.array([s.E for s in states])
        counts = np.array([s.m for s in states])
        for i in np.flatnonzero(negative):
            xi[i] = -float(np.sum(counts[energies < E[i]]))

    positive = np.flatnonzero(~negative)
    if len(positive):
        k_values = np.sqrt(E[positive])
        ks = _branch_grid(k_values, settings)
        samples, theta = _theta(p, bp, ks, nf.n_D, settings)
        where = np.searchsorted(ks, k_values)
        for i, j in zip(positive, where):
            xi[i] = -theta[j] / (2.0 * np.pi)
            residuals[i] = float(abs(samples[j].det - np.exp(-2j * np.pi * xi[i])))

    if reference is not None:
        xi = xi - free_ssf(reference, E, settings)
    return [
        SsfSample(E=float(e), xi=float(x) + 0.0, birman_krein=r) for e, x, r in zip(E, xi, residuals)
    ]


def _richardson(small: Sequence[Any]) -> Any:
    """Second-order extrapolation to k = 0 from values at k, 2k, 4k (smallest first)."""
    return (8.0 * small[0] - 6.0 * small[1] + small[2]) / 3.0


def levinson_check(
    p: PotentialSpec,
    bp: BoundaryPair,
    *,
    states: list[BoundState] | None = None,
    settings: Settings | None = None,
) -> LevinsonReport:
    settings = settings or p.settings
    nf = normal_form(bp, settings)
    k_large, k_mid, k_small = settings.extrap_ks
    small = [scattering_matrix(p, bp, k, settings) for k in (k_small, k_mid, k_large)]
    spread = max(
        float(np.linalg.norm(a.S - b.S, 2)) for i, a in enumerate(small) for b in small[i + 1 :]
    )
    if spread > settings.extrap_tol:
        raise ExtrapolationUnstableError(
            f"S(k) varies by {spread:.3e} over k in {settings.extrap_ks}, above extrap_tol={settings.extrap_tol}"
        )
    S0 = _richardson([s.S for s in small])
    eigenvalues = np.linalg.eigvals(S0)
    mu = int(np.count_nonzero(np.abs(eigenvalues - 1.0) <= settings.eig_tol))

    ks = np.unique(np.concatenate([[k_small, k_mid], np.geomspace(k_large, settings.anchor_k, 300)]))
    _, theta = _theta(p, bp, ks, nf.n_D, settings)
    xi0 = -_richardson(theta[:3]) / (2.0 * np.pi) + 0.0

    if states is None:
        states = bound_states(p, bp, settings=settings)
    N = sum(s.m for s in states)
    predicted = 0.5 * (p.n - mu) - N
    report = LevinsonReport(
        xi0_plus=float(xi0),
        n=p.n,
        mu=mu,
        N=N,
        defect=float(abs(xi0 - predicted)),
        predicted=float(predicted),
        S0_eigenvalues=eigenvalues,
    )
    event_logger_for(__name__).log(
        "extrapolation", level="debug", spread=spread, mu=mu, xi0_plus=report.xi0_plus
    )
    return report


def trace_formula_check(
    p: PotentialSpec,
    bp: BoundaryPair,
    f: Callable[[np.ndarray], np.ndarray] | None = None,
    fprime: Callable[[np.ndarray], np.ndarray] | None = None,
    *,
    c: float = 1.0,
    h: float = 1e-3,
    x_max: float = 200.0,
    k_points: int = 400,
    states: list[BoundState] | None = None,
    settings: Settings | None = None,
) -> TraceReport:
    """Tr(f(H) - f(H_0)) from the discrete oracle against ∫ ξ f' dE.

    The default test function is f(E) = 1/(E + c). Eigenvalues above e_cut
    are replaced by the tail estimate -f(E_cut)·[(N - N_0)(E_cut) + n_D/2].
    """
    settings = settings or p.settings
    resolvent_type = f is None
    if f is None:
        if fprime is not None:
            raise SpectralError("fprime given without f")

        def f(E):
            return 1.0 / (np.asarray(E) + c)

        def fprime(E):
            return -1.0 / (np.asarray(E) + c) ** 2

    elif fprime is None:
        raise SpectralError("a custom f needs its derivative fprime")

    nf = normal_form(bp, settings)
    H = discrete_hamiltonian(p, bp, h, x_max, settings)
    H0 = discrete_hamiltonian(PotentialSpec.zero(p.n), neumann(p.n), h, x_max, settings)
    e_cut = settings.e_cut
    values = H.eigenvalues(e_cut)
    reference = H0.eigenvalues(e_cut)
    if resolvent_type and len(values) and values[0] + c <= 0.0:
        raise SpectralError(f"c={c} must exceed -E_1={-values[0]:.6g}")
    tail = -float(f(e_cut)) * ((len(values) - len(reference)) + 0.5 * nf.n_D)
    lhs = float(np.sum(f(values)) - np.sum(f(reference))) + tail

    if states is None:
        states = bound_states(p, bp, settings=settings)
    rhs = -sum(s.m * (float(f(0.0)) - float(f(s.E))) for s in states)

    ks = np.geomspace(settings.kappa_min, settings.anchor_k, k_points)
    _, theta = _theta(p, bp, ks, nf.n_D, settings)
    xi = -theta / (2.0 * np.pi)
    rhs += float(simpson(xi * fprime(ks**2) * 2.0 * ks, x=ks))
    rhs += float(xi[0] * (f(ks[0] ** 2) - f(0.0)))
    rhs += -0.5 * nf.n_D * float(f(ks[-1] ** 2))

    gap = abs(lhs - rhs)
    defect = 0.0 if gap < 1e-12 else gap / max(abs(rhs), 1e-12)
    return TraceReport(
        lhs=lhs, rhs=rhs, defect=float(defect), eigenvalue_count=len(values), reference_count=len(reference)
    )
