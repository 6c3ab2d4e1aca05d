"""
Boundary-condition pairs (A, B) for the vertex condition -B†ψ(0) + A†ψ'(0) = 0.

The normal form is extracted from the zero-potential scattering matrix at k = 1,
U = -(B + iA)(B - iA)⁻¹, whose eigenvalues are -exp(-2iθ_j).
"""

from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.linalg import schur

from .config import DEFAULT_SETTINGS, Settings
from .errors import (
    DimensionMismatchError,
    InvalidBoundaryConditionError,
    NearDegenerateWarning,
    NonFiniteError,
    NotUnitaryError,
    SingularTransformError,
)
from .logging_utils import event_logger_for

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * np.pi


def _as_square(name: str, matrix: Any) -> np.ndarray:
    arr = np.array(matrix, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


def _pair(A: Any, B: Any) -> tuple[np.ndarray, np.ndarray]:
    A = _as_square("A", A)
    B = _as_square("B", B)
    if A.shape != B.shape:
        raise DimensionMismatchError(f"A and B differ in shape: {A.shape} vs {B.shape}")
    return A, B


@dataclass(frozen=True)
class BoundaryPair:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self) -> None:
        A, B = _pair(self.A, self.B)
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    hermiticity_defect: float
    min_eig: float


@dataclass(frozen=True)
class NormalForm:
    """Diagonal representation A = M Ã T₂ M† T₁, B = M B̃ T₂ M† T₁.

    Channels are ordered mixed first, then Dirichlet (θ = π), then Neumann
    (θ = π/2). T₁ is always the identity here; the split is not unique.
    """

    M: np.ndarray
    thetas: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    n_M: int
    n_D: int
    n_N: int

    @property
    def n(self) -> int:
        return len(self.thetas)

    @property
    def a_tilde(self) -> np.ndarray:
        return np.diag(-np.sin(self.thetas)).astype(complex)

    @property
    def b_tilde(self) -> np.ndarray:
        return np.diag(np.cos(self.thetas)).astype(complex)

    @property
    def mixed(self) -> slice:
        return slice(0, self.n_M)

    @property
    def dirichlet(self) -> slice:
        return slice(self.n_M, self.n_M + self.n_D)

    @property
    def neumann(self) -> slice:
        return slice(self.n_M + self.n_D, self.n)

    def cot_hat(self) -> np.ndarray:
        """cot θ_j on mixed channels, zero on Dirichlet and Neumann channels."""
        out = np.zeros(self.n)
        out[self.mixed] = 1.0 / np.tan(self.thetas[self.mixed])
        return out

    def gammas(self) -> np.ndarray:
        """γ_j = -cot θ_j for the mixed channels (ψ'(0) = γ ψ(0))."""
        return -self.cot_hat()[self.mixed]

    def boundary_form(self) -> np.ndarray:
        """M Θ M† with Θ = diag(cot̂ θ_j), the vertex term of the quadratic form."""
        return self.M @ np.diag(self.cot_hat()) @ self.M.conj().T


def _tolerance_scale(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2))


def validate_bc(A: Any, B: Any, settings: Settings = DEFAULT_SETTINGS) -> ValidationReport:
    A, B = _pair(A, B)
    product = A.conj().T @ B
    defect = float(np.linalg.norm(product - product.conj().T, 2))
    hermitian = defect <= settings.herm_tol * max(_tolerance_scale(product), np.finfo(float).tiny)

    gram = A.conj().T @ A + B.conj().T @ B
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    min_eig = float(eigs[0])
    positive = min_eig > settings.pd_tol * float(eigs[-1]) and eigs[-1] > 0.0

    return ValidationReport(ok=bool(hermitian and positive), hermiticity_defect=defect, min_eig=min_eig)


def free_unitary(bp: BoundaryPair, settings: Settings = DEFAULT_SETTINGS) -> np.ndarray:
    """U = -(B + iA)(B - iA)⁻¹, i.e. S₀(1) for zero potential."""
    denominator = bp.B - 1j * bp.A
    if np.linalg.cond(denominator) > settings.cond_max:
        raise InvalidBoundaryConditionError("B - iA is numerically singular")
    # X D = -(B + iA)  <=>  Dᵀ Xᵀ = -(B + iA)ᵀ
    return -np.linalg.solve(denominator.T, (bp.B + 1j * bp.A).T).T


def _angles_from_eigenvalues(eigenvalues: np.ndarray, settings: Settings) -> np.ndarray:
    thetas = np.mod(-0.5 * np.angle(-eigenvalues), np.pi)
    thetas = np.where(thetas <= settings.angle_tol, np.pi, thetas)
    thetas = np.where(np.abs(thetas - np.pi) <= settings.angle_tol, np.pi, thetas)
    thetas = np.where(np.abs(thetas - HALF_PI) <= settings.angle_tol, HALF_PI, thetas)
    return thetas


def _channel_category(theta: float) -> int:
    if theta == np.pi:
        return 1
    if theta == HALF_PI:
        return 2
    return 0


def _normalize_phase(vector: np.ndarray) -> np.ndarray:
    lead = np.flatnonzero(np.abs(vector) > 1e-8)
    if len(lead) == 0:
        return vector
    entry = vector[lead[0]]
    return vector * (abs(entry) / entry)


def _ordering_key(theta: float, vector: np.ndarray) -> tuple:
    entries = tuple((round(float(v.real), 10), round(float(v.imag), 10)) for v in vector)
    return (_channel_category(theta), round(float(theta), 12), entries)


def _warn_near_degenerate(thetas: np.ndarray, settings: Settings) -> None:
    ordered = np.sort(thetas)
    gaps = np.diff(ordered)
    close = gaps[(gaps > settings.angle_tol) & (gaps < settings.cluster_tol)]
    if len(close):
        event_logger_for(__name__).log("near_degenerate", level="warning", min_gap=float(close.min()))
        warnings.warn(
            f"eigenvalue clusters of U separated by {close.min():.3e} < cluster_tol",
            NearDegenerateWarning,
            stacklevel=3,
        )


def normal_form(bp: BoundaryPair, settings: Settings = DEFAULT_SETTINGS) -> NormalForm:
    report = validate_bc(bp.A, bp.B, settings)
    if not report.ok:
        raise InvalidBoundaryConditionError(
            f"invalid boundary pair (hermiticity_defect={report.hermiticity_defect:.3e}, min_eig={report.min_eig:.3e})"
        )

    U = free_unitary(bp, settings)
    n = bp.n
    unitarity = float(np.linalg.norm(U.conj().T @ U - np.eye(n), 2))
    if unitarity > max(settings.unitary_tol, 1e3 * np.finfo(float).eps * np.linalg.cond(bp.B - 1j * bp.A)):
        raise InvalidBoundaryConditionError(f"U is not unitary (defect {unitarity:.3e})")

    # U is normal, so the complex Schur form is diagonal and Z is unitary
    T, Z = schur(U, output="complex")
    eigenvalues = np.diag(T)
    thetas = _angles_from_eigenvalues(eigenvalues, settings)
    _warn_near_degenerate(thetas, settings)

    columns = [_normalize_phase(Z[:, j]) for j in range(n)]
    order = sorted(range(n), key=lambda j: _ordering_key(thetas[j], columns[j]))
    M = np.column_stack([columns[j] for j in order])
    thetas = thetas[order]

    categories = [_channel_category(t) for t in thetas]
    n_M, n_D, n_N = categories.count(0), categories.count(1), categories.count(2)

    a_tilde = np.diag(-np.sin(thetas))
    b_tilde = np.diag(np.cos(thetas))
    Mh = M.conj().T
    # Ã² + B̃² = I, so W := T₂M† = Ã M†A + B̃ M†B
    W = a_tilde @ Mh @ bp.A + b_tilde @ Mh @ bp.B
    T2 = W @ M
    nf = NormalForm(M=M, thetas=thetas, T1=np.eye(n, dtype=complex), T2=T2, n_M=n_M, n_D=n_D, n_N=n_N)

    rebuilt = reconstruct(nf)
    scale = max(_tolerance_scale(bp.A) + _tolerance_scale(bp.B), 1.0)
    error = float(np.linalg.norm(rebuilt.A - bp.A, 2) + np.linalg.norm(rebuilt.B - bp.B, 2))
    if error > 1e-8 * scale * max(1.0, np.linalg.cond(T2)):
        raise InvalidBoundaryConditionError(f"normal form does not reconstruct (A, B): error {error:.3e}")
    logger.debug("normal form n_M=%s n_D=%s n_N=%s thetas=%s", n_M, n_D, n_N, thetas)
    return nf


def reconstruct(nf: NormalForm) -> BoundaryPair:
    right = nf.T2 @ nf.M.conj().T @ nf.T1
    return BoundaryPair(nf.M @ nf.a_tilde @ right, nf.M @ nf.b_tilde @ right)


def classify(bp: BoundaryPair, settings: Settings = DEFAULT_SETTINGS) -> tuple[int, int, int]:
    nf = normal_form(bp, settings)
    return nf.n_M, nf.n_D, nf.n_N


def transform_bc(bp: BoundaryPair, T: Any, settings: Settings = DEFAULT_SETTINGS) -> BoundaryPair:
    """Right-multiply by an invertible T; the operator is unchanged."""
    T = _as_square("T", T)
    if T.shape != bp.A.shape:
        raise DimensionMismatchError("T must match the boundary pair dimension")
    if np.linalg.cond(T) > settings.cond_max:
        raise SingularTransformError("T is numerically singular")
    return BoundaryPair(bp.A @ T, bp.B @ T)


def conjugate_bc(bp: BoundaryPair, M: Any, settings: Settings = DEFAULT_SETTINGS) -> BoundaryPair:
    M = _as_square("M", M)
    if M.shape != bp.A.shape:
        raise DimensionMismatchError("M must match the boundary pair dimension")
    if np.linalg.norm(M.conj().T @ M - np.eye(bp.n), 2) > settings.unitary_tol:
        raise NotUnitaryError("conjugating matrix is not unitary")
    Mh = M.conj().T
    return BoundaryPair(M @ bp.A @ Mh, M @ bp.B @ Mh)


def forward_bc(M: Any, thetas: Any, T: Any | None = None) -> BoundaryPair:
    """Build (M Ã M† T, M B̃ M† T) from a unitary M and angles θ_j ∈ (0, π]."""
    M = _as_square("M", M)
    thetas = np.asarray(thetas, dtype=float)
    Mh = M.conj().T
    A = M @ np.diag(-np.sin(thetas)) @ Mh
    B = M @ np.diag(np.cos(thetas)) @ Mh
    if T is not None:
        T = _as_square("T", T)
        A, B = A @ T, B @ T
    return BoundaryPair(A, B)


def dirichlet(n: int) -> BoundaryPair:
    return BoundaryPair(np.zeros((n, n)), np.eye(n))


def neumann(n: int) -> BoundaryPair:
    return BoundaryPair(-np.eye(n), np.zeros((n, n)))


def kirchhoff(n: int) -> BoundaryPair:
    """Continuity at the vertex plus vanishing sum of outgoing derivatives."""
    C = np.zeros((n, n))
    D = np.zeros((n, n))
    for i in range(n - 1):
        C[i, i], C[i, i + 1] = 1.0, -1.0
    D[n - 1, :] = 1.0
    # rows read C ψ(0) + D ψ'(0) = 0, so B = -C† and A = D†
    return BoundaryPair(D.T, -C.T)


def robin(n: int, theta: float) -> BoundaryPair:
    thetas = np.full(n, float(theta))
    return BoundaryPair(np.diag(-np.sin(thetas)), np.diag(np.cos(thetas)))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_invertible(n: int, rng: np.random.Generator, cond_max: float = 1e3) -> np.ndarray:
    while True:
        T = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        if np.linalg.cond(T) <= cond_max:
            return T


def random_bc(n: int, rng: np.random.Generator, *, with_transform: bool = True) -> BoundaryPair:
    """A random valid pair mixing Dirichlet, Neumann and mixed channels."""
    choices = rng.integers(0, 3, size=n)
    thetas = np.where(choices == 1, np.pi, np.where(choices == 2, HALF_PI, rng.uniform(0.2, 2.9, size=n)))
    T = random_invertible(n, rng) if with_transform else None
    return forward_bc(random_unitary(n, rng), thetas, T)


_BUILTIN_PATTERN = re.compile(r"^\s*(\w+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def builtin_bc(name: str, n: int) -> BoundaryPair:
    """Expand "dirichlet", "neumann", "kirchhoff(n)" or "robin(theta)"."""
    match = _BUILTIN_PATTERN.match(name)
    if not match:
        raise InvalidBoundaryConditionError(f"cannot parse boundary condition {name!r}")
    kind, arg = match.group(1).lower(), match.group(2)
    if kind == "dirichlet":
        return dirichlet(n)
    if kind == "neumann":
        return neumann(n)
    if kind == "kirchhoff":
        size = int(arg) if arg else n
        if size != n:
            raise DimensionMismatchError(f"kirchhoff({size}) does not match n={n}")
        return kirchhoff(size)
    if kind == "robin":
        if not arg:
            raise InvalidBoundaryConditionError("robin needs an angle, e.g. robin(1.0)")
        return robin(n, float(arg))
    raise InvalidBoundaryConditionError(f"unknown builtin boundary condition {kind!r}")


def _matrix_from_json(data: Any, n: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape == (n * n, 2):
        return (arr[:, 0] + 1j * arr[:, 1]).reshape(n, n)
    if arr.shape == (n, n, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (n, n):
        return arr.astype(complex)
    raise DimensionMismatchError(f"cannot read a {n}x{n} matrix from shape {arr.shape}")


def bc_from_spec(spec: str | Mapping[str, Any], n: int) -> BoundaryPair:
    """Parse a builtin name or a JSON object {"n", "A", "B"} (row-major [re, im] pairs)."""
    if isinstance(spec, str):
        return builtin_bc(spec, n)
    if "builtin" in spec:
        return builtin_bc(str(spec["builtin"]), int(spec.get("n", n)))
    size = int(spec.get("n", n))
    if size != n:
        raise DimensionMismatchError(f"boundary pair n={size} does not match potential n={n}")
    try:
        return BoundaryPair(_matrix_from_json(spec["A"], size), _matrix_from_json(spec["B"], size))
    except KeyError as exc:
        raise InvalidBoundaryConditionError(f"boundary pair is missing {exc.args[0]!r}") from exc


def bc_to_dict(bp: BoundaryPair) -> dict[str, Any]:
    def pairs(matrix: np.ndarray) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in matrix.ravel()]

    return {"n": bp.n, "A": pairs(bp.A), "B": pairs(bp.B)}
