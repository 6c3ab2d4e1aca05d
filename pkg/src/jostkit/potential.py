"""
Self-adjoint matrix potentials on the half line.

A potential is a finite list of pieces covering [0, x_max]; it is exactly zero
beyond the last piece. Piecewise-constant and sampled (linearly interpolated)
models map one-to-one onto pieces. The built-in families are a square well, a
truncated exponential tail and a 2x2 coupled well.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import roots_legendre

from .config import DEFAULT_SETTINGS, Settings
from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteError,
    NonHermitianError,
    NotIntegrableError,
    PotentialError,
)

logger = logging.getLogger(__name__)

BUILTIN_FAMILIES = ("square_well", "exp_decay", "coupled_well")


def _exp_moment(c: complex, a: float, b: float) -> complex:
    """Return ∫_a^b e^{c y} dy, stable for small |c (b - a)|."""
    width = b - a
    z = c * width
    if abs(z) < 1e-3:
        series = width * (1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0)
        return complex(np.exp(c * a) * series)
    return complex((np.exp(c * b) - np.exp(c * a)) / c)


def _exp_first_moment(c: complex, a: float, b: float) -> complex:
    """Return ∫_a^b (y - a) e^{c y} dy."""
    width = b - a
    z = c * width
    if abs(z) < 1e-3:
        series = width**2 * (0.5 + z / 3.0 + z * z / 8.0 + z**3 / 30.0)
        return complex(np.exp(c * a) * series)
    ecw = np.exp(z)
    return complex(np.exp(c * a) * (width * ecw / c - (ecw - 1.0) / (c * c)))


class Piece(ABC):
    """Potential restricted to [start, end]."""

    start: float
    end: float

    @abstractmethod
    def value(self, x: float) -> np.ndarray: ...

    def values(self, xs: np.ndarray) -> np.ndarray:
        return np.stack([self.value(float(x)) for x in xs]) if len(xs) else np.zeros((0,) + self.shape)

    @abstractmethod
    def exp_integral(self, c: complex) -> np.ndarray:
        """Return ∫ e^{c y} V(y) dy over the piece."""

    @property
    @abstractmethod
    def shape(self) -> tuple[int, int]: ...

    def samples(self) -> np.ndarray:
        """Representative matrices used for the Hermiticity check."""
        return self.values(np.array([self.start, 0.5 * (self.start + self.end), self.end]))

    @abstractmethod
    def conjugate(self, M: np.ndarray) -> "Piece": ...


@dataclass(frozen=True)
class ConstantPiece(Piece):
    start: float
    end: float
    matrix: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def value(self, x: float) -> np.ndarray:
        return self.matrix

    def values(self, xs: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.matrix, (len(xs),) + self.matrix.shape).copy()

    def exp_integral(self, c: complex) -> np.ndarray:
        return _exp_moment(c, self.start, self.end) * self.matrix

    def samples(self) -> np.ndarray:
        return self.matrix[None]

    def conjugate(self, M: np.ndarray) -> "ConstantPiece":
        return ConstantPiece(self.start, self.end, M @ self.matrix @ M.conj().T)


@dataclass(frozen=True)
class LinearPiece(Piece):
    start: float
    end: float
    left: np.ndarray
    right: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.shape

    def value(self, x: float) -> np.ndarray:
        t = (x - self.start) / (self.end - self.start)
        return self.left + t * (self.right - self.left)

    def values(self, xs: np.ndarray) -> np.ndarray:
        t = ((np.asarray(xs, dtype=float) - self.start) / (self.end - self.start))[:, None, None]
        return self.left[None] + t * (self.right - self.left)[None]

    def exp_integral(self, c: complex) -> np.ndarray:
        width = self.end - self.start
        e0 = _exp_moment(c, self.start, self.end)
        e1 = _exp_first_moment(c, self.start, self.end) / width
        return e0 * self.left + e1 * (self.right - self.left)

    def samples(self) -> np.ndarray:
        return np.stack([self.left, self.right])

    def conjugate(self, M: np.ndarray) -> "LinearPiece":
        Mh = M.conj().T
        return LinearPiece(self.start, self.end, M @ self.left @ Mh, M @ self.right @ Mh)


@dataclass(frozen=True)
class ExpPiece(Piece):
    """V(x) = -strength * exp(-rate x) * coupling on [start, end]."""

    start: float
    end: float
    strength: float
    rate: float
    coupling: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.coupling.shape

    def value(self, x: float) -> np.ndarray:
        return -self.strength * math.exp(-self.rate * x) * self.coupling

    def values(self, xs: np.ndarray) -> np.ndarray:
        scale = -self.strength * np.exp(-self.rate * np.asarray(xs, dtype=float))
        return scale[:, None, None] * self.coupling[None]

    def exp_integral(self, c: complex) -> np.ndarray:
        return -self.strength * _exp_moment(c - self.rate, self.start, self.end) * self.coupling

    def conjugate(self, M: np.ndarray) -> "ExpPiece":
        return ExpPiece(self.start, self.end, self.strength, self.rate, M @ self.coupling @ M.conj().T)


@dataclass(frozen=True)
class PiecewiseConstant:
    """values[i] holds on [breakpoints[i-1], breakpoints[i]) with breakpoints[-1] := 0."""

    breakpoints: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class Sampled:
    grid: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"


@dataclass(frozen=True)
class Builtin:
    family: str
    params: Mapping[str, Any] = field(default_factory=dict)


Model = PiecewiseConstant | Sampled | Builtin


@dataclass(frozen=True)
class PotentialReport:
    hermiticity_defect: float
    l1_norm: float
    first_moment: float


@dataclass(frozen=True)
class MomentData:
    """Q1 = (1/2)∫V and Q2(k) = (1/2)∫e^{2iky}V(y)dy."""

    Q1: np.ndarray
    pieces: tuple[Piece, ...]

    def Q2(self, k: complex) -> np.ndarray:
        n = self.Q1.shape[0]
        total = np.zeros((n, n), dtype=complex)
        for piece in self.pieces:
            total += piece.exp_integral(2j * k)
        return 0.5 * total


@dataclass(frozen=True)
class PotentialSpec:
    n: int
    model: Model
    settings: Settings = field(default=DEFAULT_SETTINGS, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DimensionMismatchError("channel count n must be positive")
        model = self.model
        if isinstance(model, PiecewiseConstant):
            _check_shapes(model.values, self.n, "values")
            breaks = np.asarray(model.breakpoints, dtype=float)
            if len(breaks) != len(model.values):
                raise DimensionMismatchError("piecewise model needs one value per breakpoint")
            if len(breaks) and (breaks[0] <= 0.0 or np.any(np.diff(breaks) <= 0.0)):
                raise PotentialError("breakpoints must be positive and strictly increasing")
        elif isinstance(model, Sampled):
            _check_shapes(model.values, self.n, "values")
            grid = np.asarray(model.grid, dtype=float)
            if len(grid) != len(model.values) or len(grid) < 2:
                raise DimensionMismatchError("sampled model needs one matrix per grid point (at least two)")
            if grid[0] < 0.0 or np.any(np.diff(grid) <= 0.0):
                raise PotentialError("sample grid must be non-negative and strictly increasing")
            if model.interpolation != "linear":
                raise PotentialError(f"unsupported interpolation {model.interpolation!r}")
        elif isinstance(model, Builtin):
            if model.family not in BUILTIN_FAMILIES:
                raise PotentialError(f"unknown builtin family {model.family!r}")
            if model.family == "coupled_well" and self.n != 2:
                raise DimensionMismatchError("coupled_well is a two-channel family")
        else:
            raise PotentialError(f"unsupported potential model {type(model).__name__}")
        object.__setattr__(self, "_pieces", tuple(_build_pieces(self)))

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "PotentialSpec":
        return cls(n, PiecewiseConstant(np.zeros(0), np.zeros((0, n, n), dtype=complex)))

    @classmethod
    def piecewise(cls, breakpoints: Sequence[float], values: Sequence[Any]) -> "PotentialSpec":
        arr = _as_matrix_stack(values)
        return cls(arr.shape[1], PiecewiseConstant(np.asarray(breakpoints, dtype=float), arr))

    @classmethod
    def sampled(cls, grid: Sequence[float], values: Sequence[Any]) -> "PotentialSpec":
        arr = _as_matrix_stack(values)
        return cls(arr.shape[1], Sampled(np.asarray(grid, dtype=float), arr))

    @classmethod
    def builtin(cls, family: str, n: int = 1, settings: Settings = DEFAULT_SETTINGS, **params: Any) -> "PotentialSpec":
        return cls(n, Builtin(family, dict(params)), settings)

    # -- evaluation ---------------------------------------------------------

    @property
    def pieces(self) -> tuple[Piece, ...]:
        return self._pieces  # type: ignore[attr-defined]

    def support_end(self) -> float:
        return self.pieces[-1].end if self.pieces else 0.0

    def breakpoints(self) -> np.ndarray:
        """Knots where V may fail to be smooth, including 0 and the support end."""
        knots = {0.0}
        for piece in self.pieces:
            knots.add(piece.start)
            knots.add(piece.end)
        return np.array(sorted(knots))

    def piece_at(self, x: float) -> Piece | None:
        for piece in self.pieces:
            if piece.start <= x < piece.end:
                return piece
        return None

    def evaluate(self, xs: Sequence[float] | np.ndarray) -> np.ndarray:
        """Return V at the given points as an array of shape (len(xs), n, n)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros((len(xs), self.n, self.n), dtype=complex)
        for piece in self.pieces:
            mask = (xs >= piece.start) & (xs < piece.end)
            if np.any(mask):
                out[mask] = piece.values(xs[mask])
        return out

    def sup_norm(self) -> float:
        best = 0.0
        for piece in self.pieces:
            if isinstance(piece, ExpPiece):
                best = max(best, abs(piece.strength) * math.exp(-piece.rate * piece.start) * np.linalg.norm(piece.coupling, 2))
            else:
                best = max(best, max(np.linalg.norm(m, 2) for m in piece.samples()))
        return float(best)

    def conjugate(self, M: np.ndarray) -> "PotentialSpec":
        """Return the potential M V M† (M unitary)."""
        M = np.asarray(M, dtype=complex)
        if M.shape != (self.n, self.n):
            raise DimensionMismatchError("conjugating matrix has the wrong shape")
        Mh = M.conj().T
        model = self.model
        if isinstance(model, PiecewiseConstant):
            values = np.einsum("ij,pjk,kl->pil", M, model.values, Mh)
            return PotentialSpec(self.n, PiecewiseConstant(model.breakpoints, values), self.settings)
        if isinstance(model, Sampled):
            values = np.einsum("ij,pjk,kl->pil", M, model.values, Mh)
            return PotentialSpec(self.n, Sampled(model.grid, values, model.interpolation), self.settings)
        if model.family == "exp_decay":
            params = dict(model.params)
            params["coupling"] = M @ _coupling(params, self.n) @ Mh
            return PotentialSpec(self.n, Builtin("exp_decay", params), self.settings)
        piece_list = [p for p in self.pieces]
        breaks = np.array([p.end for p in piece_list])
        values = np.stack([p.conjugate(M).matrix for p in piece_list])
        return PotentialSpec(self.n, PiecewiseConstant(breaks, values), self.settings)

    def with_settings(self, settings: Settings) -> "PotentialSpec":
        return PotentialSpec(self.n, self.model, settings)


def _check_shapes(values: np.ndarray, n: int, name: str) -> None:
    arr = np.asarray(values)
    if arr.ndim != 3 or arr.shape[1:] != (n, n):
        raise DimensionMismatchError(f"{name} must be a stack of {n}x{n} matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")


def _as_matrix_stack(values: Sequence[Any]) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    if arr.ndim != 3:
        raise DimensionMismatchError("potential values must be scalars or square matrices")
    return arr


def _param(params: Mapping[str, Any], family: str, name: str, default: Any, cast: Callable[[Any], Any] = float) -> Any:
    value = params.get(name, default)
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(family, name, value) from exc


def _coupling(params: Mapping[str, Any], n: int) -> np.ndarray:
    if params.get("coupling") is None:
        return np.eye(n, dtype=complex)
    arr = _param(params, "exp_decay", "coupling", None, lambda value: np.asarray(value, dtype=complex))
    if arr.shape != (n, n):
        raise DimensionMismatchError("exp_decay coupling must be n x n")
    return arr


def _depth_pair(value: Any) -> tuple[float, float]:
    d1, d2 = value
    return float(d1), float(d2)


def _build_pieces(p: PotentialSpec) -> list[Piece]:
    model = p.model
    n = p.n
    if isinstance(model, PiecewiseConstant):
        values = np.asarray(model.values, dtype=complex)
        pieces: list[Piece] = []
        start = 0.0
        for end, matrix in zip(np.asarray(model.breakpoints, dtype=float), values):
            pieces.append(ConstantPiece(float(start), float(end), matrix))
            start = end
        return pieces
    if isinstance(model, Sampled):
        grid = np.asarray(model.grid, dtype=float)
        values = np.asarray(model.values, dtype=complex)
        lead: list[Piece] = [ConstantPiece(0.0, float(grid[0]), np.zeros((n, n), dtype=complex))] if grid[0] > 0.0 else []
        return lead + [
            LinearPiece(float(grid[i]), float(grid[i + 1]), values[i], values[i + 1])
            for i in range(len(grid) - 1)
        ]

    params = dict(model.params)
    if model.family == "square_well":
        depth = _param(params, "square_well", "depth", 1.0)
        width = _param(params, "square_well", "width", 1.0)
        if width <= 0.0:
            raise PotentialError("square_well width must be positive")
        return [ConstantPiece(0.0, width, -depth * np.eye(n, dtype=complex))]
    if model.family == "coupled_well":
        d1, d2 = _param(params, "coupled_well", "depths", (1.0, 1.0), _depth_pair)
        c = _param(params, "coupled_well", "coupling", 0.5, complex)
        width = _param(params, "coupled_well", "width", 1.0)
        if width <= 0.0:
            raise PotentialError("coupled_well width must be positive")
        matrix = np.array([[-d1, c], [np.conj(c), -d2]], dtype=complex)
        return [ConstantPiece(0.0, width, matrix)]

    strength = _param(params, "exp_decay", "strength", 1.0)
    rate = _param(params, "exp_decay", "rate", 1.0)
    if rate <= 0.0:
        raise NotIntegrableError("exp_decay rate must be positive for an integrable tail")
    coupling = _coupling(params, n)
    scale = abs(strength) * np.linalg.norm(coupling, 2)
    if scale == 0.0:
        return []
    # truncate where the remaining mass drops below tail_mass
    x_max = max(math.log(scale / (rate * p.settings.tail_mass)) / rate, 0.0)
    if "x_max" in params:
        x_max = _param(params, "exp_decay", "x_max", None)
    n_pieces = max(1, int(math.ceil(x_max / 2.0)))
    edges = np.linspace(0.0, x_max, n_pieces + 1)
    return [ExpPiece(float(a), float(b), strength, rate, coupling) for a, b in zip(edges[:-1], edges[1:])]


def gauss_rule(p: PotentialSpec, *, order: int = 16, max_width: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss–Legendre nodes and weights over the support of p."""
    nodes, weights = roots_legendre(order)
    xs: list[np.ndarray] = []
    ws: list[np.ndarray] = []
    for piece in p.pieces:
        cells = max(1, int(math.ceil((piece.end - piece.start) / max_width)))
        edges = np.linspace(piece.start, piece.end, cells + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            xs.append(0.5 * (a + b) + half * nodes)
            ws.append(half * weights)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def integrate(p: PotentialSpec, integrand: Callable[[np.ndarray, np.ndarray], np.ndarray], **rule: Any) -> Any:
    """Integrate integrand(x, V(x)) over the support with the composite Gauss rule."""
    x, w = gauss_rule(p, **rule)
    if len(x) == 0:
        return 0.0
    values = integrand(x, p.evaluate(x))
    return np.tensordot(w, values, axes=(0, 0))


def _pointwise_norm(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(v, ord=2, axis=(1, 2))


def validate_potential(p: PotentialSpec, settings: Settings | None = None) -> PotentialReport:
    """Hermiticity defect, L¹ norm and first moment ∫x‖V(x)‖dx."""
    settings = settings or p.settings
    defect = 0.0
    scale = 0.0
    for piece in p.pieces:
        samples = piece.samples()
        diffs = samples - np.conj(np.swapaxes(samples, 1, 2))
        defect = max(defect, float(np.max(np.linalg.norm(diffs, ord=2, axis=(1, 2)))))
        scale = max(scale, float(np.max(np.linalg.norm(samples, ord=2, axis=(1, 2)))))
    if defect > settings.herm_tol * max(scale, 1.0):
        raise NonHermitianError(f"potential is not Hermitian (defect {defect:.3e})")

    l1 = float(integrate(p, _pointwise_norm))
    first = float(integrate(p, lambda x, v: x * _pointwise_norm(x, v)))
    return PotentialReport(hermiticity_defect=defect, l1_norm=l1, first_moment=first)


def moments(p: PotentialSpec) -> MomentData:
    n = p.n
    total = np.zeros((n, n), dtype=complex)
    for piece in p.pieces:
        total += piece.exp_integral(0.0)
    return MomentData(Q1=0.5 * total, pieces=p.pieces)


# -- JSON codec --------------------------------------------------------------


def _matrix_from_json(data: Any, n: int) -> np.ndarray:
    """Accept a scalar, a flat row-major list of [re, im] pairs, or nested rows."""
    if isinstance(data, (int, float)):
        return complex(data) * np.eye(n, dtype=complex)
    arr = np.asarray(data, dtype=float)
    if arr.shape == (n * n, 2):
        return (arr[:, 0] + 1j * arr[:, 1]).reshape(n, n)
    if arr.shape == (n, n, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (n, n):
        return arr.astype(complex)
    raise DimensionMismatchError(f"cannot read a {n}x{n} matrix from shape {arr.shape}")


def _matrix_to_json(matrix: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(matrix, dtype=complex).ravel()]


def potential_from_dict(data: Mapping[str, Any], settings: Settings = DEFAULT_SETTINGS) -> PotentialSpec:
    try:
        n = int(data.get("n", 1))
        kind = data.get("model", "builtin")
        if kind == "zero":
            return PotentialSpec(n, PotentialSpec.zero(n).model, settings)
        if kind == "piecewise":
            values = np.stack([_matrix_from_json(v, n) for v in data["values"]]) if data["values"] else np.zeros((0, n, n), dtype=complex)
            return PotentialSpec(n, PiecewiseConstant(np.asarray(data["breakpoints"], dtype=float), values), settings)
        if kind == "sampled":
            values = np.stack([_matrix_from_json(v, n) for v in data["values"]])
            return PotentialSpec(n, Sampled(np.asarray(data["grid"], dtype=float), values, data.get("interpolation", "linear")), settings)
        if kind == "builtin":
            params = dict(data.get("params", {}))
            if "coupling" in params and data["family"] == "exp_decay":
                params["coupling"] = _matrix_from_json(params["coupling"], n)
            if data["family"] == "coupled_well" and isinstance(params.get("coupling"), list):
                re, im = params["coupling"]
                params["coupling"] = complex(re, im)
            return PotentialSpec(n, Builtin(data["family"], params), settings)
    except KeyError as exc:
        raise PotentialError(f"potential is missing key {exc.args[0]!r}") from exc
    raise PotentialError(f"unknown potential model {kind!r}")


def potential_to_dict(p: PotentialSpec) -> dict[str, Any]:
    model = p.model
    if isinstance(model, PiecewiseConstant):
        return {
            "n": p.n,
            "model": "piecewise",
            "breakpoints": [float(b) for b in model.breakpoints],
            "values": [_matrix_to_json(v) for v in model.values],
        }
    if isinstance(model, Sampled):
        return {
            "n": p.n,
            "model": "sampled",
            "grid": [float(x) for x in model.grid],
            "values": [_matrix_to_json(v) for v in model.values],
            "interpolation": model.interpolation,
        }
    params = {}
    for key, value in model.params.items():
        if isinstance(value, np.ndarray):
            params[key] = _matrix_to_json(value)
        elif isinstance(value, complex):
            params[key] = [value.real, value.imag]
        else:
            params[key] = value
    return {"n": p.n, "model": "builtin", "family": model.family, "params": params}


def trapezoid_rule(p: PotentialSpec, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Composite trapezoid nodes per piece, weights, and one-sided V values.

    Knots shared by two pieces appear twice, each copy carrying half a cell and
    the value of V from its own side.
    """
    xs: list[np.ndarray] = []
    ws: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    for piece in p.pieces:
        cells = max(1, int(math.ceil((piece.end - piece.start) / step)))
        nodes = np.linspace(piece.start, piece.end, cells + 1)
        weights = np.full(cells + 1, (piece.end - piece.start) / cells)
        weights[[0, -1]] *= 0.5
        xs.append(nodes)
        ws.append(weights)
        vs.append(piece.values(nodes))
    if not xs:
        return np.zeros(0), np.zeros(0), np.zeros((0, p.n, p.n), dtype=complex)
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(vs)
