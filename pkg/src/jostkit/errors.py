"""
Custom exception hierarchy for jostkit.

Validation families carry exit code 2, numerical families exit code 3.
"""

from __future__ import annotations

from dataclasses import dataclass


class JostkitError(Exception):
    """Base class for jostkit exceptions."""

    code = 3


class BoundaryConditionError(JostkitError):
    """Base class for boundary-pair failures."""

    code = 2


class DimensionMismatchError(BoundaryConditionError):
    """Raised when matrix shapes do not agree."""


class NonFiniteError(BoundaryConditionError):
    """Raised when an input matrix holds NaN or infinite entries."""


class InvalidBoundaryConditionError(BoundaryConditionError):
    """Raised when (A, B) violates the self-adjointness conditions."""


class SingularTransformError(BoundaryConditionError):
    """Raised when a right factor T is numerically singular."""


class NotUnitaryError(BoundaryConditionError):
    """Raised when a conjugating matrix is not unitary."""


class PotentialError(JostkitError):
    code = 2


class NonHermitianError(PotentialError):
    """Raised when a potential sample is not Hermitian."""


class NotIntegrableError(PotentialError):
    """Raised when a potential tail does not decay fast enough."""


@dataclass(eq=False)
class InvalidParameterError(PotentialError):
    family: str
    name: str
    value: object

    def __str__(self) -> str:
        return f"{self.family} parameter {self.name!r} must be numeric, got {self.value!r}"


class SolutionError(JostkitError):
    """Base class for ODE integration failures."""


class SolveDivergedError(SolutionError):
    """Raised when the adaptive stepper fails."""


class ZeroKError(SolutionError):
    """Raised when k = 0 is requested from a direct solve."""


class GridMismatchError(SolutionError):
    """Raised when two samples do not share a grid or spectral parameter."""


class ScatteringError(JostkitError):
    """Base class for Jost/scattering matrix failures."""


@dataclass(eq=False)
class SingularJostError(ScatteringError):
    k: complex
    condition: float

    def __str__(self) -> str:
        return f"Jost matrix singular at k={self.k} (cond={self.condition:.3e})"


@dataclass(eq=False)
class BranchJumpError(ScatteringError):
    k_left: float
    k_right: float
    increment: float

    def __str__(self) -> str:
        return (
            f"arg det S jumps by {self.increment:.3f} between "
            f"k={self.k_left:.6g} and k={self.k_right:.6g} after refinement"
        )


class SpectralError(JostkitError):
    """Base class for bound-state and spectral-shift failures."""


class RootFindStallError(SpectralError):
    """Raised when a bracketed root of det J(iκ) fails to converge."""


class ExtrapolationUnstableError(SpectralError):
    """Raised when small-k samples of S disagree beyond tolerance."""


class GridTooLargeError(SpectralError):
    """Raised when a discretization would exceed the unknown budget."""


class TransformError(JostkitError):
    """Base class for resolvent and Fourier map failures."""


class SpectralPointError(TransformError):
    """Raised when z coincides with an eigenvalue of the free operator."""


class NearSingularQError(TransformError):
    """Raised when I + Q is too close to singular."""


@dataclass(eq=False)
class ConfigError(JostkitError):
    message: str
    field: str | None = None
    line: int | None = None

    code = 2

    def __str__(self) -> str:
        where = []
        if self.field:
            where.append(f"field={self.field}")
        if self.line is not None:
            where.append(f"line={self.line}")
        suffix = f" ({', '.join(where)})" if where else ""
        return f"{self.message}{suffix}"


class NearDegenerateWarning(UserWarning):
    """Issued when eigenvalue clusters of U are closer than cluster_tol."""
