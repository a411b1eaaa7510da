"""Exception hierarchy for the construction and certification pipelines.

Errors fall into three families that map onto the command-line exit codes:
invalid requests (`InputError`), numerical failures (`SolverError`) and
claims that did not verify (`CertificationFailure`).
"""

from __future__ import annotations

from typing import Any, Optional, Sequence


class MultibumpError(Exception):
    """Base class for every error raised by the package."""

    exit_code: int = 2

    def __init__(
        self,
        message: str,
        *,
        point: Optional[Sequence[float]] = None,
        value: Optional[float] = None,
        **details: Any,
    ) -> None:
        super().__init__(message)
        self.point = None if point is None else tuple(float(c) for c in point)
        self.value = value
        self.details = details

    def as_dict(self) -> dict[str, Any]:
        """Return a JSON-friendly description of the failure."""
        out: dict[str, Any] = {"error": type(self).__name__, "message": str(self)}
        if self.point is not None:
            out["point"] = list(self.point)
        if self.value is not None:
            out["value"] = float(self.value)
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


class InputError(MultibumpError):
    """Raised when a request is invalid before any numerics run."""


class SolverError(MultibumpError):
    """Raised when a numerical procedure fails."""


class CertificationFailure(MultibumpError):
    """Raised when a checked claim does not hold."""

    exit_code = 1


# Input errors


class ConfigError(InputError):
    """Invalid configuration key or value."""


class DegenerateSide(InputError):
    """Rectangle side with b <= a."""


class MuOutOfRange(InputError):
    """Mode frequency outside (0, mu0)."""


class ModeMismatch(InputError):
    """Supplied modes do not match the frequencies of the combination."""


class OriginNotPositive(InputError):
    """The superposed field is not positive at the origin."""


class OutOfMemoryBudget(InputError):
    """Grid node count above the configured cap."""


class KOutsideDomain(InputError):
    """Residual box not strictly inside the component."""


class RootOrderError(InputError):
    """Torsion roots are not strictly increasing and positive."""


class EpsTooLarge(InputError):
    """Perturbation size makes the torsion field nonpositive at the origin."""


class LadderViolation(InputError):
    """Frequency ladder mu0/4 > mu_1 > ... > mu_n > 0 cannot hold."""


# Solver errors


class NoSolution(SolverError):
    """Shooting found no height a with u(1; a) = 0."""


class ShootingDiverged(SolverError):
    """Integration blew up before reaching the end of the interval."""


class ExtensionSignError(SolverError):
    """Extended profile is not negative past the interval endpoints."""


class ConvergenceFailure(SolverError):
    """An iterative eigensolver stalled."""


class SingularBVP(SolverError):
    """Discrete mode problem is singular or its solution is not positive."""


class NoFailureFound(SolverError):
    """Solvability persists up to the lambda cap."""


class BadInterleaving(SolverError):
    """Constructed polynomial is not concave at one of its target maxima."""


class ComponentTouchesGridEdge(SolverError):
    """The origin component reaches the boundary of the sampling grid."""

    def __init__(self, message: str, *, faces: Sequence[str] = (), **kwargs: Any) -> None:
        super().__init__(message, faces=list(faces), **kwargs)
        self.faces = tuple(faces)


class TooCoarse(SolverError):
    """A component node has no interior neighbour."""


class IterationDiverged(SolverError):
    """Monotone iteration exceeded its cap."""


class NewtonStalled(SolverError):
    """Newton iteration from a seed failed to converge."""


class SingularGradient(SolverError):
    """Gradient vanishes at a point where a curvature is requested."""


# Certification failures


class DegenerateCritical(CertificationFailure):
    """Critical point with second derivative below the margin."""


class BoxViolated(CertificationFailure):
    """Component leaves the bounding box."""


class InclusionViolated(CertificationFailure):
    """Segment between the outer maxima is not contained in the component."""


class NotStarShaped(CertificationFailure):
    """Radial derivative is nonnegative somewhere on the boundary."""


class AsymmetryDetected(CertificationFailure):
    """Mask is not invariant under a coordinate reflection."""


class NonConvergence(CertificationFailure):
    """Symmetric difference with the strip does not decrease."""


class StabilityLost(CertificationFailure):
    """Linearized eigenvalue is not positive."""


class BoundViolated(CertificationFailure):
    """Monotone comparison bound fails."""


class NoCriticalPoints(CertificationFailure):
    """No critical point was found inside the component."""


class DegenerateFound(CertificationFailure):
    """Maximum with Hessian eigenvalue above the degeneracy floor."""


class NegativeCurvatureFound(CertificationFailure):
    """Mean curvature is nonpositive at a boundary sample."""


class AsymptoticViolated(CertificationFailure):
    """Boundary extent disagrees with its asymptotic prediction."""


class FarBoundaryMismatch(CertificationFailure):
    """Far boundary does not follow the leading-mode balance."""


class SlopeTooLow(CertificationFailure):
    """Residual decays slower than the expected rate."""


class MaximaCountTooLow(CertificationFailure):
    """Fewer nondegenerate maxima than requested."""


class BarrierViolated(CertificationFailure):
    """Rescaled residual leaves its barrier."""


class ModeNotMonotone(CertificationFailure):
    """Mode is not decreasing in |y|."""


class ResidualTooLarge(CertificationFailure):
    """A discrete or pointwise residual exceeds its tolerance."""
