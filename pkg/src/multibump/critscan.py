"""Critical points of scalar fields on an extracted component.

Seeds come from grid-local extrema of the sampled values and from 1-D extrema
along symmetry lines; each seed is polished by damped Newton iteration on the
gradient and classified by the Hessian spectrum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import NdBSpline, make_interp_spline

from multibump.domainforge import DomainSlab
from multibump.ellipsolve import DiscreteSolution
from multibump.errors import DegenerateFound, NewtonStalled, NoCriticalPoints
from multibump.fieldkit import ScalarField, _as_points

logger = logging.getLogger(__name__)

KIND_CODES = {"min": -1, "saddle": 0, "max": 1, "degenerate": 2}


@dataclass(frozen=True)
class CriticalPoint:
    """A zero of the gradient and its Hessian spectrum."""

    location: tuple[float, ...]
    grad_norm: float
    hess_eigs: tuple[float, ...]
    kind: str
    basin_seed: tuple[int, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "grad_norm": self.grad_norm,
            "hess_eigs": list(self.hess_eigs),
            "kind": self.kind,
            "basin_seed": list(self.basin_seed),
        }


class InterpolatedField(ScalarField):
    """Tensor-product cubic spline through nodal data."""

    kind = "interpolated"

    def __init__(self, spline: NdBSpline, dim: int, name: str = "interpolated") -> None:
        self.spline = spline
        self.dim = dim
        self.name = name
        self._orders = np.eye(dim, dtype=int)

    def value(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.spline(_as_points(points, self.dim)))

    def gradient(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points, self.dim)
        return np.column_stack([self.spline(pts, nu=self._orders[a]) for a in range(self.dim)])

    def hessian(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points, self.dim)
        out = np.empty((pts.shape[0], self.dim, self.dim))
        for a in range(self.dim):
            for b in range(a, self.dim):
                entry = self.spline(pts, nu=self._orders[a] + self._orders[b])
                out[:, a, b] = entry
                out[:, b, a] = entry
        return out


def interpolate_grid(axes: Sequence[np.ndarray], values: np.ndarray, name: str = "interpolated") -> InterpolatedField:
    """Cubic interpolant through `values` on the tensor grid `axes`."""
    coefficients = np.asarray(values, dtype=float)
    knots = []
    for a, axis in enumerate(axes):
        spline = make_interp_spline(axis, coefficients, k=3, axis=a)
        knots.append(spline.t)
        coefficients = spline.c
    return InterpolatedField(NdBSpline(tuple(knots), coefficients, 3), dim=len(axes), name=name)


def interpolate_solution(sol: DiscreteSolution) -> InterpolatedField:
    """C^2 interpolant of a discrete solution.

    Off-component nodes carry the defining field, which shares the sign of the
    solution's continuation across the boundary.
    """
    slab = sol.slab
    grid = np.where(slab.mask, 0.0, slab.values)
    grid[slab.mask] = sol.u
    return interpolate_grid(slab.spec.axes(), grid, name=f"interpolated {sol.f.name}")


def _grid_extrema(d: DomainSlab, values: np.ndarray) -> list[tuple[int, ...]]:
    region = ndimage.binary_erosion(d.mask)
    hi = np.where(d.mask, values, -np.inf)
    lo = np.where(d.mask, values, np.inf)
    maxima = region & (ndimage.maximum_filter(hi, size=3, mode="nearest") == hi)
    minima = region & (ndimage.minimum_filter(lo, size=3, mode="nearest") == lo)
    return [tuple(int(i) for i in idx) for idx in np.argwhere(maxima | minima)]


def _line_extrema(d: DomainSlab, values: np.ndarray, axis: int) -> list[tuple[int, ...]]:
    """Local extrema along the grid line through the centre parallel to `axis`."""
    centre = [c // 2 for c in d.spec.counts]
    index: list = list(centre)
    index[axis] = slice(None)
    line = values[tuple(index)]
    inside = d.mask[tuple(index)]
    slope = np.diff(line)
    turns = np.flatnonzero(np.sign(slope[:-1]) != np.sign(slope[1:])) + 1
    seeds = []
    for i in turns:
        if inside[i]:
            node = list(centre)
            node[axis] = int(i)
            seeds.append(tuple(node))
    return seeds


def _newton(
    f: ScalarField,
    start: np.ndarray,
    *,
    grad_tol: float,
    max_iter: int,
    max_halvings: int,
) -> tuple[np.ndarray, float]:
    z = start.astype(float)
    g = f.gradient(z)[0]
    norm = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if norm <= grad_tol:
            return z, norm
        step = np.linalg.lstsq(f.hessian(z)[0], -g, rcond=None)[0]
        t = 1.0
        for _ in range(max_halvings):
            trial = z + t * step
            g_trial = f.gradient(trial)[0]
            trial_norm = float(np.linalg.norm(g_trial))
            if trial_norm < norm:
                z, g, norm = trial, g_trial, trial_norm
                break
            t *= 0.5
        else:
            raise NewtonStalled("damped Newton step does not reduce the gradient", point=z, value=norm)
    if norm <= grad_tol:
        return z, norm
    raise NewtonStalled(f"no convergence in {max_iter} Newton steps", point=z, value=norm)


def classify(eigs: np.ndarray, floor: float) -> str:
    if np.any(np.abs(eigs) <= floor):
        return "degenerate"
    if np.all(eigs < 0):
        return "max"
    if np.all(eigs > 0):
        return "min"
    return "saddle"


def default_floor(d: DomainSlab, factor: float = 1e-6, values: Optional[np.ndarray] = None) -> float:
    """factor * (field scale) / (domain diameter)^2."""
    values = d.values if values is None else values
    scale = float(np.max(np.abs(values[d.mask])))
    lo, hi = np.array(d.bbox).T
    diameter = float(np.linalg.norm(hi - lo))
    return factor * scale / diameter**2


def find_critical_points(
    f: ScalarField,
    d: DomainSlab,
    extra_seeds: Sequence[Sequence[float]] = (),
    *,
    symmetry_axes: Optional[Sequence[int]] = None,
    grad_tol: Optional[float] = None,
    floor: Optional[float] = None,
    max_iter: int = 50,
    max_halvings: int = 50,
) -> list[CriticalPoint]:
    """Locate and classify the critical points of `f` inside the component.

    Args:
        f: Field to scan, analytic or interpolated.
        d: Component whose mask bounds the search.
        extra_seeds: Additional starting points in field coordinates.
        symmetry_axes: Grid axes whose centre lines are scanned for 1-D
            extrema; defaults to every axis of a symmetric grid.
        grad_tol: Convergence threshold on |grad f|; 1e-9 for analytic
            fields, 1e-6 times the field scale otherwise.
        floor: Hessian eigenvalue magnitude below which a point is
            degenerate.

    Raises:
        NoCriticalPoints: no seed converged to a point in the component.
    """
    axes = d.spec.axes()
    values = d.values if f is d.field else f.sample(axes)
    scale = float(np.max(np.abs(values[d.mask])))
    if grad_tol is None:
        grad_tol = 1e-9 if f.kind == "analytic" else 1e-6 * scale
    if floor is None:
        floor = default_floor(d, values=values)
    if symmetry_axes is None:
        symmetry_axes = range(d.dim) if d.spec.is_symmetric else ()

    seeds = _grid_extrema(d, values)
    for a in symmetry_axes:
        seeds.extend(_line_extrema(d, values, a))
    seeds = list(dict.fromkeys(seeds))
    starts = [np.array([axes[a][i] for a, i in enumerate(s)]) for s in seeds]
    starts.extend(np.asarray(s, dtype=float) for s in extra_seeds)
    origins = seeds + [d.spec.index_of(s) for s in extra_seeds]
    logger.debug("%d Newton seeds for %s", len(starts), f.name)

    radius = 2.0 * max(d.spec.spacing)
    found: list[CriticalPoint] = []
    for seed, start in zip(origins, starts):
        try:
            z, norm = _newton(f, start, grad_tol=grad_tol, max_iter=max_iter, max_halvings=max_halvings)
        except NewtonStalled as exc:
            logger.warning("seed %s skipped: %s", seed, exc)
            continue
        if not d.mask[d.spec.index_of(z)] or f.value(z)[0] <= 0:
            continue
        if any(np.linalg.norm(z - np.array(p.location)) < radius for p in found):
            continue
        eigs = np.linalg.eigvalsh(f.hessian(z)[0])
        found.append(
            CriticalPoint(
                location=tuple(float(c) for c in z),
                grad_norm=norm,
                hess_eigs=tuple(float(e) for e in eigs),
                kind=classify(eigs, floor),
                basin_seed=seed,
            )
        )
    if not found:
        raise NoCriticalPoints(f"no critical point of {f.name} found in the component")
    found.sort(key=lambda p: p.location)
    logger.info(
        "%s: %d critical points (%d maxima)", f.name, len(found), sum(p.kind == "max" for p in found)
    )
    return found


def maxima(points: Sequence[CriticalPoint]) -> list[CriticalPoint]:
    return [p for p in points if p.kind == "max"]


def nondegeneracy_margin(points: Sequence[CriticalPoint], floor: float = 0.0) -> float:
    """Smallest |largest Hessian eigenvalue| over the maxima.

    Raises:
        DegenerateFound: a maximum candidate has margin <= `floor`.
    """
    candidates = [p for p in points if p.kind in ("max", "degenerate") and p.hess_eigs[0] < 0]
    if not candidates:
        raise DegenerateFound("no maximum among the critical points")
    worst = min(candidates, key=lambda p: abs(p.hess_eigs[-1]))
    margin = abs(worst.hess_eigs[-1])
    if worst.kind == "degenerate" or margin <= floor:
        raise DegenerateFound(
            f"maximum at {worst.location} has Hessian margin {margin:.3g} <= {floor:.3g}",
            point=worst.location,
            value=margin,
        )
    return margin


def symmetric_pairs(points: Sequence[CriticalPoint], radius: float) -> bool:
    """Whether every reflection z_a -> -z_a maps the critical set into itself."""
    locations = np.array([p.location for p in points])
    for a in range(locations.shape[1]):
        mirrored = locations.copy()
        mirrored[:, a] *= -1
        distances = np.linalg.norm(mirrored[:, None, :] - locations[None, :, :], axis=-1)
        if np.any(distances.min(axis=1) > radius):
            return False
    return True


def critical_table(points: Sequence[CriticalPoint]) -> tuple[list[str], np.ndarray]:
    """CSV header and rows: location, grad norm, kind code, eigenvalues."""
    dim = len(points[0].location)
    header = [f"z{i}" for i in range(dim)] + ["grad_norm", "kind"] + [f"eig{i}" for i in range(dim)]
    rows = [[*p.location, p.grad_norm, KIND_CODES[p.kind], *p.hess_eigs] for p in points]
    return header, np.array(rows, dtype=float)
