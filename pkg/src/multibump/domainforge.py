"""Extraction of the origin component of {U > 0} and its geometric checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from skimage import measure

from multibump.coshcombo import CoshCombo
from multibump.errors import (
    AsymmetryDetected,
    BoxViolated,
    ComponentTouchesGridEdge,
    FarBoundaryMismatch,
    InclusionViolated,
    InputError,
    NonConvergence,
    NotStarShaped,
    OriginNotPositive,
    ResidualTooLarge,
)
from multibump.fieldkit import DEFAULT_MAX_NODES, GridSpec, ScalarField, remark_field, sample_on_grid
from multibump.profile1d import Mode, Profile1D

logger = logging.getLogger(__name__)

BISECTION_STEPS = 60


@dataclass
class DomainSlab:
    """Origin component of {U > 0} on a grid, with its refined boundary."""

    field: ScalarField
    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray
    vertices: np.ndarray
    cells: np.ndarray
    normals: np.ndarray
    axis_names: tuple[str, ...]
    polyline_ids: Optional[np.ndarray] = None
    touching_faces: tuple[str, ...] = ()
    boundary_residual: float = 0.0
    origin_inside: bool = True

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def bbox(self) -> list[tuple[float, float]]:
        """Per-axis extents of the boundary vertices."""
        return [(float(lo), float(hi)) for lo, hi in zip(self.vertices.min(axis=0), self.vertices.max(axis=0))]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spec.spacing))

    @property
    def is_bounded(self) -> bool:
        return not self.touching_faces

    def node_coordinates(self, index: Sequence[int]) -> np.ndarray:
        return np.array([a[i] for a, i in zip(self.spec.axes(), index)])


def _face_names(axis_names: Sequence[str]) -> list[tuple[str, str]]:
    return [(f"{n}-", f"{n}+") for n in axis_names]


def _touching_faces(mask: np.ndarray, axis_names: Sequence[str]) -> list[str]:
    faces = []
    for axis, (low, high) in enumerate(_face_names(axis_names)):
        if np.take(mask, 0, axis=axis).any():
            faces.append(low)
        if np.take(mask, -1, axis=axis).any():
            faces.append(high)
    return faces


def extract_component(
    U: ScalarField,
    spec: GridSpec,
    *,
    axis_names: Optional[Sequence[str]] = None,
    allow_faces: Sequence[str] = (),
    max_nodes: int = DEFAULT_MAX_NODES,
) -> DomainSlab:
    """Flood-fill the origin component and trace its zero level set.

    Args:
        U: Field positive at the origin.
        spec: Sampling grid; the origin should be a node.
        axis_names: Labels used to name grid faces, e.g. ("x1", "y").
        allow_faces: Faces the component may touch (truncated unbounded
            components such as the unperturbed strip).

    Raises:
        ComponentTouchesGridEdge: the component reaches a face not listed in
            `allow_faces`; `faces` names every face touched.
    """
    names = tuple(axis_names or (f"z{i}" for i in range(spec.dim)))
    origin = np.zeros((1, spec.dim))
    u_origin = float(U.value(origin)[0])
    if not u_origin > 0:
        raise OriginNotPositive(f"U(origin) = {u_origin:.6g} is not positive", point=origin[0], value=u_origin)

    sample = sample_on_grid(U, spec, max_nodes=max_nodes)
    values = sample.values
    labels, count = ndimage.label(values > 0)
    seed = spec.index_of(origin[0])
    if labels[seed] == 0:
        raise OriginNotPositive("origin node is not in {U > 0}", point=origin[0], value=float(values[seed]))
    mask = labels == labels[seed]
    logger.debug("%d positive components, origin component has %d nodes", count, int(mask.sum()))

    faces = _touching_faces(mask, names)
    unexpected = [f for f in faces if f not in allow_faces]
    if unexpected:
        raise ComponentTouchesGridEdge(
            f"component reaches grid faces {', '.join(faces)}", faces=faces
        )

    level = np.where(mask, values, np.where(values > 0, -values, values))
    polyline_ids = None
    if spec.dim == 2:
        contours = measure.find_contours(level, 0.0, fully_connected="low")
        pieces, cells, ids, offset = [], [], [], 0
        for cid, contour in enumerate(contours):
            pieces.append(contour)
            ids.append(np.full(len(contour), cid))
            cells.append(np.column_stack([np.arange(len(contour) - 1), np.arange(1, len(contour))]) + offset)
            offset += len(contour)
        if not pieces:
            raise InputError("component has no boundary inside the grid")
        index_coords = np.concatenate(pieces)
        cell_array = np.concatenate(cells).astype(np.int64)
        polyline_ids = np.concatenate(ids)
    elif spec.dim == 3:
        index_coords, cell_array, _, _ = measure.marching_cubes(
            level, level=0.0, method="lewiner", allow_degenerate=False
        )
        cell_array = cell_array.astype(np.int64)
    else:
        raise InputError(f"boundary extraction supports 2 or 3 dimensions, not {spec.dim}")

    vertices = _refine_vertices(U, spec, index_coords)
    gradients = U.gradient(vertices)
    norms = np.linalg.norm(gradients, axis=1)
    normals = -gradients / np.where(norms > 0, norms, 1.0)[:, None]
    residual = float(np.max(np.abs(U.value(vertices))))
    logger.info(
        "component: %d nodes, %d boundary vertices, |U| <= %.3g on them, faces touched: %s",
        int(mask.sum()), len(vertices), residual, faces or "none",
    )
    return DomainSlab(
        field=U,
        spec=spec,
        values=values,
        mask=mask,
        vertices=vertices,
        cells=cell_array,
        normals=normals,
        axis_names=names,
        polyline_ids=polyline_ids,
        touching_faces=tuple(faces),
        boundary_residual=residual,
    )


def _refine_vertices(U: ScalarField, spec: GridSpec, index_coords: np.ndarray) -> np.ndarray:
    """Move each vertex along its grid edge to the zero of the true field."""
    lower = np.asarray(spec.lower)
    step = np.asarray(spec.spacing)
    counts = np.asarray(spec.counts)
    frac = index_coords - np.floor(index_coords)
    distance = np.minimum(frac, 1.0 - frac)
    cut = np.argmax(distance, axis=1)
    rows = np.arange(len(index_coords))
    on_edge = distance[rows, cut] > 1e-12

    low = np.round(index_coords)
    low[rows, cut] = np.floor(index_coords[rows, cut])
    high = low.copy()
    high[rows, cut] = np.minimum(low[rows, cut] + 1, counts[cut] - 1)
    p_low = lower + low * step
    p_high = lower + high * step
    linear = lower + index_coords * step

    u_low = U.value(p_low)
    u_high = U.value(p_high)
    bracket = on_edge & ((u_low > 0) != (u_high > 0))
    inside = np.where((u_low > 0)[:, None], p_low, p_high)[bracket]
    outside = np.where((u_low > 0)[:, None], p_high, p_low)[bracket]
    lo = np.zeros(len(inside))
    hi = np.ones(len(inside))
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        positive = U.value(inside + mid[:, None] * (outside - inside)) > 0
        lo = np.where(positive, mid, lo)
        hi = np.where(positive, hi, mid)
    refined = linear.copy()
    refined[bracket] = inside + (0.5 * (lo + hi))[:, None] * (outside - inside)
    skipped = int((on_edge & ~bracket).sum())
    if skipped:
        logger.debug("%d vertices kept at their linear position", skipped)
    return refined


def box_half_width(mu1: float, u0_norm: float, omega1_edge: float, eps: float) -> float:
    """M_eps = log(3 |u0| / (eps omega_1(1 + eta))) / sqrt(mu_1)."""
    return math.log(3.0 * u0_norm / (eps * omega1_edge)) / math.sqrt(mu1)


@dataclass(frozen=True)
class BoxReport:
    """Outcome of the bounding-box containment check."""

    m_eps: float
    y_limit: float
    max_abs_x: float
    max_abs_y: float

    @property
    def margin(self) -> float:
        return min(self.m_eps - self.max_abs_x, self.y_limit - self.max_abs_y)


def check_bounding_box(
    d: DomainSlab, p: Profile1D, combo: CoshCombo, top_mode: Mode, eps: float, eta: float
) -> BoxReport:
    """Assert the component lies in [-M_eps, M_eps]^N x [-1 - eta, 1 + eta]."""
    if not 0 < eta < p.sigma:
        raise InputError("eta must satisfy 0 < eta < sigma", value=eta)
    m_eps = box_half_width(combo.top_mu, p.center_value, float(top_mode.value(1.0 + eta)), eps)
    y_limit = 1.0 + eta
    extents = _mask_extents(d)
    abs_x = np.max(np.abs(d.vertices[:, :-1]), axis=1)
    abs_y = np.abs(d.vertices[:, -1])
    excess = np.maximum(abs_x - m_eps, abs_y - y_limit)
    worst = int(np.argmax(excess))
    node_excess = max(max(extents[:-1]) - m_eps, extents[-1] - y_limit)
    if excess[worst] > 0 or node_excess > 0:
        raise BoxViolated(
            f"component leaves [-{m_eps:.6g}, {m_eps:.6g}]^N x [-{y_limit:g}, {y_limit:g}]",
            point=d.vertices[worst],
            value=float(max(excess[worst], node_excess)),
            m_eps=m_eps,
        )
    report = BoxReport(
        m_eps=m_eps,
        y_limit=y_limit,
        max_abs_x=max(float(abs_x.max()), *extents[:-1]),
        max_abs_y=max(float(abs_y.max()), extents[-1]),
    )
    logger.info("bounding box M_eps=%.6g, margin %.4g", m_eps, report.margin)
    return report


def _mask_extents(d: DomainSlab) -> list[float]:
    """Largest |coordinate| of a component node, per axis."""
    out = []
    for axis, coords in enumerate(d.spec.axes()):
        others = tuple(a for a in range(d.dim) if a != axis)
        occupied = d.mask.any(axis=others)
        out.append(float(np.max(np.abs(coords[occupied]))))
    return out


def check_inclusion(d: DomainSlab, maxima_t: Sequence[float]) -> bool:
    """Assert [t_1, t_k]^N x {0} lies in the component."""
    axes = d.spec.axes()
    n = d.dim - 1
    t_lo, t_hi = float(min(maxima_t)), float(max(maxima_t))
    x_axis_nodes = [np.flatnonzero((a >= t_lo) & (a <= t_hi)) for a in axes[:n]]
    y_index = d.spec.index_of([0.0] * d.dim)[-1]
    for combo in np.array(np.meshgrid(*x_axis_nodes, indexing="ij")).reshape(n, -1).T:
        index = (*combo, y_index)
        if not d.mask[index]:
            raise InclusionViolated("segment node outside the component", point=d.node_coordinates(index))
    corners = np.array(np.meshgrid(*[[t_lo, t_hi]] * n, indexing="ij")).reshape(n, -1).T
    for corner in corners:
        point = np.append(corner, 0.0)
        value = float(d.field.value(point[None, :])[0])
        if not value > 0 or not d.mask[d.spec.index_of(point)]:
            raise InclusionViolated("segment endpoint outside the component", point=point, value=value)
    return True


@dataclass(frozen=True)
class StarShapeReport:
    alpha: float
    worst_point: tuple[float, ...]


def check_star_shape(U: ScalarField, d: DomainSlab) -> StarShapeReport:
    """Return alpha = -max of z . grad U over the boundary vertices."""
    if len(d.vertices) == 0:
        raise InputError("boundary is empty")
    radial = np.einsum("ij,ij->i", d.vertices, U.gradient(d.vertices))
    worst = int(np.argmax(radial))
    report = StarShapeReport(alpha=float(-radial[worst]), worst_point=tuple(map(float, d.vertices[worst])))
    if report.alpha <= 0:
        raise NotStarShaped(
            "radial derivative is nonnegative on the boundary", point=d.vertices[worst], value=float(radial[worst])
        )
    return report


def check_surface_residual(d: DomainSlab, tol: float = 1e-10) -> float:
    """Largest |U| at the refined boundary vertices.

    Raises:
        ResidualTooLarge: the refinement left a vertex with |U| above `tol`.
    """
    residual = np.abs(d.field.value(d.vertices))
    worst = int(np.argmax(residual))
    if residual[worst] > tol:
        raise ResidualTooLarge(
            f"boundary vertex has |U| = {residual[worst]:.3g} > {tol:g}",
            point=d.vertices[worst],
            value=float(residual[worst]),
        )
    return float(residual[worst])


def check_symmetry(d: DomainSlab, tol: float = 1e-12) -> bool:
    """Assert the mask and the sampled values are invariant under every coordinate reflection.

    Values are compared relative to max |U| on the grid.
    """
    if not d.spec.is_symmetric:
        raise InputError("symmetry check needs a grid symmetric about every coordinate plane")
    scale = max(float(np.max(np.abs(d.values))), 1e-300)
    for axis, name in enumerate(d.axis_names):
        if not np.array_equal(d.mask, np.flip(d.mask, axis=axis)):
            differ = np.argwhere(d.mask != np.flip(d.mask, axis=axis))[0]
            raise AsymmetryDetected(
                f"mask is not symmetric under {name} -> -{name}",
                point=d.node_coordinates(differ),
                axis=name,
            )
        gap = np.abs(d.values - np.flip(d.values, axis=axis)) / scale
        if gap.max() > tol:
            worst = np.unravel_index(int(np.argmax(gap)), gap.shape)
            raise AsymmetryDetected(
                f"values are not even in {name}: relative gap {gap.max():.3g} > {tol:g}",
                point=d.node_coordinates(np.array(worst)),
                axis=name,
                value=float(gap.max()),
            )
    return True


def _in_box(points: np.ndarray, box: Sequence[tuple[float, float]]) -> np.ndarray:
    inside = np.ones(len(points), dtype=bool)
    for axis, (lo, hi) in enumerate(box):
        inside &= (points[:, axis] >= lo) & (points[:, axis] <= hi)
    return inside


def _y_axes(d: DomainSlab, y_axes: Optional[Sequence[int]]) -> list[int]:
    return [d.dim - 1] if y_axes is None else list(y_axes)


def symmetric_difference_volume(
    d: DomainSlab,
    box: Sequence[tuple[float, float]],
    limit: float = 1.0,
    y_axes: Optional[Sequence[int]] = None,
) -> float:
    """Voxel volume of K intersected with (|y| < limit) xor component.

    `y_axes` names the cross-section coordinates; the default is the last
    axis, i.e. the strip. Several axes give a cylinder of radius `limit`.
    """
    grids = np.meshgrid(*d.spec.axes(), indexing="ij", sparse=True)
    in_k = np.ones(d.mask.shape, dtype=bool)
    for g, (lo, hi) in zip(grids, box):
        in_k &= (g >= lo) & (g <= hi)
    strip = sum(grids[a] ** 2 for a in _y_axes(d, y_axes)) < limit**2
    return float(np.count_nonzero(in_k & (strip != d.mask)) * d.cell_volume)


def boundary_deviation(
    d: DomainSlab,
    box: Sequence[tuple[float, float]],
    limit: float = 1.0,
    y_axes: Optional[Sequence[int]] = None,
) -> float:
    """Largest | |y| - limit | over boundary vertices inside K."""
    inside = _in_box(d.vertices, box)
    if not inside.any():
        return 0.0
    radius = np.linalg.norm(d.vertices[inside][:, _y_axes(d, y_axes)], axis=1)
    return float(np.max(np.abs(radius - limit)))


@dataclass(frozen=True)
class ConvergenceReport:
    volumes: tuple[float, ...]
    deviations: tuple[float, ...]


def check_strip_convergence(
    domains: Sequence[DomainSlab],
    box: Sequence[tuple[float, float]],
    limit: float = 1.0,
    y_axes: Optional[Sequence[int]] = None,
) -> ConvergenceReport:
    """Assert the components approach the strip on K as eps decreases.

    Voxel volumes must not increase; the sub-cell boundary deviation must
    strictly decrease.
    """
    for d in domains:
        lower = [a[0] for a in d.spec.axes()]
        upper = [a[-1] for a in d.spec.axes()]
        if any(lo < l0 or hi > u0 for (lo, hi), l0, u0 in zip(box, lower, upper)):
            raise InputError("box K is not inside every grid")
    volumes = tuple(symmetric_difference_volume(d, box, limit, y_axes) for d in domains)
    deviations = tuple(boundary_deviation(d, box, limit, y_axes) for d in domains)
    for i in range(1, len(domains)):
        if volumes[i] > volumes[i - 1] or (deviations[i - 1] > 0 and deviations[i] >= deviations[i - 1]):
            raise NonConvergence(
                f"distance to the strip did not decrease at step {i}",
                volumes=list(volumes),
                deviations=list(deviations),
            )
    return ConvergenceReport(volumes=volumes, deviations=deviations)


@dataclass(frozen=True)
class FarBoundaryReport:
    samples: int
    max_relative_error: float
    threshold: float


def check_far_boundary(
    d: DomainSlab,
    p: Profile1D,
    top_mu: float,
    top_mode: Mode,
    eps: float,
    m_eps: float,
    tol: float = 0.2,
) -> FarBoundaryReport:
    """Compare sum_j cosh(sqrt(mu_1) x_j) with u0(y) / (eps omega_1(y)) far out."""
    x = d.vertices[:, :-1]
    y = d.vertices[:, -1]
    threshold = 0.8 * m_eps
    u0 = p.value(y)
    far = (np.max(np.abs(x), axis=1) > threshold) & (u0 > 0)
    if not far.any():
        raise FarBoundaryMismatch(f"no boundary vertices beyond {threshold:.6g}")
    lhs = np.sum(np.cosh(math.sqrt(top_mu) * x[far]), axis=1)
    rhs = u0[far] / (eps * top_mode.value(y[far]))
    error = np.abs(lhs / rhs - 1.0)
    worst = int(np.argmax(error))
    report = FarBoundaryReport(samples=int(far.sum()), max_relative_error=float(error[worst]), threshold=threshold)
    if error[worst] > tol:
        raise FarBoundaryMismatch(
            f"far-boundary balance off by {error[worst]:.3g} > {tol:g}",
            point=d.vertices[far][worst],
            value=float(error[worst]),
        )
    return report


@dataclass
class UnboundednessAttempt:
    half_width: float
    faces: tuple[str, ...]
    line_positive: bool


@dataclass
class RemarkReport:
    """Outcome of the eigenfunction negative control."""

    y_bar: float
    line_y: float
    attempts: list[UnboundednessAttempt] = field(default_factory=list)

    @property
    def unbounded(self) -> bool:
        return bool(self.attempts) and all(
            a.line_positive and {"x-", "x+"} <= set(a.faces) for a in self.attempts
        )

    def to_dict(self) -> dict:
        return {
            "y_bar": self.y_bar,
            "line_y": self.line_y,
            "unbounded": self.unbounded,
            "attempts": [
                {"half_width": a.half_width, "faces": list(a.faces), "escapes_box": a.line_positive}
                for a in self.attempts
            ],
        }


def remark_r_demo(
    mu1: float,
    eps: float,
    widths: Sequence[float],
    *,
    counts: tuple[int, int] = (801, 301),
    y_half_width: float = 1.5,
    line_samples: int = 4001,
) -> RemarkReport:
    """Show that the eigenfunction construction gives an unbounded component.

    On the line y = y_bar + delta with y_bar = (pi/2) / sqrt(pi^2/4 + mu1) and
    delta = (1 - y_bar) / 2 the field stays positive for every x, so the
    component escapes every box.
    """
    U = remark_field(mu1, eps)
    y_bar = (math.pi / 2) / math.sqrt(math.pi**2 / 4 + mu1)
    line_y = y_bar + 0.5 * (1.0 - y_bar)
    report = RemarkReport(y_bar=y_bar, line_y=line_y)
    for width in widths:
        x = np.linspace(-width, width, line_samples)
        line_positive = bool(np.all(U.value(np.column_stack([x, np.full_like(x, line_y)])) > 0))
        spec = GridSpec.centered((width, y_half_width), counts)
        try:
            extract_component(U, spec, axis_names=("x", "y"))
            faces: tuple[str, ...] = ()
        except ComponentTouchesGridEdge as exc:
            faces = exc.faces
        logger.info("remark control width=%g: line positive=%s, faces=%s", width, line_positive, faces)
        report.attempts.append(UnboundednessAttempt(half_width=float(width), faces=tuple(faces), line_positive=line_positive))
    return report
