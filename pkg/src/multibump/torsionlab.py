"""Explicit torsion counterexample on the cylinder R x B(0, sqrt(N)).

u_eps(x, y) = (N - |y|^2) / 2 + eps sum_j v(x, y_j) with v = Re F_k and
F_k(z) = -prod_l (z - t_l)(z + t_l).  Every polynomial is kept with exact
rational coefficients; floats appear only at evaluation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from multibump.critscan import default_floor
from multibump.domainforge import (
    ConvergenceReport,
    DomainSlab,
    StarShapeReport,
    check_star_shape,
    check_strip_convergence,
    check_surface_residual,
    check_symmetry,
    extract_component,
)
from multibump.errors import (
    AsymptoticViolated,
    CertificationFailure,
    DegenerateFound,
    EpsTooLarge,
    InputError,
    MaximaCountTooLow,
    NegativeCurvatureFound,
    RootOrderError,
    SingularGradient,
)
from multibump.fieldkit import GridSpec, ScalarField, _as_points

logger = logging.getLogger(__name__)

Coefficients = tuple[tuple[Fraction, ...], ...]


def product_coefficients(roots: Sequence[float]) -> tuple[Fraction, ...]:
    """Coefficients c_m of F_k(z) = -prod (z^2 - t_l^2), ascending in m."""
    coeffs = [Fraction(-1)]
    for t in roots:
        t2 = Fraction(t) ** 2
        shifted = [Fraction(0)] * (len(coeffs) + 2)
        for m, c in enumerate(coeffs):
            shifted[m + 2] += c
            shifted[m] -= c * t2
        coeffs = shifted
    return tuple(coeffs)


def real_part_coefficients(c: Sequence[Fraction]) -> Coefficients:
    """V[a][b] with Re sum_m c_m (t + i s)^m = sum V[a][b] t^a s^b."""
    n = len(c) - 1
    table = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
    for m, cm in enumerate(c):
        if cm == 0:
            continue
        for j in range(0, m + 1, 2):
            table[m - j][j] += cm * math.comb(m, j) * (-1) ** (j // 2)
    return tuple(tuple(row) for row in table)


def laplacian_coefficients(v: Coefficients) -> Coefficients:
    """Exact coefficients of v_tt + v_ss."""
    n = len(v)
    out = [[Fraction(0)] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            if a + 2 < n:
                out[a][b] += (a + 2) * (a + 1) * v[a + 2][b]
            if b + 2 < n:
                out[a][b] += (b + 2) * (b + 1) * v[a][b + 2]
    return tuple(tuple(row) for row in out)


def harmonic_coefficients(c: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """a_h with v = -sum_h a_h P_h and P_h = Re z^(2h); a_k = 1."""
    return tuple(-c[2 * h] for h in range(len(c) // 2 + 1))


def top_degree_coefficients(k: int) -> tuple[int, ...]:
    """b_l of P_k = sum_l b_l t^(2k-2l) s^(2l): b_l = (-1)^l C(2k, 2l)."""
    return tuple((-1) ** ell * math.comb(2 * k, 2 * ell) for ell in range(k + 1))


def _derivative(v: np.ndarray, dt: int = 0, ds: int = 0) -> np.ndarray:
    out = v
    if dt:
        out = npoly.polyder(out, dt, axis=0)
    if ds:
        out = npoly.polyder(out, ds, axis=1)
    return out


class TorsionField(ScalarField):
    """u_eps on R^(N+1) with coordinates (x, y_1, ..., y_N)."""

    kind = "analytic"

    def __init__(self, k: int, roots: tuple[float, ...], dims: int, eps: float) -> None:
        self.k = k
        self.roots = roots
        self.dims = dims
        self.eps = eps
        self.dim = dims + 1
        self.name = f"torsion k={k} N={dims} eps={eps:g}"
        self.f_coefficients = product_coefficients(roots)
        self.v_coefficients = real_part_coefficients(self.f_coefficients)
        self.harmonic = harmonic_coefficients(self.f_coefficients)
        self.top_degree = top_degree_coefficients(k)
        v = np.array([[float(c) for c in row] for row in self.v_coefficients])
        self._v = {
            (dt, ds): _derivative(v, dt, ds) for dt in range(3) for ds in range(3) if dt + ds <= 2
        }

    def v(self, t: np.ndarray, s: np.ndarray, dt: int = 0, ds: int = 0) -> np.ndarray:
        """v or one of its partial derivatives up to second order."""
        return npoly.polyval2d(t, s, self._v[(dt, ds)])

    def q(self, t: np.ndarray | float) -> np.ndarray:
        """Restriction v(t, 0) = -prod (t^2 - t_l^2)."""
        t = np.asarray(t, dtype=float)
        return self.v(t, np.zeros_like(t))

    @property
    def origin_value(self) -> float:
        return self.dims / 2 + self.eps * self.dims * float(self.q(0.0))

    def value(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points, self.dim)
        x, y = pts[:, 0], pts[:, 1:]
        phi = sum(self.v(x, y[:, j]) for j in range(self.dims))
        return 0.5 * (self.dims - np.sum(y**2, axis=1)) + self.eps * phi

    def gradient(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points, self.dim)
        x, y = pts[:, 0], pts[:, 1:]
        out = np.empty_like(pts)
        out[:, 0] = self.eps * sum(self.v(x, y[:, j], dt=1) for j in range(self.dims))
        for j in range(self.dims):
            out[:, 1 + j] = -y[:, j] + self.eps * self.v(x, y[:, j], ds=1)
        return out

    def hessian(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points, self.dim)
        x, y = pts[:, 0], pts[:, 1:]
        out = np.zeros((len(pts), self.dim, self.dim))
        out[:, 0, 0] = self.eps * sum(self.v(x, y[:, j], dt=2) for j in range(self.dims))
        for j in range(self.dims):
            mixed = self.eps * self.v(x, y[:, j], dt=1, ds=1)
            out[:, 0, 1 + j] = mixed
            out[:, 1 + j, 0] = mixed
            out[:, 1 + j, 1 + j] = -1.0 + self.eps * self.v(x, y[:, j], ds=2)
        return out

    def sample(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        x = axes[0]
        out = np.full(tuple(a.size for a in axes), 0.5 * self.dims)
        for j, y in enumerate(axes[1:], start=1):
            shape = [1] * len(axes)
            shape[j] = y.size
            out -= 0.5 * (y**2).reshape(shape)
            shape[0] = x.size
            out += self.eps * npoly.polygrid2d(x, y, self._v[(0, 0)]).reshape(shape)
        return out


def build_torsion_field(k: int, roots: Sequence[float], dims: int, eps: float) -> TorsionField:
    """Assemble u_eps and verify its exact polynomial identities.

    Raises:
        RootOrderError: the roots are not 0 < t_1 < ... < t_k.
        EpsTooLarge: u_eps(0) <= 0.
    """
    roots = tuple(float(t) for t in roots)
    if len(roots) != k or k < 1:
        raise RootOrderError(f"expected {k} roots, got {len(roots)}", value=len(roots))
    if roots[0] <= 0 or any(b <= a for a, b in zip(roots, roots[1:])):
        raise RootOrderError("roots must satisfy 0 < t_1 < ... < t_k", roots=list(roots))
    if dims < 1:
        raise InputError("N must be >= 1", value=dims)
    if dims == 1:
        logger.warning("N = 1: the boundary curvature is expected to change sign")
    if eps < 0:
        raise InputError("eps must be nonnegative", value=eps)
    tf = TorsionField(k, roots, dims, eps)
    if not tf.origin_value > 0:
        raise EpsTooLarge(f"u_eps(0) = {tf.origin_value:.6g} is not positive", value=eps)
    if harmonic_defect(tf) != 0:
        raise CertificationFailure("v is not harmonic", value=float(harmonic_defect(tf)))
    if tf.harmonic[k] != 1:
        raise CertificationFailure("leading harmonic coefficient is not 1", value=float(tf.harmonic[k]))
    logger.debug("torsion field %s, harmonic coefficients %s", tf.name, [str(a) for a in tf.harmonic])
    return tf


def harmonic_defect(tf: TorsionField) -> Fraction:
    """Largest |coefficient| of the Laplacian of v; exactly zero."""
    return max(abs(c) for row in laplacian_coefficients(tf.v_coefficients) for c in row)


def torsion_laplacian(tf: TorsionField) -> Fraction:
    """Laplacian of u_eps in closed form: -N + eps sum_j (v_tt + v_ss)."""
    return Fraction(-tf.dims) + Fraction(tf.eps) * tf.dims * harmonic_defect(tf)


def mean_curvature(tf: ScalarField, points: np.ndarray, *, grad_floor: float = 1e-14) -> np.ndarray:
    """Mean curvature of the level set through each point.

    Uses the structured formula valid when the y-block of the Hessian is
    diagonal; the second sum runs over l != j.
    """
    pts = _as_points(points, tf.dim)
    g = tf.gradient(pts)
    h = tf.hessian(pts)
    norm = np.linalg.norm(g, axis=1)
    if np.any(norm <= grad_floor):
        worst = int(np.argmin(norm))
        raise SingularGradient("gradient vanishes on the level set", point=pts[worst], value=float(norm[worst]))
    n = tf.dim - 1
    fx = g[:, 0]
    fxx = h[:, 0, 0]
    fy = g[:, 1:]
    fyy = np.einsum("mjj->mj", h[:, 1:, 1:])
    fxy = h[:, 0, 1:]
    bracket = np.sum(fx[:, None] ** 2 * fyy - 2 * fx[:, None] * fy * fxy + fy**2 * fxx[:, None], axis=1)
    bracket += np.sum(fy**2, axis=1) * np.sum(fyy, axis=1) - np.sum(fy**2 * fyy, axis=1)
    return -bracket / (n * norm**3)


def level_set_mean_curvature(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """-(|g|^2 tr H - g.Hg) / (n |g|^3) for hypersurfaces of dimension n."""
    g = np.atleast_2d(grad)
    h = hess.reshape(-1, g.shape[1], g.shape[1])
    norm = np.linalg.norm(g, axis=1)
    trace = np.trace(h, axis1=1, axis2=2)
    ghg = np.einsum("mi,mij,mj->m", g, h, g)
    return -(norm**2 * trace - ghg) / ((g.shape[1] - 1) * norm**3)


@dataclass(frozen=True)
class CurvatureSample:
    point: tuple[float, ...]
    grad: tuple[float, ...]
    k_m: float


@dataclass
class CurvatureReport:
    """Mean curvature at every boundary vertex."""

    points: np.ndarray
    values: np.ndarray
    grads: np.ndarray = field(repr=False)

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    @property
    def worst(self) -> CurvatureSample:
        i = int(np.argmin(self.values))
        return CurvatureSample(
            point=tuple(map(float, self.points[i])), grad=tuple(map(float, self.grads[i])), k_m=float(self.values[i])
        )


def certify_positive_curvature(tf: TorsionField, d: DomainSlab) -> CurvatureReport:
    """K_m at every boundary vertex; raises NegativeCurvatureFound unless all > 0."""
    values = mean_curvature(tf, d.vertices)
    report = CurvatureReport(points=d.vertices, values=values, grads=tf.gradient(d.vertices))
    logger.info("%s: min K_m = %.6g over %d vertices", tf.name, report.min_value, len(values))
    if not report.min_value > 0:
        worst = report.worst
        raise NegativeCurvatureFound(
            f"mean curvature {worst.k_m:.6g} at a boundary point", point=worst.point, value=worst.k_m
        )
    return report


def axis_crossing_exact(tf: TorsionField) -> float:
    """Largest root of N/2 + eps N q(x) = 0."""
    q = np.array([float(c) for c in tf.f_coefficients])
    q[0] += 1.0 / (2.0 * tf.eps)
    roots = npoly.polyroots(q)
    real = roots[np.abs(roots.imag) < 1e-9].real
    return float(real.max())


@dataclass(frozen=True)
class AsymptoticsReport:
    crossing_exact: float
    crossing_measured: float
    leading_term: float
    m_eps: float
    max_abs_x: float
    max_abs_y: float
    y_limit: float
    cylinder_deviation: float

    @property
    def leading_ratio(self) -> float:
        return self.crossing_exact / self.leading_term


def boundary_asymptotics(
    tf: TorsionField,
    d: DomainSlab,
    *,
    eta: float = 0.05,
    crossing_tol: float = 0.02,
    bounded_x: Optional[float] = None,
) -> AsymptoticsReport:
    """Compare the extracted boundary with the exact crossing and with C_eps.

    Raises:
        AsymptoticViolated: the y = 0 crossing misses the quartic root by more
            than `crossing_tol`, or the boundary leaves
            [-M_eps, M_eps] x B(0, sqrt(N)(1 + eta)).
    """
    exact = axis_crossing_exact(tf)
    on_axis = np.all(np.abs(d.vertices[:, 1:]) < 1e-12, axis=1)
    measured = float(np.max(np.abs(d.vertices[on_axis, 0]))) if on_axis.any() else float(np.max(np.abs(d.vertices[:, 0])))
    m_eps = tf.eps ** (-1.0 / (2 * tf.k))
    radius = np.linalg.norm(d.vertices[:, 1:], axis=1)
    y_limit = math.sqrt(tf.dims) * (1.0 + eta)
    reach = max(tf.roots) + 1.0 if bounded_x is None else bounded_x
    near = np.abs(d.vertices[:, 0]) <= reach
    deviation = float(np.max(np.abs(radius[near] ** 2 - tf.dims))) if near.any() else math.nan
    report = AsymptoticsReport(
        crossing_exact=exact,
        crossing_measured=measured,
        leading_term=(2.0 * tf.eps) ** (-1.0 / (2 * tf.k)),
        m_eps=m_eps,
        max_abs_x=float(np.max(np.abs(d.vertices[:, 0]))),
        max_abs_y=float(radius.max()),
        y_limit=y_limit,
        cylinder_deviation=deviation,
    )
    if abs(measured / exact - 1.0) > crossing_tol:
        raise AsymptoticViolated(
            f"crossing {measured:.6g} differs from {exact:.6g} by more than {crossing_tol:.0%}", value=measured
        )
    if report.max_abs_x > m_eps or report.max_abs_y >= y_limit:
        raise AsymptoticViolated(
            f"boundary leaves [-{m_eps:.6g}, {m_eps:.6g}] x B(0, {y_limit:.6g})",
            value=max(report.max_abs_x - m_eps, report.max_abs_y - y_limit),
        )
    logger.info(
        "%s: crossing %.6g (exact %.6g, leading %.6g), |y|^2 - N within %.3g",
        tf.name, measured, exact, report.leading_term, deviation,
    )
    return report


def q_critical_points(tf: TorsionField) -> list[tuple[float, float]]:
    """Real critical points of q with q'' there, ascending."""
    q = np.array([float(c) for c in tf.f_coefficients])
    dq = npoly.polyder(q)
    roots = npoly.polyroots(dq)
    real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    d2q = npoly.polyder(q, 2)
    out = []
    for t in real:
        # one Newton polish on q'
        t = t - npoly.polyval(t, dq) / npoly.polyval(t, d2q)
        out.append((float(t), float(npoly.polyval(t, d2q))))
    return out


def q_second_derivative(tf: TorsionField, tau: float) -> float:
    """q''(tau) by differentiating the exact coefficients."""
    d2q = [float(c) for c in npoly.polyder([float(c) for c in tf.f_coefficients], 2)]
    return float(npoly.polyval(tau, d2q))


def q_second_derivative_identity(tf: TorsionField, tau: float) -> float:
    """-4 tau^2 q(tau) sum_l 1 / (tau^2 - t_l^2)^2, valid where q'(tau) = 0."""
    t2 = tau * tau
    return -4.0 * t2 * float(tf.q(tau)) * sum(1.0 / (t2 - r * r) ** 2 for r in tf.roots)


def radial_identity(tf: TorsionField, points: np.ndarray) -> float:
    """Largest gap between z . grad u_eps and -N + eps sum_j (x v_t + y_j v_s - 2 v)."""
    pts = _as_points(points, tf.dim)
    lhs = np.einsum("mi,mi->m", pts, tf.gradient(pts))
    x = pts[:, 0]
    rhs = -float(tf.dims) + tf.eps * sum(
        x * tf.v(x, pts[:, 1 + j], dt=1) + pts[:, 1 + j] * tf.v(x, pts[:, 1 + j], ds=1) - 2 * tf.v(x, pts[:, 1 + j])
        for j in range(tf.dims)
    )
    return float(np.max(np.abs(lhs - rhs)))


def torsion_grid(tf: TorsionField, counts: Sequence[int]) -> GridSpec:
    """Grid around the component: x to 1.15 times the crossing, y to 1.2 sqrt(N)."""
    x_count, y_count = counts[0], counts[-1]
    return GridSpec.centered(
        [1.15 * axis_crossing_exact(tf)] + [1.2 * math.sqrt(tf.dims)] * tf.dims,
        [x_count] + [y_count] * tf.dims,
    )


def torsion_axis_names(dims: int) -> tuple[str, ...]:
    return ("x", *(f"y{j}" for j in range(1, dims + 1)))


@dataclass
class TorsionCaseReport:
    """Certification results of one eps."""

    tf: TorsionField
    slab: DomainSlab
    star: Optional[StarShapeReport] = None
    symmetric: bool = False
    curvature: Optional[CurvatureReport] = None
    asymptotics: Optional[AsymptoticsReport] = None
    maxima: list[tuple[float, float]] = field(default_factory=list)
    q_identity_gap: float = math.nan
    radial_gap: float = math.nan
    failures: dict[str, dict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures


def check_maxima(
    tf: TorsionField, *, identity_tol: float = 1e-12, floor: float = 0.0
) -> tuple[list[tuple[float, float]], float]:
    """Nondegenerate maxima of q over R and the agreement of both q'' paths.

    The maxima of u_eps sit at (t, 0, ..., 0) with d_xx u_eps = eps N q''(t);
    each |d_xx u_eps| must exceed `floor`.
    """
    critical = q_critical_points(tf)
    found = [(t, tf.eps * tf.dims * d2) for t, d2 in critical if d2 < 0]
    gap = 0.0
    for t, _ in critical:
        if abs(t) < 1e-12:
            continue
        direct = q_second_derivative(tf, t)
        identity = q_second_derivative_identity(tf, t)
        gap = max(gap, abs(direct - identity) / abs(direct))
    if gap > identity_tol:
        raise CertificationFailure(f"q'' identity disagrees by {gap:.3g}", value=gap)
    if len(found) < tf.k:
        raise MaximaCountTooLow(f"{len(found)} maxima of q, expected at least {tf.k}", value=len(found))
    flattest = min(found, key=lambda item: abs(item[1]))
    if abs(flattest[1]) <= floor:
        raise DegenerateFound(
            f"maximum at t={flattest[0]:.6g} has |d_xx u| = {abs(flattest[1]):.3g} <= {floor:.3g}",
            point=(flattest[0], *([0.0] * tf.dims)),
            value=flattest[1],
        )
    return found, gap


def certify_torsion_case(
    tf: TorsionField,
    counts: Sequence[int],
    *,
    eta: float = 0.05,
    surface_tol: float = 1e-10,
    symmetry_tol: float = 1e-12,
    degeneracy_factor: float = 1e-6,
    crossing_tol: float = 0.02,
    spec: Optional[GridSpec] = None,
    max_nodes: int = 64_000_000,
) -> TorsionCaseReport:
    """Run every geometric check on one eps; failures are collected, not raised."""
    grid = spec or torsion_grid(tf, counts)
    slab = extract_component(tf, grid, axis_names=torsion_axis_names(tf.dims), max_nodes=max_nodes)
    report = TorsionCaseReport(tf=tf, slab=slab)

    def attempt(name: str, fn):
        try:
            return fn()
        except CertificationFailure as exc:
            logger.warning("%s: %s failed: %s", tf.name, name, exc)
            report.failures[name] = exc.as_dict()
            return None

    attempt("boundary_residual", lambda: check_surface_residual(slab, surface_tol))
    report.star = attempt("star_shape", lambda: check_star_shape(tf, slab))
    report.symmetric = bool(attempt("symmetry", lambda: check_symmetry(slab, symmetry_tol)))
    report.curvature = attempt("curvature", lambda: certify_positive_curvature(tf, slab))
    report.asymptotics = attempt(
        "asymptotics", lambda: boundary_asymptotics(tf, slab, eta=eta, crossing_tol=crossing_tol)
    )
    floor = default_floor(slab, degeneracy_factor)
    maxima = attempt("maxima", lambda: check_maxima(tf, floor=floor))
    if maxima is not None:
        report.maxima, report.q_identity_gap = maxima
    report.radial_gap = radial_identity(tf, slab.vertices)
    return report


@dataclass
class TorsionTheoremReport:
    cases: list[TorsionCaseReport]
    convergence: Optional[ConvergenceReport]
    failures: dict[str, dict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures and all(c.passed for c in self.cases)


def certify_torsion_theorem(
    k: int,
    roots: Sequence[float],
    dims: int,
    eps_list: Sequence[float],
    counts: Sequence[int] = (257, 257),
    *,
    eta: float = 0.05,
    surface_tol: float = 1e-10,
    max_nodes: int = 64_000_000,
) -> TorsionTheoremReport:
    """Certify every eps on one grid sized for the smallest eps, then the cylinder limit.

    Reported values are for u_eps; dividing by N gives the torsion function
    of the normalized problem -Laplace(u) = 1.
    """
    fields = [build_torsion_field(k, roots, dims, eps) for eps in eps_list]
    smallest = min(fields, key=lambda tf: tf.eps)
    spec = torsion_grid(smallest, counts)
    cases = [
        certify_torsion_case(tf, counts, eta=eta, surface_tol=surface_tol, spec=spec, max_nodes=max_nodes)
        for tf in fields
    ]
    failures: dict[str, dict] = {}
    convergence = None
    if len(cases) > 1:
        reach = max(roots) + 1.0
        box = [(-reach, reach)] + [(-spec.upper[1], spec.upper[1])] * dims
        try:
            convergence = check_strip_convergence(
                [c.slab for c in cases], box, limit=math.sqrt(dims), y_axes=range(1, dims + 1)
            )
        except CertificationFailure as exc:
            failures["cylinder_convergence"] = exc.as_dict()
    return TorsionTheoremReport(cases=cases, convergence=convergence, failures=failures)


def curvature_table(report: CurvatureReport) -> tuple[list[str], np.ndarray]:
    dim = report.points.shape[1]
    header = ["x", *(f"y{j}" for j in range(1, dim))] + ["K_m"]
    return header, np.column_stack([report.points, report.values])
