"""Scalar fields on R^(N+1) with value, gradient and Hessian access.

Points are arrays of shape (M, dim).  Strip fields order coordinates as
(x_1, ..., x_N, y); the cylinder fields of the torsion construction use
(x, y_1, ..., y_N).
"""

from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from multibump.coshcombo import CoshCombo
from multibump.errors import InputError, ModeMismatch, OriginNotPositive, OutOfMemoryBudget, ResidualTooLarge
from multibump.profile1d import Mode, Profile1D

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 64_000_000


class ScalarField(abc.ABC):
    """A C^2 scalar field with vectorized derivatives."""

    dim: int
    kind: str = "analytic"
    name: str = "field"

    @abc.abstractmethod
    def value(self, points: np.ndarray) -> np.ndarray:
        """Return field values, shape (M,)."""

    @abc.abstractmethod
    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Return gradients, shape (M, dim)."""

    @abc.abstractmethod
    def hessian(self, points: np.ndarray) -> np.ndarray:
        """Return Hessians, shape (M, dim, dim)."""

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.value(_as_points(points, self.dim))

    def sample(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate on the tensor grid spanned by `axes` (ij indexing)."""
        shape = tuple(a.size for a in axes)
        out = np.empty(shape)
        # slabs along the first axis keep the temporary point arrays small
        rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, len(axes) - 1)
        for i, x0 in enumerate(axes[0]):
            pts = np.column_stack([np.full(rest.shape[0], x0), rest])
            out[i] = self.value(pts).reshape(shape[1:])
        return out


def _as_points(points: np.ndarray, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[-1] != dim:
        raise InputError(f"expected points of dimension {dim}, got {pts.shape[-1]}")
    return pts


@dataclass
class AnalyticField(ScalarField):
    """Field given by closed-form callables."""

    dim: int
    value_fn: Callable[[np.ndarray], np.ndarray]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    hessian_fn: Callable[[np.ndarray], np.ndarray]
    name: str = "analytic"
    kind: str = "analytic"

    def value(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.value_fn(_as_points(points, self.dim)), dtype=float)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient_fn(_as_points(points, self.dim)), dtype=float)

    def hessian(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.hessian_fn(_as_points(points, self.dim)), dtype=float)


def quadratic_field(center_value: float, weights: Sequence[float], shift: Optional[Sequence[float]] = None) -> AnalyticField:
    """c - sum_i w_i (z_i - s_i)^2, e.g. 1 - x^2 - y^2 for the unit disk."""
    w = np.asarray(weights, dtype=float)
    s = np.zeros_like(w) if shift is None else np.asarray(shift, dtype=float)
    dim = w.size
    return AnalyticField(
        dim=dim,
        value_fn=lambda p: center_value - np.sum(w * (p - s) ** 2, axis=1),
        gradient_fn=lambda p: -2.0 * w * (p - s),
        hessian_fn=lambda p: np.broadcast_to(-2.0 * np.diag(w), (p.shape[0], dim, dim)).copy(),
        name="quadratic",
    )


class PerturbationField(ScalarField):
    """phi(x, y) = sum_j sum_i alpha_i cosh(sqrt(mu_i) x_j) omega_i(y).

    Analytic in the x_j, cubic-spline in y through the mode tables.
    """

    kind = "analytic-x/spline-y"
    name = "phi"

    def __init__(self, terms: Sequence[tuple[float, float, Mode]], dims: int) -> None:
        self.terms = tuple((float(a), float(mu), m) for a, mu, m in terms)
        self.dims = dims
        self.dim = dims + 1

    def _profile_parts(self, y: np.ndarray, order: int) -> list[np.ndarray]:
        getter = {0: "value", 1: "d1", 2: "d2"}[order]
        return [getattr(m, getter)(y) for _, _, m in self.terms]

    def _x_parts(self, x: np.ndarray, order: int) -> list[np.ndarray]:
        out = []
        for a, mu, _ in self.terms:
            r = math.sqrt(mu)
            if order == 0:
                out.append(a * np.cosh(r * x))
            elif order == 1:
                out.append(a * r * np.sinh(r * x))
            else:
                out.append(a * mu * np.cosh(r * x))
        return out

    def slice_value(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """One-direction term G(x, y) = sum_i alpha_i cosh(sqrt(mu_i) x) omega_i(y)."""
        return sum(cx * wy for cx, wy in zip(self._x_parts(x, 0), self._profile_parts(y, 0)))

    def value(self, points: np.ndarray) -> np.ndarray:
        p = _as_points(points, self.dim)
        y = p[:, -1]
        return sum(self.slice_value(p[:, j], y) for j in range(self.dims))

    def gradient(self, points: np.ndarray) -> np.ndarray:
        p = _as_points(points, self.dim)
        y = p[:, -1]
        w0, w1 = self._profile_parts(y, 0), self._profile_parts(y, 1)
        grad = np.zeros_like(p)
        for j in range(self.dims):
            grad[:, j] = sum(s * w for s, w in zip(self._x_parts(p[:, j], 1), w0))
            grad[:, -1] += sum(c * w for c, w in zip(self._x_parts(p[:, j], 0), w1))
        return grad

    def hessian(self, points: np.ndarray) -> np.ndarray:
        p = _as_points(points, self.dim)
        y = p[:, -1]
        w0, w1, w2 = (self._profile_parts(y, o) for o in (0, 1, 2))
        hess = np.zeros((p.shape[0], self.dim, self.dim))
        for j in range(self.dims):
            c, s, cc = (self._x_parts(p[:, j], o) for o in (0, 1, 2))
            hess[:, j, j] = sum(a * w for a, w in zip(cc, w0))
            mixed = sum(a * w for a, w in zip(s, w1))
            hess[:, j, -1] = mixed
            hess[:, -1, j] = mixed
            hess[:, -1, -1] += sum(a * w for a, w in zip(c, w2))
        return hess

    def sample(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        y = axes[-1]
        shape = tuple(a.size for a in axes)
        out = np.zeros(shape)
        for j in range(self.dims):
            g = self.slice_value(axes[j][:, None], y[None, :])
            view = [1] * len(axes)
            view[j], view[-1] = axes[j].size, y.size
            out += g.reshape(view)
        return out


def assemble_phi(combo: CoshCombo, modes: Sequence[Mode], dims: int) -> PerturbationField:
    """Build phi from the nonzero terms of the combination and matching modes."""
    if dims < 1:
        raise InputError("N must be >= 1", value=dims)
    terms = combo.terms
    if len(modes) != len(terms):
        raise ModeMismatch(f"{len(modes)} modes for {len(terms)} frequencies")
    for (_, mu, _), mode in zip(terms, modes):
        if not math.isclose(mu, mode.mu, rel_tol=1e-12, abs_tol=1e-15):
            raise ModeMismatch(f"mode at mu={mode.mu:g} supplied for mu={mu:g}", value=mode.mu)
    return PerturbationField([(a, mu, m) for (_, mu, a), m in zip(terms, modes)], dims)


class SuperposedField(ScalarField):
    """U(x, y) = u0(y) + eps phi(x, y)."""

    name = "u0+eps*phi"

    def __init__(self, profile: Profile1D, phi: PerturbationField, eps: float) -> None:
        self.profile = profile
        self.phi = phi
        self.eps = float(eps)
        self.dim = phi.dim
        self.dims = phi.dims
        self.kind = phi.kind

    def value(self, points: np.ndarray) -> np.ndarray:
        p = _as_points(points, self.dim)
        out = self.profile.value(p[:, -1])
        if self.eps:
            out = out + self.eps * self.phi.value(p)
        return out

    def gradient(self, points: np.ndarray) -> np.ndarray:
        p = _as_points(points, self.dim)
        grad = self.eps * self.phi.gradient(p) if self.eps else np.zeros_like(p)
        grad[:, -1] += self.profile.d1(p[:, -1])
        return grad

    def hessian(self, points: np.ndarray) -> np.ndarray:
        p = _as_points(points, self.dim)
        hess = self.eps * self.phi.hessian(p) if self.eps else np.zeros((p.shape[0], self.dim, self.dim))
        hess[:, -1, -1] += self.profile.d2(p[:, -1])
        return hess

    def sample(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        view = [1] * len(axes)
        view[-1] = axes[-1].size
        base = self.profile.value(axes[-1]).reshape(view)
        shape = tuple(a.size for a in axes)
        if not self.eps:
            return np.broadcast_to(base, shape).copy()
        return base + self.eps * self.phi.sample(axes)


def superpose(p: Profile1D, phi: PerturbationField, eps: float) -> SuperposedField:
    """Return u0 + eps phi, rejecting eps for which the origin is not inside."""
    if eps < 0:
        raise InputError("eps must be nonnegative", value=eps)
    field_ = SuperposedField(p, phi, eps)
    origin = float(field_.value(np.zeros((1, phi.dim)))[0])
    if not origin > 0:
        raise OriginNotPositive(
            f"u0(0) + eps phi(0) = {origin:.6g} <= 0 at eps={eps:g}", point=[0.0] * phi.dim, value=origin
        )
    return field_


def remark_field(mu1: float, eps: float, alphas: Sequence[float] = (-1.0,), mus: Sequence[float] = ()) -> AnalyticField:
    """Two-dimensional eigenfunction construction with f(t) = (pi^2 / 4) t.

    u0 = cos(pi y / 2) and every mode is cos(sqrt(pi^2/4 + mu) y); by default a
    single term with coefficient -1 at mu1.
    """
    lam1 = math.pi**2 / 4
    mus = tuple(mus) or (mu1,)
    if len(mus) != len(alphas):
        raise ModeMismatch("coefficients and frequencies differ in length")
    rates = [(a, math.sqrt(m), math.sqrt(lam1 + m)) for a, m in zip(alphas, mus)]
    half_pi = math.pi / 2

    def value(p: np.ndarray) -> np.ndarray:
        x, y = p[:, 0], p[:, 1]
        return np.cos(half_pi * y) + eps * sum(a * np.cosh(r * x) * np.cos(w * y) for a, r, w in rates)

    def gradient(p: np.ndarray) -> np.ndarray:
        x, y = p[:, 0], p[:, 1]
        gx = eps * sum(a * r * np.sinh(r * x) * np.cos(w * y) for a, r, w in rates)
        gy = -half_pi * np.sin(half_pi * y) - eps * sum(a * w * np.cosh(r * x) * np.sin(w * y) for a, r, w in rates)
        return np.column_stack([gx, gy])

    def hessian(p: np.ndarray) -> np.ndarray:
        x, y = p[:, 0], p[:, 1]
        hxx = eps * sum(a * r * r * np.cosh(r * x) * np.cos(w * y) for a, r, w in rates)
        hxy = -eps * sum(a * r * w * np.sinh(r * x) * np.sin(w * y) for a, r, w in rates)
        hyy = -(half_pi**2) * np.cos(half_pi * y) - eps * sum(a * w * w * np.cosh(r * x) * np.cos(w * y) for a, r, w in rates)
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)

    return AnalyticField(dim=2, value_fn=value, gradient_fn=gradient, hessian_fn=hessian, name="remark")


@dataclass(frozen=True)
class GridSpec:
    """Axis extents and node counts of a tensor grid."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.lower) == len(self.upper) == len(self.counts)):
            raise InputError("grid extents and counts differ in length")
        if any(c < 3 for c in self.counts):
            raise InputError("every axis needs at least 3 nodes", counts=list(self.counts))
        if any(b <= a for a, b in zip(self.lower, self.upper)):
            raise InputError("grid extents are degenerate")

    @classmethod
    def centered(cls, half_widths: Sequence[float], counts: Sequence[int]) -> GridSpec:
        return cls(
            lower=tuple(-float(w) for w in half_widths),
            upper=tuple(float(w) for w in half_widths),
            counts=tuple(int(c) for c in counts),
        )

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def node_count(self) -> int:
        return int(np.prod(self.counts, dtype=np.int64))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (c - 1) for a, b, c in zip(self.lower, self.upper, self.counts))

    @property
    def is_symmetric(self) -> bool:
        return all(a == -b and c % 2 == 1 for a, b, c in zip(self.lower, self.upper, self.counts))

    def axes(self) -> list[np.ndarray]:
        """Node coordinates per axis; symmetric axes mirror exactly about 0."""
        out = []
        for a, b, c in zip(self.lower, self.upper, self.counts):
            axis = np.linspace(a, b, c)
            if a == -b:
                axis = 0.5 * (axis - axis[::-1])
            out.append(axis)
        return out

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Nearest node index of a point."""
        return tuple(
            int(np.clip(round((p - a) / h), 0, c - 1))
            for p, a, h, c in zip(point, self.lower, self.spacing, self.counts)
        )

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "counts": list(self.counts), "order": "C"}


@dataclass
class GridSample:
    """Field values on every node of a grid."""

    field: ScalarField
    spec: GridSpec
    values: np.ndarray

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return self.spec.axes()

    @cached_property
    def gradients(self) -> np.ndarray:
        """Field gradients on the nodes, shape grid.shape + (dim,)."""
        pts = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.spec.dim)
        return self.field.gradient(pts).reshape(*self.spec.shape, self.spec.dim)


def sample_on_grid(field_: ScalarField, spec: GridSpec, max_nodes: int = DEFAULT_MAX_NODES) -> GridSample:
    """Sample a field on every node of `spec` in C order."""
    if spec.dim != field_.dim:
        raise InputError(f"grid of dimension {spec.dim} for a field of dimension {field_.dim}")
    if spec.node_count > max_nodes:
        raise OutOfMemoryBudget(
            f"grid has {spec.node_count} nodes, cap is {max_nodes}", value=spec.node_count
        )
    values = field_.sample(spec.axes())
    logger.debug("sampled %s on %s nodes", field_.name, "x".join(map(str, spec.counts)))
    return GridSample(field=field_, spec=spec, values=values)


def axis_crossing(field_: ScalarField, direction: Sequence[float], reach: float, samples: int = 4001) -> float:
    """First positive zero of the field along a ray from the origin."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    t = np.linspace(0.0, reach, samples)
    values = field_.value(t[:, None] * d[None, :])
    negative = np.flatnonzero(values <= 0)
    if negative.size == 0:
        return math.inf
    i = int(negative[0])
    if i == 0:
        return 0.0
    return bisect(lambda s: float(field_.value((s * d)[None, :])[0]), float(t[i - 1]), float(t[i]), xtol=1e-12)


def linearized_residual(phi: PerturbationField, p: Profile1D, points: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """|Laplace(phi) + lam f'(u0) phi| with a central-difference Laplacian."""
    pts = _as_points(points, phi.dim)
    center = phi.value(pts)
    laplace = np.zeros(len(pts))
    for a in range(phi.dim):
        step = np.zeros(phi.dim)
        step[a] = h
        laplace += (phi.value(pts + step) - 2.0 * center + phi.value(pts - step)) / h**2
    return np.abs(laplace - p.potential(pts[:, -1]) * center)


def check_linearized_residual(
    phi: PerturbationField,
    p: Profile1D,
    rng: np.random.Generator,
    box: Sequence[tuple[float, float]],
    *,
    samples: int = 100,
    h: float = 1e-3,
    tol: float = 1e-4,
) -> float:
    """Largest residual of the linearized equation at random points of `box`.

    The residual is relative to max(1, max |phi|) over the sample.

    Raises:
        ResidualTooLarge: the relative residual exceeds `tol`.
    """
    lower, upper = np.array(box, dtype=float).T
    points = rng.uniform(lower, upper, size=(samples, len(box)))
    residual = linearized_residual(phi, p, points, h)
    scale = max(1.0, float(np.max(np.abs(phi.value(points)))))
    worst = int(np.argmax(residual))
    relative = float(residual[worst]) / scale
    logger.debug("linearized residual %.3g (scale %.3g) at %d points", relative, scale, samples)
    if relative > tol:
        raise ResidualTooLarge(
            f"phi misses the linearized equation by {relative:.3g} > {tol:g}", point=points[worst], value=relative
        )
    return relative
