"""Dirichlet solves of -Laplace(u) = lam f(u) on extracted components.

The operator is the five/seven-point Laplacian with Shortley-Weller
treatment of cut links: a node whose neighbour lies outside the component
uses the true distance theta * h to the zero of the defining field, found by
bisection.  A neighbour beyond the grid counts as a Dirichlet node one full
step away.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as splalg

from multibump.coshcombo import CoshCombo
from multibump.domainforge import DomainSlab, extract_component
from multibump.errors import (
    BarrierViolated,
    BoundViolated,
    ConvergenceFailure,
    IterationDiverged,
    KOutsideDomain,
    LadderViolation,
    ResidualTooLarge,
    StabilityLost,
    TooCoarse,
)
from multibump.fieldkit import GridSpec, PerturbationField
from multibump.profile1d import Mode, Nonlinearity, Profile1D, WidenedProfile, omega_mode

logger = logging.getLogger(__name__)

BISECTION_STEPS = 60
MIN_THETA = 1e-8


@dataclass
class DiscreteOperator:
    """Shortley-Weller matrix on the nodes of a component."""

    slab: DomainSlab
    matrix: sps.csc_matrix
    index: np.ndarray
    nodes: np.ndarray
    points: np.ndarray
    min_theta: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def solve(self) -> Callable[[np.ndarray], np.ndarray]:
        """Sparse LU solver, factorized once."""
        return splalg.factorized(self.matrix)

    def to_grid(self, u: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full(self.slab.mask.shape, fill)
        out[self.slab.mask] = u
        return out


def _refined_slab(d: DomainSlab, h: float) -> DomainSlab:
    counts = []
    for lo, hi in zip(d.spec.lower, d.spec.upper):
        c = int(math.ceil((hi - lo) / h - 1e-9)) + 1
        counts.append(c if c % 2 else c + 1)
    spec = GridSpec(lower=d.spec.lower, upper=d.spec.upper, counts=tuple(counts))
    return extract_component(d.field, spec, axis_names=d.axis_names, allow_faces=d.touching_faces)


def discretize(d: DomainSlab, h: Optional[float] = None) -> DiscreteOperator:
    """Assemble -Laplace with Shortley-Weller rows at cut links.

    Args:
        d: Extracted component.
        h: Optional target spacing; when finer than the slab grid the
            component is re-extracted on a refined grid first.
    """
    if h is not None and h < min(d.spec.spacing) * (1 - 1e-12):
        d = _refined_slab(d, h)
    mask = d.mask
    shape = mask.shape
    index = np.full(shape, -1, dtype=np.int64)
    n = int(mask.sum())
    index[mask] = np.arange(n)
    nodes = np.argwhere(mask)
    axes = d.spec.axes()
    points = np.column_stack([axes[a][nodes[:, a]] for a in range(d.dim)])
    u_nodes = d.field.value(points)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    diag = np.zeros(n)
    interior_neighbours = np.zeros(n, dtype=np.int64)
    min_theta = 1.0
    for a, h_a in enumerate(d.spec.spacing):
        arms = {}
        neighbours = {}
        for s in (-1, 1):
            nb = nodes.copy()
            nb[:, a] += s
            in_grid = (nb[:, a] >= 0) & (nb[:, a] < shape[a])
            nb[:, a] = np.clip(nb[:, a], 0, shape[a] - 1)
            unknown = index[tuple(nb.T)]
            unknown[~in_grid] = -1
            theta = np.ones(n)
            cut = in_grid & (unknown < 0)
            if cut.any():
                target = points[cut].copy()
                target[:, a] += s * h_a
                theta[cut] = _cut_fraction(d, points[cut], target, u_nodes[cut])
            arms[s] = theta * h_a
            neighbours[s] = unknown
            interior_neighbours += unknown >= 0
            min_theta = min(min_theta, float(theta.min()))
        left, right = arms[-1], arms[1]
        diag += 2.0 / (left * right)
        for s, arm in ((-1, left), (1, right)):
            coupled = neighbours[s] >= 0
            rows.append(np.flatnonzero(coupled))
            cols.append(neighbours[s][coupled])
            vals.append(-2.0 / (arm * (left + right))[coupled])

    isolated = np.flatnonzero(interior_neighbours == 0)
    if isolated.size:
        raise TooCoarse(
            f"{isolated.size} component nodes have no interior neighbour",
            point=points[isolated[0]],
        )
    matrix = sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ) + sps.diags(diag)
    logger.debug("operator with %d unknowns, smallest arm fraction %.3g", n, min_theta)
    return DiscreteOperator(
        slab=d, matrix=matrix.tocsc(), index=index, nodes=nodes, points=points, min_theta=min_theta
    )


def _cut_fraction(d: DomainSlab, inside: np.ndarray, outside: np.ndarray, u_inside: np.ndarray) -> np.ndarray:
    """Fraction of each link where the field changes sign."""
    u_out = d.field.value(outside)
    theta = np.ones(len(inside))
    crossing = (u_inside > 0) & (u_out <= 0)
    lo = np.zeros(int(crossing.sum()))
    hi = np.ones_like(lo)
    p, q = inside[crossing], outside[crossing]
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        positive = d.field.value(p + mid[:, None] * (q - p)) > 0
        lo = np.where(positive, mid, lo)
        hi = np.where(positive, hi, mid)
    theta[crossing] = np.maximum(0.5 * (lo + hi), MIN_THETA)
    return theta


def solve_linear(op: DiscreteOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve A u = rhs with zero Dirichlet data."""
    return op.solve(np.asarray(rhs, dtype=float))


def discrete_eigenvalue(op: DiscreteOperator, potential: Optional[np.ndarray] = None, tol: float = 1e-8) -> float:
    """Smallest eigenvalue of A + diag(potential) by shift-invert Arnoldi at 0."""
    matrix = op.matrix if potential is None else (op.matrix + sps.diags(potential)).tocsc()
    try:
        values = splalg.eigs(matrix, k=1, sigma=0.0, which="LM", tol=tol, return_eigenvectors=False)
    except (splalg.ArpackNoConvergence, RuntimeError) as exc:
        raise ConvergenceFailure("shift-invert eigensolve did not converge") from exc
    return float(values[0].real)


@dataclass
class DiscreteSolution:
    """Minimal discrete solution and its linearized eigenvalue."""

    op: DiscreteOperator
    f: Nonlinearity
    lam: float
    u: np.ndarray
    iterations: int
    defect: float
    mu_lin: float

    @property
    def slab(self) -> DomainSlab:
        return self.op.slab

    @property
    def grid_values(self) -> np.ndarray:
        return self.op.to_grid(self.u)

    @property
    def sup(self) -> float:
        return float(self.u.max())

    @cached_property
    def consistency(self) -> np.ndarray:
        """Nodewise bound w = L^{-1} |A U - lam f(U)| on |u - U|.

        U is the field that defines the component and L = A - lam f'(u) is
        the linearization at u, an M-matrix once mu_lin > 0.  When U solves
        the equation (u0 + eps phi with constant f) w bounds the
        discretization error alone.
        """
        field_values = self.slab.field.value(self.op.points)
        defect = np.abs(self.op.matrix @ field_values - self.lam * self.f(field_values))
        slope = self.lam * self.f.d1(self.u)
        if not np.any(slope):
            return self.op.solve(defect)
        linearized = (self.op.matrix - sps.diags(slope)).tocsc()
        return splalg.factorized(linearized)(defect)


def solve_stable(
    d: DomainSlab | DiscreteOperator,
    f: Nonlinearity,
    lam: float,
    *,
    tol: float = 1e-10,
    eigen_tol: float = 1e-8,
    cap: float = 1e6,
    max_iter: int = 5000,
    check_every: int = 10,
) -> DiscreteSolution:
    """Monotone iteration u_{m+1} = A^{-1} lam f(u_m) from u_0 = 0.

    Raises:
        IterationDiverged: the iterates exceed `cap`, stop increasing, or do
            not settle within `max_iter` sweeps.
        StabilityLost: the linearized eigenvalue is not positive.
    """
    op = d if isinstance(d, DiscreteOperator) else discretize(d)
    u = np.zeros(op.size)
    rhs = lam * f(u)
    checkpoint = u
    for iteration in range(1, max_iter + 1):
        new = op.solve(rhs)
        if not np.all(np.isfinite(new)) or new.max() > cap:
            raise IterationDiverged(
                f"iterate {iteration} exceeds the cap {cap:g}; lambda={lam:g} is too large", value=lam
            )
        if iteration % check_every == 0:
            if np.any(new < checkpoint - 1e-12 * max(1.0, float(new.max()))):
                raise IterationDiverged(f"iterate {iteration} is not above iterate {iteration - check_every}")
            checkpoint = new
        change = float(np.max(np.abs(new - u)))
        u = new
        new_rhs = lam * f(u)
        if change < tol or np.array_equal(new_rhs, rhs):
            break
        rhs = new_rhs
    else:
        raise IterationDiverged(f"monotone iteration did not settle in {max_iter} sweeps", value=change)

    defect = float(np.max(np.abs(op.matrix @ u - lam * f(u))))
    mu_lin = discrete_eigenvalue(op, -lam * f.d1(u), tol=eigen_tol)
    logger.info(
        "stable solve %s lambda=%g: %d sweeps, sup u=%.10g, defect=%.3g, mu_lin=%.8g",
        f.name, lam, iteration, float(u.max()), defect, mu_lin,
    )
    if not mu_lin > 0:
        raise StabilityLost(f"linearized eigenvalue {mu_lin:.6g} is not positive", value=mu_lin)
    return DiscreteSolution(op=op, f=f, lam=lam, u=u, iterations=iteration, defect=defect, mu_lin=mu_lin)


def check_defect(sol: DiscreteSolution, tol: float = 1e-8) -> float:
    """max |A u - lam f(u)| over the unknowns.

    Raises:
        ResidualTooLarge: the converged iterate misses the discrete equation by more than `tol`.
    """
    if sol.defect > tol:
        raise ResidualTooLarge(f"discrete defect {sol.defect:.3g} > {tol:g}", value=sol.defect)
    return sol.defect


def _box_nodes(op: DiscreteOperator, box: Sequence[tuple[float, float]]) -> np.ndarray:
    inside = np.ones(op.size, dtype=bool)
    for a, (lo, hi) in enumerate(box):
        inside &= (op.points[:, a] >= lo) & (op.points[:, a] <= hi)
    return inside


def _baseline_values(sol: DiscreteSolution, p: Profile1D, baseline: Optional[DiscreteSolution]) -> tuple[np.ndarray, np.ndarray]:
    """u0 at the solution's unknowns and a mask of where it is defined."""
    if baseline is None:
        return p.value(sol.op.points[:, -1]), np.ones(sol.op.size, dtype=bool)
    if baseline.slab.mask.shape != sol.slab.mask.shape:
        raise KOutsideDomain("baseline solution lives on a different grid")
    idx = baseline.op.index[tuple(sol.op.nodes.T)]
    defined = idx >= 0
    values = np.zeros(sol.op.size)
    values[defined] = baseline.u[idx[defined]]
    return values, defined


def expansion_residual(
    sol: DiscreteSolution,
    p: Profile1D,
    phi: PerturbationField,
    eps: float,
    box: Sequence[tuple[float, float]],
    *,
    baseline: Optional[DiscreteSolution] = None,
) -> float:
    """sup over K of |u_eps - u0 - eps phi|.

    With `baseline` (the discrete eps = 0 solution on the same grid) u0 is
    taken from it, so the eps-independent discretization error cancels.
    """
    spec = sol.slab.spec
    box_nodes = _box_nodes(sol.op, box)
    axes = spec.axes()
    for a, (lo, hi) in enumerate(box):
        if lo <= axes[a][0] or hi >= axes[a][-1]:
            raise KOutsideDomain(f"K leaves the grid along axis {a}")
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    in_k = np.ones(spec.shape, dtype=bool)
    for g, (lo, hi) in zip(grids, box):
        in_k &= (g >= lo) & (g <= hi)
    if np.any(in_k & ~sol.slab.mask):
        missing = np.argwhere(in_k & ~sol.slab.mask)[0]
        raise KOutsideDomain("K is not inside the component", point=sol.slab.node_coordinates(missing))
    u0, defined = _baseline_values(sol, p, baseline)
    if not np.all(defined[box_nodes]):
        raise KOutsideDomain("K is not inside the baseline component")
    pts = sol.op.points[box_nodes]
    residual = sol.u[box_nodes] - u0[box_nodes] - eps * phi.value(pts)
    return float(np.max(np.abs(residual)))


@dataclass
class BarrierSet:
    """Comparison functions for the rescaled residuals."""

    terms: tuple[tuple[float, float, Mode], ...]
    constants: tuple[float, ...]
    mode_max: tuple[float, ...]
    omega_inf: Mode
    mu_inf: float
    c_inf: float
    fpp_max: float
    lam: float
    dims: int
    eta: float

    @property
    def a_coefficient(self) -> float:
        return sum(abs(a) * m for (a, _, _), m in zip(self.terms, self.mode_max))

    @property
    def b_coefficient(self) -> float:
        return sum(abs(a) * (m - c) for (a, _, _), m, c in zip(self.terms, self.mode_max, self.constants))

    def c_infinity(self, eps: float) -> float:
        """(lam / 2) max f'' N (A + eps B)^2."""
        return 0.5 * self.lam * self.fpp_max * self.dims * (self.a_coefficient + eps * self.b_coefficient) ** 2

    def psi_bar(self, points: np.ndarray) -> np.ndarray:
        y = points[:, -1]
        total = np.zeros(len(points))
        for (a, mu, mode), c in zip(self.terms, self.constants):
            radial = abs(a) * (mode.value(y) - c)
            total += radial * np.sum(np.cosh(math.sqrt(mu) * points[:, :-1]), axis=1)
        return total

    def psi_inf(self, points: np.ndarray, eps: float) -> np.ndarray:
        y = points[:, -1]
        scale = self.c_infinity(eps) / (self.c_inf * self.mu_inf)
        radial = self.omega_inf.value(y) - self.c_inf
        return scale * radial * np.sum(np.cosh(math.sqrt(self.mu_inf) * points[:, :-1]), axis=1)


def build_barriers(
    p: Profile1D,
    combo: CoshCombo,
    modes: Sequence[Mode],
    eta: float,
    dims: int = 1,
) -> BarrierSet:
    """Constants C_i = min(omega_i) / 2 and the mode omega_inf at mu_inf = 4 mu_1."""
    mu_inf = 4.0 * combo.top_mu
    if not mu_inf < p.mu0:
        raise LadderViolation(f"mu_inf={mu_inf:g} is not below mu0={p.mu0:g}", value=mu_inf)
    half = 1.0 + eta
    terms = tuple((a, mu, m) for (_, mu, a), m in zip(combo.terms, modes))
    constants = tuple(0.5 * m.min_on(half) for _, _, m in terms)
    mode_max = tuple(m.max_on(half) for _, _, m in terms)
    omega_inf = omega_mode(p, mu_inf)
    c_inf = 0.5 * omega_inf.min_on(half)
    u_range = np.linspace(float(p.u0.min()), p.center_value + 1.0, 2001)
    fpp_max = float(np.max(p.f.d2(u_range)))
    return BarrierSet(
        terms=terms,
        constants=constants,
        mode_max=mode_max,
        omega_inf=omega_inf,
        mu_inf=mu_inf,
        c_inf=c_inf,
        fpp_max=max(fpp_max, 0.0),
        lam=p.lam,
        dims=dims,
        eta=eta,
    )


@dataclass(frozen=True)
class BarrierReport:
    psi_min: float
    psi_bar_gap: float
    big_psi_gap: float
    floor: float
    consistency: float
    nodes: int


def check_barriers(
    sol: DiscreteSolution,
    p: Profile1D,
    phi: PerturbationField,
    eps: float,
    barriers: BarrierSet,
    *,
    baseline: Optional[DiscreteSolution] = None,
    floor: float = 1e-7,
) -> BarrierReport:
    """Check 0 <= psi_eps < psi_bar and Psi_eps <= psi_inf on the nodes.

    psi_eps = (u_eps - u0 - eps phi) / eps and Psi_eps = psi_eps / eps.
    Every comparison is widened nodewise by `floor` plus the consistency
    bounds of `sol` and `baseline`.
    """
    u0, defined = _baseline_values(sol, p, baseline)
    pts = sol.op.points[defined]
    raw = sol.u[defined] - u0[defined] - eps * phi.value(pts)
    psi = raw / eps
    tolerance = floor + sol.consistency[defined]
    if baseline is not None:
        idx = baseline.op.index[tuple(sol.op.nodes[defined].T)]
        tolerance = tolerance + baseline.consistency[idx]
    slack = tolerance / eps
    below = psi < -slack
    if below.any():
        worst = int(np.argmin(psi))
        raise BarrierViolated("psi_eps is negative", point=pts[worst], value=float(psi[worst]))
    bar_gap = barriers.psi_bar(pts) + slack - psi
    if np.any(bar_gap <= 0):
        worst = int(np.argmin(bar_gap))
        raise BarrierViolated("psi_eps reaches psi_bar", point=pts[worst], value=float(psi[worst]))
    big_gap = barriers.psi_inf(pts, eps) + tolerance / eps**2 - psi / eps
    if np.any(big_gap < 0):
        worst = int(np.argmin(big_gap))
        raise BarrierViolated("Psi_eps exceeds psi_inf", point=pts[worst], value=float(psi[worst] / eps))
    return BarrierReport(
        psi_min=float(psi.min()),
        psi_bar_gap=float(bar_gap.min()),
        big_psi_gap=float(big_gap.min()),
        floor=floor,
        consistency=float(np.max(tolerance - floor)),
        nodes=int(defined.sum()),
    )


def vertical_slack(d: DomainSlab) -> float:
    """Smallest eta with the component inside R^N x (-1 - eta, 1 + eta)."""
    return max(float(np.max(np.abs(d.vertices[:, -1]))) - 1.0, 0.0)


@dataclass(frozen=True)
class BoundReport:
    eta: float
    h_eps: float
    profile_margin: float
    global_margin: float


def monotone_bound_check(
    sol: DiscreteSolution,
    widened: WidenedProfile,
    p: Profile1D,
    *,
    tol: float = 5e-6,
) -> BoundReport:
    """Check u_eps <= u_eta and u_eps - u0 <= h(eps) = -u0(1 + eta) on the nodes.

    Both margins may dip by `tol` plus the consistency bound of `sol`.
    """
    y = sol.op.points[:, -1]
    eta = widened.eta
    h_eps = float(-p.value(1.0 + eta))
    allowance = tol + sol.consistency
    profile_gap = widened.value(y) - sol.u + allowance
    global_gap = h_eps - (sol.u - p.value(y)) + allowance
    profile_margin = float(np.min(widened.value(y) - sol.u))
    global_margin = float(np.min(h_eps - (sol.u - p.value(y))))
    if np.any(profile_gap < 0):
        worst = int(np.argmin(profile_gap))
        raise BoundViolated("u_eps exceeds the widened profile", point=sol.op.points[worst], value=profile_margin)
    if np.any(global_gap < 0):
        worst = int(np.argmin(global_gap))
        raise BoundViolated("u_eps - u0 exceeds h(eps)", point=sol.op.points[worst], value=global_margin)
    return BoundReport(eta=eta, h_eps=h_eps, profile_margin=profile_margin, global_margin=global_margin)


def lambda_below_extremal(lam: float, bracket: tuple[float, float], eta: float) -> bool:
    """Whether lam < lambda* / (1 + eta)^2, using the lower end of the bracket."""
    return lam < bracket[0] / (1.0 + eta) ** 2


@dataclass
class ResidualTable:
    """Rows (eps, residual) of an expansion sweep."""

    rows: list[tuple[float, float]] = field(default_factory=list)

    def slope(self) -> float:
        eps = np.log([r[0] for r in self.rows])
        res = np.log([r[1] for r in self.rows])
        return float(np.polyfit(eps, res, 1)[0])
