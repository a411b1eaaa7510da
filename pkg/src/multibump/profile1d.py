"""One-dimensional profile problem and its linearization.

The stable solution of -u'' = lam f(u) on (-1, 1) with zero boundary values is
obtained by shooting from the centre, extended by the same ODE to
[-1 - sigma, 1 + sigma], and accompanied by the first eigenvalue of the
linearized operator and the positive even modes omega_mu used to build the
perturbation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as splalg
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, solve_banded
from scipy.optimize import bisect, minimize_scalar

from multibump.errors import (
    ConfigError,
    ConvergenceFailure,
    DegenerateSide,
    ExtensionSignError,
    InputError,
    ModeNotMonotone,
    MuOutOfRange,
    NoFailureFound,
    NoSolution,
    ShootingDiverged,
    SingularBVP,
    StabilityLost,
)

logger = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray], np.ndarray]

BLOWUP_CAP = 1e12
BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class Nonlinearity:
    """Evaluators for f and its first two derivatives."""

    name: str
    eval: ScalarMap
    d1: ScalarMap
    d2: ScalarMap
    is_increasing: bool = True
    is_convex: bool = True

    def __call__(self, u: np.ndarray | float) -> np.ndarray:
        return self.eval(np.asarray(u, dtype=float))


def constant() -> Nonlinearity:
    """Return f = 1, the torsion nonlinearity."""
    return Nonlinearity(
        name="constant",
        eval=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        d1=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        d2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
    )


def _exp(u: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(np.asarray(u, dtype=float))


def exponential() -> Nonlinearity:
    """Return f = e^u (Gelfand problem)."""
    return Nonlinearity(name="exponential", eval=_exp, d1=_exp, d2=_exp)


def power(p: float) -> Nonlinearity:
    """Return f = (1 + u)^p for u > -1 and 0 below."""
    if p < 1:
        raise ConfigError("power nonlinearity needs p >= 1", value=p)

    def _term(u: np.ndarray, coefficient: float, exponent: float) -> np.ndarray:
        base = 1.0 + np.asarray(u, dtype=float)
        out = np.zeros_like(base)
        positive = base > 0
        out[positive] = coefficient * base[positive] ** exponent
        return out

    return Nonlinearity(
        name=f"power(p={p:g})",
        eval=lambda u: _term(u, 1.0, p),
        d1=lambda u: _term(u, p, p - 1),
        d2=lambda u: _term(u, p * (p - 1), p - 2),
    )


def from_table(path: str | Path) -> Nonlinearity:
    """Interpolate f from a CSV file of (u, f) samples with a cubic spline."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] < 2 or data.shape[0] < 4:
        raise ConfigError(f"table {path} needs at least 4 rows of u,f")
    order = np.argsort(data[:, 0])
    spline = CubicSpline(data[order, 0], data[order, 1], extrapolate=True)
    d1, d2 = spline.derivative(1), spline.derivative(2)
    samples = np.linspace(data[order[0], 0], data[order[-1], 0], 401)
    return Nonlinearity(
        name=f"table({Path(path).name})",
        eval=lambda u: spline(np.asarray(u, dtype=float)),
        d1=lambda u: d1(np.asarray(u, dtype=float)),
        d2=lambda u: d2(np.asarray(u, dtype=float)),
        is_increasing=bool(np.all(d1(samples) >= -1e-12)),
        is_convex=bool(np.all(d2(samples) >= -1e-12)),
    )


def make_nonlinearity(selector: str, *, power_p: float = 2.0, table_path: str = "") -> Nonlinearity:
    """Build the nonlinearity named by a configuration selector."""
    if selector == "constant":
        return constant()
    if selector == "exponential":
        return exponential()
    if selector == "power":
        return power(power_p)
    if selector == "table":
        return from_table(table_path)
    raise ConfigError(f"unknown nonlinearity {selector!r}")


def check_hypotheses(f: Nonlinearity, lo: float = -2.0, hi: float = 2.0, samples: int = 401) -> None:
    """Verify f(0) > 0 and the declared monotonicity/convexity on [lo, hi]."""
    t = np.linspace(lo, hi, samples)
    if not float(f(0.0)) > 0:
        raise ConfigError(f"{f.name}: f(0) must be positive", value=float(f(0.0)))
    if f.is_increasing and np.any(f.d1(t) < -1e-12):
        raise ConfigError(f"{f.name}: declared increasing but f' < 0 on [{lo}, {hi}]")
    if f.is_convex and np.any(f.d2(t) < -1e-12):
        raise ConfigError(f"{f.name}: declared convex but f'' < 0 on [{lo}, {hi}]")
    if not (f.is_increasing and f.is_convex):
        raise ConfigError(f"{f.name} is not increasing and convex")


@dataclass(frozen=True)
class Profile1D:
    """Sampled stable profile on [-1 - sigma, 1 + sigma]."""

    f: Nonlinearity
    lam: float
    sigma: float
    grid: np.ndarray
    u0: np.ndarray
    u0_d1: np.ndarray
    mu0: float
    residual: float
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        spline = CubicSpline(
            self.grid, self.u0, bc_type=((1, self.u0_d1[0]), (1, self.u0_d1[-1]))
        )
        object.__setattr__(self, "_spline", spline)

    @property
    def half_width(self) -> float:
        return 1.0 + self.sigma

    @property
    def center_value(self) -> float:
        """u0(0), the sup norm of the profile."""
        return float(self.u0[self.u0.size // 2])

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def value(self, y: np.ndarray | float) -> np.ndarray:
        """Evaluate u0 at |y| so that the result is exactly even."""
        return self._spline(np.abs(np.asarray(y, dtype=float)))

    def d1(self, y: np.ndarray | float) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.sign(y) * self._spline(np.abs(y), 1)

    def d2(self, y: np.ndarray | float) -> np.ndarray:
        """Second derivative taken from the ODE itself."""
        return -self.lam * self.f(self.value(y))

    def potential(self, y: np.ndarray | float) -> np.ndarray:
        """Return -lam f'(u0(y)), the potential of the linearized operator."""
        return -self.lam * self.f.d1(self.value(y))


@dataclass(frozen=True)
class WidenedProfile:
    """Stable solution on (-1 - eta, 1 + eta), obtained by rescaling."""

    base: Profile1D
    eta: float

    def value(self, y: np.ndarray | float) -> np.ndarray:
        return self.base.value(np.asarray(y, dtype=float) / (1.0 + self.eta))


@dataclass(frozen=True)
class Mode:
    """Positive even solution of -w'' - lam f'(u0) w = mu w with w(0) = 1."""

    mu: float
    grid: np.ndarray
    omega: np.ndarray
    omega_d1: np.ndarray
    omega_d2: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        spline = CubicSpline(
            self.grid, self.omega, bc_type=((1, self.omega_d1[0]), (1, self.omega_d1[-1]))
        )
        object.__setattr__(self, "_spline", spline)

    def value(self, y: np.ndarray | float) -> np.ndarray:
        return self._spline(np.abs(np.asarray(y, dtype=float)))

    def d1(self, y: np.ndarray | float) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.sign(y) * self._spline(np.abs(y), 1)

    def d2(self, y: np.ndarray | float) -> np.ndarray:
        return self._spline(np.abs(np.asarray(y, dtype=float)), 2)

    def min_on(self, half_width: float) -> float:
        """Minimum of omega on [-half_width, half_width]."""
        inside = np.abs(self.grid) <= half_width + 1e-14
        return float(np.min(self.omega[inside]))

    def max_on(self, half_width: float) -> float:
        inside = np.abs(self.grid) <= half_width + 1e-14
        return float(np.max(self.omega[inside]))

    def is_monotone(self) -> bool:
        """Whether y * omega'(y) < 0 at every nonzero grid node."""
        nonzero = self.grid != 0
        return bool(np.all(self.grid[nonzero] * self.omega_d1[nonzero] < 0))


def symmetric_grid(half_width: float, nodes: int) -> np.ndarray:
    """Return `nodes` points on [-half_width, half_width] mirrored exactly about 0."""
    if nodes < 3 or nodes % 2 == 0:
        raise InputError("symmetric grids need an odd node count >= 3", value=nodes)
    y = np.linspace(-half_width, half_width, nodes)
    return 0.5 * (y - y[::-1])


def _integrate(
    f: Nonlinearity,
    lam: float,
    height: float,
    stop: float,
    tol: float,
    t_eval: Optional[np.ndarray] = None,
):
    def rhs(_: float, z: np.ndarray) -> list[float]:
        return [z[1], -lam * float(f(z[0]))]

    def blowup(_: float, z: np.ndarray) -> float:
        return BLOWUP_CAP - abs(z[0])

    blowup.terminal = True  # type: ignore[attr-defined]

    sol = solve_ivp(
        rhs, (0.0, stop), [height, 0.0], method="RK45", rtol=tol, atol=tol,
        t_eval=t_eval, events=blowup,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise ShootingDiverged(
            f"integration from u(0)={height:g} stopped at y={sol.t[-1]:.6g} before {stop:g}",
            value=height,
        )
    return sol


def _shoot(f: Nonlinearity, lam: float, height: float, tol: float) -> float:
    return float(_integrate(f, lam, height, 1.0, tol).y[0, -1])


def _heights(max_height: float = 1e4) -> Iterator[float]:
    a = 0.0
    while a < 10.0:
        yield a
        a = round(a + 0.05, 12)
    while a <= max_height:
        yield a
        a *= 1.1


def minimal_height(f: Nonlinearity, lam: float, *, ode_tol: float = 1e-10, xtol: float = 1e-10) -> float:
    """Return the smallest u(0) = a with u(1; a) = 0 for the shooting problem."""
    if not lam > 0:
        raise InputError("lambda must be positive", value=lam)
    previous: Optional[tuple[float, float]] = None
    samples: list[tuple[float, float]] = []
    for a in _heights():
        with np.errstate(over="ignore"):
            if not np.isfinite(lam * float(f(a))):
                break
        try:
            g = _shoot(f, lam, a, ode_tol)
        except ShootingDiverged:
            logger.debug("scan stopped at diverging height %g", a)
            break
        if g == 0.0:
            return a
        if previous is not None and previous[1] < 0 < g:
            logger.debug("sign change of u(1) in [%g, %g]", previous[0], a)
            return bisect(lambda s: _shoot(f, lam, s, ode_tol), previous[0], a, xtol=xtol)
        previous = (a, g)
        samples.append(previous)

    if len(samples) < 3:
        raise NoSolution(f"no admissible heights for lambda={lam:g}", value=lam)
    values = np.array([g for _, g in samples])
    i = int(np.clip(np.argmax(values), 1, len(samples) - 2))
    lo, hi = samples[i - 1][0], samples[i + 1][0]
    best = minimize_scalar(
        lambda s: -_shoot(f, lam, s, ode_tol), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-9},
    )
    peak = -float(best.fun)
    if peak < 0:
        raise NoSolution(
            f"u(1; a) < 0 for every height, lambda={lam:g} is above the solvable range",
            value=lam,
        )
    if peak == 0.0:
        return float(best.x)
    return bisect(lambda s: _shoot(f, lam, s, ode_tol), lo, float(best.x), xtol=xtol)


def solve_profile(
    f: Nonlinearity,
    lam: float,
    sigma: float = 0.1,
    *,
    nodes: int = 4097,
    ode_tol: float = 1e-10,
    bisection_tol: float = 1e-10,
    eigen_intervals: int = 2048,
    eigen_tol: float = 1e-8,
    max_halvings: int = 6,
) -> Profile1D:
    """Solve the profile problem on the stable branch and extend it past +-1.

    Args:
        f: Increasing convex nonlinearity with f(0) > 0.
        lam: Positive parameter below the extremal value.
        sigma: Extension half-width; halved while the extended profile is
            not linearly stable.
        nodes: Odd number of uniform samples of [-1 - sigma, 1 + sigma].
    """
    height = minimal_height(f, lam, ode_tol=ode_tol, xtol=bisection_tol)
    logger.info("profile %s lambda=%g: u0(0)=%.12g", f.name, lam, height)

    for attempt in range(max_halvings + 1):
        profile = _extend(f, lam, height, sigma, nodes, ode_tol)
        mu0 = first_eigenvalue(
            profile, f, (-1.0 - sigma, 1.0 + sigma), intervals=eigen_intervals, tol=eigen_tol
        )
        if mu0 > 0:
            logger.info("mu0=%.10g on (-%g, %g)", mu0, 1 + sigma, 1 + sigma)
            return Profile1D(
                f=f, lam=lam, sigma=sigma, grid=profile.grid, u0=profile.u0,
                u0_d1=profile.u0_d1, mu0=mu0, residual=profile.residual,
            )
        logger.warning("mu0=%.6g <= 0 at sigma=%g, halving sigma (attempt %d)", mu0, sigma, attempt + 1)
        sigma /= 2
    raise StabilityLost(
        f"extended profile is not stable after {max_halvings} halvings of sigma", value=mu0
    )


def _extend(f: Nonlinearity, lam: float, height: float, sigma: float, nodes: int, tol: float) -> Profile1D:
    grid = symmetric_grid(1.0 + sigma, nodes)
    half = grid[nodes // 2:]
    sol = _integrate(f, lam, height, float(half[-1]), tol, t_eval=np.abs(half))
    u_half, d_half = sol.y[0], sol.y[1]
    u0 = np.concatenate([u_half[:0:-1], u_half])
    u0_d1 = np.concatenate([-d_half[:0:-1], d_half])
    boundary = abs(float(_integrate(f, lam, height, 1.0, tol).y[0, -1]))

    inner = np.abs(grid) < 1.0
    if not np.all(u0[inner] > 0):
        raise ExtensionSignError("profile is not positive inside (-1, 1)")
    if boundary > BOUNDARY_TOL:
        raise ExtensionSignError("profile does not vanish at +-1", value=boundary)
    outer = np.abs(grid) > 1.0
    if not np.all(u0[outer] < 0):
        bad = grid[outer][np.argmax(u0[outer])]
        raise ExtensionSignError("profile does not turn negative past +-1", point=(bad,))
    # provisional container; mu0 is filled in by the caller
    return Profile1D(
        f=f, lam=lam, sigma=sigma, grid=grid, u0=u0, u0_d1=u0_d1, mu0=math.nan, residual=boundary
    )


def _tridiagonal_eigenvalue(potential: np.ndarray, h: float, tol: float, max_iter: int = 500) -> float:
    n = potential.size
    lowest = float(np.min(potential))
    shift = lowest - 1.0 if lowest < 0 else 0.0
    main = 2.0 / h**2 + potential - shift
    off = -np.ones(n - 1) / h**2
    matrix = sps.diags([off, main, off], [-1, 0, 1], format="csc")
    solve = splalg.factorized(matrix)
    x = np.ones(n) / math.sqrt(n)
    mu = math.inf
    for it in range(max_iter):
        y = solve(x)
        y /= np.linalg.norm(y)
        new_mu = float(y @ (matrix @ y))
        if abs(new_mu - mu) <= tol * max(1.0, abs(new_mu)):
            logger.debug("inverse iteration settled after %d steps", it)
            return new_mu + shift
        mu, x = new_mu, y
    raise ConvergenceFailure(f"inverse iteration did not settle in {max_iter} steps", value=mu + shift)


def first_eigenvalue(
    p: Profile1D,
    f: Nonlinearity,
    interval: tuple[float, float],
    *,
    intervals: int = 2048,
    tol: float = 1e-8,
) -> float:
    """Smallest Dirichlet eigenvalue of -d^2/dy^2 - lam f'(u0) on `interval`.

    Computed by inverse iteration on second-order differences over `intervals`
    and `2 * intervals` cells and Richardson-extrapolated.
    """
    a, b = interval
    if not (b > a and a >= p.grid[0] - 1e-12 and b <= p.grid[-1] + 1e-12):
        raise InputError(f"interval ({a}, {b}) not inside the profile grid")
    values = []
    for m in (intervals, 2 * intervals):
        y = np.linspace(a, b, m + 1)[1:-1]
        potential = -p.lam * f.d1(p.value(y))
        values.append(_tridiagonal_eigenvalue(potential, (b - a) / m, tol * 1e-2))
    coarse, fine = values
    return (4.0 * fine - coarse) / 3.0


def omega_mode(p: Profile1D, mu: float) -> Mode:
    """Solve for the positive even mode of frequency mu, normalized at 0.

    Raises:
        ModeNotMonotone: omega is not decreasing in |y| on the profile grid.
    """
    if not 0 < mu < p.mu0:
        raise MuOutOfRange(f"mu={mu:g} outside (0, mu0={p.mu0:g})", value=mu)
    y, h = p.grid, p.step
    potential = -p.lam * p.f.d1(p.u0)
    inner = y.size - 2
    ab = np.zeros((3, inner))
    ab[0, 1:] = -1.0 / h**2
    ab[1, :] = 2.0 / h**2 + potential[1:-1] - mu
    ab[2, :-1] = -1.0 / h**2
    rhs = np.zeros(inner)
    rhs[0] += 1.0 / h**2
    rhs[-1] += 1.0 / h**2
    try:
        interior = solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise SingularBVP(f"mode problem singular at mu={mu:g}", value=mu) from exc
    omega = np.concatenate([[1.0], interior, [1.0]])
    if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
        raise SingularBVP(f"mode at mu={mu:g} is not positive; mu is at or above mu0", value=mu)
    omega = 0.5 * (omega + omega[::-1])
    omega /= omega[y.size // 2]
    omega_d1 = np.gradient(omega, h, edge_order=2)
    omega_d1 = 0.5 * (omega_d1 - omega_d1[::-1])
    omega_d2 = -(mu - potential) * omega
    mode = Mode(mu=mu, grid=y, omega=omega, omega_d1=omega_d1, omega_d2=omega_d2)
    if not mode.is_monotone():
        worst = int(np.argmax(y * omega_d1))
        raise ModeNotMonotone(
            f"mode at mu={mu:g} is not decreasing in |y|", point=(float(y[worst]),), value=float(omega_d1[worst])
        )
    return mode


def rect_eigenvalue(mu0: float, sides: Sequence[tuple[float, float]]) -> float:
    """Return mu0 + sum_j (pi / (b_j - a_j))^2."""
    total = mu0
    for a, b in sides:
        if not b > a:
            raise DegenerateSide(f"side ({a}, {b}) is degenerate", value=b - a)
        total += (math.pi / (b - a)) ** 2
    return total


def fd_rect_eigenvalue(
    p: Profile1D,
    x_side: tuple[float, float],
    y_side: tuple[float, float],
    h: float = 1.0 / 128,
) -> float:
    """Five-point eigenvalue of -Laplacian - lam f'(u0(y)) on a rectangle."""
    (ax, bx), (ay, by) = x_side, y_side
    if not (bx > ax and by > ay):
        raise DegenerateSide("rectangle has a degenerate side")
    nx = max(int(round((bx - ax) / h)), 2)
    ny = max(int(round((by - ay) / h)), 2)
    hx, hy = (bx - ax) / nx, (by - ay) / ny
    y = np.linspace(ay, by, ny + 1)[1:-1]

    def second_difference(n: int, step: float) -> sps.csr_matrix:
        return sps.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / step**2

    lap = sps.kronsum(second_difference(ny, hy), second_difference(nx - 1, hx), format="csc")
    potential = np.tile(p.potential(y), nx - 1)
    matrix = (lap + sps.diags(potential)).tocsc()
    value = splalg.eigsh(matrix, k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(value[0])


def lambda_star_estimate(
    f: Nonlinearity,
    interval: tuple[float, float] = (-1.0, 1.0),
    *,
    cap: float = 1e3,
    tol: float = 1e-3,
    ode_tol: float = 1e-10,
) -> tuple[float, float]:
    """Bracket the extremal parameter of f on `interval` by solvability bisection.

    The problem on an interval of half-length L at lam is equivalent to the
    unit problem at lam * L^2.
    """
    a, b = interval
    if not b > a:
        raise DegenerateSide(f"interval ({a}, {b}) is degenerate")
    scale = ((b - a) / 2.0) ** 2

    def solvable(lam: float) -> bool:
        try:
            minimal_height(f, lam * scale, ode_tol=ode_tol, xtol=1e-8)
        except NoSolution:
            return False
        return True

    lo, hi = 0.0, 1.0
    while solvable(hi):
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            raise NoFailureFound(f"{f.name} solvable up to the cap lambda={cap:g}", value=cap)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if solvable(mid):
            lo = mid
        else:
            hi = mid
    logger.info("lambda* of %s on (%g, %g) in [%.6g, %.6g]", f.name, a, b, lo, hi)
    return lo, hi


def widened_profile(p: Profile1D, eta: float, **kwargs) -> WidenedProfile:
    """Stable profile of the same lambda on (-1 - eta, 1 + eta)."""
    base = solve_profile(p.f, p.lam * (1.0 + eta) ** 2, p.sigma, **kwargs)
    return WidenedProfile(base=base, eta=eta)


def profile_table(p: Profile1D, modes: Sequence[Mode] = ()) -> tuple[list[str], np.ndarray]:
    """Return CSV header and columns y, u0, u0', omega_i..."""
    header = ["y", "u0", "u0_d1", *[f"omega_mu={m.mu:.12g}" for m in modes]]
    columns = [p.grid, p.u0, p.u0_d1, *[m.value(p.grid) for m in modes]]
    return header, np.column_stack(columns)
