"""Hyperbolic-cosine combinations with prescribed nondegenerate maxima.

A polynomial P of degree n = 2k with nondegenerate maxima at tau_1 < ... < tau_k
is composed with t = cosh(delta x).  Expanding every power cosh^j into
cosh(l delta x) terms gives F(x) = sum_l alpha_l cosh(sqrt(mu_l) x) with
mu_l = (delta l)^2 and maxima at arccosh(tau_i) / delta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from multibump.errors import BadInterleaving, DegenerateCritical, InputError, LadderViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoshPowerExpansion:
    """cosh^m t = constant + sum_l coefficients[l] cosh(l t)."""

    m: int
    coefficients: tuple[Fraction, ...]
    constant: Fraction

    def evaluate(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.full_like(t, float(self.constant))
        for ell, c in enumerate(self.coefficients):
            if c:
                total = total + float(c) * np.cosh(ell * t)
        return total


@lru_cache(maxsize=None)
def cosh_expand(m: int) -> CoshPowerExpansion:
    """Expand cosh^m exactly; entries with l of the wrong parity are zero."""
    if m < 1:
        raise InputError("cosh power must be >= 1", value=m)
    coefficients = [Fraction(0)] * (m + 1)
    for ell in range(m % 2, m + 1, 2):
        if ell > 0:
            coefficients[ell] = Fraction(math.comb(m, (m - ell) // 2), 2 ** (m - 1))
    constant = Fraction(math.comb(m, m // 2), 2**m) if m % 2 == 0 else Fraction(0)
    return CoshPowerExpansion(m=m, coefficients=tuple(coefficients), constant=constant)


@dataclass(frozen=True)
class MaximaPolynomial:
    """P(t) = sum_j a_j t^j with leading coefficient -1 and maxima at the taus."""

    taus: tuple[float, ...]
    coefficients: tuple[Fraction, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, t: float) -> float:
        return float(np.polynomial.polynomial.polyval(t, [float(a) for a in self.coefficients]))

    def derivative(self, t: Fraction, order: int = 1) -> Fraction:
        """Exact derivative at a rational point."""
        coeffs = list(self.coefficients)
        for _ in range(order):
            coeffs = [j * a for j, a in enumerate(coeffs)][1:]
        return sum((a * t**j for j, a in enumerate(coeffs)), Fraction(0))


def _multiply(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def build_polynomial(taus: Sequence[float]) -> MaximaPolynomial:
    """Construct P of degree 2k with P'(tau_i) = 0 and P''(tau_i) < 0.

    P' = -n prod_i (t - tau_i) prod_j (t - s_j) with the midpoints
    s_j = (tau_j + tau_{j+1}) / 2 interleaved between the targets, so P' has
    2k - 1 simple roots and the sign pattern of P'' alternates with the
    largest root a maximum.
    """
    taus = tuple(float(t) for t in taus)
    if not taus:
        raise InputError("at least one maximum is required")
    if any(t <= 1 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
        raise InputError("taus must be strictly increasing and > 1", taus=list(taus))
    exact = [Fraction(t) for t in taus]
    midpoints = [(a + b) / 2 for a, b in zip(exact, exact[1:])]
    n = 2 * len(taus)

    derivative = [Fraction(-n)]
    for root in [*exact, *midpoints]:
        derivative = _multiply(derivative, [-root, Fraction(1)])
    coefficients = [Fraction(0)] + [c / (j + 1) for j, c in enumerate(derivative)]
    poly = MaximaPolynomial(taus=taus, coefficients=tuple(coefficients))

    for tau in exact:
        curvature = poly.derivative(tau, order=2)
        if not curvature < 0:
            raise BadInterleaving(
                f"P''({float(tau):g}) = {float(curvature):g} is not negative",
                point=(float(tau),),
                value=float(curvature),
            )
    logger.debug("polynomial of degree %d with maxima at %s", poly.degree, taus)
    return poly


@dataclass(frozen=True)
class CoshCombo:
    """F(x) = sum_l alpha_l cosh(sqrt(mu_l) x) with k nondegenerate positive maxima."""

    k: int
    n: int
    delta: float
    mu0: float
    poly: MaximaPolynomial
    c_table: tuple[CoshPowerExpansion, ...]
    alphas_exact: tuple[Fraction, ...]
    scale: Fraction
    dropped_constant: Fraction
    maxima_t: tuple[float, ...]

    @property
    def poly_a(self) -> tuple[Fraction, ...]:
        return self.poly.coefficients

    @property
    def alphas(self) -> np.ndarray:
        """alpha_l for l = 1..n, zeros allowed."""
        return np.array([float(a) for a in self.alphas_exact])

    @property
    def mus(self) -> np.ndarray:
        """mu_l = (delta l)^2 for l = 1..n, ascending."""
        return (self.delta * np.arange(1, self.n + 1)) ** 2

    @property
    def top_mu(self) -> float:
        """Largest frequency; its coefficient is -1."""
        return float(self.mus[-1])

    @property
    def terms(self) -> list[tuple[int, float, float]]:
        """(l, mu_l, alpha_l) for every nonzero coefficient, ascending in l."""
        return [
            (ell, float(mu), float(a))
            for ell, (mu, a) in enumerate(zip(self.mus, self.alphas_exact), start=1)
            if a != 0
        ]

    def value(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(a * np.cosh(math.sqrt(mu) * x) for _, mu, a in self.terms)

    def d1(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(a * math.sqrt(mu) * np.sinh(math.sqrt(mu) * x) for _, mu, a in self.terms)

    def d2(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(a * mu * np.cosh(math.sqrt(mu) * x) for _, mu, a in self.terms)


def assemble_combo(poly: MaximaPolynomial, mu0: float) -> CoshCombo:
    """Expand P(cosh(delta x)) into cosh terms with delta = mu0 / (8n)."""
    if not mu0 > 0:
        raise InputError("mu0 must be positive", value=mu0)
    if mu0 >= 16:
        raise LadderViolation(
            f"mu0={mu0:g} >= 16: (mu0/8)^2 would exceed mu0/4; rescale the problem", value=mu0
        )
    n = poly.degree
    c_table = tuple(cosh_expand(j) for j in range(1, n + 1))
    alphas = [Fraction(0)] * (n + 1)
    dropped = Fraction(0)
    for j, (a_j, expansion) in enumerate(zip(poly.coefficients[1:], c_table), start=1):
        if a_j == 0:
            continue
        dropped += a_j * expansion.constant
        for ell in range(1, j + 1):
            alphas[ell] += a_j * expansion.coefficients[ell]
    dropped += poly.coefficients[0]
    if not alphas[n] < 0:
        raise BadInterleaving("leading cosh coefficient is not negative", value=float(alphas[n]))
    scale = -1 / alphas[n]
    alphas = [a * scale for a in alphas]

    delta = mu0 / (8 * n)
    top = (delta * n) ** 2
    if not 0 < top < mu0 / 4:
        raise LadderViolation(f"top frequency {top:g} not below mu0/4={mu0 / 4:g}", value=top)
    maxima = tuple(math.acosh(t) / delta for t in poly.taus)
    logger.info("cosh combination: n=%d delta=%.8g top mu=%.8g maxima=%s", n, delta, top, maxima)
    return CoshCombo(
        k=len(poly.taus),
        n=n,
        delta=delta,
        mu0=mu0,
        poly=poly,
        c_table=c_table,
        alphas_exact=tuple(alphas[1:]),
        scale=scale,
        dropped_constant=dropped * scale,
        maxima_t=maxima,
    )


def verify_maxima(
    combo: CoshCombo,
    *,
    margin: float = 1e-8,
    samples: int = 20001,
    xtol: float = 1e-13,
) -> list[tuple[float, float, float]]:
    """Isolate the positive critical points of F and return its maxima.

    Returns:
        (t, F(t), F''(t)) for every maximum on t > 0, ascending in t.
    """
    reach = 1.5 * max(combo.maxima_t) + 1.0
    x = np.linspace(0.0, reach, samples)[1:]
    slope = combo.d1(x)
    maxima = []
    for i in np.flatnonzero(np.sign(slope[:-1]) != np.sign(slope[1:])):
        if slope[i] == 0:
            root = float(x[i])
        else:
            root = bisect(lambda s: float(combo.d1(s)), float(x[i]), float(x[i + 1]), xtol=xtol)
        curvature = float(combo.d2(root))
        if abs(curvature) < margin:
            raise DegenerateCritical(
                f"critical point of F at t={root:.10g} has |F''| < {margin:g}",
                point=(root,),
                value=curvature,
            )
        if curvature < 0:
            maxima.append((root, float(combo.value(root)), curvature))
    if len(maxima) < combo.k:
        raise DegenerateCritical(f"found {len(maxima)} maxima, expected {combo.k}")
    return maxima


def inclusion_threshold(combo: CoshCombo, u00: float, dims: int) -> float:
    """Largest eps with eps N max_{[t_1, t_k]} F^- below u0(0) / 2."""
    t = np.linspace(combo.maxima_t[0], combo.maxima_t[-1], 2001)
    deficit = float(np.max(np.maximum(-combo.value(t), 0.0)))
    if deficit == 0.0:
        return math.inf
    return u00 / (2.0 * dims * deficit)


def combo_table(combo: CoshCombo) -> tuple[list[str], np.ndarray]:
    """Return CSV header and rows (l, mu_l, alpha_l)."""
    ell = np.arange(1, combo.n + 1, dtype=float)
    return ["l", "mu", "alpha"], np.column_stack([ell, combo.mus, combo.alphas])
