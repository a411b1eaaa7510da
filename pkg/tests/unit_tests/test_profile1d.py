import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from multibump.errors import (
    ConfigError,
    DegenerateSide,
    ModeNotMonotone,
    MuOutOfRange,
    NoFailureFound,
    NoSolution,
)
from multibump.profile1d import (
    Nonlinearity,
    check_hypotheses,
    constant,
    exponential,
    fd_rect_eigenvalue,
    lambda_star_estimate,
    make_nonlinearity,
    omega_mode,
    power,
    profile_table,
    rect_eigenvalue,
    solve_profile,
    symmetric_grid,
    widened_profile,
)


@pytest.fixture(scope="module")
def torsion_profile():
    return solve_profile(constant(), 1.0, 0.1)


@pytest.fixture(scope="module")
def gelfand_profile():
    return solve_profile(exponential(), 0.5, 0.1)


def test_torsion_profile_is_parabola(torsion_profile) -> None:
    y = torsion_profile.grid
    assert np.max(np.abs(torsion_profile.u0 - (1 - y**2) / 2)) < 1e-8
    assert torsion_profile.center_value == pytest.approx(0.5, abs=1e-10)


def test_torsion_profile_eigenvalue(torsion_profile) -> None:
    assert torsion_profile.mu0 == pytest.approx((math.pi / 2.2) ** 2, abs=1e-6)


def test_profile_sign_and_symmetry(gelfand_profile) -> None:
    p = gelfand_profile
    inner = np.abs(p.grid) < 1
    outer = np.abs(p.grid) > 1
    assert np.all(p.u0[inner] > 0)
    assert np.all(p.u0[outer] < 0)
    assert np.array_equal(p.u0, p.u0[::-1])
    assert abs(float(p.value(1.0))) < 1e-7


def test_gelfand_center_value(gelfand_profile) -> None:
    # 2 b^2 / lam = cosh^2 b on the stable branch
    b = brentq(lambda s: 2 * s - math.cosh(s), 0.1, 1.0)
    assert gelfand_profile.center_value == pytest.approx(2 * math.log(math.cosh(b)), abs=1e-7)
    assert gelfand_profile.center_value == pytest.approx(0.3286, abs=1e-3)
    assert gelfand_profile.mu0 > 0


def test_gelfand_extremal_bracket() -> None:
    lo, hi = lambda_star_estimate(exponential(), tol=1e-3)
    assert hi - lo <= 1e-3
    assert 0.5 * (lo + hi) == pytest.approx(0.87845, abs=2e-3)


def test_extremal_scales_with_interval() -> None:
    lo, hi = lambda_star_estimate(exponential(), (-2.0, 2.0), tol=1e-3)
    assert 0.5 * (lo + hi) == pytest.approx(0.87845 / 4, abs=1e-3)


def test_constant_nonlinearity_has_no_extremal_value() -> None:
    with pytest.raises(NoFailureFound):
        lambda_star_estimate(constant(), cap=64.0)


def test_above_extremal_has_no_solution() -> None:
    with pytest.raises(NoSolution):
        solve_profile(exponential(), 1.0, 0.1)


def test_mode_of_torsion_profile(torsion_profile) -> None:
    mode = omega_mode(torsion_profile, 1.0)
    y = torsion_profile.grid
    assert np.max(np.abs(mode.omega - np.cos(y))) < 1e-6
    assert mode.is_monotone()
    assert np.all(mode.omega > 0)
    assert np.array_equal(mode.omega, mode.omega[::-1])
    assert float(mode.value(0.0)) == pytest.approx(1.0)


def test_mode_frequency_range(torsion_profile) -> None:
    with pytest.raises(MuOutOfRange):
        omega_mode(torsion_profile, torsion_profile.mu0)
    with pytest.raises(MuOutOfRange):
        omega_mode(torsion_profile, 0.0)


def test_modes_decrease_with_frequency(gelfand_profile) -> None:
    low = omega_mode(gelfand_profile, 0.05)
    high = omega_mode(gelfand_profile, 0.5)
    assert high.min_on(1.05) < low.min_on(1.05) < 1.0


def test_rect_eigenvalue_formula() -> None:
    assert rect_eigenvalue(1.0, [(0.0, math.pi), (-1.0, 1.0)]) == pytest.approx(1 + 1 + math.pi**2 / 4)
    with pytest.raises(DegenerateSide):
        rect_eigenvalue(1.0, [(1.0, 1.0)])


def test_rect_eigenvalue_matches_five_point(gelfand_profile) -> None:
    p = gelfand_profile
    formula = rect_eigenvalue(p.mu0, [(-1.0, 1.0)])
    computed = fd_rect_eigenvalue(p, (-1.0, 1.0), (-1.1, 1.1), h=1.0 / 128)
    assert computed == pytest.approx(formula, rel=1e-2)


def test_widened_profile_dominates(gelfand_profile) -> None:
    widened = widened_profile(gelfand_profile, 0.05)
    y = np.linspace(-1.0, 1.0, 101)
    assert np.all(widened.value(y) >= gelfand_profile.value(y))
    assert float(widened.value(1.05)) == pytest.approx(0.0, abs=1e-6)


def test_profile_table_columns(torsion_profile) -> None:
    mode = omega_mode(torsion_profile, 0.25)
    header, table = profile_table(torsion_profile, [mode])
    assert header[:3] == ["y", "u0", "u0_d1"]
    assert table.shape == (torsion_profile.grid.size, 4)


def test_nonlinearity_factory(tmp_path) -> None:
    table = tmp_path / "f.csv"
    u = np.linspace(-1, 3, 21)
    np.savetxt(table, np.column_stack([u, np.exp(u)]), delimiter=",")
    f = make_nonlinearity("table", table_path=str(table))
    assert float(f(1.0)) == pytest.approx(math.e, rel=1e-3)
    check_hypotheses(f, -1.0, 3.0)
    assert float(make_nonlinearity("power", power_p=2.0)(1.0)) == pytest.approx(4.0)
    with pytest.raises(ConfigError):
        make_nonlinearity("cubic")


def test_hypotheses_reject_concave_table(tmp_path) -> None:
    table = tmp_path / "g.csv"
    u = np.linspace(-1, 3, 21)
    np.savetxt(table, np.column_stack([u, np.sqrt(u + 2)]), delimiter=",")
    with pytest.raises(ConfigError):
        check_hypotheses(make_nonlinearity("table", table_path=str(table)), -1.0, 3.0)


def test_power_vanishes_below_minus_one() -> None:
    f = power(3.0)
    assert float(f(-2.0)) == 0.0
    assert float(f.d1(0.0)) == pytest.approx(3.0)


def test_symmetric_grid_mirrors_exactly() -> None:
    y = symmetric_grid(1.1, 9)
    assert np.array_equal(y, -y[::-1])
    assert y[4] == 0.0


def test_modes_are_concave(gelfand_profile) -> None:
    y = gelfand_profile.grid
    for mu in (0.05, 0.5, 0.9 * gelfand_profile.mu0):
        mode = omega_mode(gelfand_profile, mu)
        assert np.all(mode.omega_d2 < 0)
        assert np.all(mode.d2(y[np.abs(y) <= 1.0][::64]) < 0)


def test_non_monotone_mode_is_rejected(torsion_profile) -> None:
    decreasing = Nonlinearity(
        name="decreasing",
        eval=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        d1=lambda u: np.full_like(np.asarray(u, dtype=float), -20.0),
        d2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        is_increasing=False,
    )
    p = dataclasses.replace(torsion_profile, f=decreasing, mu0=2.0)
    with pytest.raises(ModeNotMonotone):
        omega_mode(p, 1.0)
