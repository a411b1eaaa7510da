import dataclasses
import math

import numpy as np
import pytest

from multibump.coshcombo import assemble_combo, build_polynomial
from multibump.errors import InputError, ModeMismatch, OutOfMemoryBudget, ResidualTooLarge
from multibump.fieldkit import (
    GridSpec,
    assemble_phi,
    axis_crossing,
    check_linearized_residual,
    quadratic_field,
    remark_field,
    sample_on_grid,
    superpose,
)
from multibump.profile1d import exponential, omega_mode, solve_profile


@pytest.fixture(scope="module")
def strip():
    p = solve_profile(exponential(), 0.5, 0.1, nodes=2049)
    combo = assemble_combo(build_polynomial((math.cosh(1.0), math.cosh(2.0))), p.mu0)
    modes = [omega_mode(p, mu) for _, mu, _ in combo.terms]
    return p, combo, modes


def _numeric_gradient(field, points, h=1e-6):
    out = np.empty_like(points)
    for a in range(points.shape[1]):
        step = np.zeros(points.shape[1])
        step[a] = h
        out[:, a] = (field.value(points + step) - field.value(points - step)) / (2 * h)
    return out


def test_grid_axes_mirror_exactly() -> None:
    spec = GridSpec.centered([3.0, 1.1], [61, 23])
    assert spec.is_symmetric
    for axis in spec.axes():
        assert np.array_equal(axis, -axis[::-1])
    assert spec.index_of([0.0, 0.0]) == (30, 11)
    assert spec.to_dict()["order"] == "C"


def test_grid_rejects_degenerate_extents() -> None:
    with pytest.raises(InputError):
        GridSpec(lower=(0.0,), upper=(0.0,), counts=(5,))
    with pytest.raises(InputError):
        GridSpec.centered([1.0], [2])


def test_sample_respects_memory_cap() -> None:
    spec = GridSpec.centered([1.0, 1.0], [101, 101])
    with pytest.raises(OutOfMemoryBudget):
        sample_on_grid(quadratic_field(1.0, [1.0, 1.0]), spec, max_nodes=1000)


def test_phi_derivatives_match_differences(strip) -> None:
    p, combo, modes = strip
    phi = assemble_phi(combo, modes, 2)
    rng = np.random.default_rng(0)
    points = np.column_stack([rng.uniform(-5, 5, (8, 2)), rng.uniform(-0.9, 0.9, 8)])
    assert np.allclose(phi.gradient(points), _numeric_gradient(phi, points), rtol=1e-5, atol=1e-6)
    hess = phi.hessian(points)
    assert np.allclose(hess, np.transpose(hess, (0, 2, 1)))


def test_phi_sample_matches_pointwise(strip) -> None:
    p, combo, modes = strip
    phi = assemble_phi(combo, modes, 1)
    axes = [np.linspace(-4, 4, 9), np.linspace(-1, 1, 5)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    assert np.allclose(phi.sample(axes).ravel(), phi.value(grid))


def test_phi_is_sum_over_directions(strip) -> None:
    p, combo, modes = strip
    phi1 = assemble_phi(combo, modes, 1)
    phi2 = assemble_phi(combo, modes, 2)
    point = np.array([[1.5, -2.0, 0.3]])
    expected = phi1.value(np.array([[1.5, 0.3]])) + phi1.value(np.array([[-2.0, 0.3]]))
    assert phi2.value(point) == pytest.approx(expected)


def test_phi_mode_mismatch(strip) -> None:
    p, combo, modes = strip
    with pytest.raises(ModeMismatch):
        assemble_phi(combo, modes[:-1], 1)
    with pytest.raises(ModeMismatch):
        assemble_phi(combo, list(reversed(modes)), 1)


def test_superpose_checks_origin(strip) -> None:
    p, combo, modes = strip
    phi = assemble_phi(combo, modes, 1)
    U = superpose(p, phi, 1e-3)
    assert float(U.value(np.zeros((1, 2)))[0]) == pytest.approx(p.center_value + 1e-3 * float(phi.value(np.zeros((1, 2)))[0]))
    with pytest.raises(InputError):
        superpose(p, phi, -1e-3)


def test_superposed_field_reduces_to_profile(strip) -> None:
    p, combo, modes = strip
    U = superpose(p, assemble_phi(combo, modes, 1), 0.0)
    y = np.linspace(-1.1, 1.1, 11)
    points = np.column_stack([np.full_like(y, 7.0), y])
    assert np.allclose(U.value(points), p.value(y))
    assert np.allclose(U.gradient(points)[:, 0], 0.0)


def test_axis_crossing_of_disk() -> None:
    disk = quadratic_field(1.0, [1.0, 1.0])
    assert axis_crossing(disk, [1.0, 0.0], reach=3.0) == pytest.approx(1.0, abs=1e-10)
    assert axis_crossing(disk, [1.0, 1.0], reach=3.0) == pytest.approx(1.0, abs=1e-10)
    assert axis_crossing(quadratic_field(1.0, [0.0, 1.0]), [1.0, 0.0], reach=3.0) == math.inf


def test_remark_field_derivatives() -> None:
    U = remark_field(1.0, 1e-2)
    points = np.array([[0.3, 0.2], [2.0, -0.7], [-4.0, 0.95]])
    assert np.allclose(U.gradient(points), _numeric_gradient(U, points), rtol=1e-6, atol=1e-8)


def test_phi_solves_the_linearized_equation(strip) -> None:
    p, combo, modes = strip
    phi = assemble_phi(combo, modes, 1)
    reach = max(combo.maxima_t)
    box = [(-reach, reach), (-1.0, 1.0)]
    assert check_linearized_residual(phi, p, np.random.default_rng(0), box) < 1e-4
    shifted = dataclasses.replace(p, lam=0.25)
    with pytest.raises(ResidualTooLarge):
        check_linearized_residual(phi, shifted, np.random.default_rng(0), box)
