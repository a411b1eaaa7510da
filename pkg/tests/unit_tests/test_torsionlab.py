import math
from fractions import Fraction

import numpy as np
import pytest

from multibump.errors import DegenerateFound, EpsTooLarge, RootOrderError, SingularGradient
from multibump.torsionlab import (
    axis_crossing_exact,
    build_torsion_field,
    certify_torsion_case,
    certify_torsion_theorem,
    check_maxima,
    curvature_table,
    harmonic_defect,
    level_set_mean_curvature,
    mean_curvature,
    product_coefficients,
    q_critical_points,
    q_second_derivative,
    q_second_derivative_identity,
    radial_identity,
    top_degree_coefficients,
    torsion_grid,
    torsion_laplacian,
)


def test_product_coefficients() -> None:
    assert product_coefficients((1, 2)) == (-4, 0, 5, 0, -1)
    assert all(isinstance(c, Fraction) for c in product_coefficients((0.5,)))


def test_field_is_harmonic_with_unit_leading_coefficient() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    assert harmonic_defect(tf) == 0
    assert tf.harmonic == (4, -5, 1)
    assert torsion_laplacian(tf) == -2
    assert top_degree_coefficients(2) == (1, -6, 1)


def test_single_root_perturbation() -> None:
    tf = build_torsion_field(1, (1.0,), 2, 0.0)
    t = np.linspace(-2, 2, 7)
    s = np.linspace(-1, 1, 7)
    assert np.allclose(tf.v(t, s), 1 - t**2 + s**2)


def test_q_and_its_maxima() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    assert float(tf.q(0.0)) == pytest.approx(-4.0)
    critical = q_critical_points(tf)
    assert [t for t, _ in critical] == pytest.approx([-math.sqrt(2.5), 0.0, math.sqrt(2.5)], abs=1e-12)
    assert q_second_derivative(tf, math.sqrt(2.5)) == pytest.approx(-20.0)
    assert q_second_derivative_identity(tf, math.sqrt(2.5)) == pytest.approx(-20.0)
    found, gap = check_maxima(tf)
    assert len(found) == 2
    assert found[1][1] == pytest.approx(1e-3 * 2 * -20.0)
    assert gap < 1e-12


def test_maxima_need_curvature_above_floor() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    assert len(check_maxima(tf, floor=0.01)[0]) == 2
    with pytest.raises(DegenerateFound):
        check_maxima(tf, floor=1.0)


def test_cylinder_mean_curvature() -> None:
    for dims in (2, 3):
        tf = build_torsion_field(2, (1.0, 2.0), dims, 0.0)
        y = np.full(dims, 1.0)
        point = np.concatenate([[0.3], y])[None, :]
        assert mean_curvature(tf, point)[0] == pytest.approx((dims - 1) / (dims * math.sqrt(dims)))
        inner = np.concatenate([[-1.7], 0.5 * y])[None, :]
        assert mean_curvature(tf, inner)[0] == pytest.approx((dims - 1) / (dims * 0.5 * math.sqrt(dims)))


def test_structured_curvature_matches_general_formula() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 3, 1e-2)
    rng = np.random.default_rng(7)
    points = np.column_stack([rng.uniform(-3, 3, 25), rng.uniform(-1.5, 1.5, (25, 3))])
    expected = level_set_mean_curvature(tf.gradient(points), tf.hessian(points))
    assert np.allclose(mean_curvature(tf, points), expected, rtol=1e-10, atol=1e-12)


def test_curvature_needs_a_gradient() -> None:
    tf = build_torsion_field(1, (1.0,), 2, 1e-3)
    with pytest.raises(SingularGradient):
        mean_curvature(tf, np.zeros((1, 3)))


def test_axis_crossing() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    assert axis_crossing_exact(tf) == pytest.approx(math.sqrt((5 + math.sqrt(2009)) / 2), rel=1e-10)
    assert axis_crossing_exact(tf) == pytest.approx(4.99, abs=5e-3)
    small = build_torsion_field(2, (1.0, 2.0), 2, 1e-4)
    assert axis_crossing_exact(small) == pytest.approx(8.557, abs=1e-3)
    assert (2e-4) ** -0.25 == pytest.approx(8.409, abs=1e-3)


def test_radial_identity() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    rng = np.random.default_rng(11)
    points = rng.uniform(-4, 4, (50, 3))
    assert radial_identity(tf, points) < 1e-9


def test_rejects_bad_input() -> None:
    with pytest.raises(RootOrderError):
        build_torsion_field(2, (2.0, 1.0), 2, 1e-3)
    with pytest.raises(RootOrderError):
        build_torsion_field(2, (1.0,), 2, 1e-3)
    with pytest.raises(EpsTooLarge):
        build_torsion_field(2, (1.0, 2.0), 2, 0.2)


def test_torsion_grid_is_centred() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    spec = torsion_grid(tf, (129, 65))
    assert spec.counts == (129, 65, 65)
    assert spec.is_symmetric
    assert spec.upper[0] == pytest.approx(1.15 * axis_crossing_exact(tf))


@pytest.mark.slow
def test_certify_case() -> None:
    tf = build_torsion_field(2, (1.0, 2.0), 2, 1e-3)
    report = certify_torsion_case(tf, (129, 65))
    assert report.passed, report.failures
    assert report.curvature.min_value > 0
    assert report.star.alpha > 0
    assert report.symmetric
    assert report.asymptotics.crossing_measured == pytest.approx(axis_crossing_exact(tf), rel=1e-6)
    assert len(report.maxima) == 2
    assert report.radial_gap < 1e-8
    header, table = curvature_table(report.curvature)
    assert header == ["x", "y1", "y2", "K_m"]
    assert table.shape[1] == 4


@pytest.mark.slow
def test_certify_theorem_approaches_cylinder() -> None:
    report = certify_torsion_theorem(2, (1.0, 2.0), 2, (1e-3, 1e-4), (129, 65))
    assert report.passed, report.failures
    assert report.convergence.deviations[1] < report.convergence.deviations[0]
    assert report.cases[0].slab.spec == report.cases[1].slab.spec
