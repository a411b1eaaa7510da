import numpy as np
import pytest

from multibump.critscan import (
    classify,
    critical_table,
    find_critical_points,
    interpolate_grid,
    maxima,
    nondegeneracy_margin,
    symmetric_pairs,
)
from multibump.domainforge import extract_component
from multibump.errors import DegenerateFound
from multibump.fieldkit import AnalyticField, GridSpec, quadratic_field


def _two_bumps() -> AnalyticField:
    """1 - y^2 - (x^2 - 1)^2 / 4: maxima at (+-1, 0), saddle at the origin."""
    return AnalyticField(
        dim=2,
        value_fn=lambda p: 1 - p[:, 1] ** 2 - (p[:, 0] ** 2 - 1) ** 2 / 4,
        gradient_fn=lambda p: np.column_stack([-p[:, 0] * (p[:, 0] ** 2 - 1), -2 * p[:, 1]]),
        hessian_fn=lambda p: np.stack(
            [
                np.column_stack([1 - 3 * p[:, 0] ** 2, np.zeros(len(p))]),
                np.column_stack([np.zeros(len(p)), np.full(len(p), -2.0)]),
            ],
            axis=1,
        ),
        name="two-bumps",
    )


def test_two_maxima_and_a_saddle() -> None:
    U = _two_bumps()
    d = extract_component(U, GridSpec.centered([2.0, 1.3], [81, 53]))
    points = find_critical_points(U, d)
    kinds = sorted(p.kind for p in points)
    assert kinds == ["max", "max", "saddle"]
    tops = sorted(maxima(points), key=lambda p: p.location[0])
    assert tops[0].location == pytest.approx((-1.0, 0.0), abs=1e-9)
    assert tops[1].location == pytest.approx((1.0, 0.0), abs=1e-9)
    assert tops[1].hess_eigs == pytest.approx((-2.0, -2.0))
    assert nondegeneracy_margin(points) == pytest.approx(2.0)
    assert symmetric_pairs(points, 1e-6)


def test_disk_has_one_maximum() -> None:
    U = quadratic_field(1.0, [1.0, 1.0])
    d = extract_component(U, GridSpec.centered([1.23, 1.23], [61, 61]))
    points = find_critical_points(U, d)
    assert len(points) == 1
    assert points[0].kind == "max"
    assert points[0].location == pytest.approx((0.0, 0.0), abs=1e-12)
    assert nondegeneracy_margin(points) == pytest.approx(2.0)
    header, table = critical_table(points)
    assert header == ["z0", "z1", "grad_norm", "kind", "eig0", "eig1"]
    assert table.shape == (1, 6)


def test_margin_rejects_flat_maximum() -> None:
    U = quadratic_field(1.0, [1.0, 1.0])
    d = extract_component(U, GridSpec.centered([1.23, 1.23], [61, 61]))
    with pytest.raises(DegenerateFound):
        nondegeneracy_margin(find_critical_points(U, d), floor=3.0)


def test_interpolant_reproduces_cubics() -> None:
    axes = [np.linspace(-2, 2, 21), np.linspace(-1, 1, 11)]
    X, Y = np.meshgrid(*axes, indexing="ij")
    field = interpolate_grid(axes, X**3 - 2 * X * Y**2 + Y)
    rng = np.random.default_rng(3)
    pts = np.column_stack([rng.uniform(-1.9, 1.9, 20), rng.uniform(-0.9, 0.9, 20)])
    x, y = pts.T
    assert np.allclose(field.value(pts), x**3 - 2 * x * y**2 + y, atol=1e-10)
    assert np.allclose(field.gradient(pts), np.column_stack([3 * x**2 - 2 * y**2, -4 * x * y + 1]), atol=1e-9)
    hess = field.hessian(pts)
    assert np.allclose(hess[:, 0, 1], -4 * y, atol=1e-8)
    assert np.allclose(hess[:, 1, 1], -4 * x, atol=1e-8)


def test_interpolated_scan_matches_analytic() -> None:
    U = _two_bumps()
    d = extract_component(U, GridSpec.centered([2.0, 1.3], [81, 53]))
    field = interpolate_grid(d.spec.axes(), d.values)
    tops = sorted(maxima(find_critical_points(field, d)), key=lambda p: p.location[0])
    assert len(tops) == 2
    assert tops[1].location == pytest.approx((1.0, 0.0), abs=1e-4)


@pytest.mark.parametrize(
    "eigs,kind",
    [((-2.0, -1.0), "max"), ((1.0, 2.0), "min"), ((-1.0, 1.0), "saddle"), ((-1.0, 1e-12), "degenerate")],
)
def test_classify(eigs, kind) -> None:
    assert classify(np.array(eigs), 1e-9) == kind
