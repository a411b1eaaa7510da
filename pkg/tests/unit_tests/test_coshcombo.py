import math
from fractions import Fraction

import numpy as np
import pytest

from multibump.coshcombo import (
    assemble_combo,
    build_polynomial,
    combo_table,
    cosh_expand,
    inclusion_threshold,
    verify_maxima,
)
from multibump.errors import DegenerateCritical, InputError, LadderViolation

MU0 = (math.pi / 2.2) ** 2


def test_cosh_square_expansion() -> None:
    expansion = cosh_expand(2)
    assert expansion.constant == Fraction(1, 2)
    assert expansion.coefficients == (Fraction(0), Fraction(0), Fraction(1, 2))


def test_cosh_power_expansions_evaluate() -> None:
    t = np.linspace(-2, 2, 9)
    for m in range(1, 7):
        assert np.allclose(cosh_expand(m).evaluate(t), np.cosh(t) ** m, rtol=1e-13)


def test_polynomial_has_maxima_at_targets() -> None:
    poly = build_polynomial((2.0, 3.0, 5.0))
    assert poly.degree == 6
    assert poly.coefficients[-1] == -1
    for tau in (2, 3, 5):
        assert poly.derivative(Fraction(tau)) == 0
        assert poly.derivative(Fraction(tau), order=2) < 0


def test_polynomial_rejects_bad_targets() -> None:
    with pytest.raises(InputError):
        build_polynomial(())
    with pytest.raises(InputError):
        build_polynomial((3.0, 2.0))
    with pytest.raises(InputError):
        build_polynomial((0.5,))


def test_single_maximum_combination() -> None:
    tau = math.cosh(1.0)
    combo = assemble_combo(build_polynomial((tau,)), MU0)
    assert combo.n == 2
    assert combo.alphas[-1] == -1.0
    assert combo.alphas[0] == pytest.approx(4 * tau, rel=1e-12)
    assert combo.delta == pytest.approx(MU0 / 16)
    assert combo.maxima_t[0] == pytest.approx(1.0 / combo.delta)


def test_top_frequency_below_quarter_mu0() -> None:
    combo = assemble_combo(build_polynomial((math.cosh(1.0), math.cosh(2.0))), MU0)
    assert 0 < combo.top_mu < MU0 / 4
    assert np.all(np.diff(combo.mus) > 0)
    assert combo.terms[-1][2] == -1.0


def test_verify_maxima_locates_targets() -> None:
    taus = (math.cosh(1.0), math.cosh(2.0))
    combo = assemble_combo(build_polynomial(taus), MU0)
    found = verify_maxima(combo)
    assert len(found) == 2
    for (t, value, curvature), expected in zip(found, combo.maxima_t):
        assert t == pytest.approx(expected, rel=1e-9)
        assert curvature < 0
        assert value > 0


def test_combination_matches_polynomial_composition() -> None:
    taus = (2.0, 3.0)
    poly = build_polynomial(taus)
    combo = assemble_combo(poly, MU0)
    x = np.linspace(0, 3 / combo.delta, 7)
    composed = np.array([poly(math.cosh(combo.delta * s)) for s in x])
    rebuilt = float(combo.scale) * composed - float(combo.dropped_constant)
    assert np.allclose(combo.value(x), rebuilt, rtol=1e-9, atol=1e-9)


def test_ladder_requires_small_mu0() -> None:
    with pytest.raises(LadderViolation):
        assemble_combo(build_polynomial((2.0,)), 16.0)
    with pytest.raises(InputError):
        assemble_combo(build_polynomial((2.0,)), 0.0)


def test_inclusion_threshold_positive() -> None:
    combo = assemble_combo(build_polynomial((math.cosh(1.0), math.cosh(2.0))), MU0)
    assert inclusion_threshold(combo, 0.5, 1) > 0


def test_combo_table() -> None:
    combo = assemble_combo(build_polynomial((2.0,)), MU0)
    header, table = combo_table(combo)
    assert header == ["l", "mu", "alpha"]
    assert table.shape == (2, 3)
    assert table[-1, 2] == -1.0


def test_verify_maxima_three_targets() -> None:
    combo = assemble_combo(build_polynomial(tuple(math.cosh(i) for i in (1.0, 2.0, 3.0))), MU0)
    found = verify_maxima(combo)
    assert [t for t, _, _ in found] == pytest.approx(list(combo.maxima_t), rel=1e-8)
    assert all(curvature < 0 for _, _, curvature in found)


def test_verify_maxima_rejects_flat_critical_points() -> None:
    combo = assemble_combo(build_polynomial((math.cosh(1.0), math.cosh(2.0))), MU0)
    with pytest.raises(DegenerateCritical):
        verify_maxima(combo, margin=math.inf)
