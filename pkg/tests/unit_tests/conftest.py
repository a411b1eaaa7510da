import math
from typing import NamedTuple

import pytest

from multibump.coshcombo import CoshCombo, assemble_combo, build_polynomial
from multibump.domainforge import DomainSlab, box_half_width, extract_component
from multibump.fieldkit import GridSpec, PerturbationField, assemble_phi, superpose
from multibump.profile1d import Mode, Profile1D, constant, omega_mode, solve_profile


class TorsionStrip(NamedTuple):
    """One-maximum construction for f = 1, lambda = 1, where u0 + eps phi is the exact solution."""

    p: Profile1D
    combo: CoshCombo
    modes: list[Mode]
    phi: PerturbationField
    eps: float
    m_eps: float
    slab: DomainSlab
    strip: DomainSlab


@pytest.fixture(scope="session")
def torsion_strip() -> TorsionStrip:
    eps = 1e-3
    p = solve_profile(constant(), 1.0, 0.1)
    combo = assemble_combo(build_polynomial((math.cosh(1.0),)), p.mu0)
    modes = [omega_mode(p, mu) for _, mu, _ in combo.terms]
    phi = assemble_phi(combo, modes, 1)
    m_eps = box_half_width(combo.top_mu, p.center_value, float(modes[-1].value(1.05)), eps)
    spec = GridSpec.centered([1.15 * m_eps, 1.1], [129, 65])
    slab = extract_component(superpose(p, phi, eps), spec, axis_names=("x1", "y"))
    strip = extract_component(
        superpose(p, phi, 0.0), spec, axis_names=("x1", "y"), allow_faces=("x1-", "x1+")
    )
    return TorsionStrip(p=p, combo=combo, modes=modes, phi=phi, eps=eps, m_eps=m_eps, slab=slab, strip=strip)
