import math

import numpy as np
import pytest

from lcushell.constants import NEUTRON, PROTON
from lcushell.orbits import (
    MAX_ORBITS,
    Orbit,
    QuadratureError,
    QuadraturePolicy,
    build_orbit_catalog,
    clebsch_gordan_half,
    integrate_radial,
    oscillator_alpha,
    radial_wavefunction,
    spin_components,
)


def labels(orbits):
    return [(o.n, o.l, o.two_j, o.two_mj) for o in orbits]


def test_four_orbit_catalog():
    cat = build_orbit_catalog(4, 3)
    expected = [(1, 0, 1, -1), (1, 0, 1, 1), (1, 1, 3, -3), (1, 1, 3, 3)]
    assert labels(cat.protons) == expected
    assert labels(cat.neutrons) == expected
    assert all(o.species == PROTON for o in cat.protons)
    assert all(o.species == NEUTRON for o in cat.neutrons)


def test_ten_orbit_catalog_is_listed_order():
    cat = build_orbit_catalog(10, 16)
    assert labels(cat.protons) == [
        (1, 0, 1, -1), (1, 0, 1, 1),
        (1, 1, 3, -3), (1, 1, 3, -1), (1, 1, 3, 1), (1, 1, 3, 3),
        (1, 1, 1, -1), (1, 1, 1, 1),
        (1, 2, 5, -5), (1, 2, 5, 5),
    ]


def test_two_orbit_catalog_and_alpha():
    cat = build_orbit_catalog(2, 2)
    assert labels(cat.protons) == [(1, 0, 1, -1), (1, 0, 1, 1)]
    assert cat.alpha == pytest.approx(1.1 / 2 ** (1 / 6), abs=1e-15)
    assert oscillator_alpha(2) == cat.alpha


@pytest.mark.parametrize("count", [2, 4, 6, 8, 10, 12, 14, 22, MAX_ORBITS])
def test_catalog_partner_closure_and_determinism(count):
    a = build_orbit_catalog(count, 20)
    b = build_orbit_catalog(count, 20)
    assert a == b
    assert a.is_mj_closed()
    assert len(set(a.protons)) == count


@pytest.mark.parametrize("bad", [0, 3, 5, MAX_ORBITS + 2])
def test_catalog_rejects_bad_counts(bad):
    with pytest.raises(ValueError):
        build_orbit_catalog(bad, 4)


def test_catalog_rejects_bad_mass():
    with pytest.raises(ValueError):
        build_orbit_catalog(4, 0)


def test_orbit_validation():
    with pytest.raises(ValueError):
        Orbit(PROTON, 1, 0, 3, 1)  # j = 3/2 from l = 0
    with pytest.raises(ValueError):
        Orbit(PROTON, 1, 1, 3, 2)  # even two_mj
    with pytest.raises(ValueError):
        Orbit("electron", 1, 0, 1, 1)
    o = Orbit(PROTON, 1, 1, 3, -1)
    assert o.partner() == Orbit(PROTON, 1, 1, 3, 1)
    assert o.label == "1p3/2(-1/2)"


def test_clebsch_gordan_examples():
    assert clebsch_gordan_half(0, 0, 1, 1, 1) == 1.0
    assert clebsch_gordan_half(1, 1, -1, 3, 1) == pytest.approx(math.sqrt(1 / 3), abs=1e-15)
    # selection-rule violations give 0, not an error
    assert clebsch_gordan_half(1, 1, 1, 3, 1) == 0.0
    assert clebsch_gordan_half(1, 0, 1, 5, 1) == 0.0


def _ls_eigenvectors(l):
    """Diagonalize l.s on the (2l+1)*2 product space; returns {(two_j, two_mj): vector}."""
    ms = [(m, s) for m in range(-l, l + 1) for s in (1, -1)]
    index = {k: i for i, k in enumerate(ms)}
    dim = len(ms)
    ls = np.zeros((dim, dim))
    for (m, s), i in index.items():
        ls[i, i] += m * s / 2.0
        # (l+ s- + l- s+)/2
        if s == 1 and m < l:
            j = index[(m + 1, -1)]
            ls[j, i] += 0.5 * math.sqrt(l * (l + 1) - m * (m + 1))
        if s == -1 and m > -l:
            j = index[(m - 1, 1)]
            ls[j, i] += 0.5 * math.sqrt(l * (l + 1) - m * (m - 1))
    jz = np.diag([2 * m + s for m, s in ms]).astype(float)
    # split degenerate l.s eigenspaces by a small Jz perturbation
    w, v = np.linalg.eigh(ls + 1e-3 * jz)
    out = {}
    for k in range(dim):
        vec = v[:, k]
        two_mj = int(round(vec @ jz @ vec))
        two_j = 2 * l + 1 if w[k] > -0.25 else 2 * l - 1
        out[(two_j, two_mj)] = (vec, ms)
    return out


@pytest.mark.parametrize("l", [1, 2, 3])
def test_clebsch_gordan_matches_ls_diagonalization(l):
    for (two_j, two_mj), (vec, ms) in _ls_eigenvectors(l).items():
        cg = np.array([clebsch_gordan_half(l, m, s, two_j, two_mj) for m, s in ms])
        # eigenvectors carry an arbitrary overall sign
        assert abs(abs(cg @ vec) - 1.0) < 1e-12


@pytest.mark.parametrize("l", range(0, 5))
def test_clebsch_gordan_unitarity(l):
    for m in range(-l, l + 1):
        for s in (1, -1):
            total = sum(
                clebsch_gordan_half(l, m, s, two_j, 2 * m + s) ** 2 for two_j in (2 * l + 1, 2 * l - 1) if two_j > 0
            )
            assert abs(total - 1.0) < 1e-12
    # orthogonality of rows: the j = l+1/2 and j = l-1/2 states at equal mj
    if l > 0:
        for two_mj in range(-2 * l + 1, 2 * l, 2):
            rows = [
                [clebsch_gordan_half(l, (two_mj - s) // 2, s, two_j, two_mj) for s in (1, -1)]
                for two_j in (2 * l + 1, 2 * l - 1)
            ]
            assert abs(np.dot(rows[0], rows[1])) < 1e-12


def test_spin_components_normalized():
    for o in build_orbit_catalog(MAX_ORBITS, 40).protons:
        comps = spin_components(o)
        assert abs(sum(c * c for _, _, c in comps) - 1) < 1e-12
        assert all(2 * m + s == o.two_mj for m, s, _ in comps)


def test_ground_radial_function_closed_form():
    alpha = 0.8
    r = np.linspace(0, 6, 50)
    expected = 2 * alpha**1.5 * math.pi**-0.25 * np.exp(-0.5 * alpha**2 * r**2)
    np.testing.assert_allclose(radial_wavefunction(0, 0, alpha, r), expected, rtol=1e-13)
    norm = integrate_radial(lambda x: radial_wavefunction(0, 0, alpha, x) ** 2 * x**2)
    assert abs(norm - 1) < 1e-10


def test_radial_vanishes_at_origin_for_l_positive():
    for nr in range(3):
        for l in range(1, 4):
            assert radial_wavefunction(nr, l, 0.9, 0.0) == 0.0


def test_radial_orthonormality():
    alpha = oscillator_alpha(16)
    policy = QuadraturePolicy.for_mass(16)
    for l in range(5):
        for a in range(4):
            for b in range(a, 4):
                val = integrate_radial(
                    lambda r: radial_wavefunction(a, l, alpha, r) * radial_wavefunction(b, l, alpha, r) * r * r,
                    policy,
                )
                assert abs(val - (a == b)) < 1e-8, (l, a, b, val)


def test_radial_rejects_negative_r():
    with pytest.raises(ValueError):
        radial_wavefunction(0, 0, 1.0, -0.1)


def test_integrate_radial_examples():
    assert abs(integrate_radial(lambda r: np.exp(-r * r) * r * r) - math.sqrt(math.pi) / 4) < 1e-10
    assert integrate_radial(lambda r: np.zeros_like(r)) == 0.0


def test_integrate_radial_reports_non_convergence():
    policy = QuadraturePolicy(r_max=1.0, max_refinements=2, order=2, initial_panels=1, rtol=1e-15, atol=0)
    with pytest.raises(QuadratureError) as info:
        integrate_radial(lambda r: np.sin(200 * r) ** 2, policy)
    assert len(info.value.estimates) == 2
