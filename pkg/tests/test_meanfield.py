import math

import numpy as np
import pytest

from lcushell.constants import HBARC, NEUTRON, PROTON
from lcushell.meanfield import (
    MeanFieldParams,
    NucleusSpec,
    kinetic_element,
    one_body_element,
    one_body_matrix,
    spin_orbit_expectation,
    ws_central,
)
from lcushell.orbits import build_orbit_catalog, radial_wavefunction

# energies frozen from the oracle run of this implementation
E_2H_ONE_BODY = -2.43002837


def he4():
    return NucleusSpec.build(2, 4, 4, name="4He")


def test_ws_central_isospin_symmetric_for_n_equals_z():
    params = MeanFieldParams(U0=-42.9)
    r = np.linspace(0, 10, 41)
    np.testing.assert_array_equal(ws_central(r, params, PROTON, he4()), ws_central(r, params, NEUTRON, he4()))


def test_ws_central_at_origin():
    value = ws_central(0.0, MeanFieldParams(U0=-42.9), PROTON, he4())
    expected = -42.9 / (1 + math.exp(-1.27 * 4 ** (1 / 3) / 0.67))
    assert value == pytest.approx(expected, abs=1e-12)


def test_ws_central_vanishes_far_out():
    assert abs(ws_central(40.0, MeanFieldParams(U0=-42.9), PROTON, he4())) < 1e-6


def test_ws_isovector_sign():
    nucleus = NucleusSpec.build(1, 3, 4)  # N > Z
    params = MeanFieldParams(U0=-45.0)
    # protons get the deeper well when neutrons are in excess
    assert ws_central(0.0, params, PROTON, nucleus) < ws_central(0.0, params, NEUTRON, nucleus)


def test_ws_rejects_negative_radius():
    with pytest.raises(ValueError):
        ws_central(-1.0, MeanFieldParams(), PROTON, he4())


def test_params_validation():
    MeanFieldParams(U0=0.0)
    with pytest.raises(ValueError):
        MeanFieldParams(U0=1.0)


@pytest.mark.parametrize("l,two_j,expected", [(1, 3, 0.5), (1, 1, -1.0), (0, 1, 0.0), (2, 5, 1.0), (2, 3, -1.5)])
def test_spin_orbit_expectation(l, two_j, expected):
    assert spin_orbit_expectation(l, two_j) == expected


def test_spin_orbit_expectation_rejects_bad_pair():
    with pytest.raises(ValueError):
        spin_orbit_expectation(1, 5)
    with pytest.raises(ValueError):
        spin_orbit_expectation(0, -1)


def _fd_kinetic(nr_a, nr_b, l, alpha, mass):
    # <a|T|b> = hbar^2/2M int (R_a' R_b' + l(l+1)/r^2 R_a R_b) r^2 dr on a fine grid
    r = np.linspace(1e-6, 14.0 / alpha, 200001)
    ra = radial_wavefunction(nr_a, l, alpha, r)
    rb = radial_wavefunction(nr_b, l, alpha, r)
    da = np.gradient(ra, r, edge_order=2)
    db = np.gradient(rb, r, edge_order=2)
    integrand = da * db * r * r + l * (l + 1) * ra * rb
    return HBARC**2 / (2 * mass) * np.trapezoid(integrand, r)


@pytest.mark.parametrize("l", [0, 1, 2])
def test_kinetic_matches_finite_difference(l):
    alpha, mass = 0.9, 938.3
    for a in range(3):
        for b in range(3):
            analytic = kinetic_element(a, b, l, alpha, mass)
            numeric = _fd_kinetic(a, b, l, alpha, mass)
            assert abs(analytic - numeric) <= 1e-6 * max(1.0, abs(analytic)), (a, b, analytic, numeric)


def test_one_body_selection_rules_and_mj_independence():
    nucleus = NucleusSpec.build(3, 6, 10)
    params = MeanFieldParams(U0=-40.6)
    orbits = nucleus.catalog.protons
    s_minus, s_plus, p_m3 = orbits[0], orbits[1], orbits[2]
    assert one_body_element(s_minus, p_m3, params, nucleus) == 0.0
    assert one_body_element(s_minus, s_plus, params, nucleus) == 0.0
    assert one_body_element(s_minus, s_minus, params, nucleus) == pytest.approx(
        one_body_element(s_plus, s_plus, params, nucleus), abs=1e-12
    )
    with pytest.raises(ValueError):
        one_body_element(s_minus, nucleus.catalog.neutrons[0], params, nucleus)


def test_one_body_matrix_structure():
    nucleus = NucleusSpec.build(5, 10, 22)
    g = one_body_matrix(nucleus.catalog, MeanFieldParams(U0=-39.0), nucleus)
    for species, orbits in ((PROTON, nucleus.catalog.protons), (NEUTRON, nucleus.catalog.neutrons)):
        mat = g[species]
        np.testing.assert_allclose(mat, mat.T, atol=1e-12)
        for i, a in enumerate(orbits):
            for j, b in enumerate(orbits):
                if (a.l, a.two_j, a.two_mj) != (b.l, b.two_j, b.two_mj):
                    assert mat[i, j] == 0.0
        # 1s and 2s mix (same l, j) in the extended catalog
        s_idx = [k for k, o in enumerate(orbits) if o.l == 0 and o.two_mj == 1]
        assert len(s_idx) == 2 and mat[s_idx[0], s_idx[1]] != 0.0


def test_one_body_matrix_mj_relabel_invariance():
    nucleus = NucleusSpec.build(3, 6, 6)
    g = one_body_matrix(nucleus.catalog, MeanFieldParams(U0=-40.6), nucleus)[PROTON]
    orbits = nucleus.catalog.protons
    perm = [orbits.index(o.partner()) for o in orbits]
    np.testing.assert_allclose(g[np.ix_(perm, perm)], g, atol=1e-12)


def test_he4_diagonal_signs():
    # the 1s levels are bound; the 1p3/2 oscillator states carry 39.5 MeV of kinetic
    # energy against a 2 fm well and sit above zero
    nucleus = he4()
    g = one_body_matrix(nucleus.catalog, MeanFieldParams(U0=-42.9), nucleus)
    for species in (PROTON, NEUTRON):
        d = np.diag(g[species])
        assert np.all(d[:2] < 0) and np.all(d[2:] > 0)
    d = np.diag(g[PROTON])
    assert d[0] == pytest.approx(-7.26235236, abs=1e-6)
    assert d[2] == pytest.approx(9.24186844, abs=1e-6)


def test_diagonal_elements_decrease_with_depth():
    nucleus = NucleusSpec.build(3, 7, 6)
    a = one_body_matrix(nucleus.catalog, MeanFieldParams(U0=-40.6), nucleus)
    b = one_body_matrix(nucleus.catalog, MeanFieldParams(U0=-41.6), nucleus)
    for species in (PROTON, NEUTRON):
        assert np.all(np.diag(b[species]) < np.diag(a[species]))


def test_deuteron_lowest_levels():
    nucleus = NucleusSpec.build(1, 2, 4)
    g = one_body_matrix(nucleus.catalog, MeanFieldParams(U0=-48.0), nucleus)
    total = g[PROTON][0, 0] + g[NEUTRON][0, 0]
    assert total == pytest.approx(E_2H_ONE_BODY, abs=1e-6)
    # the published value is -2.19 MeV; the analysis of the gap lives in the notes
    assert abs(total - (-2.19)) < 0.3


def test_nucleus_validation():
    with pytest.raises(ValueError):
        NucleusSpec.build(5, 6, 4)  # 5 protons in 4 orbits
    with pytest.raises(ValueError):
        NucleusSpec(1, 1, build_orbit_catalog(4, 3))  # catalog for a different A
