import math

import numpy as np
import pytest

from conftest import random_hermitian_sum, random_state_amplitudes
from lcushell.meanfield import NucleusSpec
from lcushell.pauli import PauliSum, PauliTerm, build_iteration_operator
from lcushell.presets import load_builtin
from lcushell.statevec import (
    SectorError,
    StateVector,
    ZeroNormError,
    ancilla_count,
    apply_pauli_term,
    basis_matrix_element,
    bits_to_index,
    expectation,
    index_to_bits,
    iterate_circuit,
    iterate_direct,
    project_particle_numbers,
    sample_expectation,
)

DEUTERON_EXACT = -1.749161222015587


def test_bit_order():
    assert bits_to_index("10") == 1  # character 0 is qubit 0, the low bit
    assert bits_to_index("01") == 2
    assert index_to_bits(6, 4) == "0110"


def test_single_pauli_actions():
    zero, one = StateVector.from_bits("0"), StateVector.from_bits("1")
    np.testing.assert_allclose(apply_pauli_term(zero, PauliTerm(1.0, "X")).amplitudes, [0, 1])
    np.testing.assert_allclose(apply_pauli_term(one, PauliTerm(1.0, "Z")).amplitudes, [0, -1])
    np.testing.assert_allclose(apply_pauli_term(zero, PauliTerm(1.0, "Y")).amplitudes, [0, 1j])
    with pytest.raises(ValueError):
        apply_pauli_term(zero, PauliTerm(1.0, "XX"))


def test_expectation_examples():
    z = PauliSum.from_terms([(1.0, "Z")])
    assert expectation(StateVector.from_bits("0"), z) == 1.0
    h = load_builtin("deuteron-n2")
    # qubit 0 = 0, qubit 1 = 1: Z0 -> +1, Z1 -> -1
    spec_layout = StateVector.from_bits("01")
    assert expectation(spec_layout, h) == pytest.approx(5.906709 + 0.218291 + 6.125, abs=1e-12)
    dense = h.to_dense()
    assert expectation(spec_layout, h) == pytest.approx((spec_layout.amplitudes.conj() @ dense @ spec_layout.amplitudes).real)
    hf = StateVector.from_bits("10")
    assert expectation(hf, h) == pytest.approx(5.906709 - 0.218291 - 6.125, abs=1e-12)


def test_expectation_within_spectrum_and_simplify_invariant():
    rng = np.random.default_rng(5)
    for _ in range(10):
        h = random_hermitian_sum(rng, 4, 8)
        s = StateVector(random_state_amplitudes(rng, 4), 4)
        evals = np.linalg.eigvalsh(h.to_dense())
        e = expectation(s, h)
        assert evals[0] - 1e-12 <= e <= evals[-1] + 1e-12
        doubled = PauliSum.from_terms([(t.coefficient / 2, t.letters) for t in h.terms] * 2, 4)
        assert expectation(s, doubled) == pytest.approx(e, abs=1e-12)


def test_expectation_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expectation(StateVector.from_bits("0"), PauliSum.from_terms([(1j, "Z")]))


def test_iterate_direct_examples():
    z = PauliSum.from_terms([(1.0, "Z")])
    s = StateVector(np.array([1, 1]) / math.sqrt(2), 1)
    out, nrm = iterate_direct(s, z, 0.25)
    np.testing.assert_allclose(out.amplitudes, np.array([0.5, 1.5]) / math.hypot(0.5, 1.5))
    assert nrm == pytest.approx(math.hypot(0.5, 1.5) / math.sqrt(2))
    for _ in range(60):
        out, _ = iterate_direct(out, z, 0.25)
    assert abs(out.amplitudes[1]) == pytest.approx(1.0, abs=1e-12)
    # eigenvector stays put, gamma = 0 is the identity
    eig, _ = iterate_direct(StateVector.from_bits("1"), z, 0.25)
    np.testing.assert_allclose(eig.amplitudes, [0, 1])
    same, nrm0 = iterate_direct(s, z, 0.0)
    np.testing.assert_allclose(same.amplitudes, s.amplitudes)
    assert nrm0 == pytest.approx(1.0)


def test_iterate_direct_zero_norm():
    z = PauliSum.from_terms([(1.0, "Z")])
    # eigenvalue +1 = 1/(2 gamma) with gamma = 0.5
    with pytest.raises(ZeroNormError):
        iterate_direct(StateVector.from_bits("0"), z, 0.5)


def test_ancilla_count():
    assert [ancilla_count(m) for m in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]
    with pytest.raises(ValueError):
        ancilla_count(0)


def test_circuit_examples():
    s = StateVector.from_bits("0")
    out = iterate_circuit(s, PauliSum(1), 0.1)
    assert out.success_probability == 1.0 and out.n_ancilla == 0
    np.testing.assert_allclose(out.state.amplitudes, s.amplitudes)
    out = iterate_circuit(s, PauliSum.from_terms([(1.0, "Z")]), 0.25)
    np.testing.assert_allclose(out.state.amplitudes, [1, 0])
    assert out.n_ancilla == 1
    assert out.success_probability == pytest.approx(0.1, abs=1e-15)


def test_circuit_literal_agrees_with_shortcut():
    rng = np.random.default_rng(21)
    for n in (1, 2, 3, 4):
        h = random_hermitian_sum(rng, n, 7)
        s = StateVector(random_state_amplitudes(rng, n), n)
        fast = iterate_circuit(s, h, 0.07)
        literal = iterate_circuit(s, h, 0.07, literal=True)
        np.testing.assert_allclose(literal.state.amplitudes, fast.state.amplitudes, atol=1e-12)
        assert literal.success_probability == pytest.approx(fast.success_probability, abs=1e-13)


def test_circuit_success_probability_formula():
    rng = np.random.default_rng(8)
    h = random_hermitian_sum(rng, 3, 9)
    s = StateVector(random_state_amplitudes(rng, 3), 3)
    gamma = 0.05
    t = build_iteration_operator(h, gamma)
    c_sq = float(np.sum(np.abs(t.coefficients()) ** 2))
    ts = t.to_dense() @ s.amplitudes
    out = iterate_circuit(s, h, gamma)
    m = ancilla_count(len(t))
    assert out.success_probability == pytest.approx(np.vdot(ts, ts).real / (c_sq * 2**m), abs=1e-12)
    assert out.success_probability_term_count == pytest.approx(np.vdot(ts, ts).real / (c_sq * len(t)), abs=1e-12)
    assert 0 < out.success_probability <= 1


def test_projection():
    # |10>_p |11>_n + |11>_p |11>_n with Z = 1, N = 2 on 2+2 orbits
    nucleus = NucleusSpec.build(1, 3, 2)
    s = StateVector.superposition({"1011": 1.0, "1111": 1.0})
    out = project_particle_numbers(s, nucleus)
    np.testing.assert_allclose(out.amplitudes, StateVector.from_bits("1011").amplitudes)
    np.testing.assert_allclose(project_particle_numbers(out, nucleus).amplitudes, out.amplitudes)
    inside = StateVector.from_bits("0111")
    np.testing.assert_allclose(project_particle_numbers(inside, nucleus).amplitudes, inside.amplitudes)
    with pytest.raises(SectorError):
        project_particle_numbers(StateVector.from_bits("1111"), nucleus)


def test_sampling():
    z = PauliSum.from_terms([(1.0, "Z")])
    est, err = sample_expectation(StateVector.from_bits("0"), z, 10**6, seed=1)
    assert est == 1.0 and err == 0.0
    h = load_builtin("deuteron-n2")
    w, v = np.linalg.eigh(h.to_dense())
    ground = StateVector(v[:, 0], 2)
    est, err = sample_expectation(ground, h, 20000, seed=2024)
    assert abs(est - DEUTERON_EXACT) <= 3 * err
    assert err < 0.05  # same scale as the hardware's +-0.02
    assert sample_expectation(ground, h, 20000, seed=2024) == (est, err)
    with pytest.raises(ValueError):
        sample_expectation(ground, h, 0, seed=1)


def test_basis_matrix_element():
    h_xy = PauliSum.from_terms([(-2.143304, "XX"), (-2.143304, "YY")])
    assert basis_matrix_element(h_xy, "10", "01") == pytest.approx(-4.286608, abs=1e-12)
    h = load_builtin("deuteron-n2")
    dense = h.to_dense()
    for m in ("00", "10", "01", "11"):
        assert basis_matrix_element(h, m, m).imag == 0
        for n in ("00", "10", "01", "11"):
            assert basis_matrix_element(h, m, n) == pytest.approx(dense[bits_to_index(m), bits_to_index(n)])
            assert basis_matrix_element(h, m, n) == pytest.approx(np.conj(basis_matrix_element(h, n, m)))
    with pytest.raises(ValueError):
        basis_matrix_element(h, "1", "01")


def test_state_vector_validation():
    with pytest.raises(ValueError):
        StateVector(np.ones(3), 2)
    s = StateVector(np.array([3.0, 4.0]), 1).normalized()
    assert abs(s.norm() - 1) < 1e-12
    with pytest.raises(ZeroNormError):
        StateVector(np.zeros(2), 1).normalized()
