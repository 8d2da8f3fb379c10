"""Dense statevector emulation of the gradient-descent iteration.

Basis index convention: qubit k is bit k of the index (qubit 0 least significant).
Bitstrings such as ``"10"`` are written in qubit order, character k being qubit k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .pauli import PauliSum, PauliTerm, build_iteration_operator, letters_to_masks

NORM_TOL = 1e-9
LITERAL_QUBIT_LIMIT = 20


class ZeroNormError(ArithmeticError):
    """The iteration annihilated the state (input was an eigenvector of T with eigenvalue 0)."""


class SectorError(ValueError):
    """A state has no weight in the requested particle-number sector."""


def bits_to_index(bits: str) -> int:
    if any(ch not in "01" for ch in bits):
        raise ValueError(f"bitstring {bits!r} must contain only 0 and 1")
    return sum(1 << k for k, ch in enumerate(bits) if ch == "1")


def index_to_bits(index: int, n_qubits: int) -> str:
    return "".join("1" if (index >> k) & 1 else "0" for k in range(n_qubits))


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got shape {self.amplitudes.shape}")

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[bits_to_index(bits)] = 1.0
        return cls(amps, len(bits))

    @classmethod
    def superposition(cls, weights: dict[str, complex]) -> "StateVector":
        """Normalized ``sum_b w_b |b>`` from bitstring weights."""
        lengths = {len(b) for b in weights}
        if len(lengths) != 1:
            raise ValueError("all bitstrings must have the same length")
        n = lengths.pop()
        amps = np.zeros(1 << n, dtype=complex)
        for bits, w in weights.items():
            amps[bits_to_index(bits)] += w
        return cls(amps, n).normalized()

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ZeroNormError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / nrm, self.n_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class LcuOutcome:
    state: StateVector
    success_probability: float
    pre_normalization_norm: float
    # same numerator over C^2 M instead of C^2 2^m
    success_probability_term_count: float
    n_terms: int
    n_ancilla: int


def _indices(n_qubits: int) -> np.ndarray:
    return np.arange(1 << n_qubits, dtype=np.int64)


def _apply_masks(amps: np.ndarray, x: int, z: int, coeff: complex, idx: np.ndarray) -> np.ndarray:
    # P(x,z)|b> = i^|x&z| (-1)^|z&b| |b^x>
    phase = coeff * (1j ** ((x & z).bit_count() % 4))
    signs = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int8)
    out = np.empty_like(amps)
    out[idx ^ x] = phase * signs * amps
    return out


def apply_pauli_term(s: StateVector, t: PauliTerm) -> StateVector:
    """``coeff * P |s>``."""
    if t.n_qubits != s.n_qubits:
        raise ValueError(f"term acts on {t.n_qubits} qubits, state has {s.n_qubits}")
    x, z = letters_to_masks(t.letters)
    return StateVector(_apply_masks(s.amplitudes, x, z, t.coefficient, _indices(s.n_qubits)), s.n_qubits)


def _check_sizes(s: StateVector, h: PauliSum) -> None:
    if s.n_qubits != h.n_qubits:
        raise ValueError(f"state has {s.n_qubits} qubits, Hamiltonian {h.n_qubits}")


def expectation(s: StateVector, h: PauliSum) -> float:
    """``<s|H|s>`` in MeV for a hermitian sum."""
    _check_sizes(s, h)
    if not h.is_hermitian():
        raise ValueError("expectation requires a hermitian PauliSum (real coefficients)")
    val = np.vdot(s.amplitudes, h.to_sparse() @ s.amplitudes)
    assert abs(val.imag) < 1e-9 * max(1.0, abs(val.real)), f"imaginary residue {val.imag:.3e}"
    return float(val.real)


def iterate_direct(s: StateVector, h: PauliSum, gamma: float) -> tuple[StateVector, float]:
    """One step ``|s> -> (I - 2 gamma H)|s> / norm``; returns the state and the norm."""
    _check_sizes(s, h)
    v = s.amplitudes - 2.0 * gamma * (h.to_sparse() @ s.amplitudes)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        raise ZeroNormError("(I - 2 gamma H)|s> vanished: s is an eigenvector with eigenvalue 1/(2 gamma)")
    return StateVector(v / nrm, s.n_qubits), nrm


def ancilla_count(n_terms: int) -> int:
    if n_terms < 1:
        raise ValueError("LCU needs at least one term")
    return math.ceil(math.log2(n_terms)) if n_terms > 1 else 0


def iterate_circuit(s: StateVector, h: PauliSum, gamma: float, literal: bool = False) -> LcuOutcome:
    """One LCU step: prepare ancillas, select-apply the terms of T, unprepare, post-select.

    The default path folds the Hadamard projection in analytically, accumulating
    ``sum_k beta_k P_k |s>`` term by term.  ``literal=True`` materializes the
    ``2^(n+m)`` joint register instead (limited to 20 qubits) and applies the
    Hadamards as a matrix.
    """
    _check_sizes(s, h)
    t_op = build_iteration_operator(h, gamma)
    terms = t_op.terms
    if not terms:
        raise ZeroNormError("iteration operator is empty")
    m = ancilla_count(len(terms))
    betas = np.array([t.coefficient for t in terms], dtype=complex)
    c_norm = float(np.linalg.norm(betas))
    idx = _indices(s.n_qubits)
    masks = [letters_to_masks(t.letters) for t in terms]

    if literal:
        if s.n_qubits + m > LITERAL_QUBIT_LIMIT:
            raise ValueError(f"literal mode limited to {LITERAL_QUBIT_LIMIT} qubits (need {s.n_qubits + m})")
        joint = np.zeros((1 << m, 1 << s.n_qubits), dtype=complex)  # row = ancilla value k
        for k, (x, z) in enumerate(masks):
            # prepare: ancilla |k> carries beta_k / C; select: P_k on the work register
            joint[k] = _apply_masks(s.amplitudes, x, z, betas[k] / c_norm, idx)
        joint = (hadamard(1 << m) / math.sqrt(1 << m)) @ joint if m else joint
        projected = joint[0]
    else:
        acc = np.zeros_like(s.amplitudes)
        for k, (x, z) in enumerate(masks):
            acc += _apply_masks(s.amplitudes, x, z, betas[k], idx)
        projected = acc / (c_norm * math.sqrt(1 << m))

    p_success = float(np.vdot(projected, projected).real)
    if p_success == 0.0:
        raise ZeroNormError("post-selection probability is zero")
    ts_norm = math.sqrt(p_success) * c_norm * math.sqrt(1 << m)
    state = StateVector(projected / math.sqrt(p_success), s.n_qubits)
    return LcuOutcome(
        state=state,
        success_probability=p_success,
        pre_normalization_norm=ts_norm,
        success_probability_term_count=ts_norm**2 / (c_norm**2 * len(terms)),
        n_terms=len(terms),
        n_ancilla=m,
    )


def sector_mask(n_qubits: int, n_proton_qubits: int, Z: int, N: int) -> np.ndarray:
    idx = _indices(n_qubits)
    p = np.bitwise_count(idx & ((1 << n_proton_qubits) - 1))
    n = np.bitwise_count(idx >> n_proton_qubits)
    return (p == Z) & (n == N)


def project_to_sector(s: StateVector, n_proton_qubits: int, Z: int, N: int) -> StateVector:
    amps = np.where(sector_mask(s.n_qubits, n_proton_qubits, Z, N), s.amplitudes, 0.0)
    if not np.any(amps):
        raise SectorError(f"state is orthogonal to the sector Z={Z}, N={N}")
    return StateVector(amps, s.n_qubits).normalized()


def project_particle_numbers(s: StateVector, nucleus) -> StateVector:
    """Keep only components with the nucleus' proton and neutron counts, renormalized."""
    return project_to_sector(s, nucleus.catalog.n_proton_orbits, nucleus.Z, nucleus.N)


def sample_expectation(s: StateVector, h: PauliSum, shots: int, seed: int) -> tuple[float, float]:
    """Shot-sampled energy estimate and its standard error.

    Each non-identity term is measured ``shots`` times in its own eigenbasis; the
    number of +1 outcomes is binomial with ``p = (1 + <P>)/2``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    _check_sizes(s, h)
    rng = np.random.default_rng(seed)
    idx = _indices(s.n_qubits)
    estimate, variance = 0.0, 0.0
    for t in h.simplify().terms:
        alpha = t.coefficient.real
        x, z = letters_to_masks(t.letters)
        if x == 0 and z == 0:
            estimate += alpha
            continue
        exact = float(np.vdot(s.amplitudes, _apply_masks(s.amplitudes, x, z, 1.0, idx)).real)
        p_plus = min(1.0, max(0.0, 0.5 * (1.0 + exact)))
        mean = 2.0 * rng.binomial(shots, p_plus) / shots - 1.0
        estimate += alpha * mean
        variance += alpha**2 * (1.0 - mean**2) / shots
    return estimate, math.sqrt(variance)


def basis_matrix_element(h: PauliSum, m_bits: str, n_bits: str) -> complex:
    """``<m|H|n>`` straight from the term list."""
    if len(m_bits) != len(n_bits) or len(m_bits) != h.n_qubits:
        raise ValueError("bitstring lengths must match the Hamiltonian's qubit count")
    m, n = bits_to_index(m_bits), bits_to_index(n_bits)
    total = 0j
    for (x, z), c in h.data.items():
        if x == m ^ n:
            total += c * (1j ** ((x & z).bit_count() % 4)) * (-1) ** (z & n).bit_count()
    return total
