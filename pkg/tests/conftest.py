import functools

import numpy as np
import pytest

from lcushell.interactions import assemble_hamiltonian
from lcushell.meanfield import MeanFieldParams
from lcushell.pauli import PauliSum, map_to_qubits
from lcushell.presets import get_preset


@functools.lru_cache(maxsize=None)
def preset_problem(symbol):
    """(nucleus, second-quantized H, PauliSum) for a shipped preset at its table depth."""
    p = get_preset(symbol)
    nucleus = p.nucleus()
    sq = assemble_hamiltonian(nucleus, MeanFieldParams(U0=p.U0))
    return nucleus, sq, map_to_qubits(sq)


@pytest.fixture(scope="session")
def problem():
    return preset_problem


def random_hermitian_sum(rng, n_qubits, n_terms):
    letters = "IXYZ"
    terms = []
    for _ in range(n_terms):
        word = "".join(letters[k] for k in rng.integers(0, 4, n_qubits))
        terms.append((float(rng.normal()), word))
    return PauliSum.from_terms(terms, n_qubits).simplify()


def random_state_amplitudes(rng, n_qubits):
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return v / np.linalg.norm(v)


# -- acceptance reporting: one line per criterion in the terminal summary -------------

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` prints and records a PASS/FAIL line, then asserts."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
