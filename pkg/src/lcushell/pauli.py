"""Pauli-string algebra and the Jordan-Wigner map.

A Pauli string is stored symplectically as a pair of bitmasks ``(x, z)``; qubit ``k``
carries X if only bit k of x is set, Z if only bit k of z is set and Y if both are.
Equivalently ``P(x, z) = i^|x & z| X^x Z^z``.  Letter strings list qubit 0 first, so
``"IZ"`` is Z on qubit 1.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp

PRUNE_TOL = 1e-12
_PHASES = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    letters: str

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def masks(self) -> tuple[int, int]:
        return letters_to_masks(self.letters)


def letters_to_masks(letters: str) -> tuple[int, int]:
    x = z = 0
    for k, ch in enumerate(letters):
        if ch == "X":
            x |= 1 << k
        elif ch == "Y":
            x |= 1 << k
            z |= 1 << k
        elif ch == "Z":
            z |= 1 << k
        elif ch != "I":
            raise ValueError(f"invalid Pauli letter {ch!r} in {letters!r}")
    return x, z


def masks_to_letters(x: int, z: int, n_qubits: int) -> str:
    table = "IXZY"
    return "".join(table[((x >> k) & 1) | (((z >> k) & 1) << 1)] for k in range(n_qubits))


def multiply_strings(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, int]:
    """Product of two strings as ``(x, z, k)`` meaning ``i^k P(x, z)``."""
    x, z = x1 ^ x2, z1 ^ z2
    k = (x1 & z1).bit_count() + (x2 & z2).bit_count() + 2 * (z1 & x2).bit_count() - (x & z).bit_count()
    return x, z, k % 4


class PauliSum:
    """Weighted sum of Pauli strings on a fixed number of qubits.

    Treated as immutable: arithmetic returns new sums.  Construction merges like
    strings but does not prune; call :meth:`simplify` for that.
    """

    def __init__(self, n_qubits: int, data: dict[tuple[int, int], complex] | None = None):
        if n_qubits < 0:
            raise ValueError("n_qubits must be >= 0")
        self.n_qubits = n_qubits
        self._data: dict[tuple[int, int], complex] = dict(data or {})

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[complex, str]], n_qubits: int | None = None) -> "PauliSum":
        data: dict = defaultdict(complex)
        for coeff, letters in terms:
            if n_qubits is None:
                n_qubits = len(letters)
            if len(letters) != n_qubits:
                raise ValueError(f"term {letters!r} does not act on {n_qubits} qubits")
            data[letters_to_masks(letters)] += complex(coeff)
        return cls(n_qubits or 0, data)

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {(0, 0): complex(coefficient)})

    @classmethod
    def single(cls, n_qubits: int, letter: str, qubit: int, coefficient: complex = 1.0) -> "PauliSum":
        letters = ["I"] * n_qubits
        letters[qubit] = letter
        return cls.from_terms([(coefficient, "".join(letters))])

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        """Parse the ``<coeff> <letters>`` one-term-per-line format."""
        terms = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace("−", "-").split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected '<coeff> <letters>', got {raw!r}")
            try:
                coeff = complex(parts[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
            terms.append((coeff, parts[1]))
        if not terms:
            raise ValueError("no Pauli terms found")
        return cls.from_terms(terms)

    def to_text(self) -> str:
        lines = []
        for t in self.simplify(0.0).terms:
            c = t.coefficient
            coeff = repr(c.real) if c.imag == 0 else repr(c).strip("()")
            lines.append(f"{coeff} {t.letters}")
        return "\n".join(lines) + "\n"

    # -- views -------------------------------------------------------------------

    @property
    def data(self) -> dict[tuple[int, int], complex]:
        return dict(self._data)

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        out = [PauliTerm(c, masks_to_letters(x, z, self.n_qubits)) for (x, z), c in self._data.items()]
        return tuple(sorted(out, key=lambda t: t.letters))

    def __len__(self) -> int:
        return len(self._data)

    def __iter__(self):
        return iter(self.terms)

    def coefficient(self, letters: str) -> complex:
        return self._data.get(letters_to_masks(letters), 0.0)

    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms], dtype=complex)

    def one_norm(self) -> float:
        return float(sum(abs(c) for c in self._data.values()))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) < tol for c in self._data.values())

    def __repr__(self) -> str:
        return f"PauliSum(n_qubits={self.n_qubits}, terms={len(self)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        a, b = self.simplify(), other.simplify()
        return a.n_qubits == b.n_qubits and a._data.keys() == b._data.keys() and all(
            abs(a._data[k] - b._data[k]) <= PRUNE_TOL for k in a._data
        )

    __hash__ = None  # type: ignore[assignment]

    # -- arithmetic --------------------------------------------------------------

    def _check(self, other: "PauliSum") -> None:
        if other.n_qubits != self.n_qubits:
            raise ValueError(f"qubit count mismatch: {self.n_qubits} vs {other.n_qubits}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PauliSum.identity(self.n_qubits, other)
        if not isinstance(other, PauliSum):
            return NotImplemented
        self._check(other)
        data = dict(self._data)
        for k, c in other._data.items():
            data[k] = data.get(k, 0.0) + c
        return PauliSum(self.n_qubits, data)

    __radd__ = __add__

    def __neg__(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: -c for k, c in self._data.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return PauliSum(self.n_qubits, {k: c * other for k, c in self._data.items()})
        if not isinstance(other, PauliSum):
            return NotImplemented
        self._check(other)
        data: dict = defaultdict(complex)
        for (x1, z1), c1 in self._data.items():
            for (x2, z2), c2 in other._data.items():
                x, z, k = multiply_strings(x1, z1, x2, z2)
                data[(x, z)] += _PHASES[k] * c1 * c2
        return PauliSum(self.n_qubits, data)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def dagger(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: c.conjugate() for k, c in self._data.items()})

    def simplify(self, tol: float = PRUNE_TOL) -> "PauliSum":
        keep = {k: c for k, c in self._data.items() if abs(c) > tol}
        ordered = sorted(keep, key=lambda k: masks_to_letters(k[0], k[1], self.n_qubits))
        return PauliSum(self.n_qubits, {k: keep[k] for k in ordered})

    def real(self, tol: float = 1e-10) -> "PauliSum":
        """Drop imaginary parts after asserting they are below ``tol``."""
        if not self.is_hermitian(tol):
            worst = max(abs(c.imag) for c in self._data.values())
            raise ValueError(f"PauliSum is not hermitian (imaginary coefficient {worst:.3e})")
        return PauliSum(self.n_qubits, {k: complex(c.real) for k, c in self._data.items()})

    # -- matrices ----------------------------------------------------------------

    def grouped(self) -> dict[int, list[tuple[int, complex]]]:
        """Terms grouped by X mask: ``{x: [(z, coeff * i^|x&z|), ...]}``."""
        out: dict[int, list] = defaultdict(list)
        for (x, z), c in self._data.items():
            out[x].append((z, c * _PHASES[(x & z).bit_count() % 4]))
        return out

    def diagonals(self, basis: np.ndarray | None = None) -> dict[int, np.ndarray]:
        """For each X mask, the vector d with ``H|b> = sum_x d_x[b] |b ^ x>``."""
        idx = np.arange(1 << self.n_qubits, dtype=np.int64) if basis is None else basis
        out = {}
        for x, zs in self.grouped().items():
            d = np.zeros(idx.shape, dtype=complex)
            for z, c in zs:
                parity = (np.bitwise_count(idx & z) & 1).astype(np.int8)
                d += c * (1 - 2 * parity)
            out[x] = d
        return out

    @cached_property
    def _sparse(self) -> sp.csr_matrix:
        dim = 1 << self.n_qubits
        idx = np.arange(dim, dtype=np.int64)
        rows, cols, vals = [], [], []
        for x, d in self.diagonals(idx).items():
            rows.append(idx ^ x)
            cols.append(idx)
            vals.append(d)
        if not rows:
            return sp.csr_matrix((dim, dim), dtype=complex)
        m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
        m = m.tocsr()
        m.eliminate_zeros()
        return m

    def to_sparse(self) -> sp.csr_matrix:
        if self.n_qubits > 24:
            raise ValueError(f"{self.n_qubits} qubits is too many for a full-space matrix")
        return self._sparse

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > 14:
            raise ValueError(f"{self.n_qubits} qubits is too many for a dense matrix")
        return self.to_sparse().toarray()


def simplify(p: PauliSum, tol: float = PRUNE_TOL) -> PauliSum:
    return p.simplify(tol)


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    return (a * b - b * a).simplify()


def number_operator(n_qubits: int, qubits: Iterable[int]) -> PauliSum:
    """``sum_k (I - Z_k)/2`` over the given qubits."""
    out = PauliSum(n_qubits)
    for k in qubits:
        out = out + PauliSum.identity(n_qubits, 0.5) - PauliSum.single(n_qubits, "Z", k, 0.5)
    return out.simplify()


# -- Jordan-Wigner -----------------------------------------------------------------


def _ladder(index: int, dagger: bool, register_start: int) -> tuple[tuple[int, int, complex], ...]:
    below = ((1 << index) - 1) ^ ((1 << register_start) - 1)
    bit = 1 << index
    # (X_k -+ i Y_k)/2 behind the Z string; (bit, below | bit) is Y_k on that string
    return ((bit, below, 0.5), (bit, below | bit, -0.5j if dagger else 0.5j))


def jw_ladder(index: int, dagger: bool, n_qubits: int, register_start: int = 0) -> PauliSum:
    """Creation (``dagger=True``) or annihilation operator on one mode.

    ``a+_k = Z...Z (X_k - i Y_k) / 2`` and ``a_k = Z...Z (X_k + i Y_k) / 2`` with the Z
    string covering qubits ``register_start .. k-1`` only.
    """
    if not 0 <= register_start <= index < n_qubits:
        raise ValueError(f"mode {index} outside register [{register_start}, {n_qubits})")
    return PauliSum(n_qubits, {(x, z): c for x, z, c in _ladder(index, dagger, register_start)})


class _Expander:
    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.data: dict[tuple[int, int], complex] = defaultdict(complex)

    def add(self, coeff: complex, ops: list[tuple[tuple[int, int, complex], ...]]) -> None:
        partial = [(0, 0, complex(coeff))]
        for ladder in ops:
            nxt = []
            for x1, z1, c1 in partial:
                for x2, z2, c2 in ladder:
                    x, z, k = multiply_strings(x1, z1, x2, z2)
                    nxt.append((x, z, c1 * c2 * _PHASES[k]))
            partial = nxt
        data = self.data
        for x, z, c in partial:
            data[(x, z)] += c


def map_to_qubits(sq, tol: float = PRUNE_TOL) -> PauliSum:
    """Jordan-Wigner image of a :class:`SecondQuantizedHamiltonian`.

    Protons occupy qubits ``[0, N_p)`` in orbit order, neutrons ``[N_p, N_p + N_n)``;
    each register carries its own Z strings.
    """
    n_p = sq.g_p.shape[0]
    n_n = sq.g_n.shape[0]
    n_qubits = n_p + n_n
    starts = {"p": 0, "n": n_p}

    def lad(species: str, i: int, dagger: bool):
        start = starts[species]
        return _ladder(start + i, dagger, start)

    ex = _Expander(n_qubits)
    for tag, g in (("p", sq.g_p), ("n", sq.g_n)):
        for i, j in zip(*np.nonzero(np.abs(g) > 0)):
            ex.add(g[i, j], [lad(tag, i, True), lad(tag, j, False)])
    for t in sq.two_body:
        i, j, k, l = t.indices
        if t.species == "pn":
            ops = [lad("p", i, True), lad("p", j, False), lad("n", k, True), lad("n", l, False)]
        else:
            s = t.species[0]
            ops = [lad(s, i, True), lad(s, j, True), lad(s, k, False), lad(s, l, False)]
        ex.add(t.coefficient, ops)
    return PauliSum(n_qubits, ex.data).simplify(tol).real()


def build_iteration_operator(h: PauliSum, gamma: float) -> PauliSum:
    """``T = I - 2 gamma H``."""
    return (PauliSum.identity(h.n_qubits) - h * (2.0 * gamma)).simplify()
