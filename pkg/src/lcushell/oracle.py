"""Exact diagonalization in the fixed proton/neutron-number subspace.

Matrix elements come from applying creation and annihilation operators directly
to occupation bitmasks.  The fermionic sign of an operator on mode k is
``(-1)^(occupied modes below k in the same species register)``, which is the
Jordan-Wigner Z-string convention used by :mod:`lcushell.pauli`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .statevec import bits_to_index

DENSE_EIGEN_LIMIT = 4000  # above this the sparse Lanczos solver is used
MAX_DENSE_DIM = 8000


class SectorTooLargeError(ValueError):
    pass


def enumerate_sector(n_orbits: int, n_particles: int) -> list[str]:
    """All occupation strings with ``n_particles`` ones, in lexicographic order."""
    if not 0 <= n_particles <= n_orbits:
        raise ValueError(f"cannot place {n_particles} particles in {n_orbits} orbits")
    out = []
    for occ in combinations(range(n_orbits), n_particles):
        bits = ["0"] * n_orbits
        for k in occ:
            bits[k] = "1"
        out.append("".join(bits))
    out.sort()
    return out


@dataclass(frozen=True)
class SectorBasis:
    """Cartesian product of proton and neutron occupation strings.

    Combined state ``(ip, in)`` sits at index ``ip * dim_n + in``.
    """

    proton: tuple[str, ...]
    neutron: tuple[str, ...]
    n_proton_orbits: int = field(default=0)
    n_neutron_orbits: int = field(default=0)

    @classmethod
    def build(cls, n_proton_orbits: int, Z: int, n_neutron_orbits: int, N: int) -> "SectorBasis":
        return cls(
            tuple(enumerate_sector(n_proton_orbits, Z)),
            tuple(enumerate_sector(n_neutron_orbits, N)),
            n_proton_orbits,
            n_neutron_orbits,
        )

    @classmethod
    def for_nucleus(cls, nucleus) -> "SectorBasis":
        cat = nucleus.catalog
        return cls.build(cat.n_proton_orbits, nucleus.Z, cat.n_neutron_orbits, nucleus.N)

    @property
    def dim(self) -> int:
        return len(self.proton) * len(self.neutron)

    @cached_property
    def proton_masks(self) -> np.ndarray:
        return np.array([bits_to_index(b) for b in self.proton], dtype=np.int64)

    @cached_property
    def neutron_masks(self) -> np.ndarray:
        return np.array([bits_to_index(b) for b in self.neutron], dtype=np.int64)

    def bitstrings(self) -> list[str]:
        return [p + n for p in self.proton for n in self.neutron]

    def full_indices(self) -> np.ndarray:
        """Position of every sector state in the 2^n qubit basis (qubit 0 = LSB)."""
        p = self.proton_masks[:, None]
        n = self.neutron_masks[None, :] << self.n_proton_orbits
        return (p | n).ravel()

    def embed(self, vector: np.ndarray) -> np.ndarray:
        full = np.zeros(1 << (self.n_proton_orbits + self.n_neutron_orbits), dtype=complex)
        full[self.full_indices()] = vector
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.full_indices()]


# -- operator application on bitmasks -------------------------------------------------


def apply_ladder_string(masks: np.ndarray, ops, register_start: int = 0):
    """Apply ``op_1 op_2 ... op_r`` (rightmost first) to every mask.

    ``ops`` is a sequence of ``(mode, dagger)`` or ``(mode, dagger, register_start)``.
    Returns ``(new_masks, signs, valid)``.
    """
    state = masks.copy()
    sign = np.ones(masks.shape, dtype=np.int8)
    valid = np.ones(masks.shape, dtype=bool)
    for op in reversed(ops):
        mode, dagger = op[0], op[1]
        start = op[2] if len(op) > 2 else register_start
        bit = np.int64(1) << mode
        occupied = (state & bit) != 0
        valid &= ~occupied if dagger else occupied
        below = ((1 << mode) - 1) ^ ((1 << start) - 1)
        sign *= (1 - 2 * (np.bitwise_count(state & below) & 1)).astype(np.int8)
        state = state ^ bit
    return state, sign, valid


def _operator_matrix(masks: np.ndarray, terms, register_start: int = 0) -> sp.csr_matrix:
    dim = len(masks)
    order = np.argsort(masks)
    ordered = masks[order]
    rows, cols, vals = [], [], []
    for coeff, ops in terms:
        new, sign, valid = apply_ladder_string(masks, ops, register_start)
        j = np.nonzero(valid)[0]
        if j.size == 0:
            continue
        pos = np.searchsorted(ordered, new[j])
        if np.any(pos >= dim) or np.any(ordered[np.minimum(pos, dim - 1)] != new[j]):
            raise ValueError("operator leaves the particle-number sector")
        rows.append(order[pos])
        cols.append(j)
        vals.append(coeff * sign[j].astype(float))
    if not rows:
        return sp.csr_matrix((dim, dim))
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return m.tocsr()


def _species_terms(sq, species: str):
    g = sq.g_p if species == "p" else sq.g_n
    terms = [(g[i, j], ((i, True), (j, False))) for i, j in zip(*np.nonzero(g))]
    for t in sq.two_body:
        if t.species == species * 2:
            i, j, k, l = t.indices
            terms.append((t.coefficient, ((i, True), (j, True), (k, False), (l, False))))
    return terms


def build_sector_operator(sq, nucleus=None) -> tuple[sp.csr_matrix, SectorBasis]:
    """Sparse sector Hamiltonian together with its basis."""
    nucleus = nucleus or sq.nucleus
    basis = SectorBasis.for_nucleus(nucleus)
    hp = _operator_matrix(basis.proton_masks, _species_terms(sq, "p"))
    hn = _operator_matrix(basis.neutron_masks, _species_terms(sq, "n"))
    dp, dn = len(basis.proton), len(basis.neutron)
    h = sp.kron(hp, sp.identity(dn), format="csr") + sp.kron(sp.identity(dp), hn, format="csr")
    pn: dict[tuple[int, int], list] = {}
    for t in sq.two_body:
        if t.species == "pn":
            i, j, k, l = t.indices
            pn.setdefault((i, j), []).append((t.coefficient, ((k, True), (l, False))))
    for (i, j), n_terms in pn.items():
        a = _operator_matrix(basis.proton_masks, [(1.0, ((i, True), (j, False)))])
        b = _operator_matrix(basis.neutron_masks, n_terms)
        h = h + sp.kron(a, b, format="csr")
    h = h.tocsr()
    h.sum_duplicates()
    return h, basis


def build_sector_matrix(sq, nucleus=None, max_dim: int = MAX_DENSE_DIM) -> np.ndarray:
    """Dense sector Hamiltonian in MeV (lexicographic product basis)."""
    basis = SectorBasis.for_nucleus(nucleus or sq.nucleus)
    if basis.dim > max_dim:
        raise SectorTooLargeError(
            f"sector dimension {basis.dim} exceeds the dense limit {max_dim}; "
            "use build_sector_operator (sparse) or a smaller orbit catalog"
        )
    h, _ = build_sector_operator(sq, nucleus)
    dense = h.toarray()
    if not np.allclose(dense, dense.T, atol=1e-10):
        raise ValueError("sector matrix is not symmetric; check the two-body terms")
    return dense


def fock_matrix(sq) -> sp.csr_matrix:
    """The Hamiltonian on the full 2^n occupation space (species registers side by side)."""
    n_p, n_n = sq.g_p.shape[0], sq.g_n.shape[0]
    n = n_p + n_n
    if n > 22:
        raise SectorTooLargeError(f"{n} modes is too many for the full Fock space")
    masks = np.arange(1 << n, dtype=np.int64)
    start = {"p": 0, "n": n_p}

    def lift(species, ops):
        return tuple((start[species] + m, d, start[species]) for m, d in ops)

    terms = []
    for s in ("p", "n"):
        terms += [(c, lift(s, ops)) for c, ops in _species_terms(sq, s)]
    for t in sq.two_body:
        if t.species == "pn":
            i, j, k, l = t.indices
            terms.append((t.coefficient, lift("p", ((i, True), (j, False))) + lift("n", ((k, True), (l, False)))))
    return _operator_matrix(masks, terms)


def ground_state(matrix, tol: float = 1e-8) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and a unit eigenvector of a real symmetric matrix."""
    is_sparse = sp.issparse(matrix)
    a = matrix.tocsr() if is_sparse else np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("ground_state needs a square matrix")
    asym = abs(a - a.T).max() if is_sparse else np.max(np.abs(a - a.T), initial=0.0)
    scale = abs(a).max() if is_sparse else np.max(np.abs(a), initial=0.0)
    if asym > 1e-10 * max(1.0, scale):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    dim = a.shape[0]
    if dim <= DENSE_EIGEN_LIMIT or dim < 3:
        dense = a.toarray() if is_sparse else a
        w, v = scipy.linalg.eigh(dense, subset_by_index=[0, 0])
        energy, vec = float(w[0]), v[:, 0]
    else:
        w, v = eigsh(a, k=1, which="SA", tol=1e-12, ncv=min(dim, 40))
        energy, vec = float(w[0]), v[:, 0]
    vec = vec / np.linalg.norm(vec)
    # fix the overall sign so results are reproducible
    pivot = np.argmax(np.abs(vec))
    if vec[pivot] < 0:
        vec = -vec
    residual = np.linalg.norm(a @ vec - energy * vec)
    norm_est = float(abs(a).sum(axis=1).max()) if is_sparse else float(np.abs(a).sum(axis=1).max())
    if residual > tol * max(1.0, norm_est):
        raise ArithmeticError(f"eigenvector residual {residual:.3e} above tolerance")
    return energy, vec


def sector_ground_state(sq, nucleus=None) -> tuple[float, np.ndarray, SectorBasis]:
    h, basis = build_sector_operator(sq, nucleus)
    e, v = ground_state(h)
    return e, v, basis


def sector_dimension(n_proton_orbits: int, Z: int, n_neutron_orbits: int, N: int) -> int:
    return math.comb(n_proton_orbits, Z) * math.comb(n_neutron_orbits, N)
