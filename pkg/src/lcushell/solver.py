"""Gradient-descent ground-state search with the iteration operator T = I - 2 gamma H.

Two representations are supported:

* full space: a :class:`PauliSum` acting on all ``2^n`` qubit configurations, iterated
  either directly or through the LCU circuit emulation;
* sector: the Hamiltonian restricted to fixed proton/neutron numbers
  (:class:`SectorHamiltonian`), which is what makes the heavier presets tractable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import NEUTRON, PROTON
from .oracle import SectorBasis, build_sector_operator, ground_state
from .pauli import PRUNE_TOL, PauliSum, map_to_qubits
from .statevec import (
    StateVector,
    ZeroNormError,
    ancilla_count,
    iterate_circuit,
    project_to_sector,
)

NOISE_KINDS = ("none", "gaussian", "uniform")
NOISE_TARGETS = ("hamiltonian", "state", "both")
_TARGET_CODE = {"hamiltonian": 0, "state": 1}
PAPER_SIGMA = 0.1 / 3.0
PAPER_UNIFORM_AMPLITUDE = 0.02


class GammaWarning(UserWarning):
    pass


class SolverDivergence(ArithmeticError):
    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


# -- gamma selection -------------------------------------------------------------------


@dataclass(frozen=True)
class GammaPolicy:
    """``mode="auto"`` derives gamma from bounds (q, Q); ``mode="fixed"`` uses ``gamma``.

    For auto mode with q, Q left as None both default to the coefficient 1-norm of H.
    """

    mode: str = "auto"
    gamma: float | None = None
    q: float | None = None
    Q: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("auto", "fixed"):
            raise ValueError(f"gamma mode must be 'auto' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed":
            if self.gamma is None or not math.isfinite(self.gamma) or self.gamma == 0:
                raise ValueError("fixed gamma must be a finite non-zero number")

    @classmethod
    def fixed(cls, gamma: float) -> "GammaPolicy":
        return cls("fixed", gamma=gamma)


def coefficient_bound(h) -> float:
    """``sum_k |alpha_k|``, an upper bound on the spectral radius of H."""
    if isinstance(h, PauliSum):
        return h.one_norm()
    if isinstance(h, SectorHamiltonian):
        if h.pauli is not None:
            return h.pauli.one_norm()
        return float(abs(h.matrix).sum(axis=1).max())
    raise TypeError(f"cannot bound {type(h).__name__}")


def resolve_bounds(h, policy: GammaPolicy) -> tuple[float, float]:
    bound = None
    q = policy.q
    Q = policy.Q
    if q is None or Q is None:
        bound = coefficient_bound(h)
    return (bound if q is None else q), (bound if Q is None else Q)


def admissible_interval(q: float, Q: float) -> list[tuple[float, float]]:
    """The gamma values for which 1/(2 gamma) > (q + Q)/2 keeps the ground state dominant."""
    s = q + Q
    if s > 0:
        return [(0.0, 1.0 / s)]
    if s == 0:
        return [(0.0, math.inf)]
    return [(-math.inf, 1.0 / s), (0.0, math.inf)]


def gamma_admissible(gamma: float, q: float, Q: float) -> bool:
    return any(lo < gamma < hi for lo, hi in admissible_interval(q, Q))


def select_gamma(h, policy: GammaPolicy = GammaPolicy()) -> float:
    """Step size per the admissible set; fixed values are returned unchanged.

    An out-of-region fixed gamma triggers a :class:`GammaWarning` (it is not fatal: the
    bounds are conservative and hand-tuned values often work better).
    """
    q, Q = resolve_bounds(h, policy)
    if policy.mode == "fixed":
        if not gamma_admissible(policy.gamma, q, Q):
            warnings.warn(
                f"gamma={policy.gamma} lies outside the admissible region for q={q:.6g}, Q={Q:.6g}",
                GammaWarning,
                stacklevel=2,
            )
        return float(policy.gamma)
    s = q + Q
    if s == 0:
        return 0.5
    return 0.5 / abs(s)


def tuned_gamma(h) -> float:
    """``gamma = 1/(lambda_1 + lambda_max)``: balances the first excited and the top level.

    Used when ``lambda_1 + lambda_max > 0``; otherwise a large ``100/|lambda_0|``.

    lambda_1 is the lowest level distinct from the ground energy (degenerate ground
    multiplets converge together and do not slow the energy down).
    """
    if isinstance(h, PauliSum):
        evals = np.linalg.eigvalsh(h.to_dense().real)
    elif h.matrix.shape[0] <= 4000:
        evals = np.linalg.eigvalsh(h.matrix.toarray())
    else:
        # the few lowest levels and the top one are enough
        low = spla.eigsh(h.matrix, k=8, which="SA", return_eigenvectors=False)
        top = spla.eigsh(h.matrix, k=1, which="LA", return_eigenvectors=False)
        evals = np.sort(np.concatenate([low, top]))
    lam0 = evals[0]
    above = evals[evals > lam0 + 1e-8 * max(1.0, abs(lam0))]
    if above.size == 0:
        return 0.5 / max(abs(lam0), 1e-12)
    total = above[0] + evals[-1]
    if total > 0:
        return float(1.0 / total)
    # lambda_1 + lambda_max <= 0: every gamma > 0 keeps the ground level dominant and the
    # contraction ratio only approaches |lambda_1 / lambda_0| as gamma grows
    return float(100.0 / abs(lam0))


# -- noise -----------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    scale: float | None = None  # sigma (gaussian) or half-width (uniform)
    seed: int = 0
    targets: str = "both"

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.targets not in NOISE_TARGETS:
            raise ValueError(f"noise targets must be one of {NOISE_TARGETS}, got {self.targets!r}")
        if self.kind != "none":
            if self.scale is None:
                default = PAPER_SIGMA if self.kind == "gaussian" else PAPER_UNIFORM_AMPLITUDE
                object.__setattr__(self, "scale", default)
            if not self.scale > 0:
                raise ValueError("noise scale must be > 0 when noise is active")

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def hits(self, target: str) -> bool:
        return self.active and self.targets in (target, "both")

    def rng(self, step: int, target: str) -> np.random.Generator:
        """Independent stream per (seed, iteration, target)."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, step, _TARGET_CODE[target]]))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, size)
        return rng.uniform(-self.scale, self.scale, size)


NO_NOISE = NoiseSpec()


def hamiltonian_shifts(noise: NoiseSpec, n_qubits: int, step: int = 0) -> np.ndarray:
    if not noise.hits("hamiltonian"):
        return np.zeros(n_qubits)
    return noise.draw(noise.rng(step, "hamiltonian"), n_qubits)


def perturb_hamiltonian(h: PauliSum, noise: NoiseSpec, step: int = 0) -> PauliSum:
    """``H + sum_k delta_alpha_k Z_k`` with one draw per work qubit."""
    if not noise.hits("hamiltonian"):
        return h
    shifts = hamiltonian_shifts(noise, h.n_qubits, step)
    data = h.data
    for k, d in enumerate(shifts):
        key = (0, 1 << k)
        data[key] = data.get(key, 0.0) + d
    return PauliSum(h.n_qubits, data)


def _perturb_amplitudes(amps: np.ndarray, noise: NoiseSpec, step: int) -> np.ndarray:
    v = amps + noise.draw(noise.rng(step, "state"), amps.shape[0])
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ZeroNormError("state perturbation cancelled the state")
    return v / nrm


def perturb_state(s: StateVector, noise: NoiseSpec, step: int = 0) -> StateVector:
    """``(|s> + |delta psi>) / norm`` with i.i.d. real draws per amplitude."""
    if not noise.hits("state"):
        return s
    return StateVector(_perturb_amplitudes(s.amplitudes, noise, step), s.n_qubits)


# -- Hartree-Fock and initial states -----------------------------------------------------


def _one_body(g) -> dict[str, np.ndarray]:
    if isinstance(g, dict):
        return g
    return {PROTON: g.g_p, NEUTRON: g.g_n}


def hartree_fock_bits(g, nucleus) -> tuple[str, str]:
    """Fill the lowest diagonal one-body energies; ties keep catalog order."""
    g = _one_body(g)
    out = []
    for species in (PROTON, NEUTRON):
        diag = np.diag(g[species])
        count = nucleus.particles(species)
        if count > len(diag):
            raise ValueError(f"{count} {species}s do not fit in {len(diag)} orbits")
        order = np.argsort(diag, kind="stable")
        bits = ["0"] * len(diag)
        for k in order[:count]:
            bits[k] = "1"
        out.append("".join(bits))
    return out[0], out[1]


def _pair_units(diag: np.ndarray, orbits) -> list[tuple[int, int]]:
    """Time-reversed pairs ``(k(-m), k(+m))`` ordered by energy, |m|, catalog position."""
    index = {o: k for k, o in enumerate(orbits)}
    units = [(index[o.partner()], k) for k, o in enumerate(orbits) if o.two_mj > 0]
    return sorted(units, key=lambda u: (diag[u[0]], orbits[u[1]].two_mj, u[0]))


def _paired_configuration(diag: np.ndarray, orbits, count: int):
    units = _pair_units(diag, orbits)
    filled = units[: count // 2]
    odd = units[count // 2][0] if count % 2 else None  # the -m member of the next pair
    occ = {k for u in filled for k in u} | ({odd} if odd is not None else set())
    return occ, filled, odd, units


def _excite(diag: np.ndarray, orbits, count: int) -> set[int] | None:
    occ, filled, odd, units = _paired_configuration(diag, orbits, count)
    if filled:
        top = filled[-1]
        free = [u for u in units if u not in filled and odd not in u]
        higher = [u for u in free if diag[u[0]] > diag[top[0]] + 1e-9]
        pool = higher or free
        if not pool:
            return None
        return (occ - set(top)) | set(pool[0])
    if odd is not None:
        m = orbits[odd].two_mj
        higher = [k for k, o in enumerate(orbits) if k not in occ and diag[k] > diag[odd] + 1e-9]
        if not higher:
            return None
        same_m = [k for k in higher if orbits[k].two_mj == m]
        target = min(same_m or higher, key=lambda k: (diag[k], k))
        return (occ - {odd}) | {target}
    return None


def default_admixture(g, nucleus, hf: tuple[str, str] | None = None) -> tuple[str, str]:
    """The configuration mixed into the HF start by default.

    The catalog-order HF filling need not share the symmetries of the ground state
    (H conserves M, and pairing conserves the number of broken pairs), so a start of HF
    alone can miss the ground state entirely.  The reference is the pair-filled
    configuration: each species fills time-reversed pairs in order of energy (smallest
    |m| first), an odd nucleon taking the -m member of the next pair.  If that differs
    from HF it is the admixture.  Otherwise the highest proton pair (neutron pair when
    Z < 2) is lifted to the lowest empty pair level above it, or a degenerate one if
    nothing lies higher; without any pair the odd proton (else neutron) moves to the
    lowest higher orbit, preferring the same m.
    """
    g = _one_body(g)
    cat = nucleus.catalog
    if hf is None:
        hf = hartree_fock_bits(g, nucleus)
    units = {}
    for species in (PROTON, NEUTRON):
        diag = np.diag(g[species])
        units[species] = (diag, cat.for_species(species), nucleus.particles(species))

    def render(occ_by_species):
        return tuple(
            "".join("1" if k in occ_by_species[sp] else "0" for k in range(len(cat.for_species(sp))))
            for sp in (PROTON, NEUTRON)
        )

    occ = {sp: _paired_configuration(*units[sp])[0] for sp in units}
    paired = render(occ)
    if paired != tuple(hf):
        return paired
    order = [sp for sp in (PROTON, NEUTRON) if nucleus.particles(sp) >= 2]
    order += [sp for sp in (PROTON, NEUTRON) if nucleus.particles(sp) == 1]
    for species in order:
        excited = _excite(*units[species])
        if excited is not None:
            occ[species] = excited
            break
    return render(occ)


def _split(bits, n_proton_orbits: int) -> tuple[str, str]:
    if isinstance(bits, str):
        return bits[:n_proton_orbits], bits[n_proton_orbits:]
    p, n = bits
    return p, n


def initial_weights(hf, admixtures: Sequence = (), nucleus=None, strict: bool = True,
                    n_proton_orbits: int | None = None) -> dict[str, float]:
    """Normalized ``C(|HF> + sum_i w_i |b_i>)`` as {combined bitstring: amplitude}.

    Bitstrings are ``(proton, neutron)`` pairs or one combined string (protons first).
    With ``strict`` every configuration must carry the nucleus' Z and N.
    """
    if n_proton_orbits is None:
        if nucleus is None:
            if isinstance(hf, str):
                raise ValueError("a combined bitstring needs the nucleus or n_proton_orbits")
            n_proton_orbits = len(hf[0])
        else:
            n_proton_orbits = nucleus.catalog.n_proton_orbits
    weights: dict[str, float] = {}
    for bits, w in [(hf, 1.0)] + [tuple(a) for a in admixtures]:
        p, n = _split(bits, n_proton_orbits)
        if len(p) != n_proton_orbits:
            raise ValueError(f"proton register {p!r} should have {n_proton_orbits} bits")
        if nucleus is not None:
            if len(n) != nucleus.catalog.n_neutron_orbits:
                raise ValueError(f"neutron register {n!r} should have {nucleus.catalog.n_neutron_orbits} bits")
            if strict and (p.count("1") != nucleus.Z or n.count("1") != nucleus.N):
                raise ValueError(
                    f"configuration |{p}>_p|{n}>_n is outside the sector Z={nucleus.Z}, N={nucleus.N}"
                )
        weights[p + n] = weights.get(p + n, 0.0) + float(w)
    total = math.sqrt(sum(w * w for w in weights.values()))
    if total == 0:
        raise ValueError("initial weights cancel to the zero state")
    return {b: w / total for b, w in weights.items()}


def initial_state(hf, admixtures: Sequence = (), nucleus=None, strict: bool = True) -> StateVector:
    weights = initial_weights(hf, admixtures, nucleus, strict)
    return StateVector.superposition(weights)


def sector_vector(weights: dict[str, float], basis: SectorBasis) -> np.ndarray:
    lookup = {b: i for i, b in enumerate(basis.bitstrings())}
    v = np.zeros(basis.dim, dtype=complex)
    for bits, w in weights.items():
        if bits not in lookup:
            raise ValueError(f"configuration {bits} is outside the sector basis")
        v[lookup[bits]] += w
    return v / np.linalg.norm(v)


# -- Hamiltonian representations ---------------------------------------------------------


@dataclass
class SectorHamiltonian:
    """Sparse Hamiltonian on the fixed-(Z, N) subspace, optionally with its Pauli form."""

    matrix: sp.csr_matrix
    basis: SectorBasis
    pauli: PauliSum | None = None

    @classmethod
    def from_second_quantized(cls, sq, with_pauli: bool = True) -> "SectorHamiltonian":
        matrix, basis = build_sector_operator(sq)
        return cls(matrix, basis, map_to_qubits(sq) if with_pauli else None)

    @property
    def n_qubits(self) -> int:
        return self.basis.n_proton_orbits + self.basis.n_neutron_orbits

    @property
    def dim(self) -> int:
        return self.basis.dim

    def occupations(self) -> np.ndarray:
        """``(dim, n_qubits)`` 0/1 occupation table of the sector states."""
        full = self.basis.full_indices()
        return ((full[:, None] >> np.arange(self.n_qubits)[None, :]) & 1).astype(float)

    def ground_state(self) -> tuple[float, np.ndarray]:
        return ground_state(self.matrix)


class _LcuWeights:
    """Tracks M and C^2 = sum beta_k^2 of T = I - 2 gamma (H + sum d_k Z_k) cheaply."""

    def __init__(self, h: PauliSum | None):
        self.available = h is not None
        if h is None:
            return
        data = h.data
        n = h.n_qubits
        self.identity = data.pop((0, 0), 0.0).real
        self.z = np.array([data.pop((0, 1 << k), 0.0).real for k in range(n)])
        rest = np.array([abs(c) for c in data.values()])
        self.rest_sq = float(np.sum(rest**2))
        self.rest = rest

    def compute(self, gamma: float, shifts: np.ndarray | None) -> tuple[int, float]:
        z = self.z if shifts is None else self.z + shifts
        betas_rest = 2.0 * abs(gamma) * self.rest
        keep_rest = betas_rest > PRUNE_TOL
        b_id = 1.0 - 2.0 * gamma * self.identity
        b_z = 2.0 * abs(gamma) * np.abs(z)
        keep_z = b_z > PRUNE_TOL
        count = int(keep_rest.sum() + keep_z.sum() + (abs(b_id) > PRUNE_TOL))
        c_sq = float(np.sum(betas_rest[keep_rest] ** 2) + np.sum(b_z[keep_z] ** 2) + (b_id**2 if abs(b_id) > PRUNE_TOL else 0.0))
        return count, c_sq


# -- trace -------------------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    index: int
    energy: float
    success_probability: float
    norm: float
    gamma: float
    success_probability_term_count: float = math.nan


@dataclass
class IterationTrace:
    steps: list[StepRecord] = field(default_factory=list)
    converged: bool = False
    converged_step: int | None = None
    final_state: StateVector | np.ndarray | None = None
    representation: str = "full"
    warnings: list[str] = field(default_factory=list)
    complete: bool = False
    error: str | None = None

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.steps])

    @property
    def final_energy(self) -> float:
        return self.steps[-1].energy

    @property
    def n_iterations(self) -> int:
        return len(self.steps) - 1

    def first_within(self, target: float, tol: float) -> int | None:
        """First step from which the energy stays within ``tol`` of ``target``."""
        e = self.energies
        bad = np.nonzero(np.abs(e - target) > tol)[0]
        if bad.size == 0:
            return 0
        first = int(bad[-1]) + 1
        return first if first < len(e) else None


# -- the iteration loop ------------------------------------------------------------------


class _FullBackend:
    def __init__(self, h: PauliSum, mode: str, sector):
        self.h = h
        self.mode = mode
        self.n = h.n_qubits
        self.matrix = h.to_sparse()
        self.weights = _LcuWeights(h)
        self.sector = sector  # (n_proton_qubits, Z, N) or None
        self._idx = np.arange(1 << self.n, dtype=np.int64)

    def _z_diagonal(self, shifts: np.ndarray) -> np.ndarray:
        # sum_k d_k Z_k on every basis state
        out = np.zeros(self._idx.shape)
        for k, d in enumerate(shifts):
            out += d * (1.0 - 2.0 * ((self._idx >> k) & 1))
        return out

    def energy(self, v: np.ndarray) -> float:
        return float(np.vdot(v, self.matrix @ v).real)

    def step(self, v: np.ndarray, gamma: float, shifts: np.ndarray | None):
        if self.mode == "circuit":
            h = self.h
            if shifts is not None:
                data = h.data
                for k, d in enumerate(shifts):
                    data[(0, 1 << k)] = data.get((0, 1 << k), 0.0) + d
                h = PauliSum(self.n, data)
            out = iterate_circuit(StateVector(v, self.n), h, gamma)
            return out.state.amplitudes, out.pre_normalization_norm, out.success_probability, out.success_probability_term_count
        hv = self.matrix @ v
        if shifts is not None:
            hv = hv + self._z_diagonal(shifts) * v
        w = v - 2.0 * gamma * hv
        return _finish(w, gamma, self.weights, shifts)

    def project(self, v: np.ndarray) -> np.ndarray:
        n_p, Z, N = self.sector
        return project_to_sector(StateVector(v, self.n), n_p, Z, N).amplitudes

    def wrap(self, v: np.ndarray):
        return StateVector(v, self.n)


class _SectorBackend:
    def __init__(self, h: SectorHamiltonian):
        self.h = h
        self.matrix = h.matrix
        self.weights = _LcuWeights(h.pauli)
        self._zsign = 1.0 - 2.0 * h.occupations()

    def energy(self, v: np.ndarray) -> float:
        return float(np.vdot(v, self.matrix @ v).real)

    def step(self, v: np.ndarray, gamma: float, shifts: np.ndarray | None):
        hv = self.matrix @ v
        if shifts is not None:
            hv = hv + (self._zsign @ shifts) * v
        return _finish(v - 2.0 * gamma * hv, gamma, self.weights, shifts)

    def project(self, v: np.ndarray) -> np.ndarray:
        return v  # every sector vector already has the right particle numbers

    def wrap(self, v: np.ndarray):
        return v


def _finish(w: np.ndarray, gamma: float, weights: _LcuWeights, shifts):
    nrm = float(np.linalg.norm(w))
    if nrm == 0.0:
        raise ZeroNormError("(I - 2 gamma H)|s> vanished")
    if weights.available:
        count, c_sq = weights.compute(gamma, shifts)
        p = nrm**2 / (c_sq * (1 << ancilla_count(count)))
        p_m = nrm**2 / (c_sq * count)
    else:
        p = p_m = math.nan
    return w / nrm, nrm, p, p_m


def run_gradient_descent(
    h,
    initial,
    policy: GammaPolicy = GammaPolicy(),
    noise: NoiseSpec = NO_NOISE,
    mode: str = "direct",
    max_iter: int = 1000,
    tol_keV: float = 0.1,
    nucleus=None,
    project: bool | None = None,
    patience: int = 3,
) -> IterationTrace:
    """Iterate ``|psi> <- T|psi>/norm`` and record the energy after every step.

    Per step: optional noise (a fresh draw of Z shifts and/or a state kick), the
    iteration, particle-number projection (default: only when noise is active) and
    the energy of the noiseless H.  Stops after ``patience`` consecutive energy
    changes below ``tol_keV`` keV, or at ``max_iter``.

    ``h`` is a :class:`PauliSum` with a :class:`StateVector` start, or a
    :class:`SectorHamiltonian` with a sector amplitude vector.  Full-space projection
    needs ``nucleus``.
    """
    if mode not in ("direct", "circuit"):
        raise ValueError(f"mode must be 'direct' or 'circuit', got {mode!r}")
    if max_iter < 0:
        raise ValueError("max_iter must be >= 0")
    if project is None:
        project = noise.active
    trace = IterationTrace()

    if isinstance(h, SectorHamiltonian):
        if mode == "circuit":
            raise ValueError("circuit mode needs the full-space PauliSum; use representation 'full'")
        v = np.asarray(initial, dtype=complex)
        if v.shape != (h.dim,):
            raise ValueError(f"sector start vector should have {h.dim} entries")
        backend = _SectorBackend(h)
        n_qubits = h.n_qubits
        trace.representation = "sector"
    elif isinstance(h, PauliSum):
        if not isinstance(initial, StateVector) or initial.n_qubits != h.n_qubits:
            raise ValueError("full-space runs need a StateVector start on the Hamiltonian's qubits")
        sector = None
        if nucleus is not None:
            sector = (nucleus.catalog.n_proton_orbits, nucleus.Z, nucleus.N)
        elif project:
            raise ValueError("particle-number projection needs the nucleus")
        backend = _FullBackend(h, mode, sector)
        v = initial.amplitudes.copy()
        n_qubits = h.n_qubits
    else:
        raise TypeError(f"unsupported Hamiltonian type {type(h).__name__}")

    nrm0 = np.linalg.norm(v)
    if abs(nrm0 - 1.0) > 1e-9:
        raise ValueError(f"initial state must be normalized (norm {nrm0:.12g})")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", GammaWarning)
        gamma = select_gamma(h, policy)
    trace.warnings.extend(str(w.message) for w in caught)

    tol = tol_keV / 1000.0
    energy = backend.energy(v)
    trace.steps.append(StepRecord(0, energy, 1.0, 1.0, gamma, 1.0))
    streak = 0
    try:
        for t in range(1, max_iter + 1):
            shifts = hamiltonian_shifts(noise, n_qubits, t) if noise.hits("hamiltonian") else None
            if noise.hits("state"):
                v = _perturb_amplitudes(v, noise, t)
            v, nrm, p, p_m = backend.step(v, gamma, shifts)
            if project:
                v = backend.project(v)
            new_energy = backend.energy(v)
            if not math.isfinite(new_energy):
                raise SolverDivergence(f"energy became non-finite at step {t}", trace)
            trace.steps.append(StepRecord(t, new_energy, p, nrm, gamma, p_m))
            streak = streak + 1 if abs(new_energy - energy) < tol else 0
            energy = new_energy
            if streak >= patience:
                trace.converged = True
                trace.converged_step = t - patience + 1
                break
    except SolverDivergence:
        trace.final_state = backend.wrap(v)
        trace.error = "diverged"
        raise
    except ZeroNormError as exc:
        trace.final_state = backend.wrap(v)
        trace.error = str(exc)
        raise SolverDivergence(str(exc), trace) from exc
    trace.final_state = backend.wrap(v)
    trace.complete = True
    return trace

