"""Residual two-body terms (pairing, proton-proton Coulomb) and Hamiltonian assembly."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import lpmv

from .constants import COULOMB_E2, NEUTRON, PROTON
from .meanfield import MeanFieldParams, NucleusSpec, one_body_matrix
from .orbits import (
    Orbit,
    OrbitCatalog,
    QuadratureError,
    QuadraturePolicy,
    composite_gauss_legendre,
    radial_wavefunction,
    spin_components,
)

PAIR_SPECIES = {"pp": PROTON, "nn": NEUTRON}


@dataclass(frozen=True)
class TwoBodyTerm:
    """One two-body operator with its coefficient in MeV.

    For ``pp``/``nn`` the indices ``(i, j, k, l)`` denote ``a+_i a+_j a_k a_l`` in one
    species register.  For ``pn`` they denote ``a+_i a_j`` (protons) times
    ``a+_k a_l`` (neutrons).
    """

    species: str
    indices: tuple[int, int, int, int]
    coefficient: float

    def __post_init__(self) -> None:
        if self.species not in ("pp", "nn", "pn"):
            raise ValueError(f"unknown species pair {self.species!r}")
        i, j, k, l = self.indices
        if self.species != "pn" and (i == j or k == l):
            raise ValueError(f"Pauli-forbidden two-body indices {self.indices}")
        if not math.isfinite(self.coefficient):
            raise ValueError("two-body coefficient must be finite")

    def conjugate_indices(self) -> tuple[int, int, int, int]:
        i, j, k, l = self.indices
        if self.species == "pn":
            return (j, i, l, k)
        return (l, k, j, i)


@dataclass(frozen=True)
class SecondQuantizedHamiltonian:
    nucleus: NucleusSpec
    g_p: np.ndarray
    g_n: np.ndarray
    two_body: tuple[TwoBodyTerm, ...] = ()

    def one_body(self, species: str) -> np.ndarray:
        return self.g_p if species == PROTON else self.g_n

    def aggregated(self) -> dict[tuple[str, tuple[int, int, int, int]], float]:
        out: dict = defaultdict(float)
        for t in self.two_body:
            out[(t.species, t.indices)] += t.coefficient
        return dict(out)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        if not (np.allclose(self.g_p, self.g_p.T, atol=tol) and np.allclose(self.g_n, self.g_n.T, atol=tol)):
            return False
        agg = self.aggregated()
        for (species, idx), c in agg.items():
            conj = TwoBodyTerm(species, idx, c).conjugate_indices()
            if abs(agg.get((species, conj), 0.0) - c) > tol:
                return False
        return True


# -- pairing ---------------------------------------------------------------------


def pairing_terms(catalog: OrbitCatalog, G: float, species: tuple[str, ...] = (PROTON, NEUTRON)) -> list[TwoBodyTerm]:
    """Monopole pairing within each (n, l, j) shell of both species.

    Emits ``(-G/4) (-1)^(2j+mj+mj') a+_{mj} a+_{-mj} a_{-mj'} a_{mj'}``, i.e. ``-G P+ P``
    with ``P+ = sum_{mj>0} (-1)^(j-mj) a+_{mj} a+_{-mj}``.  No cross-species terms.
    """
    if G == 0:
        return []
    if not catalog.is_mj_closed():
        raise ValueError("pairing needs an mj-closed catalog (every orbit's -mj partner)")
    terms = []
    for sp, tag in ((PROTON, "pp"), (NEUTRON, "nn")):
        if sp not in species:
            continue
        orbits = catalog.for_species(sp)
        index = {o: i for i, o in enumerate(orbits)}
        shells: dict[tuple[int, int, int], list[Orbit]] = defaultdict(list)
        for o in orbits:
            shells[o.shell].append(o)
        for members in shells.values():
            for a in members:
                for b in members:
                    sign = -1.0 if (a.two_j + (a.two_mj + b.two_mj) // 2) % 2 else 1.0
                    idx = (index[a], index[a.partner()], index[b.partner()], index[b])
                    terms.append(TwoBodyTerm(tag, idx, -0.25 * G * sign))
    return terms


# -- Coulomb ---------------------------------------------------------------------


def _theta(l: int, m: int, x: np.ndarray) -> np.ndarray:
    # polar part of Y_lm, normalised to int Theta^2 dcos(theta) = 1
    am = abs(m)
    norm = math.sqrt((2 * l + 1) / 2.0 * math.factorial(l - am) / math.factorial(l + am))
    val = norm * lpmv(am, l, x)
    return val * (-1) ** am if m < 0 else val


@lru_cache(maxsize=None)
def angular_integral(l1: int, m1: int, k: int, q: int, l2: int, m2: int) -> float:
    """``int Y*_{l1 m1} Y_{k q} Y_{l2 m2} dOmega`` by polar-angle quadrature."""
    if m1 != q + m2 or abs(m1) > l1 or abs(q) > k or abs(m2) > l2 or (l1 + k + l2) % 2:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(2 * (l1 + k + l2) // 2 + 8)
    val = float(np.dot(w, _theta(l1, m1, x) * _theta(k, q, x) * _theta(l2, m2, x)))
    return val / math.sqrt(2.0 * math.pi)


def slater_integral(
    k: int,
    orbitals: tuple[tuple[int, int], tuple[int, int], tuple[int, int], tuple[int, int]],
    alpha: float,
    policy: QuadraturePolicy | None = None,
) -> float:
    """Radial Slater integral R^k in fm^-1.

    ``orbitals`` holds ``(nr, l)`` for a, b, c, d with a, c on particle 1 and b, d on
    particle 2.  The kernel ``r_<^k / r_>^(k+1)`` is handled by splitting the inner
    integral at the outer node, so each piece is smooth.
    """
    if k < 0:
        raise ValueError("multipole order must be >= 0")
    policy = policy or QuadraturePolicy()
    (na, la), (nb, lb), (nc, lc), (nd, ld) = orbitals

    def f1(r):
        return radial_wavefunction(na, la, alpha, r) * radial_wavefunction(nc, lc, alpha, r) * r * r

    def f2(r):
        return radial_wavefunction(nb, lb, alpha, r) * radial_wavefunction(nd, ld, alpha, r) * r * r

    def estimate(panels: int) -> float:
        r1, w1 = composite_gauss_legendre(0.0, policy.r_max, panels, policy.order)
        t, wt = composite_gauss_legendre(0.0, 1.0, panels, policy.order)
        lo = r1[:, None] * t[None, :]
        hi = r1[:, None] + (policy.r_max - r1[:, None]) * t[None, :]
        inner_lo = (f2(lo) * lo**k) @ wt * r1
        inner_hi = (f2(hi) / hi ** (k + 1)) @ wt * (policy.r_max - r1)
        outer = f1(r1) * (inner_lo / r1 ** (k + 1) + inner_hi * r1**k)
        return float(np.dot(w1, outer))

    panels = policy.initial_panels
    prev = estimate(panels)
    for _ in range(policy.max_refinements):
        panels *= 2
        cur = estimate(panels)
        if abs(cur - prev) <= max(policy.rtol * abs(cur), policy.atol):
            return cur
        prev = cur
    raise QuadratureError("Slater integral did not converge", (prev, cur))


class _SlaterCache:
    def __init__(self, alpha: float, policy: QuadraturePolicy | None):
        self.alpha = alpha
        self.policy = policy or QuadraturePolicy(rtol=1e-11)
        self._values: dict = {}

    def __call__(self, k, a, b, c, d) -> float:
        # symmetric under a<->c, b<->d and particle exchange (a,c)<->(b,d)
        p1 = tuple(sorted((a, c)))
        p2 = tuple(sorted((b, d)))
        key = (k,) + (min(p1, p2), max(p1, p2))
        if key not in self._values:
            (x1, x2), (y1, y2) = key[1], key[2]
            self._values[key] = slater_integral(k, (x1, y1, x2, y2), self.alpha, self.policy)
        return self._values[key]


@lru_cache(maxsize=8)
def _slater_cache(alpha: float, policy: QuadraturePolicy | None) -> _SlaterCache:
    return _SlaterCache(alpha, policy)


def coulomb_element(a: Orbit, b: Orbit, c: Orbit, d: Orbit, alpha: float, policy: QuadraturePolicy | None = None) -> float:
    """``<ab| (1/2) e^2/|r1 - r2| |cd>`` in MeV (a, c on particle 1)."""
    for o in (a, b, c, d):
        if o.species != PROTON:
            raise ValueError(f"Coulomb element requires proton orbits, got {o}")
    if a.two_mj + b.two_mj != c.two_mj + d.two_mj or (a.l + b.l + c.l + d.l) % 2:
        return 0.0
    slater = _slater_cache(alpha, policy)
    ra, rb, rc, rd = ((o.nr, o.l) for o in (a, b, c, d))
    total = 0.0
    for ma, sa, ca in spin_components(a):
        for mc, sc, cc in spin_components(c):
            if sa != sc:
                continue
            for mb, sb, cb in spin_components(b):
                for md, sd, cd in spin_components(d):
                    q = mb - md
                    if sb != sd or mc - ma != q:
                        continue
                    k_lo = max(abs(a.l - c.l), abs(b.l - d.l), abs(q))
                    spatial = 0.0
                    for k in range(k_lo, min(a.l + c.l, b.l + d.l) + 1):
                        ang = (-1) ** q * angular_integral(a.l, ma, k, -q, c.l, mc) * angular_integral(b.l, mb, k, q, d.l, md)
                        if ang != 0.0:
                            spatial += 4.0 * math.pi / (2 * k + 1) * slater(k, ra, rb, rc, rd) * ang
                    total += ca * cb * cc * cd * spatial
    return 0.5 * COULOMB_E2 * total


def coulomb_terms(catalog: OrbitCatalog, policy: QuadraturePolicy | None = None, tol: float = 1e-14) -> list[TwoBodyTerm]:
    """Proton Coulomb terms ``h(p,q,r,s) a+_p a+_q a_s a_r`` over all allowed quartets."""
    orbits = catalog.protons
    n = len(orbits)
    by_mj: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for r in range(n):
        for s in range(n):
            if r != s:
                by_mj[orbits[r].two_mj + orbits[s].two_mj].append((r, s))
    values: dict[tuple[int, int, int, int], float] = {}
    terms = []
    for pairs in by_mj.values():
        for p, q in pairs:
            for r, s in pairs:
                key = (q, p, s, r)  # particle exchange gives the same element
                if key in values:
                    h = values[key]
                else:
                    h = coulomb_element(orbits[p], orbits[q], orbits[r], orbits[s], catalog.alpha, policy)
                    values[(p, q, r, s)] = h
                if abs(h) > tol:
                    terms.append(TwoBodyTerm("pp", (p, q, s, r), h))
    return terms


def assemble_hamiltonian(
    nucleus: NucleusSpec,
    params: MeanFieldParams,
    G: float = 0.25,
    include_coulomb: bool = True,
    policy: QuadraturePolicy | None = None,
    two_body: tuple[TwoBodyTerm, ...] | None = None,
) -> SecondQuantizedHamiltonian:
    """Full second-quantized Hamiltonian: mean-field g plus pairing and Coulomb.

    ``two_body`` may carry precomputed residual terms (they do not depend on U0).
    """
    g = one_body_matrix(nucleus.catalog, params, nucleus)
    if two_body is None:
        two_body = residual_terms(nucleus, G, include_coulomb, policy)
    return SecondQuantizedHamiltonian(nucleus, g[PROTON], g[NEUTRON], tuple(two_body))


def residual_terms(
    nucleus: NucleusSpec, G: float = 0.25, include_coulomb: bool = True, policy: QuadraturePolicy | None = None
) -> tuple[TwoBodyTerm, ...]:
    # a species with fewer than two nucleons has no pair to scatter
    paired = tuple(sp for sp in (PROTON, NEUTRON) if nucleus.particles(sp) >= 2)
    terms = pairing_terms(nucleus.catalog, G, paired)
    if include_coulomb and nucleus.Z >= 2:
        terms += coulomb_terms(nucleus.catalog, policy or QuadraturePolicy.for_mass(nucleus.A, rtol=1e-11))
    return tuple(terms)
