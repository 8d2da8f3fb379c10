"""Woods-Saxon average field with spin-orbit term and the one-body matrix elements g."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import AVERAGE_MASS, HBARC, NEUTRON, NEUTRON_MASS, PROTON, PROTON_MASS, species_mass
from .orbits import Orbit, OrbitCatalog, QuadraturePolicy, build_orbit_catalog, integrate_radial, radial_wavefunction


@dataclass(frozen=True)
class MeanFieldParams:
    U0: float = -50.0  # MeV
    kappa: float = 0.67
    r0: float = 1.27  # fm
    a0: float = 0.67  # fm
    lambda_so: float = 32.0
    proton_mass: float = PROTON_MASS
    neutron_mass: float = NEUTRON_MASS
    average_mass: float = AVERAGE_MASS

    def __post_init__(self) -> None:
        # U0 = 0 is admitted as the field-free limit
        if not self.U0 <= 0:
            raise ValueError(f"Woods-Saxon depth U0 must be negative, got {self.U0}")

    def with_depth(self, U0: float) -> "MeanFieldParams":
        return replace(self, U0=U0)

    def mass(self, species: str) -> float:
        if species == PROTON:
            return self.proton_mass
        species_mass(species)  # validates the name
        return self.neutron_mass


@dataclass(frozen=True)
class NucleusSpec:
    Z: int
    N: int
    catalog: OrbitCatalog
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.Z < 0 or self.N < 0 or self.Z + self.N < 1:
            raise ValueError(f"invalid nucleon numbers Z={self.Z}, N={self.N}")
        if self.Z > len(self.catalog.protons):
            raise ValueError(f"Z={self.Z} exceeds the {len(self.catalog.protons)} proton orbits")
        if self.N > len(self.catalog.neutrons):
            raise ValueError(f"N={self.N} exceeds the {len(self.catalog.neutrons)} neutron orbits")
        if self.catalog.mass_number != self.A:
            raise ValueError(f"catalog built for A={self.catalog.mass_number}, nucleus has A={self.A}")

    @property
    def A(self) -> int:
        return self.Z + self.N

    @classmethod
    def build(cls, Z: int, A: int, orbits: int, neutron_orbits: int | None = None, name: str = "") -> "NucleusSpec":
        return cls(Z, A - Z, build_orbit_catalog(orbits, A, neutron_orbits), name=name)

    def particles(self, species: str) -> int:
        return self.Z if species == PROTON else self.N

    def policy(self) -> QuadraturePolicy:
        return QuadraturePolicy.for_mass(self.A)


def _ws_shape(r, params: MeanFieldParams, A: int) -> np.ndarray:
    radius = params.r0 * A ** (1.0 / 3.0)
    return 1.0 / (1.0 + np.exp((np.asarray(r, dtype=float) - radius) / params.a0))


def _depth(params: MeanFieldParams, species: str, nucleus: NucleusSpec) -> float:
    sign = 1.0 if species == PROTON else -1.0
    return params.U0 * (1.0 + sign * params.kappa * (nucleus.N - nucleus.Z) / nucleus.A)


def ws_central(r, params: MeanFieldParams, species: str, nucleus: NucleusSpec) -> np.ndarray:
    """Central Woods-Saxon field U_c(r) in MeV; protons take the +kappa isovector sign."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("ws_central requires r >= 0")
    return _depth(params, species, nucleus) * _ws_shape(r, params, nucleus.A)


def ws_central_derivative(r, params: MeanFieldParams, species: str, nucleus: NucleusSpec) -> np.ndarray:
    f = _ws_shape(r, params, nucleus.A)
    return -_depth(params, species, nucleus) * f * (1.0 - f) / params.a0


def spin_orbit_expectation(l: int, two_j: int) -> float:
    """<s . l> for j = l +- 1/2."""
    if l < 0:
        raise ValueError("l must be non-negative")
    if two_j == 2 * l + 1:
        return l / 2.0
    if two_j == 2 * l - 1 and l > 0:
        return -(l + 1) / 2.0
    raise ValueError(f"j={two_j}/2 is not l +- 1/2 for l={l}")


def spin_orbit_prefactor(params: MeanFieldParams) -> float:
    # -2 lambda (hbar / 2Mc)^2, with (hbar/2Mc)^2 = (hbar c / 2Mc^2)^2 in fm^2
    return -2.0 * params.lambda_so * (HBARC / (2.0 * params.average_mass)) ** 2


def kinetic_element(nr_a: int, nr_b: int, l: int, alpha: float, mass: float) -> float:
    """Oscillator-basis <nr_a l | p^2/2M | nr_b l> in MeV."""
    unit = (HBARC * alpha) ** 2 / (2.0 * mass)
    if nr_a == nr_b:
        return unit * (2 * nr_a + l + 1.5)
    if abs(nr_a - nr_b) == 1:
        n = min(nr_a, nr_b)
        return unit * math.sqrt((n + 1) * (n + l + 1.5))
    return 0.0


def potential_element(
    nr_a: int, nr_b: int, l: int, two_j: int, species: str, params: MeanFieldParams, nucleus: NucleusSpec,
    policy: QuadraturePolicy | None = None,
) -> float:
    alpha = nucleus.catalog.alpha
    so = spin_orbit_prefactor(params) * spin_orbit_expectation(l, two_j)

    def integrand(r):
        field_ = ws_central(r, params, species, nucleus) + so * ws_central_derivative(r, params, species, nucleus)
        return radial_wavefunction(nr_a, l, alpha, r) * radial_wavefunction(nr_b, l, alpha, r) * field_ * r * r

    return integrate_radial(integrand, policy or nucleus.policy())


def one_body_element(a: Orbit, b: Orbit, params: MeanFieldParams, nucleus: NucleusSpec) -> float:
    """<a| p^2/2M + V |b> in MeV; zero unless a and b share (l, j, mj)."""
    if a.species != b.species:
        raise ValueError(f"one-body element between species {a.species} and {b.species}")
    if (a.l, a.two_j, a.two_mj) != (b.l, b.two_j, b.two_mj):
        return 0.0
    kin = kinetic_element(a.nr, b.nr, a.l, nucleus.catalog.alpha, params.mass(a.species))
    return kin + potential_element(a.nr, b.nr, a.l, a.two_j, a.species, params, nucleus)


def one_body_matrix(catalog: OrbitCatalog, params: MeanFieldParams, nucleus: NucleusSpec) -> dict[str, np.ndarray]:
    """Symmetric g matrices keyed by species, in catalog order."""
    if catalog is not nucleus.catalog and catalog != nucleus.catalog:
        raise ValueError("catalog does not belong to the nucleus")
    out = {}
    for species in (PROTON, NEUTRON):
        orbits = catalog.for_species(species)
        cache: dict[tuple, float] = {}
        g = np.zeros((len(orbits), len(orbits)))
        for i, a in enumerate(orbits):
            for j in range(i, len(orbits)):
                b = orbits[j]
                if (a.l, a.two_j, a.two_mj) != (b.l, b.two_j, b.two_mj):
                    continue
                # the field is mj-independent, so elements are shared across a shell
                key = (min(a.nr, b.nr), max(a.nr, b.nr), a.l, a.two_j)
                if key not in cache:
                    cache[key] = one_body_element(a, b, params, nucleus)
                g[i, j] = g[j, i] = cache[key]
        out[species] = g
    return out
