"""Single-particle basis: orbit catalog, oscillator radial functions, l x 1/2 coupling.

Orbits are m-scheme states ``|n, l, j, mj>`` of one nucleon species.  Half-integer
quantum numbers are stored doubled (``two_j``, ``two_mj``) so that every label is an
integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .constants import NEUTRON, PROTON, SPECIES

_L_LETTERS = "spdfghi"


@dataclass(frozen=True)
class Orbit:
    """One m-scheme single-particle state.

    ``n`` is the spectroscopic radial label (1s, 1p, 2s, ...), so the oscillator
    radial index is ``n - 1``.
    """

    species: str
    n: int
    l: int
    two_j: int
    two_mj: int

    def __post_init__(self) -> None:
        if self.species not in SPECIES:
            raise ValueError(f"unknown species {self.species!r}")
        if self.n < 1 or self.l < 0:
            raise ValueError(f"invalid radial labels n={self.n}, l={self.l}")
        if self.two_j not in (2 * self.l + 1, 2 * self.l - 1) or self.two_j < 1:
            raise ValueError(f"j={self.two_j}/2 cannot couple l={self.l} with spin 1/2")
        if abs(self.two_mj) > self.two_j or (self.two_mj - self.two_j) % 2:
            raise ValueError(f"mj={self.two_mj}/2 is not a projection of j={self.two_j}/2")

    @property
    def nr(self) -> int:
        return self.n - 1

    @property
    def shell(self) -> tuple[int, int, int]:
        return (self.n, self.l, self.two_j)

    def partner(self) -> "Orbit":
        """The time-reversal partner with ``mj -> -mj``."""
        return Orbit(self.species, self.n, self.l, self.two_j, -self.two_mj)

    @property
    def label(self) -> str:
        mj = Fraction(self.two_mj, 2)
        return f"{self.n}{_L_LETTERS[self.l]}{self.two_j}/2({mj})"

    def __str__(self) -> str:
        return f"{self.species[0]}:{self.label}"


# (n, l, two_j, two_mj) in the fixed published order, orbit 1 first.
_LISTED = (
    (1, 0, 1, -1), (1, 0, 1, 1),
    (1, 1, 3, -3), (1, 1, 3, -1), (1, 1, 3, 1), (1, 1, 3, 3),
    (1, 1, 1, -1), (1, 1, 1, 1),
    (1, 2, 5, -5), (1, 2, 5, 5),
)


def _extension() -> tuple[tuple[int, int, int, int], ...]:
    # Remaining 1d5/2 states, then 2s1/2, 1d3/2, 1f7/2; each shell filled with
    # (-mj, +mj) pairs from the smallest |mj| outward.
    out = []
    for n, l, two_j, skip in ((1, 2, 5, {5}), (2, 0, 1, set()), (1, 2, 3, set()), (1, 3, 7, set())):
        for two_m in range(1, two_j + 1, 2):
            if two_m in skip:
                continue
            out.append((n, l, two_j, -two_m))
            out.append((n, l, two_j, two_m))
    return tuple(out)


SHELL_TABLE = _LISTED + _extension()
MAX_ORBITS = len(SHELL_TABLE)


def _selection(count: int) -> tuple[tuple[int, int, int, int], ...]:
    if count == 4:
        # 1s1/2 pair plus the stretched 1p3/2 pair.
        return (_LISTED[0], _LISTED[1], _LISTED[2], _LISTED[5])
    return SHELL_TABLE[:count]


@dataclass(frozen=True)
class OrbitCatalog:
    protons: tuple[Orbit, ...]
    neutrons: tuple[Orbit, ...]
    alpha: float  # oscillator parameter, fm^-1
    mass_number: int

    def for_species(self, species: str) -> tuple[Orbit, ...]:
        if species == PROTON:
            return self.protons
        if species == NEUTRON:
            return self.neutrons
        raise ValueError(f"unknown species {species!r}")

    @property
    def n_proton_orbits(self) -> int:
        return len(self.protons)

    @property
    def n_neutron_orbits(self) -> int:
        return len(self.neutrons)

    @property
    def n_qubits(self) -> int:
        return len(self.protons) + len(self.neutrons)

    def is_mj_closed(self) -> bool:
        return all(
            set(orbits) == {o.partner() for o in orbits}
            for orbits in (self.protons, self.neutrons)
        )


def oscillator_alpha(mass_number: int) -> float:
    return 1.1 / mass_number ** (1.0 / 6.0)


def build_orbit_catalog(
    count_per_species: int, mass_number: int, neutron_count: int | None = None
) -> OrbitCatalog:
    """Build the proton and neutron orbit lists.

    Args:
        count_per_species: number of m-scheme orbits per species.  Must be even so
            that every orbit's ``-mj`` partner is present.
        mass_number: A, which fixes the oscillator parameter ``1.1 / A**(1/6)``.
        neutron_count: optional different orbit count for neutrons.

    Raises:
        ValueError: odd or out-of-table counts, or a non-positive mass number.
    """
    if mass_number < 1:
        raise ValueError("mass number must be >= 1")
    counts = (count_per_species, count_per_species if neutron_count is None else neutron_count)
    for count in counts:
        if count < 2 or count % 2:
            raise ValueError(
                f"orbit count {count} must be even and >= 2 (every mj needs its -mj partner)"
            )
        if count > MAX_ORBITS:
            raise ValueError(
                f"orbit count {count} exceeds the implemented shell table "
                f"({MAX_ORBITS} orbits, up to 1f7/2)"
            )
    protons = tuple(Orbit(PROTON, *q) for q in _selection(counts[0]))
    neutrons = tuple(Orbit(NEUTRON, *q) for q in _selection(counts[1]))
    return OrbitCatalog(protons, neutrons, oscillator_alpha(mass_number), mass_number)


def clebsch_gordan_half(l: int, m: int, two_ms: int, two_j: int, two_mj: int) -> float:
    """<l, m; 1/2, ms | j, mj> in the Condon-Shortley convention.

    Returns 0 for couplings that violate ``m + ms = mj`` or ``j = l +- 1/2``.
    """
    if two_ms not in (1, -1) or abs(m) > l or 2 * m + two_ms != two_mj or abs(two_mj) > two_j:
        return 0.0
    denom = 2 * (2 * l + 1)
    plus = (2 * l + two_mj + 1) / denom  # (l + mj + 1/2) / (2l + 1)
    minus = (2 * l - two_mj + 1) / denom  # (l - mj + 1/2) / (2l + 1)
    if two_j == 2 * l + 1:
        return math.sqrt(plus) if two_ms == 1 else math.sqrt(minus)
    if two_j == 2 * l - 1:
        return -math.sqrt(minus) if two_ms == 1 else math.sqrt(plus)
    return 0.0


def spin_components(orbit: Orbit) -> list[tuple[int, int, float]]:
    """Decompose an orbit into ``(m_l, two_ms, coefficient)`` product-basis terms."""
    out = []
    for two_ms in (1, -1):
        two_m = orbit.two_mj - two_ms
        m = two_m // 2
        if abs(m) > orbit.l:
            continue
        c = clebsch_gordan_half(orbit.l, m, two_ms, orbit.two_j, orbit.two_mj)
        if c != 0.0:
            out.append((m, two_ms, c))
    return out


def radial_wavefunction(nr: int, l: int, alpha: float, r) -> np.ndarray:
    """Harmonic-oscillator radial function R_{nr,l}(r) in fm^-3/2.

    ``R = N (alpha r)^l exp(-alpha^2 r^2 / 2) L_nr^(l+1/2)(alpha^2 r^2)`` with N fixed
    by ``int_0^inf R^2 r^2 dr = 1``.  Positive near the origin.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radial_wavefunction requires r >= 0")
    if nr < 0 or l < 0:
        raise ValueError(f"invalid oscillator labels nr={nr}, l={l}")
    log_norm = 0.5 * (math.log(2.0) + 3.0 * math.log(alpha) + gammaln(nr + 1) - gammaln(nr + l + 1.5))
    x = (alpha * r) ** 2
    return math.exp(log_norm) * (alpha * r) ** l * np.exp(-0.5 * x) * eval_genlaguerre(nr, l + 0.5, x)


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to converge; carries the last estimates."""

    def __init__(self, message: str, estimates: tuple[float, float]):
        super().__init__(f"{message} (last estimates {estimates[0]!r}, {estimates[1]!r})")
        self.estimates = estimates


@dataclass(frozen=True)
class QuadraturePolicy:
    """Composite Gauss-Legendre on [0, r_max], panels doubled until converged."""

    r_max: float = 22.0
    rtol: float = 1e-10
    atol: float = 1e-13
    order: int = 24
    initial_panels: int = 4
    max_refinements: int = 9

    @classmethod
    def for_mass(cls, mass_number: int, **kw) -> "QuadraturePolicy":
        return cls(r_max=12.0 * mass_number ** (1.0 / 3.0) + 10.0, **kw)

    def nodes(self, panels: int) -> tuple[np.ndarray, np.ndarray]:
        return composite_gauss_legendre(0.0, self.r_max, panels, self.order)


def composite_gauss_legendre(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate_radial(integrand: Callable[[np.ndarray], np.ndarray], policy: QuadraturePolicy | None = None) -> float:
    """Integrate a vectorized ``f(r)`` over [0, r_max] to the policy tolerance."""
    policy = policy or QuadraturePolicy()
    panels = policy.initial_panels
    r, w = policy.nodes(panels)
    prev = float(np.dot(w, integrand(r)))
    for _ in range(policy.max_refinements):
        panels *= 2
        r, w = policy.nodes(panels)
        cur = float(np.dot(w, integrand(r)))
        if not math.isfinite(cur):
            raise QuadratureError("integrand is not finite on the quadrature grid", (prev, cur))
        if abs(cur - prev) <= max(policy.rtol * abs(cur), policy.atol):
            return cur
        prev = cur
    raise QuadratureError(f"no convergence after {policy.max_refinements} refinements", (prev, cur))
