"""Physical constants (MeV, fm)."""

HBARC = 197.327  # MeV fm
COULOMB_E2 = 1.43996  # e^2 / (4 pi eps0), MeV fm

PROTON_MASS = 938.3  # MeV / c^2
NEUTRON_MASS = 939.6  # MeV / c^2
AVERAGE_MASS = 0.5 * (PROTON_MASS + NEUTRON_MASS)

PROTON = "proton"
NEUTRON = "neutron"
SPECIES = (PROTON, NEUTRON)


def species_mass(species: str) -> float:
    if species == PROTON:
        return PROTON_MASS
    if species == NEUTRON:
        return NEUTRON_MASS
    raise ValueError(f"unknown species {species!r}")
