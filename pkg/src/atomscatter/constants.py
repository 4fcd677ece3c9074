"""Physical constants and species data (SI units)."""
from scipy.constants import atomic_mass, hbar, pi

HBAR = hbar
AMU = atomic_mass

#: isotope masses in atomic mass units
ISOTOPE_MASS_U = {
    "Li7": 7.0160034366,
    "Dy162": 161.9268056,
}


def species_mass(name: str) -> float:
    """Mass of ``name`` in kg."""
    try:
        return ISOTOPE_MASS_U[name] * AMU
    except KeyError:
        raise KeyError(f"unknown species {name!r}; known: {sorted(ISOTOPE_MASS_U)}") from None


TWO_PI = 2 * pi
