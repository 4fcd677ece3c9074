"""Experimental settings for the lithium and dysprosium Mott-insulator runs.

Trap frequencies, wavelengths, saturation (s = 0.02) and branching (98 %
cycling) for Li-7 are the published values.  The detection angle is not
published; 90 degrees reproduces the quoted Debye-Waller factors.  For Dy-162
the structure factor 0.3 was a fitted value; the lattice recipe (shell radii,
hole probability) is an illustrative default, not a measured one.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .constants import TWO_PI, species_mass
from .dynamics import CorrectionFactors
from .lattice import DefectSpec, Sphere
from .quantum import ScatteringGeometry, Wavepacket

LATTICE_SPACING = 532e-9


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    species: str
    wavelength: float
    trap_frequency: tuple
    structure_factor: float
    corrections: CorrectionFactors
    theta: float = np.pi / 2
    spacing: float = LATTICE_SPACING
    lattice_shape: Sphere = Sphere(19.3, jitter=True)
    defects: DefectSpec = DefectSpec(0.075)
    pulse_fwhm: float = 0.1e-6
    notes: str = ""

    @property
    def mass(self) -> float:
        return species_mass(self.species)

    @property
    def omega(self) -> np.ndarray:
        return TWO_PI * np.asarray(self.trap_frequency, dtype=float)

    def packet(self, **kwargs) -> Wavepacket:
        return Wavepacket(self.mass, self.omega, **kwargs)

    def geometry(self) -> ScatteringGeometry:
        return ScatteringGeometry.from_angle(self.wavelength, self.theta)


_LI = dict(species="Li7", wavelength=671e-9, structure_factor=0.10,
           corrections=CorrectionFactors(saturation=0.02, branching=0.98))
_DY = dict(species="Dy162", wavelength=626e-9, structure_factor=0.3,
           corrections=CorrectionFactors(), lattice_shape=Sphere(18.0, jitter=True),
           defects=DefectSpec(0.17, ((7.0, 3), (13.0, 2))))

PRESETS = MappingProxyType({
    "li7-deep": ExperimentPreset("li7-deep", trap_frequency=(256e3,) * 3,
                                 notes="deep lattice, x0 = 53 nm", **_LI),
    "li7-shallow": ExperimentPreset("li7-shallow", trap_frequency=(164e3,) * 3,
                                    notes="shallow lattice, x0 = 66 nm", **_LI),
    "dy162-21k": ExperimentPreset("dy162-21k", trap_frequency=(21e3,) * 3,
                                  notes="S = 0.3 is a fitted value", **_DY),
    "dy162-43k": ExperimentPreset("dy162-43k", trap_frequency=(43e3,) * 3,
                                  notes="S = 0.3 is a fitted value", **_DY),
})


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
