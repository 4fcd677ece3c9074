"""Normalised scattered intensity and its evolution after trap release.

The intensity relative to independent atoms is ``I = f S + (1 - f)``, with
``f`` the effective coherent fraction per atom.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import DomainError
from .quantum import ScatteringGeometry, Wavepacket, debye_waller

if TYPE_CHECKING:
    from .presets import ExperimentPreset

#: points with D below this are treated as fully incoherent
LONG_TIME_D = 0.01


@dataclass(frozen=True)
class CorrectionFactors:
    """Probe saturation ``s`` and cycling branching ratio ``b``.

    Both only reduce the coherent fraction: ``f = D * b / (1 + s)``.
    """

    saturation: float = 0.0
    branching: float = 1.0

    def __post_init__(self):
        if not self.saturation >= 0:
            raise DomainError(f"saturation must be >= 0, got {self.saturation!r}")
        if not 0 < self.branching <= 1:
            raise DomainError(f"branching ratio must lie in (0, 1], got {self.branching!r}")

    @property
    def coherence_multiplier(self) -> float:
        return self.branching / (1.0 + self.saturation)


@dataclass(frozen=True)
class IntensityPoint:
    time: float
    D: float
    S: float
    f_coh_effective: float
    intensity: float


def intensity(D, S, corrections: CorrectionFactors | None = None):
    """``f S + (1 - f)`` with ``f = D b / (1 + s)``; vectorised over D and S."""
    c = (corrections or CorrectionFactors()).coherence_multiplier
    d = np.asarray(D, dtype=float)
    s = np.asarray(S, dtype=float)
    if np.any((d < 0) | (d > 1)):
        raise DomainError("D must lie in [0, 1]")
    if np.any(s < 0):
        raise DomainError("S must be >= 0")
    f = d * c
    out = f * s + (1.0 - f)
    return float(out) if out.ndim == 0 else out


def time_series(preset: "ExperimentPreset", times: Sequence[float],
                geometry: ScatteringGeometry | None = None,
                structure_factor: float | None = None) -> list[IntensityPoint]:
    """Theory curve for ``preset`` at ``times`` (s, ascending; 0 = release).

    Points before release keep ``D(0)``: the trap does not change the
    coherence of the scattered light.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("time grid must be a non-empty 1D sequence")
    if np.any(np.diff(t) < 0):
        raise DomainError("time grid must be ascending")
    geometry = geometry or preset.geometry()
    packet = preset.packet()
    s = preset.structure_factor if structure_factor is None else structure_factor
    c = preset.corrections.coherence_multiplier
    points = []
    for ti in t:
        d = debye_waller(packet, geometry, max(ti, 0.0))
        f = d * c
        points.append(IntensityPoint(float(ti), d, s, f, f * s + (1.0 - f)))
    return points


def decoherence_time(packet: Wavepacket, geometry: ScatteringGeometry,
                     threshold: float = LONG_TIME_D) -> float:
    """Time after release at which ``D`` first drops below ``threshold``."""
    if debye_waller(packet, geometry, 0.0) <= threshold:
        return 0.0
    if geometry.q_magnitude == 0:
        return float("inf")
    g = lambda t: np.log(debye_waller(packet, geometry, t)) - np.log(threshold)  # noqa: E731
    hi = 1.0 / packet.omega.min()
    while g(hi) > 0:
        hi *= 2.0
    return float(brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-12))


def long_time_scale(intensities, D, threshold: float = LONG_TIME_D) -> float:
    """Mean intensity over points with ``D < threshold`` (the fully incoherent level)."""
    i = np.asarray(intensities, dtype=float)
    d = np.asarray(D, dtype=float)
    late = d < threshold
    if not late.any():
        raise DomainError(f"no points with D < {threshold:g}; cannot normalise")
    return float(np.mean(i[late]))


def long_time_normalizer(series: list[IntensityPoint],
                         threshold: float = LONG_TIME_D) -> list[IntensityPoint]:
    """Rescale intensities so their long-time (``D < threshold``) mean is 1."""
    scale = long_time_scale([p.intensity for p in series], [p.D for p in series], threshold)
    return [replace(p, intensity=p.intensity / scale) for p in series]


def series_to_csv(series: list[IntensityPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_us", "D", "S", "f_coh_effective", "intensity"])
    for p in series:
        w.writerow([repr(p.time * 1e6), repr(p.D), repr(p.S), repr(p.f_coh_effective), repr(p.intensity)])
    return buf.getvalue()


def read_measurements(text: str):
    """Parse an experimental ``t_us,intensity`` CSV into time (s) and intensity arrays."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"t_us", "intensity"} <= set(reader.fieldnames):
        raise DomainError("measurement CSV needs 't_us' and 'intensity' columns")
    t, i = [], []
    for row in reader:
        t.append(float(row["t_us"]) * 1e-6)
        i.append(float(row["intensity"]))
    return np.array(t), np.array(i)


def compare_measurements(preset: "ExperimentPreset", times, measured,
                         threshold: float = LONG_TIME_D):
    """Normalise a measured curve on its long-time level and subtract theory.

    Returns ``(scale, normalised, theory)`` where ``theory`` is the matching
    list of ``IntensityPoint``.
    """
    order = np.argsort(times, kind="stable")
    times = np.asarray(times, dtype=float)[order]
    measured = np.asarray(measured, dtype=float)[order]
    theory = time_series(preset, times)
    scale = long_time_scale(measured, [p.D for p in theory], threshold)
    return scale, measured / scale, theory
