"""Single- and two-atom scattering model.

A photon scattered into a mode with momentum transfer ``Q`` displaces the
atomic wavepacket to ``|beta> = exp(iQ.R)|0>``.  Tracing out the atoms leaves
the photon mode in a mixture of a pure (coherent) branch and a one-photon
Fock term; the weight of the coherent branch per atom is the Debye-Waller
factor ``D = |<0|beta>|^2``.

Phase convention: ``<0|beta>`` is taken real and positive.  This only fixes
the phase of the coherent amplitude and never changes a ``|.|^2`` observable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .exceptions import DomainError, WeakExcitationError

#: default weak-excitation guard on |epsilon|^2
WEAK_EXCITATION_LIMIT = 0.01
#: eigenvalues of a density matrix may dip this far below zero
POSITIVITY_TOL = 1e-12


def _as_axes(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    if arr.shape != (3,):
        raise DomainError(f"{name} must be a scalar or a 3-vector, got shape {arr.shape}")
    return arr


def ground_state_width(mass: float, omega) -> np.ndarray | float:
    """RMS size ``sqrt(hbar / (2 m omega))`` of a harmonic-oscillator ground state.

    ``omega`` is the angular trap frequency in rad/s; it may be an array.
    """
    omega_arr = np.asarray(omega, dtype=float)
    if not mass > 0:
        raise DomainError(f"mass must be positive, got {mass!r}")
    if np.any(~(omega_arr > 0)):
        raise DomainError(f"trap frequency must be positive, got {omega!r}")
    x0 = np.sqrt(HBAR / (2.0 * mass * omega_arr))
    return float(x0) if x0.ndim == 0 else x0


@dataclass(frozen=True)
class Wavepacket:
    """Separable Gaussian wavepacket released from a 3D harmonic trap.

    Parameters
    ----------
    mass : float
        Atomic mass in kg.
    omega : float or array_like, shape (3,)
        Angular trap frequency per axis in rad/s.
    nbar : float or array_like, shape (3,)
        Mean thermal occupation per axis (0 for the ground state).
    expansion_time : float
        Time since release from the trap, in s.
    """

    mass: float
    omega: np.ndarray
    nbar: np.ndarray = field(default_factory=lambda: np.zeros(3))
    expansion_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "omega", _as_axes(self.omega, "omega"))
        object.__setattr__(self, "nbar", _as_axes(self.nbar, "nbar"))
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass!r}")
        if np.any(~(self.omega > 0)):
            raise DomainError(f"omega must be positive on every axis, got {self.omega}")
        if np.any(~(self.nbar >= 0)):
            raise DomainError(f"nbar must be non-negative, got {self.nbar}")
        if not self.expansion_time >= 0:
            raise DomainError(f"expansion_time must be >= 0, got {self.expansion_time!r}")

    @classmethod
    def from_rms_width(cls, mass: float, x0, **kwargs) -> "Wavepacket":
        """Ground-state packet whose trap gives the requested rms width(s)."""
        x0 = _as_axes(x0, "x0")
        if np.any(~(x0 > 0)):
            raise DomainError(f"x0 must be positive, got {x0}")
        return cls(mass=mass, omega=HBAR / (2.0 * mass * x0**2), **kwargs)

    @property
    def x0(self) -> np.ndarray:
        return ground_state_width(self.mass, self.omega)

    def rms_width(self, time: float | None = None) -> np.ndarray:
        """Per-axis rms width at ``time`` after release (default: ``expansion_time``)."""
        t = self.expansion_time if time is None else time
        if not t >= 0:
            raise DomainError(f"time must be >= 0, got {t!r}")
        thermal = np.sqrt(2.0 * self.nbar + 1.0)
        return self.x0 * thermal * np.sqrt(1.0 + (self.omega * t) ** 2)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or not n > 0:
        raise DomainError(f"direction must be a non-zero 3-vector, got {v!r}")
    return v / n


@dataclass(frozen=True)
class ScatteringGeometry:
    """Elastic scattering of light of ``wavelength`` from ``k_in`` into ``k_out``.

    The directions are normalised on construction; ``Q = k_in - k_out``.
    """

    wavelength: float
    k_in_direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    k_out_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength!r}")
        object.__setattr__(self, "k_in_direction", _unit(self.k_in_direction))
        object.__setattr__(self, "k_out_direction", _unit(self.k_out_direction))

    @classmethod
    def from_angle(cls, wavelength: float, theta: float, phi: float = 0.0,
                   k_in_direction=(0.0, 0.0, 1.0)) -> "ScatteringGeometry":
        """Outgoing beam at polar angle ``theta`` (rad) from ``k_in``, azimuth ``phi``."""
        k_in = _unit(k_in_direction)
        # orthonormal frame around k_in
        helper = np.array([1.0, 0.0, 0.0]) if abs(k_in[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = _unit(helper - helper.dot(k_in) * k_in)
        e2 = np.cross(k_in, e1)
        k_out = np.cos(theta) * k_in + np.sin(theta) * (np.cos(phi) * e1 + np.sin(phi) * e2)
        return cls(wavelength, k_in, k_out)

    @property
    def k(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def k_in(self) -> np.ndarray:
        return self.k * self.k_in_direction

    @property
    def k_out(self) -> np.ndarray:
        return self.k * self.k_out_direction

    @property
    def Q(self) -> np.ndarray:
        return self.k_in - self.k_out

    @property
    def q_magnitude(self) -> float:
        return float(np.linalg.norm(self.Q))

    @property
    def theta(self) -> float:
        c = np.clip(self.k_in_direction.dot(self.k_out_direction), -1.0, 1.0)
        return float(np.arccos(c))


def lamb_dicke(packet: Wavepacket, geometry: ScatteringGeometry, time: float | None = None) -> float:
    """``eta = sqrt(sum_i Q_i^2 x_i^2)``; reduces to ``Q x0`` for isotropic packets."""
    widths = packet.rms_width(time)
    return float(np.sqrt(np.sum((geometry.Q * widths) ** 2)))


def coherent_overlap(beta: complex) -> float:
    """``<0|beta> = exp(-|beta|^2 / 2)`` (real positive convention)."""
    return float(np.exp(-0.5 * abs(beta) ** 2))


def debye_waller(packet: Wavepacket, geometry: ScatteringGeometry, time: float | None = None) -> float:
    """Fraction of light a single atom scatters coherently.

    ``D = exp(-sum_i Q_i^2 x_rms,i(t)^2)``, where the rms width includes the
    thermal factor ``2 nbar + 1`` and free expansion ``sqrt(1 + (omega t)^2)``.
    Depends only on the spatial width, never on the momentum width.
    """
    return float(np.exp(-lamb_dicke(packet, geometry, time) ** 2))


@dataclass(frozen=True)
class TwoAtomScatterConfig:
    epsilon: complex
    R1: np.ndarray
    R2: np.ndarray
    geometry: ScatteringGeometry
    packet: Wavepacket
    weak_limit: float = WEAK_EXCITATION_LIMIT

    def __post_init__(self):
        object.__setattr__(self, "R1", np.asarray(self.R1, dtype=float).reshape(3))
        object.__setattr__(self, "R2", np.asarray(self.R2, dtype=float).reshape(3))
        if abs(self.epsilon) ** 2 > self.weak_limit:
            raise WeakExcitationError(
                f"|epsilon|^2 = {abs(self.epsilon) ** 2:.4g} exceeds the weak-excitation "
                f"limit {self.weak_limit:g}; the single-photon expansion is not valid"
            )

    @property
    def gamma1(self) -> complex:
        return complex(np.exp(1j * self.geometry.Q.dot(self.R1)))

    @property
    def gamma2(self) -> complex:
        return complex(np.exp(1j * self.geometry.Q.dot(self.R2)))

    @property
    def beta(self) -> complex:
        return 1j * lamb_dicke(self.packet, self.geometry)

    @property
    def debye_waller(self) -> float:
        return debye_waller(self.packet, self.geometry)


@dataclass(frozen=True)
class TwoAtomState:
    """Coefficients of ``|0,0,0> + eps (g1 |b,0,1> + g2 |0,b,1>)``.

    ``coefficients`` are the unnormalised amplitudes on ``basis``; the basis
    states are not mutually orthogonal (``<b,0|0,b> = D``), which ``gram``
    records.  ``norm`` is the norm of the unnormalised state.
    """

    basis: tuple
    coefficients: np.ndarray
    gram: np.ndarray
    norm: float

    @property
    def normalized_coefficients(self) -> np.ndarray:
        return self.coefficients / self.norm


def build_two_atom_state(config: TwoAtomScatterConfig) -> TwoAtomState:
    eps = complex(config.epsilon)
    coeffs = np.array([1.0, eps * config.gamma1, eps * config.gamma2], dtype=complex)
    d = config.debye_waller
    # photon number separates |0,0,0> from the one-photon branches
    gram = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, d], [0.0, d, 1.0]], dtype=complex)
    norm2 = np.real(np.conj(coeffs) @ gram @ coeffs)
    return TwoAtomState(
        basis=("|0,0,0>", "|beta,0,1>", "|0,beta,1>"),
        coefficients=coeffs,
        gram=gram,
        norm=float(np.sqrt(norm2)),
    )


@dataclass(frozen=True)
class PhotonDensityMatrix:
    """Reduced state of the scattered-photon mode in the ``{|0>, |1>}`` basis.

    Before normalisation the state is ``|v><v| + w |1><1|`` with
    ``v = |0> + c |1>``; ``c`` is ``coherent_amplitude`` and ``w`` is
    ``incoherent_weight``.  ``matrix`` is that operator divided by ``norm``.
    """

    matrix: np.ndarray
    coherent_amplitude: complex
    incoherent_weight: float
    norm: float

    @classmethod
    def from_components(cls, coherent_amplitude: complex, incoherent_weight: float) -> "PhotonDensityMatrix":
        v = np.array([1.0, coherent_amplitude], dtype=complex)
        rho = np.outer(v, v.conj())
        rho[1, 1] += incoherent_weight
        norm = float(np.real(np.trace(rho)))
        return cls(rho / norm, complex(coherent_amplitude), float(incoherent_weight), norm)

    def reconstruct(self) -> np.ndarray:
        return type(self).from_components(self.coherent_amplitude, self.incoherent_weight).matrix

    @property
    def coherent_photons(self) -> float:
        return abs(self.coherent_amplitude) ** 2

    @property
    def incoherent_photons(self) -> float:
        return self.incoherent_weight

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_physical(self, tol: float = POSITIVITY_TOL) -> bool:
        m = self.matrix
        return (
            np.allclose(m, m.conj().T, atol=tol, rtol=0)
            and abs(np.trace(m) - 1.0) <= 10 * np.finfo(float).eps
            and self.eigenvalues().min() >= -tol
        )


def photon_density_matrix(config: TwoAtomScatterConfig) -> PhotonDensityMatrix:
    """Partial trace of the two-atom state over the atomic motion."""
    eps = complex(config.epsilon)
    d = config.debye_waller
    overlap = coherent_overlap(config.beta)
    amplitude = eps * overlap * (config.gamma1 + config.gamma2)
    weight = 2.0 * abs(eps) ** 2 * (1.0 - d)
    return PhotonDensityMatrix.from_components(amplitude, weight)


@dataclass(frozen=True)
class ScatterDecomposition:
    D: float
    coherent_photons: float
    incoherent_photons: float

    @property
    def f_incoh(self) -> float:
        return 1.0 - self.D

    @property
    def total_photons(self) -> float:
        return self.coherent_photons + self.incoherent_photons


def scatter_decomposition(packet: Wavepacket, geometry: ScatteringGeometry, n_atoms: int = 1,
                          phases=None, epsilon: complex = 1.0) -> ScatterDecomposition:
    """Coherent and incoherent photon numbers for one or two atoms.

    ``phases`` are the two scattering phases ``exp(iQ.R_j)`` (only used when
    ``n_atoms == 2``; default is the in-phase Bragg case).  With the default
    ``epsilon = 1`` the numbers are per unit scattering probability.
    """
    d = debye_waller(packet, geometry)
    e2 = abs(epsilon) ** 2
    if n_atoms == 1:
        return ScatterDecomposition(d, e2 * d, e2 * (1.0 - d))
    if n_atoms == 2:
        g1, g2 = (1.0, 1.0) if phases is None else phases
        return ScatterDecomposition(d, e2 * d * abs(g1 + g2) ** 2, 2.0 * e2 * (1.0 - d))
    raise DomainError(f"n_atoms must be 1 or 2, got {n_atoms!r}")


def ho_populations(beta: complex, n_max: int) -> np.ndarray:
    """Harmonic-oscillator populations of the displaced ground state ``|beta>``.

    Poisson distribution with mean ``|beta|^2``; ``P[0]`` is the fraction of
    atoms a projection finds still in the initial state, i.e. the
    Debye-Waller factor.
    """
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max!r}")
    mean = abs(beta) ** 2
    pops = np.empty(n_max + 1)
    pops[0] = np.exp(-mean)
    for n in range(1, n_max + 1):
        pops[n] = pops[n - 1] * mean / n
    return pops
