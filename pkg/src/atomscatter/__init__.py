"""Coherent and incoherent light scattering by atomic wavepackets."""
from .classical import OracleResult, classical_point_oracle
from .dynamics import (
    CorrectionFactors,
    IntensityPoint,
    decoherence_time,
    intensity,
    long_time_normalizer,
    time_series,
)
from .exceptions import (
    AtomScatterError,
    ConfigError,
    DomainError,
    EmptyArrayError,
    WeakExcitationError,
)
from .lattice import AtomArray, Cube, DefectSpec, Sphere, generate
from .presets import PRESETS, ExperimentPreset, get_preset
from .quantum import (
    PhotonDensityMatrix,
    ScatterDecomposition,
    ScatteringGeometry,
    TwoAtomScatterConfig,
    TwoAtomState,
    Wavepacket,
    build_two_atom_state,
    coherent_overlap,
    debye_waller,
    ground_state_width,
    ho_populations,
    lamb_dicke,
    photon_density_matrix,
    scatter_decomposition,
)
from .structure import StructureFactorScan, angular_scan, structure_factor

__version__ = "0.1.0"
