"""Classical point-scatterer model of the atomic wavepackets.

Every scattering event places each atom at a random point drawn from
``|psi|^2`` and adds up the phases.  Averaging the complex amplitude gives the
coherent part, its fluctuations the incoherent part.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .quantum import ScatteringGeometry, Wavepacket

#: samples per independent random stream; fixes the partition so results
#: do not depend on the number of worker threads
STREAM_SIZE = 1 << 16
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class OracleResult:
    coherent_fraction: float
    coherent_fraction_stderr: float
    incoherent_fraction: float
    incoherent_fraction_stderr: float
    coherent_photons: float
    incoherent_photons: float
    n_samples: int
    n_atoms: int


def _stream_moments(rng, widths, q, base_phase, n):
    # per-atom phases exp(iQ.(R_j + delta_j)); shape (n, n_atoms)
    delta = rng.normal(size=(n, base_phase.size, 3)) * widths
    z = np.exp(1j * (base_phase + delta @ q))
    a = z.sum(axis=1)
    zr, zi = z.real, z.imag
    ar, ai = a.real, a.imag
    return np.stack([
        np.concatenate([zr.sum(0), [ar.sum()]]),
        np.concatenate([zi.sum(0), [ai.sum()]]),
        np.concatenate([(zr * zr).sum(0), [(ar * ar).sum()]]),
        np.concatenate([(zi * zi).sum(0), [(ai * ai).sum()]]),
        np.concatenate([(zr * zi).sum(0), [(ar * ai).sum()]]),
    ])


def _abs2_of_mean(mr, mi, mrr, mii, mri, n):
    """Unbiased ``|E z|^2`` and its delta-method standard error from moments."""
    raw = mr * mr + mi * mi
    var = (mrr + mii) - raw
    est = raw - var / (n - 1)
    # d|c|^2 = 2 Re(conj(c) dc)
    proj_var = mr * mr * mrr + 2 * mr * mi * mri + mi * mi * mii - raw * raw
    err = 2.0 * np.sqrt(np.maximum(proj_var, 0.0) / n)
    return est, err


def classical_point_oracle(packet: Wavepacket, geometry: ScatteringGeometry, positions=None,
                           n_samples: int = 1_000_000, seed: int = 0,
                           workers: int = 1) -> OracleResult:
    """Monte Carlo estimate of coherent and incoherent scattering fractions.

    Parameters
    ----------
    positions : array_like, shape (n_atoms, 3), optional
        Trap centres in m; a single atom at the origin by default.
    n_samples : int
        Number of scattering events (at least 10^4).
    seed : int
        Root seed.  Samples are split into fixed-size streams spawned from it,
        so the estimate is identical for any ``workers``.

    Returns
    -------
    OracleResult
        ``coherent_fraction`` is the per-atom mean of ``|<exp(iQ.delta_j)>|^2``,
        ``incoherent_fraction`` is ``(<|A|^2> - |<A>|^2) / n_atoms`` for the
        total amplitude ``A``.  Both should match ``D`` and ``1 - D``.
    """
    n_samples = int(n_samples)
    if n_samples <= 0:
        raise DomainError("n_samples must be positive")
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be >= {MIN_SAMPLES}, got {n_samples}")
    pos = np.zeros((1, 3)) if positions is None else np.asarray(positions, dtype=float).reshape(-1, 3)
    q = geometry.Q
    widths = packet.rms_width()
    base_phase = pos @ q

    sizes = [STREAM_SIZE] * (n_samples // STREAM_SIZE)
    if n_samples % STREAM_SIZE:
        sizes.append(n_samples % STREAM_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(i):
        return _stream_moments(np.random.default_rng(children[i]), widths, q, base_phase, sizes[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    # fixed summation order
    total = np.zeros_like(parts[0])
    for p in parts:
        total += p
    m = total / n_samples

    n_atoms = pos.shape[0]
    atom_coh, atom_err = _abs2_of_mean(*(m[:, :n_atoms]), n_samples)
    amp_coh, _ = _abs2_of_mean(*(m[:, n_atoms]), n_samples)
    amp_power = m[2, n_atoms] + m[3, n_atoms]

    coherent = float(np.mean(atom_coh))
    coherent_err = float(np.sqrt(np.sum(atom_err**2)) / n_atoms)
    incoherent_photons = float(amp_power - amp_coh)
    # independent atoms: incoherent = 1 - coherent per atom up to O(1/n)
    incoherent_err = coherent_err
    return OracleResult(
        coherent_fraction=coherent,
        coherent_fraction_stderr=coherent_err,
        incoherent_fraction=incoherent_photons / n_atoms,
        incoherent_fraction_stderr=incoherent_err,
        coherent_photons=float(amp_coh),
        incoherent_photons=incoherent_photons,
        n_samples=n_samples,
        n_atoms=n_atoms,
    )
