"""Structure factor ``S(Q) = |sum_j n_j exp(iQ.R_j)|^2 / N`` of atom arrays.

Two evaluation routes are provided:

``direct``
    Chunked O(N) phase sum for arbitrary positions; chunk partial sums are
    combined with Neumaier compensation in a fixed order.
``separable``
    For lattice arrays ``exp(iQ.R)`` factorises per axis, so the sum becomes
    three small matrix contractions over the occupancy grid.  Same sum,
    different association; used for large ensembles.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, EmptyArrayError
from .lattice import AtomArray

DIRECT_CHUNK = 4096
Q_BLOCK = 256
#: Bragg flag radius in units of the peak half-width N^(-1/3)
BRAGG_MARGIN = 5.0


def _neumaier_rows(parts: np.ndarray) -> np.ndarray:
    """Compensated sum along axis 0 (fixed order), element-wise over the rest."""
    s = parts[0].copy()
    c = np.zeros_like(s)
    for p in parts[1:]:
        t = s + p
        c += np.where(np.abs(s) >= np.abs(p), (s - t) + p, (p - t) + s)
        s = t
    return s + c


def phase_sum_direct(positions, weights, Q, chunk: int = DIRECT_CHUNK) -> np.ndarray:
    """``sum_j w_j exp(iQ.R_j)`` for each row of ``Q`` (shape (M, 3))."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    w = np.ones(len(pos)) if weights is None else np.asarray(weights, dtype=float)
    q = np.atleast_2d(np.asarray(Q, dtype=float))
    partial_re, partial_im = [], []
    for start in range(0, len(pos), chunk):
        phase = q @ pos[start:start + chunk].T
        wc = w[start:start + chunk]
        partial_re.append(np.cos(phase) @ wc)
        partial_im.append(np.sin(phase) @ wc)
    re = _neumaier_rows(np.array(partial_re))
    im = _neumaier_rows(np.array(partial_im))
    return re + 1j * im


def _occupancy_grid(array: AtomArray):
    lo = array.indices.min(axis=0)
    hi = array.indices.max(axis=0)
    dims = hi - lo + 1
    grid = np.zeros(dims, dtype=float)
    rel = array.indices - lo
    grid[rel[:, 0], rel[:, 1], rel[:, 2]] = array.occupations
    axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
    return grid, axes


def phase_sum_separable(array: AtomArray, Q) -> np.ndarray:
    q = np.atleast_2d(np.asarray(Q, dtype=float)) * array.spacing
    grid, (gx, gy, gz) = _occupancy_grid(array)
    ex = np.exp(1j * np.outer(q[:, 0], gx))
    ey = np.exp(1j * np.outer(q[:, 1], gy))
    ez = np.exp(1j * np.outer(q[:, 2], gz))
    lx, ly, lz = grid.shape
    t = (grid.reshape(lx * ly, lz) @ ez.T).reshape(lx, ly, -1)
    t = np.einsum("xym,my->xm", t, ey)
    return np.einsum("xm,mx->m", t, ex)


def _amplitudes(array: AtomArray, q: np.ndarray, method: str, threads: int) -> np.ndarray:
    if method == "auto":
        method = "separable"
    if method == "separable":
        fn = lambda block: phase_sum_separable(array, block)  # noqa: E731
    elif method == "direct":
        fn = lambda block: phase_sum_direct(array.positions, array.occupations, block)  # noqa: E731
    else:
        raise ValueError(f"unknown method {method!r}")
    blocks = [q[i:i + Q_BLOCK] for i in range(0, len(q), Q_BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, blocks))
    else:
        parts = [fn(b) for b in blocks]
    return np.concatenate(parts)


def structure_factor(array: AtomArray, Q, method: str = "auto", threads: int = 1):
    """``|sum_j n_j exp(iQ.R_j)|^2 / n_atoms`` at one Q (float) or many (array).

    Doubly occupied sites contribute amplitude ``n_j``.  ``Q`` is in 1/m.
    """
    if array.n_atoms < 1:
        raise EmptyArrayError("structure factor of an empty array")
    q = np.asarray(Q, dtype=float)
    single = q.ndim == 1
    amps = _amplitudes(array, np.atleast_2d(q), method, threads)
    s = np.abs(amps) ** 2 / array.n_atoms
    return float(s[0]) if single else s


def structure_factor_points(positions, Q, weights=None) -> float | np.ndarray:
    """Structure factor of arbitrary point scatterers (direct summation)."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(pos) == 0:
        raise EmptyArrayError("structure factor of an empty point set")
    w = np.ones(len(pos)) if weights is None else np.asarray(weights, dtype=float)
    q = np.asarray(Q, dtype=float)
    s = np.abs(phase_sum_direct(pos, w, np.atleast_2d(q))) ** 2 / w.sum()
    return float(s[0]) if q.ndim == 1 else s


def cube_closed_form(edge: int, q_spacing) -> float:
    """Perfect ``edge^3`` cube: product of per-axis Dirichlet kernels, divided by N.

    ``q_spacing`` is ``Q * spacing`` per axis.  Exact for any index offset.
    """
    total = 1.0
    for q in np.asarray(q_spacing, dtype=float):
        half = 0.5 * q
        if abs(np.sin(half)) < 1e-300:
            total *= edge**2
        else:
            total *= (np.sin(edge * half) / np.sin(half)) ** 2
    return total / edge**3


def dirichlet_bound(q_spacing) -> float:
    """``prod_i 1 / sin^2(Q_i a / 2)``: bounds ``S * N`` for any perfect cube."""
    return float(np.prod(1.0 / np.sin(0.5 * np.asarray(q_spacing, dtype=float)) ** 2))


# direction grids ---------------------------------------------------------

def fibonacci_directions(n: int) -> np.ndarray:
    """``n`` quasi-uniform unit vectors on the sphere."""
    if n < 1:
        raise DomainError("direction grid must be non-empty")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5**0.5) * i
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def angle_directions(theta, phi) -> np.ndarray:
    """Unit vectors for polar angles ``theta`` and azimuths ``phi`` (rad, lab frame)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta, phi = np.broadcast_arrays(theta, phi)
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)


def grid_directions(theta, phi) -> np.ndarray:
    """Outer product of ``theta`` and ``phi`` samples."""
    t, p = np.meshgrid(np.asarray(theta, float), np.asarray(phi, float), indexing="ij")
    return angle_directions(t.ravel(), p.ravel())


def direction_angles(directions: np.ndarray):
    d = np.asarray(directions, dtype=float)
    theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
    return theta, phi


def bragg_distance(Q: np.ndarray, spacing: float, k: float) -> np.ndarray:
    """Distance from each Q to the nearest reciprocal-lattice vector, in units of k.

    For small offsets this is the angle (rad) the outgoing beam would have
    to turn to reach the Bragg condition.
    """
    g = 2.0 * np.pi / spacing
    nearest = np.round(Q / g) * g
    return np.linalg.norm(Q - nearest, axis=1) / k


@dataclass(frozen=True)
class StructureFactorScan:
    directions: np.ndarray
    Q: np.ndarray
    s_mean: np.ndarray
    s_stderr: np.ndarray
    bragg_flag: np.ndarray
    n_realizations: int
    n_atoms_mean: float
    seeds: tuple
    array_description: str

    @property
    def theta(self) -> np.ndarray:
        return direction_angles(self.directions)[0]

    @property
    def phi(self) -> np.ndarray:
        return direction_angles(self.directions)[1]

    def off_bragg(self) -> np.ndarray:
        return self.s_mean[~self.bragg_flag]

    def off_bragg_median(self) -> float:
        vals = self.off_bragg()
        return float(np.median(vals)) if vals.size else float("nan")

    def off_bragg_mean(self) -> float:
        vals = self.off_bragg()
        return float(np.mean(vals)) if vals.size else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "phi", "Qx", "Qy", "Qz", "S_mean", "S_stderr", "bragg_flag"])
        for t, p, q, s, e, f in zip(self.theta, self.phi, self.Q, self.s_mean,
                                     self.s_stderr, self.bragg_flag):
            w.writerow([repr(float(t)), repr(float(p)), repr(float(q[0])), repr(float(q[1])),
                        repr(float(q[2])), repr(float(s)), repr(float(e)), int(f)])
        return buf.getvalue()


def angular_scan(array: AtomArray, wavelength: float, directions, k_in=(0.0, 0.0, 1.0),
                 ensemble=None, bragg_margin: float = BRAGG_MARGIN, method: str = "auto",
                 threads: int = 1) -> StructureFactorScan:
    """S(Q) over outgoing ``directions`` for a fixed incoming beam.

    Parameters
    ----------
    array : AtomArray
        Scattering sample.  With ``ensemble`` it only supplies the recipe
        (shape, spacing, defects) and each seed generates a new realisation.
    directions : array_like, shape (M, 3)
        Outgoing unit vectors.
    ensemble : sequence of int, optional
        Seeds of the disorder realisations to average over.
    bragg_margin : float
        Directions closer than ``bragg_margin * N^(-1/3)`` rad to a Bragg
        condition are flagged.
    """
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    if d.size == 0:
        raise DomainError("direction grid must be non-empty")
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    k_in = np.asarray(k_in, dtype=float)
    k_in = k_in / np.linalg.norm(k_in)
    k = 2.0 * np.pi / wavelength
    Q = k * (k_in[None, :] - d)

    if ensemble is None:
        members = [array]
    else:
        seeds = [int(s) for s in ensemble]
        if not seeds:
            raise DomainError("ensemble must contain at least one seed")
        members = (array.regenerate(s) for s in seeds)

    values = []
    n_atoms = []
    used_seeds = []
    for member in members:
        values.append(structure_factor(member, Q, method=method, threads=threads))
        n_atoms.append(member.n_atoms)
        used_seeds.append(member.seed)
    values = np.array(values)
    n_mean = float(np.mean(n_atoms))
    r = len(values)
    s_mean = values.mean(axis=0)
    s_err = values.std(axis=0, ddof=1) / np.sqrt(r) if r > 1 else np.full(len(Q), np.nan)
    flag = bragg_distance(Q, array.spacing, k) < bragg_margin * n_mean ** (-1.0 / 3.0)
    return StructureFactorScan(
        directions=d,
        Q=Q,
        s_mean=s_mean,
        s_stderr=s_err,
        bragg_flag=flag,
        n_realizations=r,
        n_atoms_mean=n_mean,
        seeds=tuple(used_seeds),
        array_description=array.shape.describe(),
    )
