"""Mott-insulator atom arrays on a simple cubic lattice.

Sites are integer index vectors; the position of site ``j`` is
``spacing * index_j``.  Arrays keep only occupied sites, with occupations
1-3; holes are simply absent.  Generation is deterministic in the seed.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, EmptyArrayError

FORMAT_TAG = "# atomscatter-lattice v1"


@dataclass(frozen=True)
class Cube:
    """``edge`` sites per side, indices centred on the origin."""

    edge: int

    def __post_init__(self):
        if int(self.edge) != self.edge or self.edge < 1:
            raise DomainError(f"cube edge must be a positive integer, got {self.edge!r}")

    def enumerate(self, rng=None):
        lo = -(self.edge // 2)
        g = np.arange(lo, lo + self.edge)
        idx = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        return idx, np.zeros(3)

    def describe(self) -> str:
        return f"cube edge={self.edge}"


@dataclass(frozen=True)
class Sphere:
    """Sites with ``|index - center| <= radius``.

    With ``jitter`` the centre is drawn uniformly from the unit cell around
    ``center`` for every seed, modelling the random placement of the sample
    relative to the lattice.
    """

    radius: float
    center: tuple = (0.0, 0.0, 0.0)
    jitter: bool = False

    def __post_init__(self):
        if not self.radius >= 0:
            raise DomainError(f"sphere radius must be >= 0, got {self.radius!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def enumerate(self, rng=None):
        center = np.array(self.center)
        if self.jitter:
            center = center + rng.uniform(-0.5, 0.5, size=3)
        n = int(np.ceil(self.radius)) + 1
        lo = np.floor(center).astype(int) - n
        axes = [np.arange(lo[i], lo[i] + 2 * n + 2) for i in range(3)]
        idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        inside = np.sum((idx - center) ** 2, axis=1) <= self.radius**2
        return idx[inside], center

    def describe(self) -> str:
        c = ",".join(repr(v) for v in self.center)
        return f"sphere radius={self.radius!r} center={c} jitter={int(self.jitter)}"


@dataclass(frozen=True)
class DefectSpec:
    """Independent holes plus optional multiply-occupied inner shells.

    ``shells`` is a sequence of ``(outer_radius, occupation)`` pairs in
    lattice units; a site takes the occupation of the innermost shell that
    contains it and 1 otherwise.
    """

    hole_probability: float = 0.0
    shells: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.hole_probability <= 1.0:
            raise DomainError(f"hole probability must lie in [0, 1], got {self.hole_probability!r}")
        shells = tuple(sorted((float(r), int(n)) for r, n in self.shells))
        for r, n in shells:
            if r < 0 or n not in (1, 2, 3):
                raise DomainError(f"invalid shell ({r}, {n}); occupation must be 1, 2 or 3")
        object.__setattr__(self, "shells", shells)

    def describe(self) -> str:
        return ",".join(f"{r!r}:{n}" for r, n in self.shells)


@dataclass(frozen=True, eq=False)
class AtomArray:
    spacing: float
    indices: np.ndarray
    occupations: np.ndarray
    shape: Cube | Sphere
    seed: int
    defect_spec: DefectSpec = field(default_factory=DefectSpec)
    n_sites: int = 0
    center: tuple = (0.0, 0.0, 0.0)

    @property
    def n_atoms(self) -> int:
        return int(self.occupations.sum())

    @property
    def n_occupied(self) -> int:
        return int(self.occupations.size)

    @property
    def hole_fraction(self) -> float:
        return 1.0 - self.n_occupied / self.n_sites

    @property
    def positions(self) -> np.ndarray:
        return self.spacing * self.indices

    def __eq__(self, other):
        if not isinstance(other, AtomArray):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.shape == other.shape
            and self.seed == other.seed
            and self.defect_spec == other.defect_spec
            and self.n_sites == other.n_sites
            and self.center == other.center
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.occupations, other.occupations)
        )

    def regenerate(self, seed: int) -> "AtomArray":
        """Another realisation with the same recipe and a different seed."""
        return generate(self.shape, self.spacing, self.defect_spec, seed)


def generate(shape: Cube | Sphere, spacing: float, defect_spec: DefectSpec | None = None,
             seed: int = 0) -> AtomArray:
    """Fill ``shape`` with atoms, then empty each site with the hole probability."""
    if not spacing > 0:
        raise DomainError(f"spacing must be positive, got {spacing!r}")
    defect_spec = defect_spec or DefectSpec()
    seed = int(seed)
    rng = np.random.default_rng(seed)
    idx, center = shape.enumerate(rng)
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
    idx = idx[order]

    occ = np.ones(len(idx), dtype=np.int64)
    if defect_spec.shells:
        r = np.sqrt(np.sum((idx - center) ** 2, axis=1))
        # outermost first so inner shells overwrite
        for radius, n in reversed(defect_spec.shells):
            occ[r <= radius] = n
    h = defect_spec.hole_probability
    if h > 0:
        occ[rng.random(len(idx)) < h] = 0

    keep = occ > 0
    if not keep.any():
        raise EmptyArrayError(
            f"no occupied sites ({shape.describe()}, hole probability {h:g}, seed {seed})"
        )
    return AtomArray(
        spacing=float(spacing),
        indices=idx[keep],
        occupations=occ[keep],
        shape=shape,
        seed=seed,
        defect_spec=defect_spec,
        n_sites=len(idx),
        center=tuple(float(c) for c in center),
    )


def dumps(array: AtomArray) -> str:
    out = io.StringIO()
    out.write(FORMAT_TAG + "\n")
    out.write(f"spacing_m {array.spacing!r}\n")
    out.write(f"shape {array.shape.describe()}\n")
    out.write(f"seed {array.seed}\n")
    out.write(f"hole_probability {array.defect_spec.hole_probability!r}\n")
    out.write(f"shells {array.defect_spec.describe()}\n")
    out.write("center " + ",".join(repr(c) for c in array.center) + "\n")
    out.write(f"n_sites {array.n_sites}\n")
    out.write(f"n_atoms {array.n_atoms}\n")
    out.write("# ix iy iz n\n")
    for (ix, iy, iz), n in zip(array.indices.tolist(), array.occupations.tolist()):
        out.write(f"{ix} {iy} {iz} {n}\n")
    return out.getvalue()


def _parse_kv(text: str) -> dict:
    kv = {}
    for token in text.split():
        key, _, value = token.partition("=")
        kv[key] = value
    return kv


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",")) if text else ()


def loads(text: str) -> AtomArray:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise ValueError("not an atomscatter lattice file (missing header tag)")
    header = {}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        if line[0].isalpha():
            key, _, value = line.partition(" ")
            header[key] = value.strip()
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'ix iy iz n', got {line!r}")
        rows.append([int(p) for p in parts])
    try:
        kind, _, rest = header["shape"].partition(" ")
        kv = _parse_kv(rest)
        if kind == "cube":
            shape = Cube(int(kv["edge"]))
        elif kind == "sphere":
            shape = Sphere(float(kv["radius"]), _floats(kv["center"]), bool(int(kv["jitter"])))
        else:
            raise ValueError(f"unknown shape {kind!r}")
        shells = []
        for item in filter(None, header.get("shells", "").split(",")):
            r, _, n = item.partition(":")
            shells.append((float(r), int(n)))
        spec = DefectSpec(float(header["hole_probability"]), tuple(shells))
        data = np.array(rows, dtype=np.int64).reshape(-1, 4)
        array = AtomArray(
            spacing=float(header["spacing_m"]),
            indices=data[:, :3].copy(),
            occupations=data[:, 3].copy(),
            shape=shape,
            seed=int(header["seed"]),
            defect_spec=spec,
            n_sites=int(header["n_sites"]),
            center=_floats(header["center"]),
        )
    except KeyError as exc:
        raise ValueError(f"lattice header is missing {exc.args[0]!r}") from None
    if array.n_atoms != int(header.get("n_atoms", array.n_atoms)):
        raise ValueError("n_atoms in header does not match the site list")
    return array


def save(array: AtomArray, path) -> None:
    Path(path).write_text(dumps(array))


def load(path) -> AtomArray:
    return loads(Path(path).read_text())
