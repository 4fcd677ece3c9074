import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import count_sphere_sites

from atomscatter import Cube, DefectSpec, DomainError, EmptyArrayError, Sphere, generate
from atomscatter import lattice as lat

A = 532e-9


def test_cube_count():
    arr = generate(Cube(10), A, DefectSpec(0.0), seed=1)
    assert arr.n_atoms == 1000
    assert arr.n_sites == 1000


def test_sphere_count_matches_enumeration():
    arr = generate(Sphere(19.3), A, seed=0)
    assert arr.n_atoms == count_sphere_sites(19.3)
    assert arr.n_atoms == pytest.approx(4 / 3 * np.pi * 19.3**3, rel=0.02)
    assert arr.n_atoms == pytest.approx(30_000, rel=0.02)


def test_all_holes_is_an_error():
    with pytest.raises(EmptyArrayError):
        generate(Cube(4), A, DefectSpec(1.0), seed=0)


@pytest.mark.parametrize("spacing", [0.0, -1e-7])
def test_bad_spacing(spacing):
    with pytest.raises(DomainError):
        generate(Cube(3), spacing)


@pytest.mark.parametrize("h", [-0.1, 1.5])
def test_bad_hole_probability(h):
    with pytest.raises(DomainError):
        DefectSpec(h)


def test_reproducible():
    spec = DefectSpec(0.1, ((3.0, 3), (6.0, 2)))
    a = generate(Sphere(9.5, jitter=True), A, spec, seed=2**63 + 5)
    b = generate(Sphere(9.5, jitter=True), A, spec, seed=2**63 + 5)
    assert a == b
    assert lat.dumps(a) == lat.dumps(b)
    c = generate(Sphere(9.5, jitter=True), A, spec, seed=6)
    assert a != c


def test_invariants():
    arr = generate(Sphere(8.2, center=(0.3, -0.1, 0.2)), A, DefectSpec(0.2), seed=4)
    assert arr.n_atoms == arr.occupations.sum()
    assert len({tuple(i) for i in arr.indices.tolist()}) == arr.n_occupied
    r = np.linalg.norm(arr.indices - np.array(arr.center), axis=1)
    assert np.all(r <= 8.2)
    assert set(np.unique(arr.occupations)) <= {1, 2, 3}


def test_hole_fraction_over_seeds():
    h = 0.07
    fractions = [generate(Cube(12), A, DefectSpec(h), seed=s).hole_fraction for s in range(100)]
    n_sites = 12**3
    stderr = np.sqrt(h * (1 - h) / (n_sites * len(fractions)))
    assert abs(np.mean(fractions) - h) < 3 * stderr


@pytest.mark.parametrize("shape", [Sphere(7.7), Cube(9)])
def test_mirror_symmetry(shape):
    arr = generate(shape, A, seed=0)
    sites = {tuple(i) for i in arr.indices.tolist()}
    assert sites == {tuple(i) for i in (-arr.indices).tolist()}


def test_shells_innermost_highest():
    arr = generate(Sphere(12.0), A, DefectSpec(0.0, ((4.0, 3), (8.0, 2))), seed=0)
    r = np.linalg.norm(arr.indices, axis=1)
    assert np.all(arr.occupations[r <= 4] == 3)
    assert np.all(arr.occupations[(r > 4) & (r <= 8)] == 2)
    assert np.all(arr.occupations[r > 8] == 1)
    assert arr.n_atoms > arr.n_occupied


def test_jitter_moves_center_within_cell():
    arr = generate(Sphere(5.0, jitter=True), A, seed=9)
    assert all(-0.5 <= c < 0.5 for c in arr.center)
    assert arr.center != (0.0, 0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(
    radius=st.floats(1.0, 8.0), h=st.floats(0.0, 0.6),
    seed=st.integers(0, 2**64 - 1), jitter=st.booleans(),
    shells=st.lists(st.tuples(st.floats(0.5, 8.0), st.integers(1, 3)), max_size=2),
)
def test_text_round_trip(tmp_path_factory, radius, h, seed, jitter, shells):
    try:
        arr = generate(Sphere(radius, jitter=jitter), 532.1e-9, DefectSpec(h, tuple(shells)), seed)
    except EmptyArrayError:
        return
    text = lat.dumps(arr)
    back = lat.loads(text)
    assert back == arr
    assert lat.dumps(back) == text
    path = tmp_path_factory.mktemp("lat") / "a.txt"
    lat.save(arr, path)
    assert lat.load(path) == arr


def test_format_rejects_garbage():
    with pytest.raises(ValueError, match="header"):
        lat.loads("hello\n")
    good = lat.dumps(generate(Cube(2), A))
    with pytest.raises(ValueError, match="line"):
        lat.loads(good + "1 2\n")
