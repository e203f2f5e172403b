import numpy as np
import pytest

from emdlsh.core import (
    HYPERCUBE,
    REAL,
    Matching,
    PointSet,
    chamfer,
    emd_bruteforce,
    emd_exact,
    greedy_matching_cost,
    ground_distance,
)
from emdlsh.rng import stream


def random_point(rng, s, d, mode=HYPERCUBE, delta=8):
    if mode == HYPERCUBE:
        return PointSet(rng.integers(0, 2, size=(s, d)), mode)
    if mode == "grid":
        return PointSet(rng.integers(1, delta + 1, size=(s, d)), mode)
    return PointSet(rng.normal(size=(s, d)), REAL)


def test_ground_distance_basics():
    assert ground_distance((0, 0, 0), (0, 0, 0), p=1) == 0
    assert ground_distance((1, 0, 1), (0, 0, 1), p=1) == 1
    assert ground_distance((3, 4), (0, 0), p=2) == pytest.approx(5.0)


def test_ground_distance_rejects_mismatch():
    with pytest.raises(ValueError):
        ground_distance((1, 0), (1, 0, 1))
    with pytest.raises(ValueError):
        ground_distance((1, 0), (0, 1), p=3.0)


def test_emd_identity_and_forced_matching():
    rng = stream(7, "core", "identity")
    x = random_point(rng, 4, 6)
    assert emd_exact(x, x).cost == 0
    a = PointSet([[0, 1, 1]])
    b = PointSet([[1, 1, 0]])
    m = emd_exact(a, b)
    assert m.cost == 2
    assert m.permutation == (0,)


def test_emd_shape_mismatch_rejected():
    a = PointSet([[0, 1], [1, 0]])
    b = PointSet([[0, 1, 1], [1, 0, 0]])
    with pytest.raises(ValueError):
        emd_exact(a, b)


def test_matching_validates_permutation():
    with pytest.raises(ValueError):
        Matching(permutation=(0, 0), cost=1.0)
    with pytest.raises(ValueError):
        Matching(permutation=(0, 1), cost=-1.0)


def test_bruteforce_trivial_cases():
    x = PointSet([[0, 0], [1, 1]])
    y = PointSet([[1, 1], [0, 0]])
    assert emd_bruteforce(x, y) == 0
    x = PointSet([[0, 0], [0, 0]])
    y = PointSet([[1, 0], [0, 1]])
    assert emd_bruteforce(x, y) == 2


def test_bruteforce_size_guard():
    rng = stream(7, "core", "guard")
    x = random_point(rng, 9, 4)
    y = random_point(rng, 9, 4)
    with pytest.raises(ValueError):
        emd_bruteforce(x, y)


@pytest.mark.parametrize("mode", [HYPERCUBE, "grid", REAL])
def test_exact_matches_bruteforce(mode):
    rng = stream(11, "core", "cross", mode)
    for trial in range(60):
        s = int(rng.integers(2, 7))
        d = int(rng.integers(2, 9))
        x = random_point(rng, s, d, mode)
        y = random_point(rng, s, d, mode)
        exact = emd_exact(x, y).cost
        brute = emd_bruteforce(x, y)
        if mode == REAL:
            assert exact == pytest.approx(brute, rel=1e-9)
        else:
            assert exact == brute


def test_emd_symmetry_and_triangle():
    rng = stream(13, "core", "triangle")
    for _ in range(200):
        s, d = 3, 6
        x = random_point(rng, s, d)
        y = random_point(rng, s, d)
        z = random_point(rng, s, d)
        dxy = emd_exact(x, y).cost
        assert dxy == emd_exact(y, x).cost
        dxz = emd_exact(x, z).cost
        dyz = emd_exact(y, z).cost
        assert dxz <= dxy + dyz + 1e-9


def test_chamfer_against_naive_scan():
    rng = stream(17, "core", "chamfer")
    for _ in range(40):
        x = random_point(rng, 6, 5)
        omega = rng.integers(0, 2, size=(int(rng.integers(1, 9)), 5))
        naive = sum(min(float(np.abs(a.astype(int) - w).sum()) for w in omega)
                    for a in x.elements)
        assert chamfer(x, omega) == pytest.approx(naive)


def test_chamfer_trivial_and_errors():
    x = PointSet([[0, 0], [1, 1]])
    assert chamfer(x, x.elements) == 0
    assert chamfer(x, np.array([[0, 0]])) == 2
    with pytest.raises(ValueError):
        chamfer(x, np.empty((0, 2)))


def test_chamfer_lower_bounds_emd():
    rng = stream(19, "core", "chamfer-lb")
    for _ in range(50):
        x = random_point(rng, 4, 6)
        y = random_point(rng, 4, 6)
        omega = np.concatenate([y.elements, rng.integers(0, 2, size=(3, 6))])
        assert chamfer(x, omega) <= emd_exact(x, y).cost


def test_greedy_upper_bounds_exact():
    rng = stream(23, "core", "greedy")
    x1 = random_point(rng, 3, 5)
    assert greedy_matching_cost(x1, x1) == 0
    a = PointSet([[0, 1, 1, 0]])
    b = PointSet([[1, 1, 0, 0]])
    assert greedy_matching_cost(a, b) == 2
    for _ in range(50):
        x = random_point(rng, 5, 6)
        y = random_point(rng, 5, 6)
        assert greedy_matching_cost(x, y) >= emd_exact(x, y).cost


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet([[0, 2]], HYPERCUBE)
    with pytest.raises(ValueError):
        PointSet([[0, 1]], "weird")
    with pytest.raises(ValueError):
        PointSet(np.empty((0, 3)))
