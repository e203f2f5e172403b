import itertools

import numpy as np
import pytest

from emdlsh.core import GRID, PointSet, emd_exact
from emdlsh.dind import DataIndHash, dind_eval, sample_dind_hash
from emdlsh.rng import stream, stream_key, prf_uniform


def test_level_zero_samples_single_coordinate():
    h = sample_dind_hash(width=10.0, level=0, seed=3, d=16)
    assert h.counts.sum() == 1
    assert len(h.mask) == 1


def test_same_seed_same_hash():
    x = PointSet(np.array([[0, 1, 0, 1], [1, 1, 0, 0]], dtype=np.uint8))
    y = PointSet(np.array([[0, 1, 1, 1], [1, 0, 0, 0]], dtype=np.uint8))
    for level in (0, 1, 2):
        h1 = sample_dind_hash(width=5.0, level=level, seed=9, d=4)
        h2 = sample_dind_hash(width=5.0, level=level, seed=9, d=4)
        assert dind_eval(h1, x) == dind_eval(h2, x)
        assert (dind_eval(h1, x) == dind_eval(h1, y)) == \
            (dind_eval(h2, x) == dind_eval(h2, y))


def test_validation():
    with pytest.raises(ValueError):
        sample_dind_hash(width=0.0, level=0, seed=1, d=8)
    with pytest.raises(ValueError):
        sample_dind_hash(width=1.0, level=99, seed=1, d=8)
    h = sample_dind_hash(width=1.0, level=0, seed=1, d=8)
    with pytest.raises(ValueError):
        dind_eval(h, PointSet(np.zeros((1, 4), dtype=np.uint8)))


def test_identical_points_collide():
    rng = stream(7, "dind", "identical")
    x = PointSet(rng.integers(0, 2, size=(3, 12)))
    for level in range(4):
        h = sample_dind_hash(width=8.0, level=level, seed=int(rng.integers(2**62)),
                             d=12)
        assert dind_eval(h, x) == dind_eval(h, x)


def test_multiplicity_and_projected_multiset_collisions():
    # same projected pattern multiset => same bucket, always
    h = sample_dind_hash(width=4.0, level=1, seed=11, d=6)
    mask = h.mask
    a = np.zeros(6, dtype=np.uint8)
    b = np.ones(6, dtype=np.uint8)
    b[mask] = a[mask]  # agree on every sampled coordinate
    x = PointSet(np.stack([a, a]))
    y = PointSet(np.stack([b, b]))
    assert dind_eval(h, x) == dind_eval(h, y)
    # duplicates increment multiplicity: {a, a} vs {a, b'} differ when b' splits
    c = a.copy()
    c[mask[0]] ^= 1
    z = PointSet(np.stack([a, c]))
    evals = []
    for seed in range(200):
        hh = sample_dind_hash(width=0.5, level=1, seed=seed, d=6)
        evals.append(dind_eval(hh, PointSet(np.stack([a, a])))
                     == dind_eval(hh, z))
    assert not all(evals)


def test_eval_order_has_no_effect():
    rng = stream(13, "dind", "order")
    h = sample_dind_hash(width=6.0, level=2, seed=21, d=10)
    x = PointSet(rng.integers(0, 2, size=(3, 10)))
    y = PointSet(rng.integers(0, 2, size=(3, 10)))
    first = (dind_eval(h, x), dind_eval(h, y))
    h2 = sample_dind_hash(width=6.0, level=2, seed=21, d=10)
    second = (dind_eval(h2, y), dind_eval(h2, x))
    assert first == (second[1], second[0])


def test_coordinate_histogram_uniform():
    d, trials = 8, 100_000
    counts = np.zeros(d)
    for seed in range(trials):
        h = sample_dind_hash(width=3.0, level=0, seed=seed, d=d)
        counts[h.mask[0]] += 1
    expected = trials / d
    sigma = np.sqrt(trials * (1 / d) * (1 - 1 / d))
    assert (np.abs(counts - expected) <= 3 * sigma).all()


def test_separation_law_smoke():
    # Pr[split] <= EMD / width at a couple of levels (full sweep in acceptance)
    rng = stream(17, "dind", "law")
    d, s, width, trials = 32, 3, None, 10_000
    x = PointSet(rng.integers(0, 2, size=(s, d)))
    y = PointSet(x.elements.copy())
    flat = y.elements.copy()
    flat[0, :2] ^= 1  # EMD = 2
    y = PointSet(flat)
    dist = emd_exact(x, y).cost
    width = dist * 10.0
    for level in (0, 3):
        splits = 0
        for t in range(trials):
            h = sample_dind_hash(width=width, level=level, seed=t * 7 + level, d=d)
            if dind_eval(h, x) != dind_eval(h, y):
                splits += 1
        bound = dist / width
        sigma = np.sqrt(bound * (1 - bound) / trials)
        assert splits / trials <= bound + 3 * sigma


def exact_collision_probability(x, y, width, d, level, bern_p):
    """Enumerate ordered projections; Pr[collide] = E[(1-p)^{|Z|}]."""
    total = 0.0
    coords = list(itertools.product(range(d), repeat=2**level))
    for proj in coords:
        cx, cy = {}, {}
        for a in x.elements:
            u = tuple(a[list(proj)])
            cx[u] = cx.get(u, 0) + 1
        for b in y.elements:
            u = tuple(b[list(proj)])
            cy[u] = cy.get(u, 0) + 1
        z = sum(abs(cx.get(u, 0) - cy.get(u, 0)) for u in set(cx) | set(cy))
        total += (1 - bern_p) ** z
    return total / len(coords)


def test_collision_probability_matches_enumeration():
    d, level, width = 4, 1, 3.0
    x = PointSet(np.array([[0, 1, 0, 1], [1, 1, 0, 0]], dtype=np.uint8))
    y = PointSet(np.array([[0, 1, 1, 1], [1, 1, 0, 0]], dtype=np.uint8))
    p = min(1.0, d / (width * 2 ** (level + 1)))
    exact = exact_collision_probability(x, y, width, d, level, p)
    trials = 20_000
    hits = sum(dind_eval(h, x) == dind_eval(h, y)
               for h in (sample_dind_hash(width, level, seed, d)
                         for seed in range(trials)))
    rate = hits / trials
    sigma = np.sqrt(exact * (1 - exact) / trials)
    assert abs(rate - exact) <= 3 * sigma


def test_grid_mode_rides_lazy_unary():
    x = PointSet(np.array([[3, 5], [1, 2]]), GRID)
    y = PointSet(np.array([[3, 5], [1, 2]]), GRID)
    h = sample_dind_hash(width=4.0, level=2, seed=3, d=2, mode=GRID, delta=8)
    assert dind_eval(h, x) == dind_eval(h, y)
    far = PointSet(np.array([[8, 8], [8, 8]]), GRID)
    splits = 0
    trials = 400
    for seed in range(trials):
        hh = sample_dind_hash(width=100.0, level=2, seed=seed, d=2,
                              mode=GRID, delta=8)
        if dind_eval(hh, x) != dind_eval(hh, far):
            splits += 1
    dist = emd_exact(x, far).cost
    bound = dist / 100.0
    assert splits / trials <= bound + 3 * np.sqrt(bound * (1 - bound) / trials)
