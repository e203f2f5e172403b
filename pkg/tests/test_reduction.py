import numpy as np
import pytest

from emdlsh.core import REAL, PointSet, emd_exact
from emdlsh.reduction import (
    GridHash,
    ThresholdMap,
    grid_cells_batch,
    grid_hash_eval,
    lp_to_l1,
    sample_grid_hash,
    sample_threshold_map,
    threshold_map_apply,
)
from emdlsh.rng import stream


def test_lp_to_l1_identity_for_p1():
    pts = [PointSet(np.random.default_rng(0).normal(size=(3, 4)), REAL)]
    out = lp_to_l1(pts, p=1.0, eps=0.2)
    assert out[0] is pts[0]


def test_lp_to_l1_rejects_bad_p():
    pts = [PointSet(np.zeros((2, 4)), REAL)]
    with pytest.raises(ValueError):
        lp_to_l1(pts, p=2.5, eps=0.2)
    with pytest.raises(ValueError):
        lp_to_l1(pts, p=2.0, eps=1.5)


def test_lp_to_l1_duplicates_map_identically():
    rng = stream(3, "reduction", "dups")
    base = rng.normal(size=(1, 8))
    x = PointSet(np.repeat(base, 3, axis=0), REAL)
    (img,) = lp_to_l1([x], p=2.0, eps=0.3, seed=5)
    assert np.allclose(img.elements[0], img.elements[1])
    assert np.allclose(img.elements[0], img.elements[2])


def test_lp_to_l1_preserves_l2_distances():
    # Monte Carlo over the map's randomness; the scale factor is estimated
    # empirically, then at least 95% of pairs must land within (1 +- 0.25).
    rng = stream(7, "reduction", "jl")
    d = 32
    pairs = [(rng.normal(size=d), rng.normal(size=d)) for _ in range(100)]
    pts = [PointSet(np.stack(pair), REAL) for pair in pairs]
    images = lp_to_l1(pts, p=2.0, eps=0.2, seed=11)
    l2 = np.array([np.linalg.norm(a - b) for a, b in pairs])
    l1_img = np.array([np.abs(im.elements[0] - im.elements[1]).sum() for im in images])
    scale = np.median(l1_img / l2)
    ratio = l1_img / (scale * l2)
    assert np.mean((ratio > 0.75) & (ratio < 1.25)) >= 0.95
    # construction normalizes so the scale is close to 1
    assert 0.9 < scale < 1.1


def test_grid_hash_eval_matches_batch_and_same_vector():
    rng = stream(13, "reduction", "grid")
    g = sample_grid_hash(d=4, cell_width=10.0, rng=rng)
    a = rng.normal(size=4) * 5
    assert grid_hash_eval(g, a) == grid_hash_eval(g, a.copy())
    axes = np.array([g.axis])
    offs = np.array([g.offset])
    assert grid_cells_batch(axes, offs, g.cell_width, a)[0] == grid_hash_eval(g, a)


def test_grid_hash_offset_validation():
    with pytest.raises(ValueError):
        GridHash(axis=0, offset=11.0, cell_width=10.0)


def test_grid_hash_collision_law():
    # Pr[g(a) != g(b)] = |a-b|_1 / (d W) for |a-b|_1 <= W, within 3 binomial
    # sigma over 1e5 fresh draws of g.
    rng = stream(17, "reduction", "law")
    d, width, n = 2, 10.0, 100_000
    a = np.array([1.0, 2.0])
    b = np.array([3.0, 1.0])  # distance 3 <= width
    axes = rng.integers(0, d, size=n)
    offs = rng.uniform(0, width, size=n)
    rate = np.mean(grid_cells_batch(axes, offs, width, a)
                   != grid_cells_batch(axes, offs, width, b))
    expected = 3.0 / (d * width)
    sigma = np.sqrt(expected * (1 - expected) / n)
    assert abs(rate - expected) <= 3 * sigma


def test_grid_hash_far_coordinate_splits_often():
    # With one coordinate differing by more than the width, split probability
    # strictly exceeds 1/d.
    rng = stream(19, "reduction", "far")
    d, width, n = 4, 5.0, 100_000
    a = np.zeros(d)
    b = np.array([7.0, 1.0, 1.0, 0.0])
    axes = rng.integers(0, d, size=n)
    offs = rng.uniform(0, width, size=n)
    rate = np.mean(grid_cells_batch(axes, offs, width, a)
                   != grid_cells_batch(axes, offs, width, b))
    assert rate > 1.0 / d


def test_threshold_map_parameter_validation():
    with pytest.raises(ValueError):
        sample_threshold_map(s=2, c=3.0, tau=1.0, delta=0.1, seed=0, d=4)
    with pytest.raises(ValueError):
        sample_threshold_map(s=2, c=4.0, tau=1.0, delta=0.0, seed=0, d=4)
    with pytest.raises(ValueError):
        sample_threshold_map(s=2, c=4.0, tau=-1.0, delta=0.1, seed=0, d=4)


def small_map(seed=0, s=2, c=4.0, tau=1.0, delta=0.1, d=4, bits=64):
    """A down-sized map (trimmed bit count) for structural unit tests."""
    f = sample_threshold_map(s=s, c=c, tau=tau, delta=delta, seed=seed, d=d)
    assert bits <= f.bits
    return ThresholdMap(bits=bits, cell_width=f.cell_width,
                        image_radius=bits / (1.99 * c), approximation=c,
                        axes=f.axes[:bits], offsets=f.offsets[:bits], seed=seed)


def test_threshold_map_consistent_reevaluation():
    f = small_map()
    x = PointSet(np.array([[0.1, 0.5, -0.2, 1.4], [2.0, 0.0, 0.3, -1.0]]), REAL)
    first = threshold_map_apply(f, x)
    second = threshold_map_apply(f, x)
    assert first == second
    # single-element path agrees with the point-level path
    assert np.array_equal(f.apply_element(x.elements[0]), first.elements[0])


def test_threshold_map_duplicates_and_dimension():
    f = small_map()
    x = PointSet(np.array([[0.1, 0.5, -0.2, 1.4]] * 3), REAL)
    img = threshold_map_apply(f, x)
    assert img.s == 3 and img.d == f.bits
    assert np.array_equal(img.elements[0], img.elements[1])
    bad = PointSet(np.zeros((2, 5)), REAL)
    with pytest.raises(ValueError):
        threshold_map_apply(f, bad)


def test_threshold_map_per_bit_law():
    # For |a-b|_1 <= W the per-bit flip probability lies in
    # [dist/(4W), dist/(2W)] up to 3 sigma.
    f = small_map(seed=23, bits=16_000)
    a = np.array([0.0, 0.0, 0.0, 0.0])
    b = np.array([1.0, 0.5, 0.0, 0.5])  # distance 2, W = 4
    fa = f.apply_element(a)
    fb = f.apply_element(b)
    rate = np.mean(fa != fb)
    lo, hi = 2.0 / (4 * f.cell_width), 2.0 / (2 * f.cell_width)
    sigma = np.sqrt(hi * (1 - hi) / f.bits)
    assert lo - 3 * sigma <= rate <= hi + 3 * sigma


def test_threshold_map_separates_near_from_far():
    # Small-scale check of the near/far sensitivity (full-scale statistics
    # live in the acceptance suite).
    s, c, tau, d = 2, 4.0, 1.0, 6
    rng = stream(29, "reduction", "sep")
    base = rng.normal(size=(s, d))
    x = PointSet(base, REAL)
    shift = np.zeros((s, d))
    shift[0, 0] = tau
    y_near = PointSet(base + shift, REAL)
    y_far = PointSet(base + shift * c, REAL)
    assert emd_exact(x, y_near).cost == pytest.approx(tau)
    assert emd_exact(x, y_far).cost == pytest.approx(c * tau)
    hits_near = hits_far = 0
    trials = 30
    for t in range(trials):
        f = sample_threshold_map(s=s, c=c, tau=tau, delta=0.1, seed=1000 + t, d=d)
        ix, inear, ifar = (threshold_map_apply(f, p) for p in (x, y_near, y_far))
        if emd_exact(ix, inear).cost <= f.image_radius:
            hits_near += 1
        if emd_exact(ix, ifar).cost >= c * f.image_radius / 3:
            hits_far += 1
    assert hits_near >= trials - 3
    assert hits_far >= trials - 3
