import numpy as np
import pytest

from emdlsh.core import Dataset, PointSet, emd_exact
from emdlsh.ann import (
    AnnIndex,
    QueryStats,
    build_index,
    core_preprocess,
    core_query,
    query,
    query_with_stats,
)
from emdlsh.rng import stream


def small_dataset(rng, n, s, d):
    return Dataset(tuple(PointSet(rng.integers(0, 2, size=(s, d)))
                         for _ in range(n)))


def count_point_refs(node):
    total = len(node.data) if node.is_leaf else 0
    for child in node.children.values():
        total += count_point_refs(child)
    return total + 1  # the stored v.point reference


def test_core_preprocess_k0_is_leaf():
    rng = stream(3, "ann", "k0")
    mu = small_dataset(rng, 5, 2, 8)
    node = core_preprocess(list(mu.points), list(range(5)), 0, 4.0, 0.8, 0.2, 7)
    assert node.is_leaf and sorted(node.data) == list(range(5))


def test_core_preprocess_singleton_chain():
    rng = stream(5, "ann", "single")
    mu = small_dataset(rng, 1, 2, 8)
    node = core_preprocess(list(mu.points), [0], 3, 4.0, 0.8, 0.2, 7)
    assert node.is_leaf  # singletons short-circuit to leaves
    assert node.data == [0]


def test_point_reference_budget():
    rng = stream(7, "ann", "refs")
    mu = small_dataset(rng, 12, 2, 16)
    k = 3
    node = core_preprocess(list(mu.points), list(range(12)), k, 4.0, 0.8, 0.2, 9)
    assert count_point_refs(node) <= 12 * (k + 1) + 12


def test_core_query_returns_near_point():
    rng = stream(9, "ann", "near")
    mu = small_dataset(rng, 6, 2, 8)
    node = core_preprocess(list(mu.points), list(range(6)), 2, 4.0, 0.8, 0.2, 11)
    q = mu.points[2]
    got = core_query(q, node, list(mu.points), accept_radius=0.0)
    # distance 0 to itself; any returned point must satisfy the filter
    if got is not None:
        assert emd_exact(got, q).cost <= 0.0


def test_core_query_leaf_fail():
    rng = stream(11, "ann", "fail")
    mu = small_dataset(rng, 4, 2, 8)
    node = core_preprocess(list(mu.points), list(range(4)), 0, 4.0, 0.8, 0.2, 3)
    far = PointSet(1 - mu.points[0].elements)
    stats = QueryStats()
    got = core_query(far, node, list(mu.points), accept_radius=0.5, stats=stats)
    if got is None:
        assert stats.leaf_scans == 3  # scanned everything but v.point
    else:
        assert emd_exact(got, far).cost <= 0.5


def test_build_index_parameters():
    rng = stream(13, "ann", "params")
    mu = small_dataset(rng, 20, 2, 16)
    index = build_index(mu, r=4.0, p1=0.8, p2=0.2, seed=5)
    assert index.k == int(np.ceil(np.log(20) / np.log(5)))
    assert (1 - 0.8**index.k) ** index.repetitions <= 0.1
    assert index.accept_radius > 0


def test_query_filter_is_explicit():
    # beyond the acceptance radius the index always fails
    rng = stream(17, "ann", "filter")
    mu = small_dataset(rng, 8, 2, 8)
    index = build_index(mu, r=4.0, p1=0.8, p2=0.2, seed=5, accept_radius=0.0)
    q = PointSet(1 - mu.points[0].elements)
    if all(emd_exact(p, q).cost > 0 for p in mu.points):
        assert query(index, q) is None


def test_query_succeeds_on_dataset_points():
    rng = stream(19, "ann", "hit")
    mu = small_dataset(rng, 10, 2, 12)
    index = build_index(mu, r=4.0, p1=0.8, p2=0.2, seed=23)
    for p in mu.points[:5]:
        got, stats = query_with_stats(index, p)
        assert got is not None
        assert emd_exact(got, p).cost <= index.accept_radius
        assert stats.trees_tried >= 1


def test_index_determinism():
    rng = stream(23, "ann", "det")
    mu = small_dataset(rng, 10, 2, 12)
    i1 = build_index(mu, r=4.0, p1=0.8, p2=0.2, seed=31, accept_radius=2.0)
    i2 = build_index(mu, r=4.0, p1=0.8, p2=0.2, seed=31, accept_radius=2.0)
    qs = [PointSet(rng.integers(0, 2, size=(2, 12))) for _ in range(10)]
    for q in qs:
        a1, s1 = query_with_stats(i1, q)
        a2, s2 = query_with_stats(i2, q)
        assert (a1 is None) == (a2 is None)
        if a1 is not None:
            assert a1 == a2
        assert (s1.point_checks, s1.leaf_scans) == (s2.point_checks, s2.leaf_scans)


@pytest.mark.parametrize("n,p1,p2", [(10, 0.8, 0.2), (200, 0.8, 0.2),
                                     (1000, 0.9, 0.3), (50, 0.6, 0.1)])
def test_forest_size_meets_success_target(n, p1, p2):
    # the numeric guard asserted at build time holds across parameter ranges
    k = max(1, int(np.ceil(np.log(n) / np.log(1 / p2))))
    reps = max(1, int(np.ceil(3 * n ** (np.log(1 / p1) / np.log(1 / p2)) / p1)))
    assert (1 - p1**k) ** reps <= 0.1
