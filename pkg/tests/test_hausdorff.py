import itertools

import numpy as np
import pytest

from citation_mil.bags import Dataset, FeatureSubset
from citation_mil.errors import ContractError
from citation_mil.hausdorff import (
    DistanceCache,
    bag_distance_block,
    build_distance_matrix,
    directed_rank_hausdorff,
    instance_distance,
    rank_hausdorff,
)
from conftest import make_bag, naive_directed, naive_distance, naive_hausdorff


def test_instance_distance_examples():
    assert instance_distance([0.0, 0.0], [3.0, 4.0], (0, 1)) == 5.0
    assert instance_distance([1.0, 9.0], [4.0, 9.0], (0,)) == 3.0
    assert instance_distance([2.5, -1.0], [2.5, -1.0], (1,)) == 0.0


def test_instance_distance_rejects_empty_subset():
    with pytest.raises(ContractError):
        instance_distance([0.0], [1.0], ())


def test_directed_rank_examples():
    a = make_bag("a", [[0.0], [10.0]])
    b = make_bag("b", [[0.0]])
    s = FeatureSubset((0,))
    assert directed_rank_hausdorff(a, b, 2, s) == 10.0
    assert directed_rank_hausdorff(a, b, 1, s) == 0.0
    c = make_bag("c", [[0.0], [4.0], [9.0]])
    d = make_bag("d", [[1.0]])
    assert directed_rank_hausdorff(c, d, 2, s) == 3.0


def test_rank_hausdorff_examples():
    a = make_bag("a", [[0.0], [10.0]])
    b = make_bag("b", [[0.0]])
    s = FeatureSubset((0,))
    assert rank_hausdorff(a, b, 1, s) == 0.0
    assert rank_hausdorff(a, b, 2, s) == 10.0
    assert rank_hausdorff(a, a, 2, s) == 0.0


def test_rank_is_clamped_to_bag_size():
    a = make_bag("a", [[0.0], [4.0], [9.0]])
    b = make_bag("b", [[1.0]])
    s = FeatureSubset((0,))
    assert directed_rank_hausdorff(a, b, 3, s) == directed_rank_hausdorff(a, b, 50, s)


def test_distance_matrix_single_pair():
    train = Dataset((make_bag("t", [[0.0]]),), 1)
    matrix = build_distance_matrix(train, make_bag("q", [[3.0]]), 1, (0,))
    assert matrix.values.tolist() == [[0.0], [3.0]]


def test_distance_matrix_identical_bags_is_zero():
    train = Dataset((make_bag("a", [[1.0, 2.0]]), make_bag("b", [[1.0, 2.0]])), 2)
    matrix = build_distance_matrix(train, make_bag("q", [[1.0, 2.0]]), 1, (0, 1))
    assert not matrix.values.any()


def test_dimensionality_mismatch_is_rejected():
    train = Dataset((make_bag("a", [[1.0, 2.0]]),), 2)
    with pytest.raises(ContractError):
        build_distance_matrix(train, make_bag("q", [[1.0]]), 1, (0,))


def _random_bag(rng, name, m):
    return make_bag(name, rng.normal(size=(int(rng.integers(1, 7)), m)))


def _all_subsets(m):
    for size in range(1, m + 1):
        yield from itertools.combinations(range(m), size)


def test_matches_brute_force_oracle_bitwise():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 1000:
        m = int(rng.integers(1, 5))
        a, b = _random_bag(rng, "a", m), _random_bag(rng, "b", m)
        subsets = list(_all_subsets(m))
        s = subsets[int(rng.integers(len(subsets)))]
        for d in range(1, max(a.size, b.size) + 1):
            assert directed_rank_hausdorff(a, b, d, s) == naive_directed(a, b, d, s)
            assert rank_hausdorff(a, b, d, s) == naive_hausdorff(a, b, d, s)
        checked += 1


def test_block_is_symmetric_and_matches_pairwise():
    rng = np.random.default_rng(5)
    data = Dataset(tuple(_random_bag(rng, f"b{i}", 3) for i in range(5)), 3)
    cache = DistanceCache()
    s = FeatureSubset((0, 2))
    for d in (1, 2, 3):
        block = bag_distance_block(data, d, s, cache)
        assert np.array_equal(block, block.T)
        assert not np.diag(block).any()
        for i, j in itertools.combinations(range(5), 2):
            assert block[i, j] == rank_hausdorff(data.bags[i], data.bags[j], d, s)
    assert cache.misses == 1 and cache.hits == 2


def test_query_row_matches_pairwise():
    rng = np.random.default_rng(11)
    data = Dataset(tuple(_random_bag(rng, f"b{i}", 2) for i in range(4)), 2)
    test = _random_bag(rng, "q", 2)
    matrix = build_distance_matrix(data, test, 2, (0, 1))
    assert matrix.n_train == 4
    for j, bag in enumerate(data.bags):
        assert matrix.test_row[j] == rank_hausdorff(test, bag, 2, (0, 1))


def test_rank_is_non_decreasing():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = _random_bag(rng, "a", 2), _random_bag(rng, "b", 2)
        values = [directed_rank_hausdorff(a, b, d, (0, 1)) for d in range(1, a.size + 1)]
        assert values == sorted(values)


def _classic_directed(a, b, s):
    return max(min(naive_distance(x, y, s) for y in b.instances) for x in a.instances)


def test_rank_ends_are_minimal_and_classic_distances():
    rng = np.random.default_rng(17)
    for _ in range(100):
        a, b = _random_bag(rng, "a", 3), _random_bag(rng, "b", 3)
        s = (0, 1, 2)
        closest = min(naive_distance(x, y, s) for x in a.instances for y in b.instances)
        assert directed_rank_hausdorff(a, b, 1, s) == closest
        assert directed_rank_hausdorff(a, b, a.size, s) == _classic_directed(a, b, s)


def test_fewer_coordinates_never_increase_distance():
    rng = np.random.default_rng(9)
    for _ in range(100):
        x, y = rng.normal(size=4), rng.normal(size=4)
        assert instance_distance(x, y, (1, 3)) <= instance_distance(x, y, (0, 1, 3))
