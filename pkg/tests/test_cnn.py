import itertools

import numpy as np
import pytest

from citation_mil.bags import NEGATIVE, POSITIVE, Dataset, FeatureSubset
from citation_mil.cnn import (
    CnnParams,
    classify_from_matrix,
    cnn_classify,
    find_citers,
    find_references,
    score_counts,
)
from citation_mil.errors import ContractError
from citation_mil.hausdorff import DistanceCache, DistanceMatrix, build_distance_matrix
from conftest import make_bag, naive_hausdorff


def _matrix(block, test_row):
    return DistanceMatrix.from_parts(np.asarray(block, dtype=float), np.asarray(test_row, dtype=float))


def test_references_sort_and_count():
    block = np.zeros((3, 3))
    matrix = _matrix(block, [1.0, 2.0, 3.0])
    assert find_references(matrix, [POSITIVE, POSITIVE, NEGATIVE], 2) == (2, 0)
    assert find_references(matrix, [POSITIVE, POSITIVE, NEGATIVE], 3) == (2, 1)


def test_references_break_ties_by_index():
    matrix = _matrix(np.zeros((2, 2)), [1.0, 1.0])
    assert find_references(matrix, [POSITIVE, NEGATIVE], 1) == (1, 0)


def test_single_training_bag_always_cites():
    matrix = _matrix([[0.0]], [42.0])
    assert find_citers(matrix, [NEGATIVE], 1) == (0, 1)


def test_close_test_bag_is_cited_by_everyone():
    block = np.full((3, 3), 10.0)
    np.fill_diagonal(block, 0.0)
    matrix = _matrix(block, [1.0, 1.0, 1.0])
    assert find_citers(matrix, [POSITIVE, POSITIVE, NEGATIVE], 1) == (2, 1)


def test_far_test_bag_has_no_citers():
    block = np.full((3, 3), 10.0)
    np.fill_diagonal(block, 0.0)
    matrix = _matrix(block, [1e9, 1e9, 1e9])
    assert find_citers(matrix, [POSITIVE, POSITIVE, NEGATIVE], 1) == (0, 0)


def test_score_is_inclusive_at_theta():
    assert score_counts((2, 1, 1, 0)) == 0.75
    block = np.full((4, 4), 1.0)
    np.fill_diagonal(block, 0.0)
    # references: bags 0 and 1; citers: bags 0 and 1 only
    matrix = _matrix(block, [0.5, 0.5, 2.0, 2.0])
    params = CnnParams(2, 1, 1, FeatureSubset((0,)), 0.5)
    prediction = classify_from_matrix(matrix, [POSITIVE, NEGATIVE, POSITIVE, NEGATIVE], params)
    assert prediction.counts == (1, 1, 1, 1)
    assert prediction.score == 0.5
    assert prediction.label == POSITIVE


def test_two_near_positives_win():
    train = Dataset(
        (
            make_bag("p0", [[0.0]], POSITIVE),
            make_bag("p1", [[0.2]], POSITIVE),
            make_bag("n0", [[9.0]], NEGATIVE),
        ),
        1,
    )
    params = CnnParams(2, 2, 1, FeatureSubset((0,)), 0.5)
    prediction = cnn_classify(train, params, make_bag("q", [[0.1]]))
    assert prediction.label == POSITIVE
    assert prediction.counts[:2] == (2, 0)


def test_params_validation():
    with pytest.raises(ContractError):
        CnnParams(0, 1, 1, FeatureSubset((0,)), 0.5)
    with pytest.raises(ContractError):
        CnnParams(1, 1, 1, FeatureSubset((0,)), 1.0)
    params = CnnParams(3, 1, 1, FeatureSubset((0,)), 0.5)
    with pytest.raises(ContractError):
        params.check(3)


def test_params_round_trip():
    params = CnnParams(3, 2, 4, FeatureSubset((0, 5, 7)), 0.35)
    assert CnnParams.from_dict(params.to_dict()) == params


def test_dimensionality_mismatch(toy4):
    params = CnnParams(1, 1, 1, FeatureSubset((0,)), 0.5)
    with pytest.raises(ContractError):
        cnn_classify(toy4, params, make_bag("q", [[0.0, 1.0]]))


def test_raising_theta_only_flips_positive_to_negative(separable12):
    test = make_bag("q", [[0.5, 0.02]])
    labels = []
    for theta in (0.1, 0.3, 0.5, 0.7, 0.9):
        params = CnnParams(5, 5, 1, FeatureSubset((0, 1)), theta)
        labels.append(cnn_classify(separable12, params, test).label)
    flips = [a for a, b in zip(labels, labels[1:]) if a != b]
    assert all(a == POSITIVE for a in flips)


def _naive_cnn(h_train, h_test, labels, eta_r, eta_c, theta):
    t = len(labels)
    references = sorted(range(t), key=lambda j: (h_test[j], j))[:eta_r]
    ref_pos = sum(1 for j in references if labels[j] == POSITIVE)
    ref_neg = eta_r - ref_pos
    cite_pos = cite_neg = 0
    for i in range(t):
        # the test bag ranks after training bags at equal distance
        ranked = sorted([(h_train[i][j], 0, j) for j in range(t) if j != i] + [(h_test[i], 1, -1)])
        position = next(p for p, entry in enumerate(ranked) if entry[1] == 1)
        if position < eta_c:
            if labels[i] == POSITIVE:
                cite_pos += 1
            else:
                cite_neg += 1
    total = ref_pos + ref_neg + cite_pos + cite_neg
    score = 0.0 if total == 0 else (ref_pos + cite_pos) / total
    counts = (ref_pos, ref_neg, cite_pos, cite_neg)
    return (POSITIVE if total and score >= theta else NEGATIVE), score, counts


def test_matches_naive_implementation():
    rng = np.random.default_rng(77)
    for _ in range(200):
        t = int(rng.integers(2, 9))
        bags = tuple(
            make_bag(f"b{i}", rng.integers(0, 6, size=(int(rng.integers(1, 4)), 1)).astype(float),
                     POSITIVE if rng.random() < 0.5 else NEGATIVE)
            for i in range(t)
        )
        train = Dataset(bags, 1)
        test = make_bag("q", rng.integers(0, 6, size=(int(rng.integers(1, 4)), 1)).astype(float))
        labels = [bag.label for bag in bags]
        cache = DistanceCache()
        for d in (1, 2, 3):
            h_train = [[naive_hausdorff(a, b, d, (0,)) for b in bags] for a in bags]
            h_test = [naive_hausdorff(test, b, d, (0,)) for b in bags]
            limit = min(3, t - 1)
            for eta_r, eta_c in itertools.product(range(1, limit + 1), repeat=2):
                for theta in (0.25, 0.5, 0.75):
                    params = CnnParams(eta_r, eta_c, d, FeatureSubset((0,)), theta)
                    prediction = cnn_classify(train, params, test, cache)
                    label, score, counts = _naive_cnn(h_train, h_test, labels, eta_r, eta_c, theta)
                    assert (prediction.label, prediction.score) == (label, score)
                    assert prediction.counts == counts
                    assert prediction.counts[0] + prediction.counts[1] == eta_r
                    assert prediction.counts[2] + prediction.counts[3] <= t


def _with_copy_of(train, index):
    source = train.bags[index]
    return Dataset(train.bags + (make_bag("copy", source.instances, source.label),), train.dimensionality)


def test_copying_nearest_positive_reference_keeps_positive_references():
    rng = np.random.default_rng(31)
    s = FeatureSubset((0,))
    checked = 0
    while checked < 200:
        t = int(rng.integers(3, 9))
        bags = tuple(
            make_bag(f"b{i}", rng.integers(0, 8, size=(int(rng.integers(1, 4)), 1)).astype(float),
                     POSITIVE if rng.random() < 0.5 else NEGATIVE)
            for i in range(t)
        )
        train = Dataset(bags, 1)
        test = make_bag("q", rng.integers(0, 8, size=(int(rng.integers(1, 4)), 1)).astype(float))
        d = int(rng.integers(1, 4))
        eta_r = int(rng.integers(1, t))
        references = np.argsort(build_distance_matrix(train, test, d, s).test_row, kind="stable")[:eta_r]
        positives = [int(j) for j in references if bags[j].label == POSITIVE]
        if not positives:
            continue
        params = CnnParams(eta_r, 1, d, s, 0.5)
        before = cnn_classify(train, params, test).counts
        after = cnn_classify(_with_copy_of(train, positives[0]), params, test).counts
        assert after[0] >= before[0]
        assert after[0] + after[1] == eta_r
        checked += 1


def test_copying_a_reference_can_crowd_out_citers():
    train = Dataset(
        (
            make_bag("p", [[1.5]], POSITIVE),
            make_bag("r", [[2.0]], POSITIVE),
            make_bag("n", [[100.0]], NEGATIVE),
        ),
        1,
    )
    params = CnnParams(1, 2, 1, FeatureSubset((0,)), 0.5)
    test = make_bag("q", [[0.0]])
    assert cnn_classify(train, params, test).counts == (1, 0, 2, 0)
    # the copy sits inside both positive neighbourhoods, pushing the test bag out
    assert cnn_classify(_with_copy_of(train, 0), params, test).counts == (1, 0, 0, 0)
