"""
Rank-d (minimal) Hausdorff distances between bags.

The directed distance from bag A to bag B takes, for every point of A, its
minimum Euclidean distance to B (over the feature subset), sorts these
ascending and returns the min(d, |A|)-th value: d = 1 is the closest point
pair, d = |A| the classic max-min distance. The symmetric distance is the
max of both directions.

Squared coordinate differences are always accumulated in feature-index
order, so the pairwise functions and the cached matrix builders produce
bit-identical floats.
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .bags import FeatureSubset
from .errors import ContractError

logger = logging.getLogger(__name__)


def _subset(s, m):
    if not isinstance(s, FeatureSubset):
        s = FeatureSubset(tuple(s))
    s.check(m)
    return s


def _check_rank(d):
    if int(d) < 1:
        raise ContractError(f"rank d must be >= 1, got {d}")
    return int(d)


def pairwise_instance_distances(a, b, s):
    """Euclidean distances between rows of ``a`` and rows of ``b`` on subset ``s``."""
    acc = np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    for k in s:
        diff = a[:, k][:, None] - b[:, k][None, :]
        acc += diff * diff
    return np.sqrt(acc)


def instance_distance(a, b, s):
    """Euclidean distance between two instances restricted to feature subset ``s``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"instances differ in shape: {a.shape} vs {b.shape}")
    s = _subset(s, a.shape[0])
    return float(pairwise_instance_distances(a[None, :], b[None, :], s)[0, 0])


def _rank_pick(min_dists, d):
    """d-th smallest value (rank clamped to the number of values)."""
    ordered = np.sort(min_dists)
    return float(ordered[min(d, ordered.shape[0]) - 1])


def directed_rank_hausdorff(a, b, d, s):
    """h_(d)(a, b): the min(d, |a|)-th smallest of the per-point minimum distances."""
    d = _check_rank(d)
    if a.dimensionality != b.dimensionality:
        raise ContractError(f"bags {a.id!r} and {b.id!r} differ in dimensionality")
    s = _subset(s, a.dimensionality)
    min_dists = pairwise_instance_distances(a.instances, b.instances, s).min(axis=1)
    return _rank_pick(min_dists, d)


def rank_hausdorff(a, b, d, s):
    """H(a, b) = max(h_(d)(a, b), h_(d)(b, a))."""
    return max(directed_rank_hausdorff(a, b, d, s), directed_rank_hausdorff(b, a, d, s))


@dataclass(frozen=True)
class DistanceMatrix:
    """
    (T+1) x T matrix of bag distances: rows 0..T-1 hold train-train values,
    the last row holds the test bag's distance to every training bag.
    """

    values: np.ndarray

    @property
    def n_train(self):
        return self.values.shape[1]

    @property
    def train_block(self):
        return self.values[:-1]

    @property
    def test_row(self):
        return self.values[-1]

    @classmethod
    def from_parts(cls, train_block, test_row):
        return cls(np.vstack((train_block, np.asarray(test_row)[None, :])))


def _rank_rows(table, offsets, sizes, d):
    """Collapse per-instance rows of ``table`` to per-bag rank-d values."""
    out = np.empty((len(sizes), table.shape[1]), dtype=np.float64)
    for i, (start, size) in enumerate(zip(offsets, sizes)):
        block = np.sort(table[start:start + size], axis=0)
        out[i] = block[min(d, size) - 1]
    return out


class DistanceCache:
    """
    Memo of instance-to-bag minimum-distance tables.

    One table per (dataset, feature subset) serves every rank d; entries
    are evicted least-recently-used beyond ``max_entries``.
    """

    def __init__(self, max_entries=64):
        self.max_entries = max_entries
        self._tables = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def min_table(self, data, s):
        key = (data.fingerprint, s.indices)
        with self._lock:
            table = self._tables.get(key)
            if table is not None:
                self._tables.move_to_end(key)
                self.hits += 1
                return table
        table = _instance_to_bag_minima(data, s)
        with self._lock:
            self.misses += 1
            self._tables[key] = table
            while len(self._tables) > self.max_entries:
                self._tables.popitem(last=False)
        logger.debug(f"Distance table computed for {len(s)} features ({self.misses} misses)")
        return table

    def __len__(self):
        return len(self._tables)


def _instance_to_bag_minima(data, s):
    matrix = data.instance_matrix
    distances = pairwise_instance_distances(matrix, matrix, s)
    table = np.minimum.reduceat(distances, data.offsets, axis=1)
    table.setflags(write=False)
    return table


def bag_distance_block(data, d, s, cache=None):
    """N x N matrix of H values between all bags of ``data``."""
    d = _check_rank(d)
    s = _subset(s, data.dimensionality)
    cache = cache if cache is not None else DistanceCache(max_entries=1)
    table = cache.min_table(data, s)
    sizes = [bag.size for bag in data.bags]
    directed = _rank_rows(table, data.offsets, sizes, d)
    return np.maximum(directed, directed.T)


def query_distance_row(data, test, d, s):
    """H(test, B^j) for every training bag j of ``data``."""
    if test.dimensionality != data.dimensionality:
        raise ContractError(
            f"bag {test.id!r} has {test.dimensionality} features, training data has "
            f"{data.dimensionality}"
        )
    d = _check_rank(d)
    s = _subset(s, data.dimensionality)
    distances = pairwise_instance_distances(test.instances, data.instance_matrix, s)
    sizes = [bag.size for bag in data.bags]
    test_to_train = np.minimum.reduceat(distances, data.offsets, axis=1)
    forward = _rank_rows(test_to_train, [0], [test.size], d)[0]
    train_to_test = distances.T.min(axis=1)[:, None]
    backward = _rank_rows(train_to_test, data.offsets, sizes, d)[:, 0]
    return np.maximum(forward, backward)


def build_distance_matrix(train, test, d, s, cache=None):
    """Lambda matrix for classifying ``test`` against ``train``."""
    if len(train) == 0:
        raise ContractError("training data must not be empty")
    block = bag_distance_block(train, d, s, cache)
    return DistanceMatrix.from_parts(block, query_distance_row(train, test, d, s))


_PROCESS_CACHE = DistanceCache()


def process_cache():
    """The distance cache shared by everything running in this process (one per worker)."""
    return _PROCESS_CACHE
