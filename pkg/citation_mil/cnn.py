"""
Citation Nearest Neighbour classifier.

References are the eta_r training bags closest to the test bag. Citers are
the training bags whose own eta_c nearest neighbours (self excluded) would
include the test bag. The positive fraction of references and citers is
thresholded at theta (inclusive).
"""

from dataclasses import dataclass

import numpy as np

from .bags import NEGATIVE, POSITIVE, FeatureSubset
from .errors import ContractError
from .hausdorff import build_distance_matrix


@dataclass(frozen=True)
class CnnParams:
    """(eta_r, eta_c, d, features, theta): everything that defines one CNN classifier."""

    eta_r: int
    eta_c: int
    d: int
    features: FeatureSubset
    theta: float

    def __post_init__(self):
        if not isinstance(self.features, FeatureSubset):
            object.__setattr__(self, "features", FeatureSubset(tuple(self.features)))
        if self.eta_r < 1 or self.eta_c < 1:
            raise ContractError(f"eta_r and eta_c must be >= 1, got {self.eta_r}, {self.eta_c}")
        if self.d < 1:
            raise ContractError(f"rank d must be >= 1, got {self.d}")
        if not 0.0 < self.theta < 1.0:
            raise ContractError(f"theta must lie in (0, 1), got {self.theta}")

    def check(self, n_train, m=None):
        """Raise unless both neighbourhoods fit a training sample of ``n_train`` bags."""
        if self.eta_r > n_train - 1 or self.eta_c > n_train - 1:
            raise ContractError(
                f"eta_r={self.eta_r}, eta_c={self.eta_c} exceed T-1={n_train - 1} training bags"
            )
        if m is not None:
            self.features.check(m)

    def to_dict(self):
        return {
            "eta_r": self.eta_r,
            "eta_c": self.eta_c,
            "d": self.d,
            "theta": self.theta,
            "features": list(self.features.indices),
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            eta_r=int(raw["eta_r"]),
            eta_c=int(raw["eta_c"]),
            d=int(raw["d"]),
            features=FeatureSubset(tuple(raw["features"])),
            theta=float(raw["theta"]),
        )


@dataclass(frozen=True)
class CnnPrediction:
    label: int
    score: float
    counts: tuple  # (ref_pos, ref_neg, cite_pos, cite_neg)


def _tally(labels, selected):
    chosen = labels[selected]
    return int(np.sum(chosen == POSITIVE)), int(np.sum(chosen == NEGATIVE))


def find_references(matrix, labels, eta_r):
    """(positive, negative) counts among the eta_r training bags nearest the test bag."""
    labels = np.asarray(labels)
    if eta_r > matrix.n_train:
        raise ContractError(f"eta_r={eta_r} exceeds {matrix.n_train} training bags")
    nearest = np.argsort(matrix.test_row, kind="stable")[:eta_r]
    return _tally(labels, nearest)


def find_citers(matrix, labels, eta_c):
    """
    (positive, negative) counts among training bags that cite the test bag.

    Bag i cites the test bag when the test distance ranks within the eta_c
    smallest values of column i, the diagonal excluded. The test row comes
    last, so distance ties go to training rows.
    """
    labels = np.asarray(labels)
    if eta_c > matrix.n_train:
        raise ContractError(f"eta_c={eta_c} exceeds {matrix.n_train} training bags")
    block = matrix.train_block
    test_row = matrix.test_row
    # the zero diagonal is always <= the test distance, hence the -1
    closer = np.sum(block <= test_row[None, :], axis=0) - 1
    return _tally(labels, closer < eta_c)


def score_counts(counts):
    ref_pos, ref_neg, cite_pos, cite_neg = counts
    total = ref_pos + ref_neg + cite_pos + cite_neg
    if total == 0:
        return 0.0
    return (ref_pos + cite_pos) / total


def classify_from_matrix(matrix, labels, params):
    """Label a test bag given its Lambda matrix and the training labels."""
    ref_pos, ref_neg = find_references(matrix, labels, params.eta_r)
    cite_pos, cite_neg = find_citers(matrix, labels, params.eta_c)
    counts = (ref_pos, ref_neg, cite_pos, cite_neg)
    if sum(counts) == 0:
        return CnnPrediction(NEGATIVE, 0.0, counts)
    score = score_counts(counts)
    label = POSITIVE if score >= params.theta else NEGATIVE
    return CnnPrediction(label, score, counts)


def cnn_classify(train, params, test, cache=None):
    """
    Classify ``test`` with a CNN classifier trained on ``train``.

    Args:
        train: labeled Dataset with at least 2 bags.
        params: CnnParams valid for len(train).
        test: Bag with the training dimensionality.
        cache: optional DistanceCache reused across calls.

    Returns:
        CnnPrediction with label, score and the four neighbour counts.
    """
    if len(train) < 2:
        raise ContractError(f"CNN needs at least 2 training bags, got {len(train)}")
    if test.dimensionality != train.dimensionality:
        raise ContractError(
            f"bag {test.id!r} has {test.dimensionality} features, training data has "
            f"{train.dimensionality}"
        )
    params.check(len(train), train.dimensionality)
    matrix = build_distance_matrix(train, test, params.d, params.features, cache)
    return classify_from_matrix(matrix, train.labels, params)
