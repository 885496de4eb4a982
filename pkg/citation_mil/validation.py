"""
Leave-one-out and stratified k-fold estimates of per-class accuracy.

Both schemes slice one cached N x N bag-distance block per (d, S): a fold
only selects which rows and columns form the training sample, so no
distances are recomputed per fold.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .bags import NEGATIVE, POSITIVE
from .cnn import classify_from_matrix
from .errors import ContractError
from .hausdorff import DistanceMatrix, bag_distance_block

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValidationScheme:
    kind: str = "loo"
    k: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("loo", "kfold"):
            raise ContractError(f"unknown validation scheme {self.kind!r}")
        if self.kind == "kfold" and self.k < 2:
            raise ContractError(f"k-fold validation needs k >= 2, got {self.k}")

    def describe(self):
        return "LOO" if self.kind == "loo" else f"{self.k}-fold (seed {self.seed})"

    def to_dict(self):
        if self.kind == "loo":
            return {"kind": "loo"}
        return {"kind": "kfold", "k": self.k, "seed": self.seed}


LOO = ValidationScheme()


@dataclass(frozen=True)
class ValidationReport:
    acc_pos: float
    acc_neg: float
    predictions: tuple
    scores: tuple
    folds: tuple
    scheme: ValidationScheme
    correct_pos: int
    n_pos: int
    correct_neg: int
    n_neg: int

    @property
    def objectives(self):
        return (self.acc_pos, self.acc_neg)

    def to_dict(self):
        return {
            "acc_pos": self.acc_pos,
            "acc_neg": self.acc_neg,
            "scheme": self.scheme.to_dict(),
            "predictions": list(self.predictions),
        }


def stratified_folds(labels, k, seed):
    """
    Fold id per bag: each class is shuffled with a seeded generator and dealt
    round-robin, the counter continuing from one class to the next so k = N
    yields one bag per fold.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    position = 0
    for label in (POSITIVE, NEGATIVE):
        members = np.flatnonzero(labels == label)
        for index in rng.permutation(members):
            folds[index] = position % k
            position += 1
    return folds


def iter_folds(fold_ids):
    """Yield (training indices, held-out indices) for each fold id in ascending order."""
    fold_ids = np.asarray(fold_ids)
    for fold in np.unique(fold_ids):
        held_out = np.flatnonzero(fold_ids == fold)
        training = np.flatnonzero(fold_ids != fold)
        yield training, held_out


def _tallies(labels, predictions):
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    positive = labels == POSITIVE
    negative = labels == NEGATIVE
    correct_pos = int(np.sum(positive & (predictions == POSITIVE)))
    correct_neg = int(np.sum(negative & (predictions == NEGATIVE)))
    return correct_pos, int(positive.sum()), correct_neg, int(negative.sum())


def class_accuracies(labels, predictions):
    """(Acc+, Acc-): fraction of positive and of negative bags predicted correctly."""
    correct_pos, n_pos, correct_neg, n_neg = _tallies(labels, predictions)
    if n_pos == 0 or n_neg == 0:
        raise ContractError("accuracies need both classes among the labels")
    return correct_pos / n_pos, correct_neg / n_neg


def _report(labels, predictions, scores, folds, scheme):
    correct_pos, n_pos, correct_neg, n_neg = _tallies(labels, predictions)
    return ValidationReport(
        acc_pos=correct_pos / n_pos,
        acc_neg=correct_neg / n_neg,
        predictions=tuple(int(p) for p in predictions),
        scores=tuple(float(s) for s in scores),
        folds=tuple(int(f) for f in folds),
        scheme=scheme,
        correct_pos=correct_pos,
        n_pos=n_pos,
        correct_neg=correct_neg,
        n_neg=n_neg,
    )


def _out_of_fold(block, labels, params, fold_ids, on_fold=None):
    predictions = np.zeros(labels.shape[0], dtype=np.int64)
    scores = np.zeros(labels.shape[0], dtype=np.float64)
    for training, held_out in iter_folds(fold_ids):
        train_labels = labels[training]
        if not (np.any(train_labels == POSITIVE) and np.any(train_labels == NEGATIVE)):
            raise ContractError("a training portion is missing one of the classes")
        params.check(training.shape[0])
        if on_fold is not None:
            on_fold(training, held_out)
        train_block = block[np.ix_(training, training)]
        for i in held_out:
            matrix = DistanceMatrix.from_parts(train_block, block[i, training])
            prediction = classify_from_matrix(matrix, train_labels, params)
            predictions[i] = prediction.label
            scores[i] = prediction.score
    return predictions, scores


def loo_validate(train, params, cache=None, on_fold=None):
    """
    Leave-one-out accuracies: each bag is classified by the other N-1 bags.

    Args:
        train: labeled Dataset, N >= 3, both classes present.
        params: CnnParams with eta_r, eta_c <= N-2.
        cache: optional DistanceCache.
        on_fold: optional callback(training_indices, held_out_indices).

    Returns:
        ValidationReport (deterministic; no randomness involved).
    """
    train.require_training_ready(minimum_bags=3)
    labels = np.asarray(train.labels)
    block = bag_distance_block(train, params.d, params.features, cache)
    folds = np.arange(len(train))
    predictions, scores = _out_of_fold(block, labels, params, folds, on_fold)
    return _report(labels, predictions, scores, folds, LOO)


def kfold_validate(train, params, k, seed, cache=None, on_fold=None):
    """Stratified k-fold accuracies; k = N reproduces ``loo_validate``."""
    train.require_training_ready(minimum_bags=2)
    if not 2 <= k <= len(train):
        raise ContractError(f"k must lie in [2, {len(train)}], got {k}")
    labels = np.asarray(train.labels)
    block = bag_distance_block(train, params.d, params.features, cache)
    folds = stratified_folds(labels, k, seed)
    predictions, scores = _out_of_fold(block, labels, params, folds, on_fold)
    return _report(labels, predictions, scores, folds, ValidationScheme("kfold", k, seed))


def validate(train, params, scheme=LOO, cache=None):
    if scheme.kind == "loo":
        return loo_validate(train, params, cache)
    return kfold_validate(train, params, scheme.k, scheme.seed, cache)
