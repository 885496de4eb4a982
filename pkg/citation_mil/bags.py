"""
Core data model: bags of instances, datasets and feature subsets.

An instance is one row of a bag's ``instances`` matrix (m real features).
Labels are stored as -1/+1; reports translate them to "Class 0"/"Class 1".
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError

POSITIVE = 1
NEGATIVE = -1


def _freeze(array):
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Bag:
    """A labeled (or unlabeled, label=None) collection of instances."""

    id: str
    instances: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        instances = np.asarray(self.instances, dtype=np.float64)
        if instances.ndim != 2 or instances.shape[0] == 0 or instances.shape[1] == 0:
            raise ContractError(f"bag {self.id!r} needs a non-empty 2-D instance matrix")
        if not np.all(np.isfinite(instances)):
            raise ContractError(f"bag {self.id!r} contains non-finite feature values")
        if self.label not in (None, POSITIVE, NEGATIVE):
            raise ContractError(f"bag {self.id!r} has label {self.label!r}, expected -1 or +1")
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "instances", _freeze(instances))

    @property
    def size(self):
        return self.instances.shape[0]

    @property
    def dimensionality(self):
        return self.instances.shape[1]

    def with_instances(self, instances):
        return Bag(self.id, instances, self.label)

    def __eq__(self, other):
        if not isinstance(other, Bag):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and np.array_equal(self.instances, other.instances)
        )

    def __hash__(self):
        return hash((self.id, self.label, self.instances.tobytes()))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable ordered collection of bags sharing one dimensionality.

    ``normalization`` is an (m, 2) array of per-feature (min, max) pairs
    recorded when the dataset was min-max scaled, or None for raw data.
    """

    bags: tuple
    dimensionality: int
    normalization: Optional[np.ndarray] = None

    def __post_init__(self):
        bags = tuple(self.bags)
        if self.dimensionality < 1:
            raise ContractError("dimensionality must be positive")
        seen = set()
        for bag in bags:
            if bag.dimensionality != self.dimensionality:
                raise ContractError(
                    f"bag {bag.id!r} has {bag.dimensionality} features, "
                    f"dataset declares {self.dimensionality}"
                )
            if bag.id in seen:
                raise ContractError(f"duplicate bag id {bag.id!r}")
            seen.add(bag.id)
        object.__setattr__(self, "bags", bags)
        if self.normalization is not None:
            norm = _freeze(self.normalization)
            if norm.shape != (self.dimensionality, 2):
                raise ContractError(
                    f"normalization must have shape ({self.dimensionality}, 2), got {norm.shape}"
                )
            object.__setattr__(self, "normalization", norm)

    def __len__(self):
        return len(self.bags)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.dimensionality != other.dimensionality or self.bags != other.bags:
            return False
        if self.normalization is None or other.normalization is None:
            return self.normalization is None and other.normalization is None
        return np.array_equal(self.normalization, other.normalization)

    __hash__ = None

    @cached_property
    def labels(self):
        """Per-bag labels as an int array (0 for unlabeled bags)."""
        labels = np.array([bag.label or 0 for bag in self.bags], dtype=np.int64)
        labels.setflags(write=False)
        return labels

    @cached_property
    def instance_matrix(self):
        """All instances stacked in bag order, shape (total instances, m)."""
        matrix = np.vstack([bag.instances for bag in self.bags])
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def offsets(self):
        """Row index of the first instance of each bag in ``instance_matrix``."""
        sizes = [bag.size for bag in self.bags]
        offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
        offsets.setflags(write=False)
        return offsets

    @cached_property
    def fingerprint(self):
        """Content hash used to key distance caches."""
        digest = hashlib.sha256()
        digest.update(self.instance_matrix.tobytes())
        digest.update(self.offsets.tobytes())
        return digest.hexdigest()[:16]

    @property
    def instance_count(self):
        return int(sum(bag.size for bag in self.bags))

    @property
    def positive_count(self):
        return int(np.sum(self.labels == POSITIVE))

    @property
    def negative_count(self):
        return int(np.sum(self.labels == NEGATIVE))

    def bag_by_id(self, bag_id):
        for bag in self.bags:
            if bag.id == bag_id:
                return bag
        return None

    def subset(self, indices: Sequence[int]):
        """Dataset restricted to the bags at ``indices`` (order preserved)."""
        return Dataset(
            tuple(self.bags[i] for i in indices),
            self.dimensionality,
            self.normalization,
        )

    def require_training_ready(self, minimum_bags=1):
        """Raise ContractError unless bags are labeled and both classes are present."""
        if len(self.bags) < minimum_bags:
            raise ContractError(f"need at least {minimum_bags} bags, got {len(self.bags)}")
        if np.any(self.labels == 0):
            raise ContractError("training bags must all be labeled")
        if self.positive_count < 1 or self.negative_count < 1:
            raise ContractError(
                f"both classes required, got {self.positive_count} positive / "
                f"{self.negative_count} negative bags"
            )


@dataclass(frozen=True)
class FeatureSubset:
    """Sorted, zero-based, non-empty set of feature indices."""

    indices: tuple = field(default=())

    def __post_init__(self):
        indices = tuple(sorted({int(i) for i in self.indices}))
        if not indices:
            raise ContractError("feature subset must not be empty")
        if indices[0] < 0:
            raise ContractError(f"negative feature index {indices[0]}")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def all_features(cls, m):
        return cls(tuple(range(m)))

    @classmethod
    def from_mask(cls, mask):
        return cls(tuple(i for i, bit in enumerate(mask) if bit))

    def check(self, m):
        if self.indices[-1] >= m:
            raise ContractError(f"feature index {self.indices[-1]} out of range for m={m}")

    def to_mask(self, m):
        self.check(m)
        mask = [False] * m
        for i in self.indices:
            mask[i] = True
        return tuple(mask)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)
