import math
from pathlib import Path

import numpy as np
import pytest

from citation_mil.bags import NEGATIVE, POSITIVE, Bag, Dataset

MUSK1_PATH = Path(__file__).resolve().parent.parent / "data" / "clean1.data"


def make_bag(bag_id, rows, label=None):
    return Bag(bag_id, np.asarray(rows, dtype=np.float64), label)


def naive_distance(x, y, s):
    total = 0.0
    for k in s:
        delta = x[k] - y[k]
        total += delta * delta
    return math.sqrt(total)


def naive_directed(a, b, d, s):
    a = a.instances.tolist() if isinstance(a, Bag) else a
    b = b.instances.tolist() if isinstance(b, Bag) else b
    mins = sorted((min(naive_distance(x, y, s) for y in b) for x in a))
    return mins[min(d, len(mins)) - 1]


def naive_hausdorff(a, b, d, s):
    return max(naive_directed(a, b, d, s), naive_directed(b, a, d, s))


@pytest.fixture
def toy4():
    """Two tight positive bags near 0 and two tight negative bags near 5 (one feature)."""
    return Dataset(
        (
            make_bag("p0", [[0.0]], POSITIVE),
            make_bag("p1", [[0.1]], POSITIVE),
            make_bag("n0", [[5.0]], NEGATIVE),
            make_bag("n1", [[5.1]], NEGATIVE),
        ),
        1,
    )


def separable_bags(seed=7, n_per_class=6):
    """
    Feature 0 separates the classes (positives in [0, 0.1], negatives in
    [0.9, 1.0]); feature 1 is noise of amplitude 0.05.
    """
    rng = np.random.default_rng(seed)
    bags = []
    for label, centre in ((POSITIVE, 0.05), (NEGATIVE, 0.95)):
        for i in range(n_per_class):
            size = int(rng.integers(1, 4))
            rows = np.column_stack(
                (centre + rng.uniform(-0.05, 0.05, size), rng.uniform(0.0, 0.05, size))
            )
            prefix = "pos" if label == POSITIVE else "neg"
            bags.append(make_bag(f"{prefix}{i}", rows, label))
    return Dataset(tuple(bags), 2)


@pytest.fixture
def separable12():
    return separable_bags()


def write_musk_csv(path, molecules, n_features=166):
    """
    Write a Musk-format file. ``molecules`` maps a molecule name to
    (class flag, list of first-feature values); remaining features are 0.
    """
    lines = []
    for name, (flag, values) in molecules.items():
        for j, value in enumerate(values):
            features = [str(value)] + ["0"] * (n_features - 1)
            lines.append(",".join([name, f"{name}_{j + 1}", *features, str(flag)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


@pytest.fixture
def musk_writer(tmp_path):
    def _write(molecules, name="toy.data", n_features=166):
        return write_musk_csv(tmp_path / name, molecules, n_features)

    return _write


@pytest.fixture
def musk1_path():
    if not MUSK1_PATH.exists():
        pytest.skip("data/clean1.data not present (run scripts/data_collection/download_musk1.py)")
    return MUSK1_PATH
