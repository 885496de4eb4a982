"""
Dataset ingestion: the UCI Musk "clean1" CSV layout, min-max feature
scaling, and the canonical JSON dataset document.

Musk rows are ``molecule, conformation, f1 .. f166, class`` with no header.
Conformations of one molecule form one bag.
"""

import json
import logging
from pathlib import Path

import numpy as np
import polars as pl

from .bags import NEGATIVE, POSITIVE, Bag, Dataset
from .errors import ContractError, DataIntegrityError, IngestionError

logger = logging.getLogger(__name__)

MUSK_FEATURES = 166


def load_musk_csv(path, n_features=MUSK_FEATURES):
    """
    Load a Musk-format CSV file and group its rows into bags.

    Args:
        path: CSV file location.
        n_features: number of feature columns between the two name columns
            and the class flag (166 for Musk1).

    Returns:
        Dataset with one bag per molecule, in order of first appearance.

    Raises:
        IngestionError: empty file, wrong field count, non-numeric value.
        DataIntegrityError: one molecule carries both class flags.
    """
    path = Path(path)
    expected_fields = n_features + 3
    line_numbers, rows = [], []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, 1):
            if not line.strip():
                continue
            fields = [value.strip() for value in line.rstrip("\r\n").split(",")]
            if len(fields) != expected_fields:
                raise IngestionError(
                    f"expected {expected_fields} comma-separated fields, found {len(fields)}",
                    line_number,
                )
            line_numbers.append(line_number)
            rows.append(fields)

    if not rows:
        raise IngestionError(f"{path} contains no data rows")

    feature_cols = [f"f{k}" for k in range(n_features)]
    columns = list(zip(*rows))
    frame = pl.DataFrame(
        {
            "line": line_numbers,
            "molecule": list(columns[0]),
            "conformation": list(columns[1]),
            **{name: list(columns[k + 2]) for k, name in enumerate(feature_cols)},
            "class_flag": list(columns[-1]),
        }
    ).with_columns(pl.col(feature_cols + ["class_flag"]).cast(pl.Float64, strict=False))

    bad_values = frame.filter(
        pl.any_horizontal(
            [pl.col(c).is_null() | pl.col(c).is_nan() | pl.col(c).is_infinite() for c in feature_cols]
        )
    )
    if bad_values.height > 0:
        raise IngestionError("non-numeric or non-finite feature value", bad_values["line"][0])

    bad_flags = frame.filter(~pl.col("class_flag").is_in([0.0, 1.0]).fill_null(False))
    if bad_flags.height > 0:
        raise IngestionError("class flag must be 0 or 1", bad_flags["line"][0])

    flags_per_molecule = frame.group_by("molecule", maintain_order=True).agg(
        pl.col("class_flag").n_unique().alias("n_flags")
    )
    mixed = flags_per_molecule.filter(pl.col("n_flags") > 1)
    if mixed.height > 0:
        raise DataIntegrityError(
            f"molecule {mixed['molecule'][0]!r} has inconsistent class flags"
        )

    bags = []
    for part in frame.partition_by("molecule", maintain_order=True):
        label = POSITIVE if part["class_flag"][0] == 1.0 else NEGATIVE
        bags.append(Bag(part["molecule"][0], part.select(feature_cols).to_numpy(), label))

    data = Dataset(tuple(bags), n_features)
    logger.info(f"✅ Loaded {path}: {dataset_summary(data)}")
    return data


def _minmax_scale(matrix, lo, hi):
    span = hi - lo
    safe_span = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (matrix - lo) / safe_span, 0.0)


def normalize_minmax(data):
    """
    Rescale every feature to [0, 1] using min/max over all instances.

    Constant features map to 0. The (min, max) pairs are recorded in raw
    feature units; normalizing an already normalized dataset keeps the
    original record, so the operation is idempotent.
    """
    if len(data) == 0:
        raise ContractError("cannot normalize an empty dataset")
    matrix = data.instance_matrix
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)

    if data.normalization is None:
        record = np.column_stack((lo, hi))
    else:
        old_lo, old_hi = data.normalization[:, 0], data.normalization[:, 1]
        old_span = old_hi - old_lo
        identity = (lo == 0.0) & (hi == 1.0)
        record = np.column_stack(
            (
                np.where(identity, old_lo, old_lo + lo * old_span),
                np.where(identity, old_hi, old_lo + hi * old_span),
            )
        )

    scaled = _minmax_scale(matrix, lo, hi)
    bags = []
    for bag, start in zip(data.bags, data.offsets):
        bags.append(bag.with_instances(scaled[start:start + bag.size]))
    return Dataset(tuple(bags), data.dimensionality, record)


def apply_normalization(bag, normalization):
    """Scale an unseen bag with training (min, max) pairs, clamping to [0, 1]."""
    normalization = np.asarray(normalization, dtype=np.float64)
    if normalization.ndim != 2 or normalization.shape != (bag.dimensionality, 2):
        raise ContractError(
            f"bag {bag.id!r} has {bag.dimensionality} features but normalization "
            f"describes {normalization.shape[0] if normalization.ndim == 2 else '?'}"
        )
    scaled = _minmax_scale(bag.instances, normalization[:, 0], normalization[:, 1])
    return bag.with_instances(np.clip(scaled, 0.0, 1.0))


def dataset_summary(data):
    return (
        f"{len(data)} bags ({data.positive_count} pos / {data.negative_count} neg), "
        f"{data.instance_count} instances, {data.dimensionality} features"
    )


def dataset_to_dict(data):
    return {
        "dimensionality": data.dimensionality,
        "normalization": None if data.normalization is None else data.normalization.tolist(),
        "bags": [
            {"id": bag.id, "label": bag.label, "instances": bag.instances.tolist()}
            for bag in data.bags
        ],
    }


def save_dataset_json(data, path, meta=None):
    """Write the canonical dataset document (floats keep their exact repr)."""
    document = dataset_to_dict(data)
    if meta is not None:
        document["meta"] = meta
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, sort_keys=True)
        handle.write("\n")
    logger.info(f"📁 Dataset saved: {path}")
    return path


def _read_document(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise IngestionError(f"{path} is not valid JSON: {e.msg}", e.lineno)


def _bags_from_document(document, require_labels):
    try:
        bags = []
        for entry in document["bags"]:
            label = entry.get("label")
            if require_labels and label is None:
                raise IngestionError(f"bag {entry['id']!r} has no label")
            bags.append(Bag(entry["id"], entry["instances"], label))
        return bags
    except (KeyError, TypeError) as e:
        raise IngestionError(f"malformed dataset document: {e}")


def load_dataset_json(path):
    """Read a canonical dataset document written by ``save_dataset_json``."""
    document = _read_document(path)
    bags = _bags_from_document(document, require_labels=True)
    try:
        return Dataset(tuple(bags), int(document["dimensionality"]), document.get("normalization"))
    except KeyError as e:
        raise IngestionError(f"malformed dataset document: missing {e}")


def load_bags_json(path):
    """
    Read bags to classify from a canonical document; labels are optional.

    Returns:
        tuple: (list of Bag, bool telling whether the bags are already normalized)
    """
    document = _read_document(path)
    bags = _bags_from_document(document, require_labels=False)
    return bags, document.get("normalization") is not None


def load_any_dataset(path):
    """Canonical JSON for ``*.json`` paths, Musk CSV otherwise."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_dataset_json(path)
    return load_musk_csv(path)
