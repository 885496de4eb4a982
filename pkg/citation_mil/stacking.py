"""
Stacked generalization over a front of CNN classifiers.

Each front member's out-of-fold predictions form one column of the meta
dataset T2 (N bags x J members). A kernel classifier F is trained on the
rows of T2; its (gamma, c) and the retained member subset are tuned with
the same NSGA-II engine as the first stage.

F's own accuracy is estimated leave-one-out over T2 rows while the member
columns stay fixed, which is an optimistic estimate.
"""

import logging
from dataclasses import dataclass
from functools import partial

import numpy as np
from joblib import Parallel, delayed

from .bags import NEGATIVE, POSITIVE
from .cnn import CnnParams, cnn_classify
from .errors import ConfigError, ContractError
from .genome import eta_limit, flip_bits, gaussian_step, repair_mask, sbx_pair, uniform_mask_crossover
from .hausdorff import process_cache
from .nsga2 import BatchEvaluator, ParetoFront, run_nsga2
from .svm import KernelMachine, fit_kernel_machine, rbf_kernel
from .validation import LOO, class_accuracies, validate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MetaDataset:
    """T2 plus the bag labels and the parameters behind every column."""

    t2: np.ndarray
    labels: np.ndarray
    column_params: tuple
    bag_ids: tuple
    use_scores: bool = False

    def __post_init__(self):
        t2 = np.array(self.t2, dtype=np.float64, ndmin=2)
        if t2.shape != (len(self.labels), len(self.column_params)):
            raise ContractError(
                f"meta matrix shape {t2.shape} does not match {len(self.labels)} bags x "
                f"{len(self.column_params)} members"
            )
        t2.setflags(write=False)
        object.__setattr__(self, "t2", t2)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    @property
    def n_rows(self):
        return self.t2.shape[0]

    @property
    def n_members(self):
        return self.t2.shape[1]

    def to_dict(self):
        return {
            "bag_ids": list(self.bag_ids),
            "labels": [int(y) for y in self.labels],
            "members": [params.to_dict() for params in self.column_params],
            "t2": self.t2.tolist(),
            "use_scores": self.use_scores,
        }

    @classmethod
    def from_dict(cls, raw):
        try:
            return cls(
                t2=np.asarray(raw["t2"], dtype=np.float64).reshape(len(raw["labels"]), len(raw["members"])),
                labels=np.asarray(raw["labels"], dtype=np.int64),
                column_params=tuple(CnnParams.from_dict(p) for p in raw["members"]),
                bag_ids=tuple(raw["bag_ids"]),
                use_scores=bool(raw.get("use_scores", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed meta dataset: {e}")


def _member_params(front, train, scheme):
    if isinstance(front, ParetoFront):
        limit = eta_limit(train, scheme)
        return tuple(member.genome.decode(len(train), limit) for member in front)
    return tuple(front)


def _member_column(train, params, scheme, use_scores):
    report = validate(train, params, scheme, process_cache())
    return np.asarray(report.scores if use_scores else report.predictions, dtype=np.float64)


def build_meta_dataset(train, front, scheme=LOO, use_scores=False, jobs=1):
    """
    Assemble T2 from the out-of-fold predictions of every front member.

    Args:
        train: labeled training Dataset.
        front: ParetoFront of CNN genomes, or a sequence of CnnParams.
        scheme: ValidationScheme producing the out-of-fold predictions.
        use_scores: store member scores in [0, 1] instead of labels.
        jobs: worker processes, one task per member.

    Returns:
        MetaDataset with rows in bag order and columns in front order.
    """
    members = _member_params(front, train, scheme)
    if not members:
        raise ContractError("cannot stack an empty front")
    train.require_training_ready(minimum_bags=3)
    if jobs == 1:
        columns = [_member_column(train, params, scheme, use_scores) for params in members]
    else:
        columns = Parallel(n_jobs=jobs)(
            delayed(_member_column)(train, params, scheme, use_scores) for params in members
        )
    logger.info(f"📊 Meta dataset: {len(train)} bags x {len(members)} members")
    return MetaDataset(
        t2=np.column_stack(columns),
        labels=np.asarray(train.labels),
        column_params=members,
        bag_ids=tuple(bag.id for bag in train.bags),
        use_scores=use_scores,
    )


def train_final(meta, gamma, c, columns=None, tol=1e-3, max_iter=100_000):
    """Fit F on all meta rows, restricted to ``columns`` (all members when None)."""
    columns = list(range(meta.n_members)) if columns is None else list(columns)
    return fit_kernel_machine(meta.t2[:, columns], meta.labels, gamma, c, tol, max_iter)


@dataclass(frozen=True)
class StackGenome:
    log_gamma: float
    log_c: float
    mask: tuple

    def __post_init__(self):
        object.__setattr__(self, "mask", tuple(bool(bit) for bit in self.mask))
        if not any(self.mask):
            raise ContractError("member mask must retain at least one member")

    @property
    def gamma(self):
        return 10.0 ** self.log_gamma

    @property
    def c(self):
        return 10.0 ** self.log_c

    @property
    def columns(self):
        return tuple(j for j, bit in enumerate(self.mask) if bit)

    @property
    def key(self):
        bits = "".join("1" if bit else "0" for bit in self.mask)
        return f"{self.log_gamma!r}:{self.log_c!r}:{bits}"

    def to_dict(self):
        return {
            "log_gamma": self.log_gamma,
            "log_c": self.log_c,
            "gamma": self.gamma,
            "c": self.c,
            "members": list(self.columns),
        }


class StackSearchSpace:
    def __init__(self, n_members, settings):
        self.n_members = n_members
        self.settings = settings

    def random_genome(self, rng):
        s = self.settings
        log_gamma = float(rng.uniform(s.log_gamma_min, s.log_gamma_max))
        log_c = float(rng.uniform(s.log_c_min, s.log_c_max))
        mask = repair_mask(tuple(rng.random(self.n_members) < 0.5), rng)
        return StackGenome(log_gamma, log_c, mask)

    def crossover(self, a, b, rng):
        s = self.settings
        gamma_a, gamma_b = sbx_pair(a.log_gamma, b.log_gamma, s.log_gamma_min, s.log_gamma_max, rng)
        c_a, c_b = sbx_pair(a.log_c, b.log_c, s.log_c_min, s.log_c_max, rng)
        mask_a, mask_b = uniform_mask_crossover(a.mask, b.mask, rng)
        return (
            StackGenome(gamma_a, c_a, repair_mask(mask_a, rng)),
            StackGenome(gamma_b, c_b, repair_mask(mask_b, rng)),
        )

    def mutate(self, genome, rng):
        s = self.settings
        mask = repair_mask(flip_bits(genome.mask, rng), rng)
        log_gamma, log_c = genome.log_gamma, genome.log_c
        if rng.random() < s.mutation_prob:
            log_gamma = gaussian_step(log_gamma, s.log_gamma_min, s.log_gamma_max, rng)
        if rng.random() < s.mutation_prob:
            log_c = gaussian_step(log_c, s.log_c_min, s.log_c_max, rng)
        return StackGenome(log_gamma, log_c, mask)

    def key(self, genome):
        return genome.key


def _require_stackable(meta):
    positives = int(np.sum(meta.labels == POSITIVE))
    negatives = int(np.sum(meta.labels == NEGATIVE))
    if positives < 2 or negatives < 2:
        raise ContractError(
            f"leave-one-out over meta rows needs 2 bags per class, got {positives} / {negatives}"
        )


def stack_objectives(meta, genome, settings):
    """
    (Acc+, Acc-) of F estimated leave-one-out over meta rows.

    The kernel matrix is computed once and sliced for every left-out row.
    """
    _require_stackable(meta)
    x = meta.t2[:, list(genome.columns)]
    kernel = rbf_kernel(x, x, genome.gamma)
    predictions = np.empty(meta.n_rows, dtype=np.int64)
    everything = np.arange(meta.n_rows)
    for i in range(meta.n_rows):
        keep = everything[everything != i]
        machine = fit_kernel_machine(
            x[keep], meta.labels[keep], genome.gamma, genome.c,
            settings.svm_tol, settings.svm_max_iter, kernel=kernel[np.ix_(keep, keep)],
        )
        value = machine.decision_from_kernel(kernel[i, keep])[0]
        predictions[i] = POSITIVE if value >= 0.0 else NEGATIVE
    return class_accuracies(meta.labels, predictions)


def _stack_objective(genome, meta, settings):
    return stack_objectives(meta, genome, settings)


def tune_stack(meta, config, seed, jobs=1, on_generation=None):
    """
    NSGA-II over (log10 gamma, log10 c, member mask) maximizing F's (Acc+, Acc-).

    Args:
        meta: MetaDataset with at least one member and 2 bags per class.
        config: StackSearchSettings.
        seed: seed of the search's random stream.
        jobs: worker processes for objective evaluation.
        on_generation: optional callback(generation, population).

    Returns:
        ParetoFront whose members carry StackGenome objects.
    """
    if meta.n_members < 1:
        raise ContractError("meta dataset has no members")
    _require_stackable(meta)
    space = StackSearchSpace(meta.n_members, config)
    objective = partial(_stack_objective, meta=meta, settings=config)
    logger.info(
        f"⏳ Stack search: {meta.n_members} members, population {config.population}, "
        f"{config.generations} generations, seed {seed}"
    )
    with BatchEvaluator(objective, space.key, jobs=jobs) as evaluate:
        return run_nsga2(space, evaluate, config, seed, on_generation, label="Stack search")


@dataclass(frozen=True, eq=False)
class StackedModel:
    """Retained CNN members, the trained combiner F and the training-time scaling."""

    members: tuple
    final: KernelMachine
    normalization: object = None
    use_scores: bool = False

    def __post_init__(self):
        if not self.members:
            raise ContractError("a stacked model needs at least one member")
        if self.final.support_vectors.shape[1] not in (0, len(self.members)):
            raise ContractError(
                f"combiner expects {self.final.support_vectors.shape[1]} inputs, "
                f"model has {len(self.members)} members"
            )

    def to_dict(self, meta=None):
        document = {
            "members": [params.to_dict() for params in self.members],
            **self.final.to_dict(),
            "normalization": None if self.normalization is None else np.asarray(self.normalization).tolist(),
            "use_scores": self.use_scores,
        }
        if meta is not None:
            document["meta"] = meta
        return document

    @classmethod
    def from_dict(cls, raw):
        try:
            return cls(
                members=tuple(CnnParams.from_dict(p) for p in raw["members"]),
                final=KernelMachine.from_dict(raw),
                normalization=raw.get("normalization"),
                use_scores=bool(raw.get("use_scores", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed model file: {e}")


def assemble_model(meta, genome, normalization=None, settings=None):
    """Train F on every meta row over the members ``genome`` retains."""
    tol = settings.svm_tol if settings is not None else 1e-3
    max_iter = settings.svm_max_iter if settings is not None else 100_000
    final = train_final(meta, genome.gamma, genome.c, genome.columns, tol, max_iter)
    return StackedModel(
        members=tuple(meta.column_params[j] for j in genome.columns),
        final=final,
        normalization=normalization,
        use_scores=meta.use_scores,
    )


def member_votes(model, train, test, cache=None):
    """The J-vector F consumes: each member classifies ``test`` against all of ``train``."""
    if test.dimensionality != train.dimensionality:
        raise ContractError(
            f"bag {test.id!r} has {test.dimensionality} features, training data has "
            f"{train.dimensionality}"
        )
    cache = cache if cache is not None else process_cache()
    votes = []
    for params in model.members:
        prediction = cnn_classify(train, params, test, cache)
        votes.append(prediction.score if model.use_scores else prediction.label)
    return np.asarray(votes, dtype=np.float64)


def predict_bag(model, train, test, cache=None):
    """Final label of an (already normalized) bag."""
    votes = member_votes(model, train, test, cache)
    return int(model.final.predict(votes[None, :])[0])


def majority_vote(meta):
    """
    Plain voting over the member columns, ties going to +1.

    Returns:
        tuple: (acc_pos, acc_neg, predictions)
    """
    votes = np.where(meta.t2 >= 0.5, POSITIVE, NEGATIVE) if meta.use_scores else meta.t2
    predictions = np.where(votes.sum(axis=1) >= 0, POSITIVE, NEGATIVE)
    acc_pos, acc_neg = class_accuracies(meta.labels, predictions)
    return acc_pos, acc_neg, predictions


def stack_entries(front):
    return [
        {
            "params": member.genome.to_dict(),
            "acc_pos": float(member.objectives[0]),
            "acc_neg": float(member.objectives[1]),
        }
        for member in front
    ]

