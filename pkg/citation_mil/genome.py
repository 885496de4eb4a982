"""
Genomes of the CNN parameter search and the variation operators shared
with the stack search.

A genome is (eta_r, eta_c, d, theta, feature mask). Its fitness is the
(Acc+, Acc-) pair estimated by validating the decoded classifier on the
training data.
"""

import logging
from dataclasses import dataclass
from functools import partial

import numpy as np

from .cnn import CnnParams
from .bags import FeatureSubset
from .errors import ContractError
from .hausdorff import process_cache
from .nsga2 import BatchEvaluator, run_nsga2
from .validation import LOO, stratified_folds, validate

logger = logging.getLogger(__name__)

# distribution index of simulated binary crossover
SBX_INDEX = 15.0
# std of a gaussian real-valued mutation, as a fraction of the gene range
MUTATION_SCALE = 0.1


def sbx_pair(x1, x2, lo, hi, rng, index=SBX_INDEX):
    """Simulated binary crossover of two reals, children clipped to [lo, hi]."""
    u = rng.random()
    if u <= 0.5:
        beta = (2.0 * u) ** (1.0 / (index + 1.0))
    else:
        beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (index + 1.0))
    c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2)
    c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2)
    return float(np.clip(c1, lo, hi)), float(np.clip(c2, lo, hi))


def gaussian_step(x, lo, hi, rng, scale=MUTATION_SCALE):
    return float(np.clip(x + rng.normal(0.0, scale * (hi - lo)), lo, hi))


def uniform_mask_crossover(a, b, rng):
    swap = rng.random(len(a)) < 0.5
    child_a = tuple(bool(y) if s else bool(x) for x, y, s in zip(a, b, swap))
    child_b = tuple(bool(x) if s else bool(y) for x, y, s in zip(a, b, swap))
    return child_a, child_b


def flip_bits(mask, rng):
    """Flip every bit independently with probability 1/len(mask)."""
    flips = rng.random(len(mask)) < 1.0 / len(mask)
    return tuple(bool(bit) != bool(flip) for bit, flip in zip(mask, flips))


def repair_mask(mask, rng):
    """An all-zero mask gets one uniformly chosen bit set."""
    if any(mask):
        return tuple(bool(bit) for bit in mask)
    bits = [False] * len(mask)
    bits[int(rng.integers(len(bits)))] = True
    return tuple(bits)


@dataclass(frozen=True)
class Genome:
    eta_r: int
    eta_c: int
    d: int
    theta: float
    mask: tuple

    def __post_init__(self):
        object.__setattr__(self, "mask", tuple(bool(bit) for bit in self.mask))
        object.__setattr__(self, "theta", float(self.theta))
        if not any(self.mask):
            raise ContractError("feature mask must have at least one set bit")
        if min(self.eta_r, self.eta_c, self.d) < 1:
            raise ContractError("eta_r, eta_c and d genes must be >= 1")

    @property
    def key(self):
        """Canonical encoding used to memoize fitness and deduplicate fronts."""
        bits = "".join("1" if bit else "0" for bit in self.mask)
        return f"{self.eta_r}:{self.eta_c}:{self.d}:{self.theta!r}:{bits}"

    def decode(self, n_bags, eta_limit=None):
        """
        CnnParams for a training set of ``n_bags`` bags.

        Neighbourhood sizes are clamped to ``eta_limit`` (N-2 by default, the
        largest value every leave-one-out training portion supports).
        """
        limit = n_bags - 2 if eta_limit is None else eta_limit
        if limit < 1:
            raise ContractError(f"{n_bags} bags leave no room for a neighbourhood")
        return CnnParams(
            eta_r=min(self.eta_r, limit),
            eta_c=min(self.eta_c, limit),
            d=self.d,
            features=FeatureSubset.from_mask(self.mask),
            theta=self.theta,
        )

    @classmethod
    def encode(cls, params, m):
        return cls(params.eta_r, params.eta_c, params.d, params.theta, params.features.to_mask(m))


class CnnSearchSpace:
    """Sampling and variation of CNN genomes over ``m`` features."""

    def __init__(self, m, settings):
        self.m = m
        self.settings = settings

    def random_genome(self, rng):
        s = self.settings
        eta_r = int(rng.integers(1, s.eta_max + 1))
        eta_c = int(rng.integers(1, s.eta_max + 1))
        d = int(rng.integers(1, s.d_max + 1))
        theta = float(rng.uniform(s.theta_min, s.theta_max))
        mask = repair_mask(tuple(rng.random(self.m) < 0.5), rng)
        return Genome(eta_r, eta_c, d, theta, mask)

    def crossover(self, a, b, rng):
        s = self.settings
        mask_a, mask_b = uniform_mask_crossover(a.mask, b.mask, rng)
        theta_a, theta_b = sbx_pair(a.theta, b.theta, s.theta_min, s.theta_max, rng)
        # single cut point over (eta_r, eta_c, d)
        cut = int(rng.integers(1, 3))
        ints_a, ints_b = (a.eta_r, a.eta_c, a.d), (b.eta_r, b.eta_c, b.d)
        new_a = ints_a[:cut] + ints_b[cut:]
        new_b = ints_b[:cut] + ints_a[cut:]
        return (
            Genome(*new_a, theta_a, repair_mask(mask_a, rng)),
            Genome(*new_b, theta_b, repair_mask(mask_b, rng)),
        )

    def mutate(self, genome, rng):
        s = self.settings
        p = s.mutation_prob
        mask = repair_mask(flip_bits(genome.mask, rng), rng)
        eta_r = int(rng.integers(1, s.eta_max + 1)) if rng.random() < p else genome.eta_r
        eta_c = int(rng.integers(1, s.eta_max + 1)) if rng.random() < p else genome.eta_c
        d = int(rng.integers(1, s.d_max + 1)) if rng.random() < p else genome.d
        theta = genome.theta
        if rng.random() < p:
            theta = gaussian_step(theta, s.theta_min, s.theta_max, rng)
        return Genome(eta_r, eta_c, d, theta, mask)

    def key(self, genome):
        return genome.key


def eta_limit(train, scheme=LOO):
    """Largest eta every training portion of ``scheme`` can hold (its size minus one)."""
    n = len(train)
    if scheme.kind == "loo":
        return n - 2
    folds = stratified_folds(train.labels, scheme.k, scheme.seed)
    return n - int(np.bincount(folds).max()) - 1


def evaluate_genome(train, genome, cache=None, scheme=LOO, distances=None):
    """
    (Acc+, Acc-) of the classifier a genome decodes to.

    Args:
        train: labeled training Dataset.
        genome: Genome to score.
        cache: optional FitnessMemo; a memoized genome is never re-validated.
        scheme: ValidationScheme used for the estimate.
        distances: DistanceCache (the per-process cache when None).
    """
    if cache is not None:
        hit = cache.get(genome.key)
        if hit is not None:
            return hit
    params = genome.decode(len(train), eta_limit(train, scheme))
    report = validate(train, params, scheme, distances if distances is not None else process_cache())
    objectives = report.objectives
    if cache is not None:
        cache.put(genome.key, objectives)
    return objectives


def _genome_objectives(genome, train, scheme):
    return evaluate_genome(train, genome, None, scheme)


def evolve(train, config, seed, jobs=1, scheme=LOO, on_generation=None, memo=None):
    """
    NSGA-II search for CNN classifiers maximizing (Acc+, Acc-).

    Args:
        train: labeled Dataset with both classes.
        config: CnnSearchSettings.
        seed: seed of the search's random stream.
        jobs: worker processes for objective evaluation.
        scheme: ValidationScheme for the fitness estimate.
        on_generation: optional callback(generation, population).
        memo: optional FitnessMemo shared with the caller.

    Returns:
        ParetoFront whose members carry Genome objects.
    """
    train.require_training_ready(minimum_bags=3)
    if eta_limit(train, scheme) < 1:
        raise ContractError(f"{len(train)} bags are too few for {scheme.describe()} validation")
    space = CnnSearchSpace(train.dimensionality, config)
    objective = partial(_genome_objectives, train=train, scheme=scheme)
    logger.info(
        f"⏳ CNN search: population {config.population}, {config.generations} generations, "
        f"{scheme.describe()} fitness, seed {seed}"
    )
    with BatchEvaluator(objective, space.key, memo, jobs) as evaluate:
        front = run_nsga2(space, evaluate, config, seed, on_generation, label="CNN search")
    logger.info(f"📊 Fitness memo holds {len(evaluate.memo)} genomes ({evaluate.memo.hits} hits)")
    return front


def front_entries(front, train, scheme=LOO):
    """Serializable {params, acc_pos, acc_neg} records of a CNN front."""
    limit = eta_limit(train, scheme)
    return [
        {
            "params": member.genome.decode(len(train), limit).to_dict(),
            "acc_pos": float(member.objectives[0]),
            "acc_neg": float(member.objectives[1]),
        }
        for member in front
    ]
