"""
NSGA-II for two maximized objectives.

The engine is generic over a search space (how genomes are sampled, crossed,
mutated and keyed) and a batch evaluator; the CNN parameter search and the
stack search both run on it. All randomness flows through one seeded
generator consumed sequentially, so results do not depend on how objective
evaluations are parallelised.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np
from joblib import Parallel, delayed
from pymoo.indicators.hv import HV
from tqdm import tqdm

from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class Individual:
    genome: Any
    objectives: tuple
    rank: int = 0
    crowding: float = 0.0


@dataclass(frozen=True)
class ParetoFront:
    """Mutually non-dominated individuals, deduplicated by genome."""

    members: tuple

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def objectives(self):
        return np.array([member.objectives for member in self.members], dtype=np.float64).reshape(-1, 2)


class SearchSpace(Protocol):
    def random_genome(self, rng): ...

    def crossover(self, a, b, rng): ...

    def mutate(self, genome, rng): ...

    def key(self, genome): ...


def dominates(a, b):
    """True iff ``a`` is at least as good as ``b`` everywhere and strictly better somewhere."""
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


def fast_nondominated_sort(population):
    """
    Partition ``population`` into fronts F1, F2, ... and set each ``rank``.

    Members of every front are listed in population order.
    """
    n = len(population)
    if n == 0:
        return []
    objs = np.array([ind.objectives for ind in population], dtype=np.float64)
    geq = np.all(objs[:, None, :] >= objs[None, :, :], axis=2)
    gt = np.any(objs[:, None, :] > objs[None, :, :], axis=2)
    dominance = geq & gt  # dominance[p, q]: p dominates q

    dominated_count = dominance.sum(axis=0)
    fronts = []
    current = [p for p in range(n) if dominated_count[p] == 0]
    rank = 0
    while current:
        for p in current:
            population[p].rank = rank
        fronts.append([population[p] for p in current])
        following = []
        for p in current:
            for q in np.flatnonzero(dominance[p]):
                dominated_count[q] -= 1
                if dominated_count[q] == 0:
                    following.append(int(q))
        current = sorted(following)
        rank += 1
    return fronts


def crowding_distance(front):
    """Sum over objectives of normalized neighbour gaps; boundary members get inf."""
    n = len(front)
    if n <= 2:
        return [math.inf] * n
    objs = np.array([ind.objectives for ind in front], dtype=np.float64)
    distance = np.zeros(n)
    for m in range(objs.shape[1]):
        order = np.argsort(objs[:, m], kind="stable")
        lo, hi = objs[order[0], m], objs[order[-1], m]
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            distance[order[pos]] += (objs[order[pos + 1], m] - objs[order[pos - 1], m]) / (hi - lo)
    return distance.tolist()


def hypervolume(points, reference=(0.0, 0.0)):
    """Area dominated by ``points`` (maximization) relative to ``reference``."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if points.shape[0] == 0:
        return 0.0
    indicator = HV(ref_point=-np.asarray(reference, dtype=np.float64))
    return float(indicator(-points))


class FitnessMemo:
    """Objective values keyed by canonical genome encoding."""

    def __init__(self):
        self._values = {}
        self._lock = threading.Lock()
        self.hits = 0

    def get(self, key):
        with self._lock:
            value = self._values.get(key)
            if value is not None:
                self.hits += 1
            return value

    def put(self, key, value):
        with self._lock:
            self._values.setdefault(key, value)

    def __contains__(self, key):
        with self._lock:
            return key in self._values

    def __len__(self):
        return len(self._values)


class BatchEvaluator:
    """
    Evaluate a list of genomes, skipping memoized ones and fanning the rest
    out to ``jobs`` worker processes. Results come back in input order.
    """

    def __init__(self, objective, key, memo=None, jobs=1):
        self.objective = objective
        self.key = key
        self.memo = memo if memo is not None else FitnessMemo()
        self.jobs = jobs
        self._parallel = None

    def __enter__(self):
        if self.jobs != 1:
            self._parallel = Parallel(n_jobs=self.jobs)
            self._parallel.__enter__()
        return self

    def __exit__(self, *exc):
        if self._parallel is not None:
            self._parallel.__exit__(*exc)
            self._parallel = None

    def __call__(self, genomes):
        pending, seen = [], set()
        for genome in genomes:
            key = self.key(genome)
            if key not in seen and key not in self.memo:
                seen.add(key)
                pending.append(genome)
        if self._parallel is not None and len(pending) > 1:
            results = self._parallel(delayed(self.objective)(genome) for genome in pending)
        else:
            results = [self.objective(genome) for genome in pending]
        fresh = {}
        for genome, value in zip(pending, results):
            fresh[self.key(genome)] = tuple(float(v) for v in value)
            self.memo.put(self.key(genome), fresh[self.key(genome)])
        logger.debug(f"Evaluated {len(pending)} new genomes ({len(genomes) - len(pending)} memoized)")
        return [fresh.get(self.key(genome)) or self.memo.get(self.key(genome)) for genome in genomes]


def _tournament(population, rng):
    i, j = rng.integers(len(population), size=2)
    a, b = population[i], population[j]
    if (b.rank, -b.crowding) < (a.rank, -a.crowding):
        return b
    return a


def _rank_and_crowd(population):
    fronts = fast_nondominated_sort(population)
    for front in fronts:
        for ind, value in zip(front, crowding_distance(front)):
            ind.crowding = value
    return fronts


def _environmental_selection(combined, size):
    survivors = []
    for front in _rank_and_crowd(combined):
        if len(survivors) + len(front) <= size:
            survivors.extend(front)
            continue
        order = sorted(range(len(front)), key=lambda t: (-front[t].crowding, t))
        survivors.extend(front[t] for t in order[:size - len(survivors)])
        break
    return survivors


def check_settings(settings):
    if settings.population < 4 or settings.population % 2:
        raise ConfigError(f"population must be even and >= 4, got {settings.population}")
    if settings.generations < 1:
        raise ConfigError(f"generations must be >= 1, got {settings.generations}")


def run_nsga2(space, evaluate, settings, seed, on_generation=None, label="NSGA-II"):
    """
    Run elitist NSGA-II and return the final non-dominated front.

    Args:
        space: SearchSpace supplying genome operators.
        evaluate: callable mapping a list of genomes to (obj1, obj2) tuples.
        settings: object with population, generations, crossover_prob.
        seed: seed of the single random stream.
        on_generation: optional callback(generation, population).
        label: name used in progress output.

    Returns:
        ParetoFront of rank-0 members with duplicate genomes removed, sorted
        by descending first objective.
    """
    check_settings(settings)
    rng = np.random.default_rng(seed)
    size = settings.population

    genomes = [space.random_genome(rng) for _ in range(size)]
    population = [Individual(g, o) for g, o in zip(genomes, evaluate(genomes))]
    _rank_and_crowd(population)
    if on_generation is not None:
        on_generation(0, population)

    show_progress = logger.getEffectiveLevel() <= logging.INFO
    for generation in tqdm(range(1, settings.generations + 1), desc=label, disable=not show_progress):
        offspring = []
        while len(offspring) < size:
            first = _tournament(population, rng)
            second = _tournament(population, rng)
            if rng.random() < settings.crossover_prob:
                child_a, child_b = space.crossover(first.genome, second.genome, rng)
            else:
                child_a, child_b = first.genome, second.genome
            offspring.append(space.mutate(child_a, rng))
            offspring.append(space.mutate(child_b, rng))
        children = [Individual(g, o) for g, o in zip(offspring, evaluate(offspring))]
        population = _environmental_selection(population + children, size)
        if on_generation is not None:
            on_generation(generation, population)
        best = np.max([ind.objectives for ind in population], axis=0)
        logger.debug(f"{label} generation {generation}: best objectives {best[0]:.4f} / {best[1]:.4f}")

    first_front = fast_nondominated_sort(population)[0]
    unique, seen = [], set()
    for ind in first_front:
        key = space.key(ind.genome)
        if key not in seen:
            seen.add(key)
            unique.append(ind)
    unique.sort(key=lambda ind: (-ind.objectives[0], -ind.objectives[1], space.key(ind.genome)))
    logger.info(f"📊 {label}: final front holds {len(unique)} distinct solutions")
    return ParetoFront(tuple(unique))
