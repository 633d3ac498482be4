"""Genetic optimiser over [0, 1]^d genomes, plus k-means diverse selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import fmt
from .errors import EmptySeeds, NonFiniteFitness, TooFewPoints

#: Batch fitness: ``(n, d)`` genome array -> ``(n,)`` finite scores.
FitnessFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 200
    offspring_size: int = 200
    mutation_rate: float = 0.01
    generations: int = 100
    mutation_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.offspring_size < 1:
            raise ValueError("offspring_size must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.mutation_sigma < 0:
            raise ValueError("mutation_sigma must be nonnegative")


@dataclass
class GAResult:
    """Distinct offspring genomes in first-evaluation order, with fitness."""

    genomes: np.ndarray
    fitness: np.ndarray
    generation: np.ndarray
    best_per_generation: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.fitness)

    def write_csv(self, path: str | Path) -> None:
        d = self.genomes.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation"] + [f"g{i}" for i in range(d)] + ["fitness"])
            for g, x, f in zip(self.generation, self.genomes, self.fitness):
                w.writerow([int(g)] + [fmt(v) for v in x] + [fmt(f)])


def _mutate(pop: np.ndarray, rng: np.random.Generator, rate: float, sigma: float) -> np.ndarray:
    # Both draws are always made so the stream does not depend on the rate.
    hit = rng.random(pop.shape) < rate
    noise = rng.normal(0.0, sigma, size=pop.shape)
    return np.clip(pop + np.where(hit, noise, 0.0), 0.0, 1.0)


def _evaluate(fitness: FitnessFn, genomes: np.ndarray) -> np.ndarray:
    f = np.asarray(fitness(genomes), dtype=float).reshape(len(genomes))
    bad = ~np.isfinite(f)
    if bad.any():
        raise NonFiniteFitness(genomes[np.argmax(bad)])
    return f


def selection_probabilities(fit: np.ndarray) -> np.ndarray:
    """Roulette weights after shifting the minimum to a small positive mass."""
    lo, hi = float(fit.min()), float(fit.max())
    span = hi - lo
    if span <= 0.0:
        return np.full(fit.size, 1.0 / fit.size)
    mass = fit - lo + 1e-6 * span
    return mass / mass.sum()


def run_ga(fitness: FitnessFn, seeds, config: GAConfig = GAConfig()) -> GAResult:
    """Evolve a population from ``seeds`` and return every distinct offspring.

    The initial population resamples the seeds with replacement and mutates
    each copy once. Each generation breeds ``offspring_size`` children by
    roulette parent selection, uniform crossover and Gaussian mutation, then
    keeps the best ``population_size`` of parents and children.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        raise EmptySeeds("at least one seed genome is required")
    if np.any(seeds < 0.0) or np.any(seeds > 1.0):
        raise ValueError("seed genomes must lie in [0, 1]^d")
    n_seeds, d = seeds.shape
    streams = np.random.SeedSequence(config.seed).spawn(config.generations + 1)

    rng = np.random.default_rng(streams[0])
    pop = seeds[rng.integers(0, n_seeds, size=config.population_size)]
    pop = _mutate(pop, rng, config.mutation_rate, config.mutation_sigma)
    fit = _evaluate(fitness, pop)

    best = [float(fit.max())]
    kids, kid_fit = [], []
    for gen in range(1, config.generations + 1):
        rng = np.random.default_rng(streams[gen])
        p = selection_probabilities(fit)
        a = rng.choice(config.population_size, size=config.offspring_size, p=p)
        b = rng.choice(config.population_size, size=config.offspring_size, p=p)
        take_a = rng.random((config.offspring_size, d)) < 0.5
        child = np.where(take_a, pop[a], pop[b])
        child = _mutate(child, rng, config.mutation_rate, config.mutation_sigma)
        cf = _evaluate(fitness, child)
        kids.append(child)
        kid_fit.append(cf)

        merged = np.concatenate([pop, child])
        merged_fit = np.concatenate([fit, cf])
        keep = np.argsort(-merged_fit, kind="stable")[: config.population_size]
        pop, fit = merged[keep], merged_fit[keep]
        best.append(float(fit[0]))

    all_g = np.concatenate(kids)
    all_f = np.concatenate(kid_fit)
    gen_idx = np.repeat(np.arange(1, config.generations + 1), config.offspring_size)
    _, first = np.unique(all_g, axis=0, return_index=True)
    first.sort()
    return GAResult(all_g[first], all_f[first], gen_idx[first], best)


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    representatives: list[int]
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d2 = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from a farthest-point initialisation.

    Representatives are the indices of the input points nearest each final
    centroid (lowest index on ties).
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    n = X.shape[0]
    if k < 1 or n < k:
        raise TooFewPoints(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)

    chosen = [int(rng.integers(n))]
    nearest = ((X - X[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, ((X - X[nxt]) ** 2).sum(1))
    C = X[chosen].copy()

    trace = []
    assign = None
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        new_assign = np.argmin(D, axis=1)
        counts = np.bincount(new_assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            own = D[np.arange(n), new_assign]
            far = int(np.argmax(own))
            C[j] = X[far]
            D[:, j] = ((X - C[j]) ** 2).sum(1)
            new_assign = np.argmin(D, axis=1)
            counts = np.bincount(new_assign, minlength=k)
        trace.append(float(D[np.arange(n), new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = assign == j
            if members.any():
                C[j] = X[members].mean(axis=0)
    else:
        assign = np.argmin(_sq_dists(X, C), axis=1)

    reps = [int(np.argmin(((X - c) ** 2).sum(1))) for c in C]
    return KMeansResult(C, assign, reps, trace, it)


def select_top_k(genomes, fitness, k: int) -> np.ndarray:
    """The ``k`` fittest genomes; ties keep evaluation order."""
    genomes = np.atleast_2d(np.asarray(genomes, dtype=float))
    fitness = np.asarray(fitness, dtype=float)
    if len(fitness) < k:
        raise TooFewPoints(f"need at least {k} scored genomes, got {len(fitness)}")
    order = np.argsort(-fitness, kind="stable")[:k]
    return genomes[order]


def select_kmeans(genomes, fitness, k: int, seed: int = 0) -> np.ndarray:
    """One representative genome per k-means cluster (``fitness`` unused)."""
    genomes = np.atleast_2d(np.asarray(genomes, dtype=float))
    if len(genomes) < k:
        raise TooFewPoints(f"need at least {k} genomes, got {len(genomes)}")
    res = kmeans(genomes, k, seed)
    return genomes[res.representatives]
