"""Synthetic multi-assay tasks and the simulated design-make-test-analyse loop."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import (
    SENTINEL,
    AssayInterval,
    CandidateCriteria,
    CohortTable,
    DesignPoint,
    IntervalProfile,
    ObjectiveKind,
    fmt,
    make_table,
)
from .errors import BadKindList, DimensionMismatch
from .evolve import GAConfig, GAResult, run_ga, select_kmeans, select_top_k
from .pareto import DominanceMode, domination_pairs
from .reward import RewardModel, TrainConfig, TransformKind, TransformParams, fit_reward, init_model

WAVE_AMPLITUDE = 0.3

#: (seed, kinds) of the three tasks used by default in benchmarks.
DEFAULT_TASKS: tuple[tuple[int, tuple[str, ...]], ...] = (
    (101, ("sigmoid", "gaussian")),
    (202, ("sigmoid", "sigmoid", "gaussian")),
    (303, ("sigmoid", "gaussian", "gaussian")),
)


@dataclass(frozen=True)
class SyntheticTask:
    """Assays ``a_i(x) = v_i.x + 0.3 sin(2 pi u_i.x)`` with known target transforms."""

    d: int
    directions: np.ndarray  # (K, d) unit rows v_i
    waves: np.ndarray  # (K, d) unit rows u_i
    target_transforms: tuple[TransformParams, ...]
    target_weights: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        if self.K < 2:
            raise BadKindList("a task needs at least two assays")
        if self.directions.shape != (self.K, self.d) or self.waves.shape != (self.K, self.d):
            raise DimensionMismatch("direction/wave matrices do not match (K, d)")
        if len(self.target_weights) != self.K:
            raise DimensionMismatch("one target weight per assay is required")

    @property
    def K(self) -> int:
        return len(self.target_transforms)

    @property
    def kinds(self) -> tuple[TransformKind, ...]:
        return tuple(t.kind for t in self.target_transforms)

    def assays(self, genomes) -> np.ndarray:
        G = np.atleast_2d(np.asarray(genomes, dtype=float))
        if G.shape[1] != self.d:
            raise DimensionMismatch(f"genomes have dimension {G.shape[1]}, task expects {self.d}")
        return G @ self.directions.T + WAVE_AMPLITUDE * np.sin(2.0 * np.pi * (G @ self.waves.T))

    def factors(self, assays) -> np.ndarray:
        """Ground-truth normalised scores, one column per assay."""
        A = np.atleast_2d(np.asarray(assays, dtype=float))
        return np.column_stack([t(A[:, i]) for i, t in enumerate(self.target_transforms)])

    def evaluate(self, genomes) -> np.ndarray:
        """Weighted geometric mean of the ground-truth factors."""
        F = self.factors(self.assays(genomes))
        w = np.asarray(self.target_weights, dtype=float)
        return np.prod(F ** (w / w.sum()), axis=1)

    def reachable_range(self) -> np.ndarray:
        """Per-assay ``(low, high)`` analytic bounds over the unit cube."""
        lo = np.minimum(self.directions, 0).sum(1) - WAVE_AMPLITUDE
        hi = np.maximum(self.directions, 0).sum(1) + WAVE_AMPLITUDE
        return np.column_stack([lo, hi])

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "d": self.d,
            "K": self.K,
            "directions": self.directions.tolist(),
            "waves": self.waves.tolist(),
            "target_transforms": [t.to_dict() for t in self.target_transforms],
            "target_weights": list(self.target_weights),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticTask":
        return cls(
            d=int(doc["d"]),
            directions=np.asarray(doc["directions"], dtype=float),
            waves=np.asarray(doc["waves"], dtype=float),
            target_transforms=tuple(TransformParams.from_dict(t) for t in doc["target_transforms"]),
            target_weights=tuple(float(w) for w in doc["target_weights"]),
            seed=int(doc.get("seed", 0)),
        )

    def dumps(self) -> str:
        def num(x):
            return fmt(x)

        lines = ["{"]
        lines.append(f'  "seed": {int(self.seed)},')
        lines.append(f'  "d": {self.d},')
        lines.append(f'  "K": {self.K},')
        for key, M in (("directions", self.directions), ("waves", self.waves)):
            rows = ",\n    ".join("[" + ", ".join(num(v) for v in row) + "]" for row in M)
            lines.append(f'  "{key}": [\n    {rows}\n  ],')
        tf = ",\n    ".join(
            "{" + ", ".join(
                f'"{k}": ' + (json.dumps(v) if isinstance(v, str) else num(v)) for k, v in t.to_dict().items()
            ) + "}"
            for t in self.target_transforms
        )
        lines.append(f'  "target_transforms": [\n    {tf}\n  ],')
        lines.append('  "target_weights": [' + ", ".join(num(w) for w in self.target_weights) + "]")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def make_task(seed: int, d: int = 16, kinds: Sequence[TransformKind | str] = ("sigmoid", "gaussian")) -> SyntheticTask:
    """Draw a reproducible synthetic task.

    Sigmoid targets get positive slopes with midpoints in the upper part of
    the reachable assay range; Gaussian targets get means inside the range
    and widths a fraction of it, so random genomes score poorly and the
    optimum requires moving every assay at once.
    """
    try:
        kinds = [k if isinstance(k, TransformKind) else TransformKind.parse(k) for k in kinds]
    except ValueError as e:
        raise BadKindList(str(e)) from None
    if len(kinds) < 2:
        raise BadKindList("a task needs at least two assays")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    K = len(kinds)
    V = np.array([_unit(rng, d) for _ in range(K)])
    U = np.array([_unit(rng, d) for _ in range(K)])
    lo = np.minimum(V, 0).sum(1)
    hi = np.maximum(V, 0).sum(1)
    transforms = []
    for i, kind in enumerate(kinds):
        span = hi[i] - lo[i]
        centre = 0.5 * (lo[i] + hi[i])
        if kind is TransformKind.SIGMOID:
            slope = rng.uniform(6.0, 10.0) / span
            midpoint = centre + span * rng.uniform(0.2, 0.3)
            transforms.append(TransformParams.sigmoid(slope, midpoint))
        else:
            mean = centre + span * rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.25)
            width = span * rng.uniform(0.08, 0.12)
            transforms.append(TransformParams.gaussian(mean, float(np.log(width))))
    weights = tuple(float(w) for w in rng.uniform(0.5, 2.0, size=K))
    return SyntheticTask(d, V, U, tuple(transforms), weights, seed)


def make_cohort(
    task: SyntheticTask,
    n: int = 500,
    cycles: int = 10,
    seed: int = 0,
) -> CohortTable:
    """A project-like cohort whose designs drift towards a good region.

    A short E-guided GA run finds a strong design; cycle ``c`` then blends
    uniform random genomes towards it with a weight rising from 0 to 0.85.
    Components equal assays and every point carries its evaluation score.
    """
    if cycles < 1 or n < cycles:
        raise ValueError("need at least one point per cycle")
    rng = np.random.default_rng(seed)
    found = run_ga(task.evaluate, rng.random((20, task.d)), GAConfig(generations=50, seed=seed))
    target = found.genomes[int(np.argmax(found.fitness))]
    sizes = np.full(cycles, n // cycles)
    sizes[: n % cycles] += 1
    genomes, labels = [], []
    for c, m in enumerate(sizes, start=1):
        lam = 0.85 * (c - 1) / max(cycles - 1, 1)
        genomes.append((1.0 - lam) * rng.random((m, task.d)) + lam * target)
        labels += [c] * int(m)
    G = np.clip(np.concatenate(genomes), 0.0, 1.0)
    A = task.assays(G)
    names = tuple(f"a{i + 1}" for i in range(task.K))
    return make_table(
        A, genomes=G, cycles=labels, evaluations=task.evaluate(G),
        assay_names=names, component_names=names,
    )


def profile_of(task: SyntheticTask) -> IntervalProfile:
    """Interval profile whose criteria equal :func:`criteria_of` for the task."""
    out = []
    for i, t in enumerate(task.target_transforms):
        name = f"a{i + 1}"
        if t.kind is TransformKind.GAUSSIAN:
            out.append(AssayInterval(name, t.mean - t.width, t.mean + t.width))
        elif t.slope >= 0:
            out.append(AssayInterval(name, lower=t.midpoint))
        else:
            out.append(AssayInterval(name, upper=t.midpoint))
    return IntervalProfile(tuple(out))


def evaluate_E(task: SyntheticTask, point) -> float | np.ndarray:
    """Evaluation score of a :class:`DesignPoint` (or genome array)."""
    if isinstance(point, DesignPoint):
        if len(point.genome) != task.d:
            raise DimensionMismatch(f"point genome has length {len(point.genome)}, task expects {task.d}")
        return float(task.evaluate(point.genome)[0])
    G = np.asarray(point, dtype=float)
    out = task.evaluate(G)
    return float(out[0]) if G.ndim == 1 else out


def criteria_of(task: SyntheticTask) -> CandidateCriteria:
    """Target point read off the task's ground-truth transforms."""
    targets, kinds = [], []
    for t in task.target_transforms:
        if t.kind is TransformKind.GAUSSIAN:
            targets.append(t.mean)
            kinds.append(ObjectiveKind.RANGE)
        elif t.slope >= 0:
            targets.append(SENTINEL)
            kinds.append(ObjectiveKind.MAXIMIZE)
        else:
            targets.append(-SENTINEL)
            kinds.append(ObjectiveKind.MINIMIZE)
    return CandidateCriteria(tuple(targets), tuple(kinds))


@dataclass(frozen=True)
class SimConfig:
    cycles: int = 20
    seed_pool: int = 20
    keep_per_cycle: int = 10
    selection: str = "topk"  # or "kmeans"
    repeats: int = 3
    ga: GAConfig = field(default_factory=GAConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dominance: DominanceMode = DominanceMode.STRICT_ALL
    master_seed: int = 0
    seed_with: str = "pool"  # or "selected"
    restarts: int = 4
    standardize: bool = False

    def __post_init__(self):
        if self.cycles < 1 or self.keep_per_cycle < 1 or self.repeats < 1 or self.seed_pool < 1:
            raise ValueError("cycles, seed_pool, keep_per_cycle and repeats must be >= 1")
        if self.selection not in ("topk", "kmeans"):
            raise ValueError(f"unknown selection strategy {self.selection!r}")
        if self.seed_with not in ("pool", "selected"):
            raise ValueError(f"unknown seeding mode {self.seed_with!r}")


@dataclass(frozen=True)
class CycleTrace:
    iteration: int
    mean_score: float
    max_score: float
    pool_size: int
    repeat_index: int
    n_pairs: int = 0
    untrained: bool = False  # no dominance pairs; the initial model was used
    pool_best: float = 0.0  # best evaluation score in the pool after selection


#: Generator hook: ``(fitness, seed_genomes, ga_config) -> GAResult``.
Generator = Callable[[Callable[[np.ndarray], np.ndarray], np.ndarray, GAConfig], GAResult]


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def training_pairs(pool_assays: np.ndarray, criteria: CandidateCriteria, mode: DominanceMode):
    """Pool table and its dominance pairs, built from assay values alone."""
    table = make_table(pool_assays)
    return table, domination_pairs(table, criteria, mode)


def run_dmta(
    task: SyntheticTask,
    config: SimConfig = SimConfig(),
    guidance: str = "learned",
    generator: Generator | None = None,
) -> list[CycleTrace]:
    """Simulate rounds of learning a reward and generating with it.

    With ``guidance="oracle"`` the generator optimises the evaluation
    function directly, which gives the reference trace for comparisons.
    Training only ever sees pool assay values and the criteria point.
    """
    if guidance not in ("learned", "oracle"):
        raise ValueError(f"unknown guidance {guidance!r}")
    generator = generator or run_ga
    criteria = criteria_of(task)
    kinds = task.kinds
    traces = []
    for rep, rep_ss in enumerate(np.random.SeedSequence(config.master_seed).spawn(config.repeats)):
        pool_ss, *cycle_ss = rep_ss.spawn(config.cycles + 1)
        rng = np.random.default_rng(pool_ss)
        pool = rng.random((config.seed_pool, task.d))
        pool_assays = task.assays(pool)
        pool_best = float(task.evaluate(pool).max())
        seeds = pool
        for it, ss in enumerate(cycle_ss, start=1):
            train_ss, ga_ss, sel_ss = ss.spawn(3)
            n_pairs, untrained = 0, False
            if guidance == "oracle":
                fitness = task.evaluate
            else:
                table, pairs = training_pairs(pool_assays, criteria, config.dominance)
                n_pairs = len(pairs)
                train_cfg = replace(config.train, seed=_int_seed(train_ss))
                if pairs:
                    model, _ = fit_reward(kinds, pairs, table, train_cfg, config.restarts, config.standardize)
                else:
                    model = init_model(kinds, train_cfg.seed, pool_assays if config.standardize else None)
                    untrained = True
                fitness = _reward_fitness(model, task)

            ga_cfg = replace(config.ga, seed=_int_seed(ga_ss))
            generated = generator(fitness, seeds, ga_cfg)
            if config.selection == "topk":
                chosen = select_top_k(generated.genomes, generated.fitness, config.keep_per_cycle)
            else:
                chosen = select_kmeans(generated.genomes, generated.fitness, config.keep_per_cycle, _int_seed(sel_ss))
            pool = np.concatenate([pool, chosen])
            pool_assays = np.concatenate([pool_assays, task.assays(chosen)])
            seeds = pool if config.seed_with == "pool" else chosen

            scores = task.evaluate(generated.genomes)
            pool_best = max(pool_best, float(task.evaluate(chosen).max()))
            traces.append(
                CycleTrace(
                    iteration=it,
                    mean_score=float(scores.mean()),
                    max_score=float(scores.max()),
                    pool_size=len(pool),
                    repeat_index=rep,
                    n_pairs=n_pairs,
                    untrained=untrained,
                    pool_best=pool_best,
                )
            )
    return traces


def _reward_fitness(model: RewardModel, task: SyntheticTask):
    def fitness(genomes):
        return model.score(task.assays(genomes))

    return fitness


TRACE_COLUMNS = ["repeat", "iteration", "mean_score", "max_score", "pool_size"]
AGGREGATE_COLUMNS = ["iteration", "mean_of_mean", "std_of_mean", "mean_of_max", "std_of_max"]


def write_traces(traces: Sequence[CycleTrace], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in traces:
            w.writerow([t.repeat_index, t.iteration, fmt(t.mean_score), fmt(t.max_score), t.pool_size])


def aggregate_traces(traces: Sequence[CycleTrace]) -> list[dict]:
    """Mean and population standard deviation across repeats per iteration."""
    by_it: dict[int, list[CycleTrace]] = {}
    for t in traces:
        by_it.setdefault(t.iteration, []).append(t)
    rows = []
    for it in sorted(by_it):
        means = np.array([t.mean_score for t in by_it[it]])
        maxes = np.array([t.max_score for t in by_it[it]])
        rows.append({
            "iteration": it,
            "mean_of_mean": float(means.mean()),
            "std_of_mean": float(means.std()),
            "mean_of_max": float(maxes.mean()),
            "std_of_max": float(maxes.std()),
        })
    return rows


def write_aggregate(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for r in rows:
            w.writerow([r["iteration"]] + [fmt(r[c]) for c in AGGREGATE_COLUMNS[1:]])
